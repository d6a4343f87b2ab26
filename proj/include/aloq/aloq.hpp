#pragma once

// Umbrella header: the full library surface.

#include "aloq/acquisition.hpp"
#include "aloq/arm.hpp"
#include "aloq/common.hpp"
#include "aloq/direct.hpp"
#include "aloq/gp.hpp"
#include "aloq/harness.hpp"
#include "aloq/kernel.hpp"
#include "aloq/loop.hpp"
#include "aloq/quadrature.hpp"
#include "aloq/rng.hpp"
#include "aloq/slice.hpp"
#include "aloq/stats.hpp"
#include "aloq/tasks.hpp"
#include "aloq/warp.hpp"
