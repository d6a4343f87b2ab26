#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "aloq/gp.hpp"
#include "aloq/quadrature.hpp"
#include "support.hpp"

using aloq::Dataset;
using aloq::EnvDistribution;
using aloq::FbarEvaluator;
using aloq::GpConfig;
using aloq::GpPosterior;
using aloq::HyperSample;
using aloq::Mat;
using aloq::Vec;

namespace {

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

struct Fixture {
  Dataset data;
  GpConfig cfg;
  std::vector<HyperSample> samples;
  EnvDistribution env;
  GpPosterior post;
};

Fixture make_fixture(std::uint64_t seed, int dpi, int dth, int n, int n_support,
                     bool warp, bool normalize, bool uniform_weights) {
  aloq::Rng rng(seed);
  Fixture f{Dataset(dpi, dth), GpConfig{}, {}, {}, GpPosterior{}};
  f.cfg.input_dim = dpi + dth;
  f.cfg.warp_enabled = warp;
  f.cfg.normalize_y = normalize;
  f.data = testsupport::random_dataset(rng, dpi, dth, n, 2.5, 0.5);
  for (int s = 0; s < 3; ++s) f.samples.push_back(testsupport::random_hypers(rng, f.cfg));
  f.env = testsupport::random_env(rng, dth, n_support, uniform_weights);
  f.post = GpPosterior::fit(f.data, f.samples, f.cfg);
  return f;
}

Vec random_pi(aloq::Rng& rng, int dpi) {
  Vec p(dpi);
  for (int d = 0; d < dpi; ++d) p[d] = aloq::uniform01(rng);
  return p;
}

}  // namespace

TEST_CASE("marginal moments match exhaustive weighted sums") {
  int id = 0;
  for (bool warp : {false, true})
    for (bool normalize : {false, true}) {
      Fixture f = make_fixture(100 + id++, 2, 2, 12, 12, warp, normalize, false);
      FbarEvaluator ev(f.post, f.env);
      aloq::Rng rng(999 + id);
      for (int t = 0; t < 5; ++t) {
        const Vec pi = random_pi(rng, 2);
        const auto got = ev.moments(pi);
        const auto want = testsupport::bq_oracle_dense(f.data, f.samples, f.cfg, f.env, pi);
        REQUIRE(rel_err(got.mean, want.mean) < 1e-10);
        REQUIRE(rel_err(got.variance, want.variance) < 1e-10);
        // per-sample moments agree with the single-sample oracle
        for (int s = 0; s < 3; ++s) {
          const auto gs = ev.moments_sample(pi, s);
          const auto ws = testsupport::bq_oracle_dense(f.data, {f.samples[s]}, f.cfg, f.env, pi);
          REQUIRE(rel_err(gs.mean, ws.mean) < 1e-10);
          REQUIRE(rel_err(gs.variance, ws.variance) < 1e-10);
        }
      }
    }
}

TEST_CASE("uniform weights reduce the marginal mean to a plain average") {
  Fixture f = make_fixture(7, 1, 1, 10, 8, true, false, true);
  FbarEvaluator ev(f.post, f.env);
  aloq::Rng rng(8);
  const Vec pi = random_pi(rng, 1);
  const Mat Q = testsupport::stacked_queries(pi, f.env);

  double mean_acc = 0.0, var_acc = 0.0, sq_acc = 0.0;
  for (int s = 0; s < 3; ++s) {
    const auto p = f.post.predict_sample(Q, s);
    const double mu = p.mean.mean();
    mean_acc += mu;
    sq_acc += mu * mu;
    var_acc += p.cov.sum() / (8.0 * 8.0);
  }
  const double mean = mean_acc / 3.0;
  const double var = var_acc / 3.0 + sq_acc / 3.0 - mean * mean;

  const auto got = ev.moments(pi);
  REQUIRE(got.mean == Catch::Approx(mean).margin(1e-12));
  REQUIRE(got.variance == Catch::Approx(var).margin(1e-12));
}

TEST_CASE("lookahead variance ignores the fabricated return") {
  for (bool normalize : {false, true}) {
    Fixture f = make_fixture(normalize ? 21 : 20, 2, 1, 9, 7, true, normalize, false);
    FbarEvaluator ev(f.post, f.env);
    aloq::Rng rng(22);
    for (int t = 0; t < 4; ++t) {
      const Vec pi = random_pi(rng, 2);
      const Vec th = f.env.support.row(t % 7).transpose();
      const double got = ev.lookahead(pi, th);
      const double w1 = testsupport::lookahead_oracle(f.post, f.env, pi, th, 123.456);
      const double w2 = testsupport::lookahead_oracle(f.post, f.env, pi, th, -55.0);
      REQUIRE(w1 == Catch::Approx(w2).margin(1e-12));  // value independence
      REQUIRE(rel_err(got, w1) < 1e-8);

      // observing anything can only shrink the marginal variance
      REQUIRE(got <= ev.moments(pi).variance + 1e-12);
    }
  }
}

TEST_CASE("environment selection minimizes the lookahead variance") {
  Fixture f = make_fixture(30, 1, 2, 11, 9, true, true, false);
  FbarEvaluator ev(f.post, f.env);
  aloq::Rng rng(31);
  for (int t = 0; t < 4; ++t) {
    const Vec pi = random_pi(rng, 1);
    int want = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < f.env.size(); ++i) {
      const double v = ev.lookahead(pi, f.env.support.row(i).transpose());
      if (v < best) {
        best = v;
        want = i;
      }
    }
    REQUIRE(ev.select_theta_index(pi) == want);
  }
}

TEST_CASE("environment selection breaks exact ties to the lowest index") {
  aloq::Rng rng(40);
  Fixture f = make_fixture(41, 1, 1, 8, 3, false, false, true);
  // identical support rows produce identical scores
  Mat support(4, 1);
  support << 0.37, 0.37, 0.37, 0.37;
  const EnvDistribution env = EnvDistribution::discrete(support, Vec::Constant(4, 0.25));
  FbarEvaluator ev(f.post, env);
  REQUIRE(ev.select_theta_index(random_pi(rng, 1)) == 0);
}

TEST_CASE("uncertainty selection maximizes the pointwise predictive variance") {
  Fixture f = make_fixture(50, 2, 1, 10, 8, true, false, false);
  FbarEvaluator ev(f.post, f.env);
  aloq::Rng rng(51);
  const Vec pi = random_pi(rng, 2);
  const Mat Q = testsupport::stacked_queries(pi, f.env);
  const Vec v = f.post.predict(Q).cov.diagonal();
  int want = 0;
  for (int i = 1; i < 8; ++i)
    if (v[i] > v[want]) want = i;
  REQUIRE(ev.uncertainty_theta_index(pi) == want);
}

TEST_CASE("a grown posterior invalidates its evaluator") {
  Fixture f = make_fixture(60, 1, 1, 6, 5, false, false, false);
  FbarEvaluator ev(f.post, f.env);
  REQUIRE_FALSE(ev.stale());
  Vec p(1), th(1);
  p << 0.5;
  th << 0.5;
  f.post.append(p, th, 1.0);
  REQUIRE(ev.stale());
  REQUIRE_THROWS_AS(ev.moments(p), std::logic_error);
  // rebuilding restores service
  FbarEvaluator fresh(f.post, f.env);
  REQUIRE_FALSE(fresh.stale());
  REQUIRE(std::isfinite(fresh.moments(p).mean));
}

TEST_CASE("discrete environment distributions validate their inputs") {
  Mat support(2, 1);
  support << 0.2, 0.8;
  REQUIRE_NOTHROW(EnvDistribution::discrete(support, Vec::Constant(2, 0.5)).validate());

  Vec bad_sum(2);
  bad_sum << 0.5, 0.6;
  REQUIRE_THROWS_AS(EnvDistribution::discrete(support, bad_sum), std::invalid_argument);

  Vec negative(2);
  negative << 1.5, -0.5;
  REQUIRE_THROWS_AS(EnvDistribution::discrete(support, negative), std::invalid_argument);

  Vec short_probs = Vec::Constant(1, 1.0);
  REQUIRE_THROWS_AS(EnvDistribution::discrete(support, short_probs), std::invalid_argument);

  Mat outside(2, 1);
  outside << 0.2, 1.3;
  REQUIRE_THROWS_AS(EnvDistribution::discrete(outside, Vec::Constant(2, 0.5)),
                    std::invalid_argument);

  REQUIRE_THROWS_AS(EnvDistribution::discrete(Mat(0, 1), Vec(0)), std::invalid_argument);
}

TEST_CASE("discrete sampling tracks the stated probabilities") {
  Mat support(3, 1);
  support << 0.1, 0.5, 0.9;
  Vec probs(3);
  probs << 0.2, 0.3, 0.5;
  const EnvDistribution env = EnvDistribution::discrete(support, probs);
  aloq::Rng rng(70);
  const int n = 20000;
  std::vector<int> counts(3, 0);
  for (int i = 0; i < n; ++i) ++counts[env.sample_index(rng)];
  for (int i = 0; i < 3; ++i) {
    const double freq = static_cast<double>(counts[i]) / n;
    const double se = std::sqrt(probs[i] * (1.0 - probs[i]) / n);
    REQUIRE(std::abs(freq - probs[i]) < 4.0 * se);
  }
}

TEST_CASE("monte carlo environments are uniform over fresh draws") {
  aloq::Rng rng(80);
  auto sampler = [](aloq::Rng& r) { return Vec::Constant(1, aloq::uniform01(r)); };
  const EnvDistribution env = EnvDistribution::continuous_mc(sampler, 150, 1, rng);
  REQUIRE(env.continuous);
  REQUIRE(env.size() == 150);
  REQUIRE((env.probs.array() == 1.0 / 150.0).all());
  env.validate();

  aloq::Rng rng2(81);
  REQUIRE_THROWS_AS(EnvDistribution::continuous_mc(sampler, 99, 1, rng2),
                    std::invalid_argument);
}
