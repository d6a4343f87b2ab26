#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include <nlohmann/json.hpp>

#include "aloq/loop.hpp"
#include "aloq/stats.hpp"
#include "aloq/tasks.hpp"

namespace aloq {

inline constexpr const char* kVersion = "1.0.0";

/// A variant x seed grid of runs on one task, plus every knob needed to
/// reproduce them.
struct ExperimentSpec {
  std::string task = "fsre2";
  std::vector<Variant> variants{Variant::kAloq};
  std::vector<std::uint64_t> seeds{0};
  int budget = 200;             // simulator calls per run
  std::uint64_t task_seed = 0;  // instance seed for tasks with generated internals
  RunConfig overrides;          // kappa/init_design/chain sizes; NaN/0 pick task defaults
  std::string out_dir = "results";
  int jobs = 1;

  void validate() const {
    if (variants.empty()) throw std::invalid_argument("ExperimentSpec: no variants");
    if (seeds.empty()) throw std::invalid_argument("ExperimentSpec: no seeds");
    if (budget < 2) throw std::invalid_argument("ExperimentSpec: budget must be >= 2");
    if (jobs < 1) throw std::invalid_argument("ExperimentSpec: jobs must be >= 1");
    if (out_dir.empty()) throw std::invalid_argument("ExperimentSpec: empty output dir");
    std::set<std::uint64_t> uniq(seeds.begin(), seeds.end());
    if (uniq.size() != seeds.size())
      throw std::invalid_argument("ExperimentSpec: duplicate seeds");
  }
};

namespace detail {

inline std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string ms3(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", x);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

inline std::string run_stem(const std::string& task, Variant variant, std::uint64_t seed) {
  return task + "_" + variant_name(variant) + "_s" + std::to_string(seed);
}

/// One row per simulator call: the recommendation after that call, its exact
/// expected return (natural task units, from the task's closed-form oracle),
/// and the wall time the call took. wall_ms is the only clock-dependent
/// column; everything else is a deterministic function of (task, variant,
/// seed, config).
inline void write_trace_csv(std::ostream& os, const Task& task, Variant variant,
                            std::uint64_t seed, const Trace& trace) {
  os << "task,variant,seed,call";
  for (int d = 0; d < task.policy_dim; ++d) os << ",incumbent" << d;
  os << ",fbar_oracle,wall_ms\n";
  for (const CallRecord& r : trace.calls) {
    os << task.name << ',' << variant_name(variant) << ',' << seed << ',' << r.call;
    const Vec nat = task.denormalize_policy(r.incumbent);
    for (int d = 0; d < task.policy_dim; ++d) os << ',' << detail::g17(nat[d]);
    os << ',' << detail::g17(task.exact_fbar(r.incumbent)) << ',' << detail::ms3(r.wall_ms)
       << '\n';
  }
}

/// Full constant block for one run: everything needed to re-execute it.
inline nlohmann::ordered_json run_header_json(const Task& task, const ExperimentSpec& spec,
                                              const RunConfig& cfg, const Trace& trace) {
  nlohmann::ordered_json j;
  j["task"] = task.name;
  j["variant"] = variant_name(cfg.variant);
  j["seed"] = cfg.seed;
  j["task_seed"] = spec.task_seed;
  j["library_version"] = kVersion;
  j["compiler"] = __VERSION__;
  j["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                       std::to_string(EIGEN_MAJOR_VERSION) + "." +
                       std::to_string(EIGEN_MINOR_VERSION);
  nlohmann::ordered_json lc;
  lc["total_calls"] = cfg.total_calls;
  lc["init_design"] = cfg.resolved_init_design(task);
  lc["calls_per_iteration"] =
      (cfg.variant == Variant::kOneStep || cfg.variant == Variant::kNaive) ? 1 : 2;
  lc["iterations"] = trace.iterations;
  lc["kappa"] = std::isnan(cfg.kappa) ? task.default_kappa : cfg.kappa;
  lc["direct_budget"] = cfg.direct_budget;
  lc["direct_tol"] = cfg.direct_tol;
  lc["hyper_samples"] = cfg.hyper_samples;
  lc["burn_in_first"] = cfg.burn_in_first;
  lc["burn_in_rewarm"] = cfg.burn_in_rewarm;
  lc["thinning"] = cfg.thinning;
  lc["full_refresh_rows"] = cfg.full_refresh_rows;
  lc["refresh_stride"] = cfg.refresh_stride;
  j["loop_config"] = std::move(lc);
  nlohmann::ordered_json tc;
  tc["policy_dim"] = task.policy_dim;
  tc["env_dim"] = task.env_dim;
  tc["policy_lo"] = std::vector<double>(task.pi_lo.data(), task.pi_lo.data() + task.policy_dim);
  tc["policy_hi"] = std::vector<double>(task.pi_hi.data(), task.pi_hi.data() + task.policy_dim);
  tc["sense"] = task.sense;
  tc["default_kappa"] = task.default_kappa;
  tc["warp_prior_mu"] = task.warp_prior_mu;
  tc["obs_noise_sd"] = task.obs_noise_sd;
  tc["env_support_points"] = task.env.support.rows();
  j["task_constants"] = std::move(tc);
  j["warnings"] = trace.warnings;
  j["columns"] = nlohmann::ordered_json::object(
      {{"incumbent", "recommended policy after this call, task-native units"},
       {"fbar_oracle", "exact expected return of the recommendation, task-native units"},
       {"wall_ms", "measured wall-clock time of this call (clock-dependent)"}});
  return j;
}

struct RunOutcome {
  int executed = 0;
  int skipped = 0;
  std::vector<std::string> csv_files;  // one per (variant, seed), in grid order
};

/// Executes the variant x seed grid, one CSV + one JSON header per run.
/// Idempotent: a run whose pair of files already exists is skipped, so
/// re-invoking the same spec leaves results byte-identical. `log`, if given,
/// receives one progress line per run.
inline RunOutcome run_experiment(const ExperimentSpec& spec,
                                 const std::function<void(const std::string&)>& log = {}) {
  namespace fs = std::filesystem;
  spec.validate();
  spec.overrides.validate();
  const Task task = make_task(spec.task, spec.task_seed);
  fs::create_directories(spec.out_dir);

  struct Job {
    Variant variant;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (Variant v : spec.variants)
    for (std::uint64_t s : spec.seeds) jobs.push_back({v, s});

  RunOutcome outcome;
  outcome.csv_files.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<int> executed{0}, skipped{0};
  std::mutex log_mutex;
  std::vector<std::exception_ptr> errors(jobs.size());

  const auto worker = [&]() {
    for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1)) {
      try {
        const Job& job = jobs[i];
        const std::string stem = run_stem(spec.task, job.variant, job.seed);
        const fs::path csv = fs::path(spec.out_dir) / (stem + ".csv");
        const fs::path json = fs::path(spec.out_dir) / (stem + ".json");
        outcome.csv_files[i] = csv.string();
        if (fs::exists(csv) && fs::exists(json)) {
          ++skipped;
          if (log) {
            std::lock_guard<std::mutex> lk(log_mutex);
            log("skip " + stem + " (results exist)");
          }
          continue;
        }
        RunConfig cfg = spec.overrides;
        cfg.total_calls = spec.budget;
        cfg.seed = job.seed;
        cfg.variant = job.variant;
        const auto t0 = std::chrono::steady_clock::now();
        const Trace trace = run_variant(task, cfg);
        const double sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        {
          std::ofstream os(csv.string() + ".tmp");
          if (!os) throw std::runtime_error("cannot write " + csv.string());
          write_trace_csv(os, task, job.variant, job.seed, trace);
        }
        {
          std::ofstream os(json.string() + ".tmp");
          if (!os) throw std::runtime_error("cannot write " + json.string());
          os << run_header_json(task, spec, cfg, trace).dump(2) << '\n';
        }
        fs::rename(csv.string() + ".tmp", csv);
        fs::rename(json.string() + ".tmp", json);
        ++executed;
        if (log) {
          std::lock_guard<std::mutex> lk(log_mutex);
          char buf[64];
          std::snprintf(buf, sizeof buf, " done in %.1fs", sec);
          log("run  " + stem + buf);
        }
      } catch (...) {
        errors[i] = std::current_exception();
        return;
      }
    }
  };

  const int n_threads = std::min<int>(spec.jobs, static_cast<int>(jobs.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  outcome.executed = executed;
  outcome.skipped = skipped;
  return outcome;
}

/// Parsed result CSV of one run.
struct RunCsv {
  std::string task, variant;
  std::uint64_t seed = 0;
  std::vector<int> call;
  std::vector<Vec> incumbent;  // task-native units
  std::vector<double> fbar_oracle, wall_ms;
};

inline RunCsv read_run_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty result file " + path);
  const auto header = detail::split_csv_line(line);
  if (header.size() < 6 || header[0] != "task" || header[1] != "variant" ||
      header[2] != "seed" || header[3] != "call" || header[header.size() - 2] != "fbar_oracle" ||
      header.back() != "wall_ms")
    throw std::runtime_error("not a result file: " + path);
  const int dpi = static_cast<int>(header.size()) - 6;
  RunCsv run;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != header.size()) throw std::runtime_error("ragged row in " + path);
    if (run.call.empty()) {
      run.task = f[0];
      run.variant = f[1];
      run.seed = std::stoull(f[2]);
    }
    run.call.push_back(std::stoi(f[3]));
    Vec inc(dpi);
    for (int d = 0; d < dpi; ++d) inc[d] = std::stod(f[4 + d]);
    run.incumbent.push_back(std::move(inc));
    run.fbar_oracle.push_back(std::stod(f[4 + dpi]));
    run.wall_ms.push_back(std::stod(f[5 + dpi]));
  }
  if (run.call.empty()) throw std::runtime_error("no rows in " + path);
  return run;
}

/// Minimal slice of a run's JSON header needed by the reporting code.
struct RunHeader {
  int init_design = 0;
  int calls_per_iteration = 1;
  int iterations = 0;
};

inline RunHeader read_run_header(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  nlohmann::json j;
  is >> j;
  RunHeader h;
  h.init_design = j.at("loop_config").at("init_design").get<int>();
  h.calls_per_iteration = j.at("loop_config").at("calls_per_iteration").get<int>();
  h.iterations = j.at("loop_config").at("iterations").get<int>();
  return h;
}

/// All result CSVs under dir, sorted by filename; files whose header does not
/// match the result-row format (e.g. the aggregation outputs) are skipped.
inline std::vector<RunCsv> load_results(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv")
      paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());
  std::vector<RunCsv> runs;
  for (const auto& p : paths) {
    try {
      runs.push_back(read_run_csv(p));
    } catch (const std::runtime_error&) {
      // not a result file (aggregation output, foreign CSV) — skip
    }
  }
  return runs;
}

struct CurvePoint {
  std::string task, variant;
  int call = 0, n_runs = 0;
  double q1 = 0, median = 0, q3 = 0;
};

struct FinalQuartiles {
  std::string task, variant;
  int n_runs = 0;
  double q1 = 0, median = 0, q3 = 0;
};

struct AggregateReport {
  std::vector<CurvePoint> curves;       // per (task, variant, call)
  std::vector<FinalQuartiles> finals;   // per (task, variant), at each run's last call
  std::vector<std::string> warnings;    // missing/mismatched runs (aggregation proceeds)
};

/// Medians and quartiles of the oracle learning curves across seeds. A pure
/// function of the result files.
inline AggregateReport aggregate(const std::vector<RunCsv>& runs) {
  AggregateReport rep;
  std::map<std::string, std::set<std::uint64_t>> seeds_by_task;
  std::map<std::pair<std::string, std::string>, std::vector<const RunCsv*>> groups;
  for (const RunCsv& r : runs) {
    seeds_by_task[r.task].insert(r.seed);
    groups[{r.task, r.variant}].push_back(&r);
  }
  for (const auto& [key, members] : groups) {
    std::set<std::uint64_t> have;
    for (const RunCsv* r : members) have.insert(r->seed);
    for (std::uint64_t s : seeds_by_task[key.first])
      if (!have.count(s))
        rep.warnings.push_back("missing run: " + key.first + " " + key.second + " seed " +
                               std::to_string(s));
    std::size_t max_calls = 0;
    for (const RunCsv* r : members) max_calls = std::max(max_calls, r->call.size());
    for (const RunCsv* r : members)
      if (r->call.size() != max_calls)
        rep.warnings.push_back("short run: " + key.first + " " + key.second + " seed " +
                               std::to_string(r->seed));
    for (std::size_t c = 0; c < max_calls; ++c) {
      std::vector<double> vals;
      for (const RunCsv* r : members)
        if (c < r->call.size()) vals.push_back(r->fbar_oracle[c]);
      CurvePoint pt;
      pt.task = key.first;
      pt.variant = key.second;
      pt.call = static_cast<int>(c) + 1;
      pt.n_runs = static_cast<int>(vals.size());
      pt.q1 = quantile(vals, 0.25);
      pt.median = quantile(vals, 0.5);
      pt.q3 = quantile(vals, 0.75);
      rep.curves.push_back(pt);
    }
    std::vector<double> finals;
    for (const RunCsv* r : members) finals.push_back(r->fbar_oracle.back());
    FinalQuartiles fq;
    fq.task = key.first;
    fq.variant = key.second;
    fq.n_runs = static_cast<int>(finals.size());
    fq.q1 = quantile(finals, 0.25);
    fq.median = quantile(finals, 0.5);
    fq.q3 = quantile(finals, 0.75);
    rep.finals.push_back(fq);
  }
  return rep;
}

inline AggregateReport aggregate_dir(const std::string& dir) {
  const auto runs = load_results(dir);
  if (runs.empty()) throw std::invalid_argument("no result files in " + dir);
  return aggregate(runs);
}

inline void write_aggregate_csvs(const std::string& dir, const AggregateReport& rep) {
  namespace fs = std::filesystem;
  {
    std::ofstream os((fs::path(dir) / "curves_summary.csv").string());
    os << "series_task,series_variant,call,n_runs,q1,median,q3\n";
    for (const CurvePoint& p : rep.curves)
      os << p.task << ',' << p.variant << ',' << p.call << ',' << p.n_runs << ','
         << detail::g17(p.q1) << ',' << detail::g17(p.median) << ',' << detail::g17(p.q3)
         << '\n';
  }
  {
    std::ofstream os((fs::path(dir) / "final_quartiles.csv").string());
    os << "series_task,series_variant,n_runs,q1,median,q3\n";
    for (const FinalQuartiles& f : rep.finals)
      os << f.task << ',' << f.variant << ',' << f.n_runs << ',' << detail::g17(f.q1) << ','
         << detail::g17(f.median) << ',' << detail::g17(f.q3) << '\n';
  }
}

struct RuntimeSeries {
  std::string task, variant;
  std::vector<int> call;
  std::vector<double> median_ms;  // across seeds, per call index
};

struct RuntimeCorrelation {
  std::string task, variant;
  std::uint64_t seed = 0;
  double spearman_iter = 0;  // per-iteration wall time vs iteration index
};

struct RuntimeReport {
  std::vector<RuntimeSeries> series;
  std::vector<RuntimeCorrelation> correlations;
  std::vector<std::string> warnings;
};

/// Per-iteration wall time of one run: calls during the initial design are
/// excluded, and each iteration's explore (+ intensify) calls are summed.
inline std::vector<double> per_iteration_wall(const RunCsv& run, const RunHeader& header) {
  std::vector<double> out;
  const std::size_t l0 = static_cast<std::size_t>(header.init_design);
  const std::size_t cpi = static_cast<std::size_t>(header.calls_per_iteration);
  for (std::size_t i = l0; i + cpi <= run.wall_ms.size(); i += cpi) {
    double sum = 0;
    for (std::size_t k = 0; k < cpi; ++k) sum += run.wall_ms[i + k];
    out.push_back(sum);
  }
  return out;
}

/// Median wall time per call index across seeds, plus the rank correlation of
/// each run's per-iteration wall time with the iteration index (the growth of
/// the cubic-cost surrogate refit with dataset size makes this strongly
/// positive for the model-based variants).
inline RuntimeReport runtime_report(const std::string& dir) {
  namespace fs = std::filesystem;
  const auto runs = load_results(dir);
  if (runs.empty()) throw std::invalid_argument("no result files in " + dir);
  RuntimeReport rep;
  std::map<std::pair<std::string, std::string>, std::vector<const RunCsv*>> groups;
  for (const RunCsv& r : runs) groups[{r.task, r.variant}].push_back(&r);
  for (const auto& [key, members] : groups) {
    RuntimeSeries series;
    series.task = key.first;
    series.variant = key.second;
    std::size_t max_calls = 0;
    for (const RunCsv* r : members) max_calls = std::max(max_calls, r->call.size());
    for (std::size_t c = 0; c < max_calls; ++c) {
      std::vector<double> vals;
      for (const RunCsv* r : members)
        if (c < r->call.size()) vals.push_back(r->wall_ms[c]);
      series.call.push_back(static_cast<int>(c) + 1);
      series.median_ms.push_back(median(vals));
    }
    rep.series.push_back(std::move(series));
    for (const RunCsv* r : members) {
      const fs::path json =
          fs::path(dir) / (run_stem(r->task, variant_from_name(r->variant), r->seed) + ".json");
      if (!fs::exists(json)) {
        rep.warnings.push_back("no header for " + json.stem().string() +
                               "; skipping its correlation");
        continue;
      }
      const RunHeader h = read_run_header(json.string());
      const std::vector<double> wall = per_iteration_wall(*r, h);
      if (wall.size() < 3) continue;
      std::vector<double> idx(wall.size());
      std::iota(idx.begin(), idx.end(), 1.0);
      RuntimeCorrelation corr;
      corr.task = r->task;
      corr.variant = r->variant;
      corr.seed = r->seed;
      corr.spearman_iter = spearman(idx, wall);
      rep.correlations.push_back(corr);
    }
  }
  return rep;
}

inline void write_runtime_csv(const std::string& dir, const RuntimeReport& rep) {
  namespace fs = std::filesystem;
  std::ofstream os((fs::path(dir) / "runtime_summary.csv").string());
  os << "series_task,series_variant,call,median_wall_ms\n";
  for (const RuntimeSeries& s : rep.series)
    for (std::size_t i = 0; i < s.call.size(); ++i)
      os << s.task << ',' << s.variant << ',' << s.call[i] << ','
         << detail::ms3(s.median_ms[i]) << '\n';
}

}  // namespace aloq
