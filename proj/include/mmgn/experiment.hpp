#pragma once

// Seeded simulation experiments: generate -> solve -> evaluate over a grid of
// one varied parameter, with replicates, medians and log-log slope fits.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "mmgn/io.hpp"
#include "mmgn/metrics.hpp"
#include "mmgn/random.hpp"
#include "mmgn/solver.hpp"
#include "mmgn/synth.hpp"
#include "mmgn/version.hpp"

namespace mmgn {

enum class GeneratorKind { nonspiky, spiky };

inline std::string_view to_string(GeneratorKind k) { return k == GeneratorKind::nonspiky ? "nonspiky" : "spiky"; }

inline GeneratorKind parse_generator_kind(std::string_view s) {
  if (s == "nonspiky" || s == "non-spiky") return GeneratorKind::nonspiky;
  if (s == "spiky") return GeneratorKind::spiky;
  throw std::invalid_argument("unknown generator kind '" + std::string(s) + "'");
}

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::nonspiky;
  int m = 100;
  int n = 100;
  int rank_star = 1;
  double nu = 10.0;  // spiky only
};

/// Sub-seeds of one instance, all derived from a single instance seed.
struct InstanceSeeds {
  std::uint64_t truth = 0;
  std::uint64_t omega = 0;
  std::uint64_t labels = 0;
  std::uint64_t solver = 0;
  std::uint64_t split = 0;

  static InstanceSeeds from(std::uint64_t seed) {
    return {derive_seed(seed, 1), derive_seed(seed, 2), derive_seed(seed, 3), derive_seed(seed, 4),
            derive_seed(seed, 5)};
  }
};

struct Instance {
  GroundTruth truth;
  ObservationSet obs;
};

inline GroundTruth generate_truth(const GeneratorSpec& g, std::uint64_t seed) {
  return g.kind == GeneratorKind::nonspiky ? gen_nonspiky(g.m, g.n, g.rank_star, seed)
                                           : gen_spiky(g.m, g.n, g.rank_star, g.nu, seed);
}

inline Instance generate_instance(const GeneratorSpec& g, const LinkModel& model, double rho, std::uint64_t seed) {
  const InstanceSeeds s = InstanceSeeds::from(seed);
  Instance inst;
  inst.truth = generate_truth(g, s.truth);
  inst.obs = sample_labels(inst.truth, sample_omega(g.m, g.n, rho, s.omega), model, s.labels);
  return inst;
}

struct ExperimentConfig {
  GeneratorSpec generator;
  LinkModel model;
  double rho = 0.8;
  SolverConfig solver;
  std::vector<int> candidate_ranks;  // empty: fit at solver.rank without validation
  double split_fraction = 0.2;
  std::string sweep_parameter;       // rho | sigma | n | rank_star | nu
  std::vector<double> sweep_values;
  int replicates = 20;
  std::uint64_t seed = 0;
  std::string output;

  static bool is_sweepable(std::string_view p) {
    return p == "rho" || p == "sigma" || p == "n" || p == "rank_star" || p == "nu";
  }

  /// The configuration with the swept parameter set to `value`.
  ExperimentConfig at(double value) const {
    ExperimentConfig c = *this;
    if (sweep_parameter == "rho") {
      c.rho = value;
    } else if (sweep_parameter == "sigma") {
      c.model = LinkModel(model.kind, value);
    } else if (sweep_parameter == "n") {
      c.generator.m = c.generator.n = static_cast<int>(std::lround(value));
    } else if (sweep_parameter == "rank_star") {
      c.generator.rank_star = static_cast<int>(std::lround(value));
    } else if (sweep_parameter == "nu") {
      c.generator.nu = value;
    }
    return c;
  }

  void validate() const {
    if (!is_sweepable(sweep_parameter)) {
      throw std::invalid_argument("experiment: sweep parameter must be one of rho, sigma, n, rank_star, nu");
    }
    if (sweep_values.empty()) throw std::invalid_argument("experiment: sweep values must be non-empty");
    if (replicates < 1) throw std::invalid_argument("experiment: replicates must be positive");
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
      throw std::invalid_argument("experiment: split_fraction must lie in (0, 1)");
    }
    solver.validate();
    for (double v : sweep_values) {
      const ExperimentConfig c = at(v);
      const auto& g = c.generator;
      if (g.m <= 0 || g.n <= 0) throw std::invalid_argument("experiment: dimensions must be positive");
      if (g.rank_star < 1 || g.rank_star > std::min(g.m, g.n)) {
        throw std::invalid_argument("experiment: rank_star out of range");
      }
      if (g.kind == GeneratorKind::spiky && !(g.nu > 2.0)) throw std::invalid_argument("experiment: nu must exceed 2");
      if (!(c.rho > 0.0 && c.rho <= 1.0)) throw std::invalid_argument("experiment: rho must lie in (0, 1]");
      for (int r : c.candidate_ranks) {
        if (r < 1 || r > std::min(g.m, g.n)) throw std::invalid_argument("experiment: candidate rank out of range");
      }
      if (c.candidate_ranks.empty() && c.solver.rank > std::min(g.m, g.n)) {
        throw std::invalid_argument("experiment: solver rank out of range");
      }
    }
  }
};

// ---- config JSON -------------------------------------------------------------

inline SolverConfig solver_config_from_json(const io::json& j, SolverConfig c = {}) {
  c.rank = j.value("rank", c.rank);
  c.tol = j.value("tol", c.tol);
  c.max_outer_iter = j.value("max_outer_iter", c.max_outer_iter);
  if (j.contains("init")) c.init = parse_init_kind(j.at("init").get<std::string>());
  c.seed = j.value("seed", c.seed);
  if (j.contains("armijo")) {
    const auto& a = j.at("armijo");
    c.armijo.c1 = a.value("c1", c.armijo.c1);
    c.armijo.shrink = a.value("shrink", c.armijo.shrink);
    c.armijo.max_backtracks = a.value("max_backtracks", c.armijo.max_backtracks);
  }
  if (j.contains("inner")) {
    const auto& in = j.at("inner");
    c.inner.tol = in.value("tol", c.inner.tol);
    c.inner.max_iter = in.value("max_iter", c.inner.max_iter);
  }
  return c;
}

inline ExperimentConfig experiment_from_json(const io::json& j) {
  ExperimentConfig c;
  try {
    if (j.contains("generator")) {
      const auto& g = j.at("generator");
      if (g.contains("kind")) c.generator.kind = parse_generator_kind(g.at("kind").get<std::string>());
      if (g.contains("n") && !g.contains("m")) c.generator.m = g.at("n").get<int>();
      c.generator.m = g.value("m", c.generator.m);
      c.generator.n = g.value("n", c.generator.n);
      c.generator.rank_star = g.value("rank_star", c.generator.rank_star);
      c.generator.nu = g.value("nu", c.generator.nu);
    }
    if (j.contains("model")) {
      const auto& m = j.at("model");
      c.model = LinkModel(parse_link_kind(m.value("kind", std::string("probit"))), m.value("sigma", 1.0));
    }
    c.rho = j.value("rho", c.rho);
    if (j.contains("solver")) c.solver = solver_config_from_json(j.at("solver"));
    if (j.contains("candidate_ranks")) c.candidate_ranks = j.at("candidate_ranks").get<std::vector<int>>();
    c.split_fraction = j.value("split_fraction", c.split_fraction);
    if (j.contains("sweep")) {
      c.sweep_parameter = j.at("sweep").value("parameter", std::string());
      c.sweep_values = j.at("sweep").value("values", std::vector<double>{});
    }
    c.replicates = j.value("replicates", c.replicates);
    c.seed = j.value("seed", c.seed);
    c.output = j.value("output", c.output);
  } catch (const io::json::exception& e) {
    throw std::invalid_argument(std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

inline io::json to_json(const ExperimentConfig& c) {
  return {{"generator",
           {{"kind", std::string(to_string(c.generator.kind))},
            {"m", c.generator.m},
            {"n", c.generator.n},
            {"rank_star", c.generator.rank_star},
            {"nu", c.generator.nu}}},
          {"model", {{"kind", std::string(to_string(c.model.kind))}, {"sigma", c.model.sigma}}},
          {"rho", c.rho},
          {"solver", io::to_json(c.solver)},
          {"candidate_ranks", c.candidate_ranks},
          {"split_fraction", c.split_fraction},
          {"sweep", {{"parameter", c.sweep_parameter}, {"values", c.sweep_values}}},
          {"replicates", c.replicates},
          {"seed", c.seed},
          {"output", c.output}};
}

// ---- runs --------------------------------------------------------------------

struct RunRecord {
  std::size_t grid_index = 0;
  double value = 0.0;
  int replicate = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::map<std::string, double> metrics;
  std::vector<double> ll_trace;
  std::vector<double> step_sizes;
};

inline std::uint64_t replicate_seed(std::uint64_t master, std::size_t grid_index, int replicate) {
  return derive_seed(master, grid_index, static_cast<std::uint64_t>(replicate));
}

/// Fits one instance: rank selection plus refit when candidates are given,
/// otherwise a single solve at config.solver.rank.
struct FitResult {
  SolveReport report;
  std::optional<RankSelection> selection;
  double seconds = 0.0;
};

inline FitResult fit(const ObservationSet& obs, const LinkModel& model, SolverConfig solver,
                     const std::vector<int>& candidates, double split_fraction, std::uint64_t split_seed) {
  FitResult out;
  const auto t0 = std::chrono::steady_clock::now();
  if (candidates.empty()) {
    out.report = solve(obs, model, solver);
  } else {
    RankSelectedFit f = fit_with_rank_selection(obs, model, candidates, split_fraction, split_seed, solver);
    out.report = std::move(f.report);
    out.selection = std::move(f.selection);
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

inline RunRecord run_replicate(const ExperimentConfig& config, std::size_t grid_index, int replicate) {
  RunRecord rec;
  rec.grid_index = grid_index;
  rec.value = config.sweep_values.at(grid_index);
  rec.replicate = replicate;
  rec.seed = replicate_seed(config.seed, grid_index, replicate);
  try {
    const ExperimentConfig c = config.at(rec.value);
    const Instance inst = generate_instance(c.generator, c.model, c.rho, rec.seed);
    const InstanceSeeds s = InstanceSeeds::from(rec.seed);
    SolverConfig solver = c.solver;
    solver.seed = s.solver;
    const FitResult f = fit(inst.obs, c.model, solver, c.candidate_ranks, c.split_fraction, s.split);

    std::size_t full = 0;
    for (double a : f.report.step_sizes) full += a == 1.0;
    rec.metrics["relative_error"] = relative_error(f.report.factors, inst.truth);
    rec.metrics["hellinger"] = hellinger_distance(f.report.factors, inst.truth.theta_star, c.model);
    rec.metrics["runtime_seconds"] = f.seconds;
    rec.metrics["spikiness"] = inst.truth.spikiness;
    rec.metrics["chosen_rank"] = f.report.factors.rank();
    rec.metrics["outer_iterations"] = f.report.outer_iterations;
    rec.metrics["full_steps"] = static_cast<double>(full);
    rec.ll_trace = f.report.ll_trace;
    rec.step_sizes = f.report.step_sizes;
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// Least-squares slope of log(y) against log(x) over the positive pairs.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int k = 0;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++k;
  }
  if (k < 2) return std::numeric_limits<double>::quiet_NaN();
  const double den = k * sxx - sx * sx;
  return den != 0.0 ? (k * sxy - sx * sy) / den : std::numeric_limits<double>::quiet_NaN();
}

struct MedianRow {
  std::size_t grid_index = 0;
  double value = 0.0;
  std::string metric;
  double median = 0.0;
  std::size_t replicates = 0;  // successful runs behind the median
};

struct SweepResult {
  ExperimentConfig config;
  std::vector<RunRecord> runs;  // grid-major, replicate-minor
  std::vector<MedianRow> medians;
  std::map<std::string, double> slopes;  // e.g. "relative_error" -> slope vs the swept parameter

  std::vector<double> medians_of(const std::string& metric) const {
    std::vector<double> out;
    for (const auto& m : medians)
      if (m.metric == metric) out.push_back(m.median);
    return out;
  }
};

inline const std::vector<std::string>& sweep_metric_names() {
  static const std::vector<std::string> names = {"relative_error",   "hellinger",        "runtime_seconds",
                                                 "spikiness",        "chosen_rank",      "outer_iterations",
                                                 "full_steps"};
  return names;
}

/// Grid points and replicates run on up to `jobs` threads; the reduction is
/// single-threaded and independent of scheduling.
inline SweepResult run_sweep(const ExperimentConfig& config, int jobs = 1) {
  config.validate();
  SweepResult res;
  res.config = config;
  const std::size_t grid = config.sweep_values.size();
  const std::size_t total = grid * static_cast<std::size_t>(config.replicates);
  res.runs.resize(total);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < total; t = next++) {
      const std::size_t g = t / static_cast<std::size_t>(config.replicates);
      const int r = static_cast<int>(t % static_cast<std::size_t>(config.replicates));
      res.runs[t] = run_replicate(config, g, r);
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(total)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (std::size_t g = 0; g < grid; ++g) {
    for (const auto& metric : sweep_metric_names()) {
      std::vector<double> vals;
      for (int r = 0; r < config.replicates; ++r) {
        const auto& run = res.runs[g * static_cast<std::size_t>(config.replicates) + static_cast<std::size_t>(r)];
        if (run.ok) vals.push_back(run.metrics.at(metric));
      }
      res.medians.push_back({g, config.sweep_values[g], metric, median(vals), vals.size()});
    }
  }
  if (config.sweep_parameter == "rho" || config.sweep_parameter == "n" || config.sweep_parameter == "rank_star") {
    for (const std::string metric : {"relative_error", "hellinger"}) {
      res.slopes[metric] = loglog_slope(config.sweep_values, res.medians_of(metric));
    }
  }
  return res;
}

inline void write_sweep(const SweepResult& res, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "results.csv");
    if (!out) throw std::runtime_error("cannot write results.csv in '" + dir.string() + "'");
    out << std::setprecision(17);
    out << "grid_index,parameter,value,replicate,seed,status,metric,metric_value,message\n";
    for (const auto& run : res.runs) {
      const std::string prefix = std::to_string(run.grid_index) + "," + res.config.sweep_parameter + ",";
      if (!run.ok) {
        std::string msg = run.error;
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        out << prefix << run.value << ',' << run.replicate << ',' << run.seed << ",failed,,," << msg << '\n';
        continue;
      }
      for (const auto& metric : sweep_metric_names()) {
        out << prefix << run.value << ',' << run.replicate << ',' << run.seed << ",ok," << metric << ','
            << run.metrics.at(metric) << ",\n";
      }
    }
  }
  {
    std::ofstream out(dir / "medians.csv");
    if (!out) throw std::runtime_error("cannot write medians.csv in '" + dir.string() + "'");
    out << std::setprecision(17);
    out << "grid_index,parameter,value,metric,median,replicates\n";
    for (const auto& m : res.medians) {
      out << m.grid_index << ',' << res.config.sweep_parameter << ',' << m.value << ',' << m.metric << ','
          << m.median << ',' << m.replicates << '\n';
    }
  }
  io::json slopes = io::json::object();
  for (const auto& [k, v] : res.slopes) slopes[k] = io::number(v);
  io::write_json(dir / "slopes.json", {{"parameter", res.config.sweep_parameter}, {"loglog_slopes", slopes}});
  io::write_json(dir / "manifest.json", {{"version", MMGN_VERSION},
                                          {"config", to_json(res.config)},
                                          {"seed_rule", "derive_seed(master, grid_index, replicate)"}});
}

// ---- ratings pipeline ----------------------------------------------------------

struct RankAccuracy {
  int rank = 0;
  SignAccuracy accuracy;
  double seconds = 0.0;
};

struct HeldoutRankSweep {
  std::vector<RankAccuracy> per_rank;
  std::size_t best = 0;  // index into per_rank with the highest overall accuracy
};

/// Fits each rank on `train` and scores sign accuracy on `test`; the best
/// rank is the one with the highest held-out accuracy (ties: smaller rank).
inline HeldoutRankSweep heldout_rank_sweep(const ObservationSet& train, const ObservationSet& test,
                                           const std::vector<double>& test_ratings, const LinkModel& model,
                                           const std::vector<int>& ranks, SolverConfig solver) {
  if (ranks.empty()) throw std::invalid_argument("heldout_rank_sweep: no ranks");
  HeldoutRankSweep out;
  for (int r : ranks) {
    solver.rank = r;
    const FitResult f = fit(train, model, solver, {}, 0.2, 0);
    out.per_rank.push_back({r, sign_accuracy(f.report.factors, test, test_ratings), f.seconds});
  }
  for (std::size_t k = 1; k < out.per_rank.size(); ++k) {
    const auto& a = out.per_rank[k];
    const auto& b = out.per_rank[out.best];
    if (a.accuracy.overall > b.accuracy.overall || (a.accuracy.overall == b.accuracy.overall && a.rank < b.rank)) {
      out.best = k;
    }
  }
  return out;
}

}  // namespace mmgn
