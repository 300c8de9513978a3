#pragma once

// mmgn command-line front end. run_cli is kept separate from main() so the
// test suite can drive the commands in-process.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmgn/mmgn.hpp"

namespace mmgn::cli {

namespace fs = std::filesystem;
using io::json;

/// Bad flag values; reported with exit code 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void usage_check(bool ok, const std::string& msg) {
  if (!ok) throw UsageError(msg);
}

/// "1-5" or "1,2,4".
inline std::vector<int> parse_rank_list(const std::string& s) {
  std::vector<int> out;
  const auto dash = s.find('-');
  long long a = 0, b = 0;
  if (dash != std::string::npos && dash > 0) {
    usage_check(io::detail::parse_int(io::detail::trim(std::string_view(s).substr(0, dash)), a) &&
                    io::detail::parse_int(io::detail::trim(std::string_view(s).substr(dash + 1)), b) && a >= 1 &&
                    b >= a,
                "invalid rank range '" + s + "'");
    for (long long r = a; r <= b; ++r) out.push_back(static_cast<int>(r));
    return out;
  }
  for (auto part : io::detail::split_on(s, ",")) {
    usage_check(io::detail::parse_int(io::detail::trim(part), a) && a >= 1, "invalid rank list '" + s + "'");
    out.push_back(static_cast<int>(a));
  }
  usage_check(!out.empty(), "empty rank list");
  return out;
}

inline std::vector<double> parse_edges(const std::string& s) {
  std::vector<double> out;
  for (auto part : io::detail::split_on(s, ",")) {
    double v = 0;
    usage_check(io::detail::parse_double(io::detail::trim(part), v), "invalid group edge list '" + s + "'");
    out.push_back(v);
  }
  for (std::size_t k = 1; k < out.size(); ++k) usage_check(out[k] > out[k - 1], "group edges must increase");
  return out;
}

struct ModelFlags {
  std::string kind = "probit";
  double sigma = 1.0;

  void add_to(CLI::App* app) {
    app->add_option("--model", kind, "link model")->check(CLI::IsMember({"probit", "logistic"}))->capture_default_str();
    app->add_option("--sigma", sigma, "noise scale")->capture_default_str();
  }
  LinkModel build() const {
    usage_check(sigma > 0.0 && std::isfinite(sigma), "--sigma must be positive");
    return LinkModel(parse_link_kind(kind), sigma);
  }
};

struct SolverFlags {
  std::optional<int> rank;
  std::string ranks;
  double tol = 1e-4;
  int max_iter = 1000;
  std::string init = "spectral";
  double split_fraction = 0.2;

  void add_to(CLI::App* app) {
    auto* r = app->add_option("--rank", rank, "fit at this rank");
    auto* rs = app->add_option("--ranks", ranks, "candidate ranks for validation, e.g. 1-5 or 1,2,4");
    r->excludes(rs);
    app->add_option("--tol", tol, "relative change stopping tolerance")->capture_default_str();
    app->add_option("--max-iter", max_iter, "outer iteration cap")->capture_default_str();
    app->add_option("--init", init, "initializer")->check(CLI::IsMember({"spectral", "random"}))->capture_default_str();
    app->add_option("--split-fraction", split_fraction, "validation fraction for rank selection")
        ->capture_default_str();
  }
  SolverConfig build(std::uint64_t seed) const {
    SolverConfig c;
    c.rank = rank.value_or(1);
    c.tol = tol;
    c.max_outer_iter = max_iter;
    c.init = parse_init_kind(init);
    c.seed = seed;
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    usage_check(split_fraction > 0.0 && split_fraction < 1.0, "--split-fraction must lie in (0, 1)");
    return c;
  }
  std::vector<int> candidates() const { return ranks.empty() ? std::vector<int>{} : parse_rank_list(ranks); }
};

// ---- generate --------------------------------------------------------------

struct GenerateArgs {
  std::string generator = "nonspiky";
  int m = 200, n = 200, rank_star = 1;
  double nu = 10.0;
  double rho = 0.8;
  std::uint64_t seed = 0;
  ModelFlags model;
  std::string replay;
  std::string output;
};

inline json generation_manifest(const GeneratorSpec& g, const LinkModel& model, double rho, std::uint64_t seed,
                                double spikiness, std::size_t observed) {
  const InstanceSeeds s = InstanceSeeds::from(seed);
  return {{"version", MMGN_VERSION},
          {"generator",
           {{"kind", std::string(to_string(g.kind))}, {"m", g.m}, {"n", g.n}, {"rank_star", g.rank_star}, {"nu", g.nu}}},
          {"model", {{"kind", std::string(to_string(model.kind))}, {"sigma", model.sigma}}},
          {"rho", rho},
          {"seed", seed},
          {"seeds", {{"truth", s.truth}, {"omega", s.omega}, {"labels", s.labels}}},
          {"spikiness", spikiness},
          {"observed", observed},
          {"files",
           {{"truth", "truth.bin"}, {"truth_factors", "truth_factors.bin"}, {"observations", "observations.csv"}}}};
}

inline int cmd_generate(GenerateArgs a, std::ostream& out) {
  if (!a.replay.empty()) {
    const json man = io::read_json(a.replay);
    try {
      const auto& g = man.at("generator");
      a.generator = g.at("kind").get<std::string>();
      a.m = g.at("m").get<int>();
      a.n = g.at("n").get<int>();
      a.rank_star = g.at("rank_star").get<int>();
      a.nu = g.at("nu").get<double>();
      a.model.kind = man.at("model").at("kind").get<std::string>();
      a.model.sigma = man.at("model").at("sigma").get<double>();
      a.rho = man.at("rho").get<double>();
      a.seed = man.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
      throw io::FormatError(a.replay + ": incomplete manifest (" + e.what() + ")");
    }
    if (man.value("version", std::string()) != MMGN_VERSION) {
      out << "warning: manifest written by version " << man.value("version", std::string("?")) << "\n";
    }
  }
  usage_check(!a.output.empty(), "--output is required");
  GeneratorSpec g;
  try {
    g.kind = parse_generator_kind(a.generator);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  g.m = a.m;
  g.n = a.n;
  g.rank_star = a.rank_star;
  g.nu = a.nu;
  usage_check(g.m > 0 && g.n > 0, "dimensions must be positive");
  usage_check(g.rank_star >= 1 && g.rank_star <= std::min(g.m, g.n), "--rank-star out of range");
  usage_check(g.kind != GeneratorKind::spiky || g.nu > 2.0, "--nu must exceed 2");
  usage_check(a.rho > 0.0 && a.rho <= 1.0, "--rho must lie in (0, 1]");
  const LinkModel model = a.model.build();

  const Instance inst = generate_instance(g, model, a.rho, a.seed);
  const fs::path dir(a.output);
  fs::create_directories(dir);
  io::write_dense_binary(dir / "truth.bin", inst.truth.theta_star);
  io::write_factors(dir / "truth_factors.bin", FactorPair{inst.truth.U_star, inst.truth.V_star});
  io::write_triplet_csv(dir / "observations.csv", inst.obs);
  io::write_json(dir / "manifest.json",
                 generation_manifest(g, model, a.rho, a.seed, inst.truth.spikiness, inst.obs.size()));
  out << "wrote " << inst.obs.size() << " observations of a " << g.m << "x" << g.n << " matrix to " << dir.string()
      << "\n";
  return 0;
}

// ---- solve -------------------------------------------------------------------

struct SolveArgs {
  std::string input;
  std::optional<int> rows, cols;
  ModelFlags model;
  SolverFlags solver;
  std::uint64_t seed = 0;
  std::string output;
};

inline int cmd_solve(const SolveArgs& a, std::ostream& out) {
  const LinkModel model = a.model.build();
  const SolverConfig cfg = a.solver.build(derive_seed(a.seed, 4));
  const std::vector<int> candidates = a.solver.candidates();
  const io::TripletFile file = io::read_triplet_csv(a.input, a.rows, a.cols);
  const int cap = std::min(file.obs.rows(), file.obs.cols());
  for (int r : candidates) usage_check(r <= cap, "candidate rank " + std::to_string(r) + " exceeds min(m, n)");
  usage_check(cfg.rank <= cap, "--rank exceeds min(m, n)");

  const FitResult fit_res = fit(file.obs, model, cfg, candidates, a.solver.split_fraction, derive_seed(a.seed, 5));
  const fs::path dir(a.output);
  fs::create_directories(dir);
  io::write_factors(dir / "factors.bin", fit_res.report.factors);
  json report = io::to_json(fit_res.report);
  report["runtime_seconds"] = fit_res.seconds;
  report["model"] = {{"kind", std::string(to_string(model.kind))}, {"sigma", model.sigma}};
  report["config"] = io::to_json(cfg);
  report["observed"] = file.obs.size();
  if (fit_res.selection) report["rank_selection"] = io::to_json(*fit_res.selection);
  io::write_json(dir / "report.json", report);
  out << "rank " << fit_res.report.factors.rank() << ", " << fit_res.report.outer_iterations << " iterations, "
      << to_string(fit_res.report.stop_reason) << ", " << fit_res.seconds << " s\n";
  return 0;
}

// ---- evaluate ----------------------------------------------------------------

struct EvaluateArgs {
  std::string factors;
  std::string truth;
  std::string heldout;
  std::string groups;
  ModelFlags model;
  std::string output;
};

inline int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  usage_check(a.truth.empty() != a.heldout.empty(), "give exactly one of --truth or --heldout");
  usage_check(a.groups.empty() || !a.truth.empty(), "--groups needs --truth");
  const LinkModel model = a.model.build();
  const std::vector<double> edges = a.groups.empty() ? std::vector<double>{} : parse_edges(a.groups);
  const FactorPair est = io::read_factors(a.factors);

  json result;
  if (!a.truth.empty()) {
    const Eigen::MatrixXd truth = io::read_dense(a.truth);
    if (truth.rows() != est.rows() || truth.cols() != est.cols()) {
      throw std::runtime_error("evaluate: factors are " + std::to_string(est.rows()) + "x" +
                               std::to_string(est.cols()) + " but truth is " + std::to_string(truth.rows()) + "x" +
                               std::to_string(truth.cols()));
    }
    EvalReport rep;
    rep.relative_error = relative_error(est, truth);
    rep.hellinger = hellinger_distance(est, truth, model);
    if (!a.groups.empty()) rep.per_group = group_breakdown(est, truth, model, edges);
    result = io::to_json(rep);
    result.erase("runtime_seconds");
  } else {
    const io::TripletFile held = io::read_triplet_csv(a.heldout, static_cast<int>(est.rows()),
                                                      static_cast<int>(est.cols()));
    result = io::to_json(sign_accuracy(est, held.obs, held.ratings));
  }
  if (a.output.empty()) {
    out << result.dump(2) << "\n";
  } else {
    io::write_json(a.output, result);
  }
  return 0;
}

// ---- sweep -------------------------------------------------------------------

struct SweepArgs {
  std::string config;
  int jobs = 1;
  std::string output;
};

inline int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  usage_check(a.jobs >= 1, "--jobs must be positive");
  ExperimentConfig cfg;
  try {
    cfg = experiment_from_json(io::read_json(a.config));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (!a.output.empty()) cfg.output = a.output;
  usage_check(!cfg.output.empty(), "no output directory (config 'output' or --output)");
  const SweepResult res = run_sweep(cfg, a.jobs);
  write_sweep(res, cfg.output);
  std::size_t failed = 0;
  for (const auto& r : res.runs) failed += !r.ok;
  out << res.runs.size() << " runs, " << failed << " failed, results in " << cfg.output << "\n";
  for (const auto& [metric, slope] : res.slopes) out << "log-log slope of " << metric << ": " << slope << "\n";
  return 0;
}

// ---- ingest ------------------------------------------------------------------

struct IngestArgs {
  std::string input;
  std::string delimiter = "::";
  std::optional<double> scale_lo, scale_hi;
  double test_fraction = 0.05;
  std::uint64_t seed = 0;
  std::string ranks;
  ModelFlags model;
  double tol = 1e-4;
  int max_iter = 1000;
  std::string output;
};

inline int cmd_ingest(const IngestArgs& a, std::ostream& out) {
  usage_check(a.test_fraction > 0.0 && a.test_fraction < 1.0, "--test-fraction must lie in (0, 1)");
  usage_check(a.scale_lo.has_value() == a.scale_hi.has_value(), "give both --scale-min and --scale-max");
  RatingsReadOptions opts;
  opts.delimiter = a.delimiter;
  if (a.scale_lo) opts.scale = std::pair{*a.scale_lo, *a.scale_hi};
  const std::vector<int> ranks = a.ranks.empty() ? std::vector<int>{} : parse_rank_list(a.ranks);
  const LinkModel model = a.model.build();

  const RatingsTable table = read_ratings(a.input, RatingsFormat::delimited, opts);
  for (const auto& w : table.warnings) out << "warning: " << w << "\n";
  const BinarizedRatings bin = binarize(table);
  const SplitPair parts = holdout_split(bin.obs, a.test_fraction, a.seed);
  const std::vector<double> train_ratings = gather(bin.ratings, parts.train_positions);
  const std::vector<double> test_ratings = gather(bin.ratings, parts.validation_positions);

  const fs::path dir(a.output);
  fs::create_directories(dir);
  io::write_triplet_csv(dir / "train.csv", parts.train, train_ratings);
  io::write_triplet_csv(dir / "test.csv", parts.validation, test_ratings);
  std::size_t positive = 0;
  bin.obs.for_each([&](std::size_t, int, int, int y) { positive += y > 0; });
  json summary = {{"ratings", table.rows.size()},
                  {"users", table.users.size()},
                  {"items", table.items.size()},
                  {"average", bin.average},
                  {"positive", positive},
                  {"train", parts.train.size()},
                  {"test", parts.validation.size()},
                  {"warnings", table.warnings.size()}};

  if (!ranks.empty()) {
    SolverConfig cfg;
    cfg.tol = a.tol;
    cfg.max_outer_iter = a.max_iter;
    cfg.seed = derive_seed(a.seed, 4);
    try {
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    const HeldoutRankSweep sw = heldout_rank_sweep(parts.train, parts.validation, test_ratings, model, ranks, cfg);
    json per = json::array();
    for (const auto& ra : sw.per_rank) {
      json row = io::to_json(ra.accuracy);
      row["rank"] = ra.rank;
      row["runtime_seconds"] = ra.seconds;
      per.push_back(row);
      out << "rank " << ra.rank << ": held-out sign accuracy " << ra.accuracy.overall << "\n";
    }
    summary["per_rank"] = per;
    summary["best_rank"] = sw.per_rank[sw.best].rank;
    summary["best_accuracy"] = sw.per_rank[sw.best].accuracy.overall;
  }
  io::write_json(dir / "summary.json", summary);
  out << table.rows.size() << " ratings, " << table.users.size() << " users, " << table.items.size()
      << " items; average " << bin.average << "\n";
  return 0;
}

// ---- entry -------------------------------------------------------------------

/// Exit codes: 0 success, 2 usage error, 1 runtime error.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"1-bit matrix completion by majorization-minimization and Gauss-Newton steps", "mmgn"};
  app.set_version_flag("--version", MMGN_VERSION);
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "simulate a ground truth and binary observations");
  g->add_option("--generator", gen.generator, "nonspiky or spiky")->capture_default_str();
  g->add_option("--m", gen.m, "rows")->capture_default_str();
  g->add_option("--n", gen.n, "columns")->capture_default_str();
  g->add_option("--rank-star", gen.rank_star, "true rank")->capture_default_str();
  g->add_option("--nu", gen.nu, "Student-t degrees of freedom (spiky)")->capture_default_str();
  g->add_option("--rho", gen.rho, "observation probability")->capture_default_str();
  g->add_option("--seed", gen.seed, "master seed")->capture_default_str();
  gen.model.add_to(g);
  g->add_option("--replay", gen.replay, "regenerate from a manifest.json");
  g->add_option("--output", gen.output, "output directory");

  SolveArgs sol;
  auto* s = app.add_subcommand("solve", "fit factors to a triplet file");
  s->add_option("--input", sol.input, "observations CSV (i,j,y; 1-based)")->required();
  s->add_option("--rows", sol.rows, "row count (default: largest index)");
  s->add_option("--cols", sol.cols, "column count (default: largest index)");
  sol.model.add_to(s);
  sol.solver.add_to(s);
  s->add_option("--seed", sol.seed, "seed for initialization and validation split")->capture_default_str();
  s->add_option("--output", sol.output, "output directory")->required();

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "score factors against a truth matrix or held-out labels");
  e->add_option("--factors", ev.factors, "factors.bin")->required();
  e->add_option("--truth", ev.truth, "dense truth matrix (binary or CSV)");
  e->add_option("--heldout", ev.heldout, "held-out triplet CSV");
  e->add_option("--groups", ev.groups, "comma-separated value edges for a per-group breakdown");
  ev.model.add_to(e);
  e->add_option("--output", ev.output, "JSON output file (default: stdout)");

  SweepArgs sw;
  auto* w = app.add_subcommand("sweep", "run a seeded experiment grid");
  w->add_option("--config", sw.config, "experiment JSON")->required();
  w->add_option("--jobs", sw.jobs, "concurrent runs")->capture_default_str();
  w->add_option("--output", sw.output, "output directory (overrides the config)");

  IngestArgs in;
  auto* i = app.add_subcommand("ingest", "binarize and split a ratings file");
  i->add_option("--input", in.input, "ratings file (user, item, rating[, timestamp])")->required();
  i->add_option("--delimiter", in.delimiter, "field delimiter")->capture_default_str();
  i->add_option("--scale-min", in.scale_lo, "lowest valid rating");
  i->add_option("--scale-max", in.scale_hi, "highest valid rating");
  i->add_option("--test-fraction", in.test_fraction, "held-out fraction")->capture_default_str();
  i->add_option("--seed", in.seed, "split seed")->capture_default_str();
  i->add_option("--ranks", in.ranks, "fit these ranks and report held-out accuracy");
  in.model.add_to(i);
  i->add_option("--tol", in.tol, "relative change stopping tolerance")->capture_default_str();
  i->add_option("--max-iter", in.max_iter, "outer iteration cap")->capture_default_str();
  i->add_option("--output", in.output, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << MMGN_VERSION << "\n";
    return 0;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    return 2;
  }

  try {
    if (g->parsed()) return cmd_generate(gen, out);
    if (s->parsed()) return cmd_solve(sol, out);
    if (e->parsed()) return cmd_evaluate(ev, out);
    if (w->parsed()) return cmd_sweep(sw, out);
    if (i->parsed()) return cmd_ingest(in, out);
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace mmgn::cli
