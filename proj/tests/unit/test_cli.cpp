#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "test_support.hpp"

using testing_support::TempDir;
namespace io = mmgn::io;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "mmgn");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  Outcome o;
  o.code = mmgn::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// generate a small instance into dir/gen
void generate(const TempDir& dir, const std::string& extra_m = "60") {
  const auto o = run({"generate", "--m", extra_m, "--n", "50", "--rho", "0.8", "--sigma", "1", "--seed", "3",
                      "--output", (dir / "gen").string()});
  ASSERT_EQ(o.code, 0) << o.err;
}

}  // namespace

TEST(Cli, GenerateWritesArtifacts) {
  TempDir dir;
  generate(dir);
  for (const char* f : {"truth.bin", "truth_factors.bin", "observations.csv", "manifest.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "gen" / f)) << f;
  }
  const auto man = io::read_json(dir / "gen" / "manifest.json");
  EXPECT_EQ(man["seed"], 3);
  EXPECT_EQ(man["observed"], 2400);
  EXPECT_EQ(io::read_triplet_csv(dir / "gen" / "observations.csv").obs.size(), 2400u);
}

TEST(Cli, ReplayIsByteIdentical) {
  TempDir dir;
  const auto o = run({"generate", "--generator", "spiky", "--nu", "4", "--m", "40", "--n", "30", "--rank-star", "2",
                      "--rho", "0.5", "--model", "logistic", "--sigma", "0.7", "--seed", "21", "--output",
                      (dir / "a").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto man = io::read_json(dir / "a" / "manifest.json");
  EXPECT_EQ(man["generator"]["nu"].get<double>(), 4.0);
  EXPECT_GT(man["spikiness"].get<double>(), 1.0);
  const auto r = run({"generate", "--replay", (dir / "a" / "manifest.json").string(), "--output", (dir / "b").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"truth.bin", "truth_factors.bin", "observations.csv", "manifest.json"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
}

TEST(Cli, UsageErrorsExitTwo) {
  TempDir dir;
  const std::string o = (dir / "x").string();
  EXPECT_EQ(run({"generate", "--rho", "1.5", "--output", o}).code, 2);
  EXPECT_EQ(run({"generate", "--generator", "spiky", "--nu", "2", "--output", o}).code, 2);
  EXPECT_EQ(run({"generate", "--model", "cauchy", "--output", o}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"solve", "--input", o, "--rank", "2", "--ranks", "1-3", "--output", o}).code, 2);
  EXPECT_EQ(run({"evaluate", "--factors", o}).code, 2);
  const auto bad = run({"generate", "--rho", "1.5", "--output", o});
  EXPECT_NE(bad.err.find("rho"), std::string::npos);
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"--version"}).code, 0);
}

TEST(Cli, SolveFixedRank) {
  TempDir dir;
  generate(dir);
  const auto o = run({"solve", "--input", (dir / "gen" / "observations.csv").string(), "--rank", "1", "--output",
                      (dir / "fit").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto rep = io::read_json(dir / "fit" / "report.json");
  EXPECT_FALSE(rep.contains("rank_selection"));
  EXPECT_EQ(rep["rank"], 1);
  EXPECT_EQ(rep["config"]["tol"].get<double>(), 1e-4);
  EXPECT_EQ(rep["config"]["max_outer_iter"], 1000);
  EXPECT_EQ(rep["observed"], 2400);
  const auto trace = rep["ll_trace"].get<std::vector<double>>();
  for (std::size_t k = 1; k < trace.size(); ++k) EXPECT_LE(trace[k], trace[k - 1] + 1e-12 * (1 + std::abs(trace[k])));
  EXPECT_EQ(io::read_factors(dir / "fit" / "factors.bin").rank(), 1);
}

TEST(Cli, SolveWithRankSelection) {
  TempDir dir;
  generate(dir);
  const auto o = run({"solve", "--input", (dir / "gen" / "observations.csv").string(), "--ranks", "1-3", "--output",
                      (dir / "fit").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto rep = io::read_json(dir / "fit" / "report.json");
  ASSERT_TRUE(rep.contains("rank_selection"));
  EXPECT_EQ(rep["rank_selection"]["per_rank_validation_ll"].size(), 3u);
  EXPECT_EQ(rep["rank"], rep["rank_selection"]["chosen_rank"]);
}

TEST(Cli, SolveMissingInputIsRuntimeError) {
  TempDir dir;
  const auto o = run({"solve", "--input", (dir / "nope.csv").string(), "--rank", "1", "--output", (dir / "f").string()});
  EXPECT_EQ(o.code, 1);
  EXPECT_FALSE(o.err.empty());
}

TEST(Cli, EvaluateTruthAgainstItself) {
  TempDir dir;
  generate(dir);
  const auto o = run({"evaluate", "--factors", (dir / "gen" / "truth_factors.bin").string(), "--truth",
                      (dir / "gen" / "truth.bin").string(), "--groups", "-0.5,0.5"});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto j = io::json::parse(o.out);
  EXPECT_LE(j["relative_error"].get<double>(), 1e-28);
  EXPECT_LE(j["hellinger"].get<double>(), 1e-28);
  ASSERT_EQ(j["per_group"].size(), 3u);
  EXPECT_EQ(j["per_group"][0]["value_range"], "(-inf, -0.5]");
  EXPECT_TRUE(j["per_group"][1].contains("probability_range"));
  std::size_t total = 0;
  for (const auto& g : j["per_group"]) total += g["count"].get<std::size_t>();
  EXPECT_EQ(total, 3000u);
}

TEST(Cli, EvaluateDimensionMismatch) {
  TempDir dir;
  generate(dir);
  const auto other = run({"generate", "--m", "20", "--n", "20", "--output", (dir / "other").string()});
  ASSERT_EQ(other.code, 0);
  const auto o = run({"evaluate", "--factors", (dir / "gen" / "truth_factors.bin").string(), "--truth",
                      (dir / "other" / "truth.bin").string()});
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("60x50"), std::string::npos);
}

TEST(Cli, SweepWritesTables) {
  TempDir dir;
  {
    std::ofstream cfg(dir / "cfg.json");
    cfg << R"({"generator": {"n": 30}, "solver": {"rank": 1}, "sweep": {"parameter": "rho", "values": [0.5, 1.0]},
               "replicates": 2, "seed": 4})";
  }
  const auto o = run({"sweep", "--config", (dir / "cfg.json").string(), "--jobs", "2", "--output",
                      (dir / "sw").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  for (const char* f : {"results.csv", "medians.csv", "slopes.json", "manifest.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "sw" / f)) << f;
  }
  {
    std::ofstream cfg(dir / "bad.json");
    cfg << R"({"sweep": {"parameter": "rho", "values": [2.0]}})";
  }
  EXPECT_EQ(run({"sweep", "--config", (dir / "bad.json").string(), "--output", (dir / "x").string()}).code, 2);
}

TEST(Cli, IngestAndHeldoutEvaluation) {
  TempDir dir;
  {
    // rank-one preferences: user taste times item appeal, rounded onto 1..5
    std::ofstream out(dir / "ratings.dat");
    testing_support::Draw d(5);
    std::vector<double> u(80), v(60);
    for (auto& x : u) x = d.normal();
    for (auto& x : v) x = d.normal();
    for (int i = 0; i < 80; ++i)
      for (int j = 0; j < 60; ++j) {
        if (d.uniform() > 0.5) continue;
        const double s = u[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(j)] + 0.3 * d.normal();
        const int rating = std::clamp(static_cast<int>(std::lround(3 + 1.2 * s)), 1, 5);
        out << i + 1 << "::" << j + 1 << "::" << rating << "::0\n";
      }
  }
  const auto o = run({"ingest", "--input", (dir / "ratings.dat").string(), "--scale-min", "1", "--scale-max", "5",
                      "--ranks", "1-2", "--model", "logistic", "--seed", "9", "--output", (dir / "ml").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto s = io::read_json(dir / "ml" / "summary.json");
  EXPECT_EQ(s["train"].get<std::size_t>() + s["test"].get<std::size_t>(), s["ratings"].get<std::size_t>());
  EXPECT_EQ(s["per_rank"].size(), 2u);
  EXPECT_GT(s["best_accuracy"].get<double>(), 0.7);

  const auto fit = run({"solve", "--input", (dir / "ml" / "train.csv").string(), "--rows", "80", "--cols", "60",
                        "--model", "logistic", "--rank", "1", "--output", (dir / "fit").string()});
  ASSERT_EQ(fit.code, 0) << fit.err;
  const auto ev = run({"evaluate", "--factors", (dir / "fit" / "factors.bin").string(), "--heldout",
                       (dir / "ml" / "test.csv").string()});
  ASSERT_EQ(ev.code, 0) << ev.err;
  const auto j = io::json::parse(ev.out);
  EXPECT_EQ(j["heldout_count"], s["test"]);
  EXPECT_TRUE(j.contains("per_rating"));
  EXPECT_GT(j["sign_accuracy"].get<double>(), 0.7);
}
