#pragma once

// File formats.
//
//   triplet CSV   header "i,j,y" (optionally ",rating"), 1-based indices,
//                 y in {1, -1}
//   dense binary  "MMGNMAT1", uint64 m, uint64 n, m*n float64 column-major
//   factor binary "MMGNFAC1", uint64 m, uint64 n, uint64 r, then U and V,
//                 each float64 column-major
//
// Binary files are little-endian.

#include <Eigen/Core>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mmgn/metrics.hpp"
#include "mmgn/objective.hpp"
#include "mmgn/obsdata.hpp"
#include "mmgn/solver.hpp"

namespace mmgn::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::array<char, 8> dense_magic = {'M', 'M', 'G', 'N', 'M', 'A', 'T', '1'};
inline constexpr std::array<char, 8> factor_magic = {'M', 'M', 'G', 'N', 'F', 'A', 'C', '1'};

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p, bool binary = false) {
  std::ofstream out(p, binary ? std::ios::binary : std::ios::out);
  if (!out) throw std::runtime_error("cannot open '" + p.string() + "' for writing");
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& p, bool binary = false) {
  std::ifstream in(p, binary ? std::ios::binary : std::ios::in);
  if (!in) throw std::runtime_error("cannot open '" + p.string() + "' for reading");
  return in;
}

inline void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  if (!in) throw FormatError("truncated binary header");
  return v;
}

inline void write_doubles(std::ostream& out, const Eigen::MatrixXd& M) {
  out.write(reinterpret_cast<const char*>(M.data()), static_cast<std::streamsize>(M.size() * sizeof(double)));
}

inline void read_doubles(std::istream& in, Eigen::MatrixXd& M) {
  in.read(reinterpret_cast<char*>(M.data()), static_cast<std::streamsize>(M.size() * sizeof(double)));
  if (!in) throw FormatError("truncated binary payload");
}

inline void expect_magic(std::istream& in, const std::array<char, 8>& magic, std::string_view what) {
  std::array<char, 8> got{};
  in.read(got.data(), 8);
  if (!in || got != magic) throw FormatError("not a " + std::string(what) + " file (bad magic)");
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_on(std::string_view s, std::string_view delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(s.substr(start)));
      return out;
    }
    out.push_back(trim(s.substr(start, pos - start)));
    start = pos + delim.size();
  }
}

inline bool parse_int(std::string_view s, long long& v) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc{} && p == s.data() + s.size() && !s.empty();
}

inline bool parse_double(std::string_view s, double& v) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc{} && p == s.data() + s.size() && !s.empty();
}

}  // namespace detail

// ---- triplet CSV ---------------------------------------------------------

struct TripletFile {
  ObservationSet obs;
  std::vector<double> ratings;  // aligned with obs storage order; empty without a rating column
};

/// Writes `obs` as 1-based triplets in storage order; `ratings`, when given,
/// adds a fourth column.
inline void write_triplet_csv(const std::filesystem::path& path, const ObservationSet& obs,
                              const std::vector<double>& ratings = {}) {
  if (!ratings.empty() && ratings.size() != obs.size()) {
    throw std::invalid_argument("write_triplet_csv: ratings do not align with observations");
  }
  auto out = detail::open_out(path);
  out << (ratings.empty() ? "i,j,y\n" : "i,j,y,rating\n");
  out << std::setprecision(17);
  obs.for_each([&](std::size_t k, int i, int j, int y) {
    out << (i + 1) << ',' << (j + 1) << ',' << y;
    if (!ratings.empty()) out << ',' << ratings[k];
    out << '\n';
  });
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

/// Reads a triplet CSV. Dimensions default to the largest index seen.
inline TripletFile read_triplet_csv(const std::filesystem::path& path, std::optional<int> rows = {},
                                    std::optional<int> cols = {}) {
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty triplet file");
  const auto header = detail::split_on(detail::trim(line), ",");
  const bool with_rating = header.size() == 4 && header[3] == "rating";
  if (header.size() < 3 || header[0] != "i" || header[1] != "j" || header[2] != "y" ||
      (header.size() == 4 && !with_rating) || header.size() > 4) {
    throw FormatError(path.string() + ": expected header 'i,j,y' or 'i,j,y,rating'");
  }

  struct Row {
    Triplet t;
    double rating;
  };
  std::vector<Row> parsed;
  int max_i = 0, max_j = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_on(line, ",");
    long long i = 0, j = 0, y = 0;
    double rating = 0.0;
    const auto where = path.string() + ":" + std::to_string(lineno) + ": ";
    if (f.size() != header.size()) throw FormatError(where + "wrong number of fields");
    if (!detail::parse_int(f[0], i) || !detail::parse_int(f[1], j) || i < 1 || j < 1 ||
        i > std::numeric_limits<int>::max() || j > std::numeric_limits<int>::max()) {
      throw FormatError(where + "indices must be positive integers");
    }
    if (!detail::parse_int(f[2], y) || (y != 1 && y != -1)) throw FormatError(where + "y must be 1 or -1");
    if (with_rating && !detail::parse_double(f[3], rating)) throw FormatError(where + "bad rating");
    parsed.push_back({{static_cast<int>(i - 1), static_cast<int>(j - 1), static_cast<int>(y)}, rating});
    max_i = std::max(max_i, static_cast<int>(i));
    max_j = std::max(max_j, static_cast<int>(j));
  }
  const int m = rows.value_or(max_i);
  const int n = cols.value_or(max_j);
  if (m <= 0 || n <= 0) throw FormatError(path.string() + ": no observations and no dimensions given");

  std::vector<Triplet> trip;
  trip.reserve(parsed.size());
  for (const auto& r : parsed) trip.push_back(r.t);
  TripletFile out;
  out.obs = ObservationSet::from_triplets(m, n, std::move(trip));
  if (with_rating) {
    // Re-align ratings with the column-sorted storage order.
    std::vector<std::size_t> order(parsed.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const auto& ta = parsed[a].t;
      const auto& tb = parsed[b].t;
      return ta.j != tb.j ? ta.j < tb.j : ta.i < tb.i;
    });
    out.ratings.reserve(out.obs.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
      const auto& t = parsed[order[k]].t;
      if (k > 0 && parsed[order[k - 1]].t.i == t.i && parsed[order[k - 1]].t.j == t.j) continue;
      out.ratings.push_back(parsed[order[k]].rating);
    }
  }
  return out;
}

// ---- dense matrices --------------------------------------------------------

inline void write_dense_binary(const std::filesystem::path& path, const Eigen::MatrixXd& M) {
  auto out = detail::open_out(path, true);
  out.write(dense_magic.data(), 8);
  detail::write_u64(out, static_cast<std::uint64_t>(M.rows()));
  detail::write_u64(out, static_cast<std::uint64_t>(M.cols()));
  detail::write_doubles(out, M);
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline Eigen::MatrixXd read_dense_binary(const std::filesystem::path& path) {
  auto in = detail::open_in(path, true);
  detail::expect_magic(in, dense_magic, "dense matrix");
  const auto m = detail::read_u64(in);
  const auto n = detail::read_u64(in);
  if (m == 0 || n == 0 || m > (1ULL << 31) || n > (1ULL << 31)) throw FormatError("implausible dense header");
  Eigen::MatrixXd M(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  detail::read_doubles(in, M);
  return M;
}

inline void write_dense_csv(const std::filesystem::path& path, const Eigen::MatrixXd& M) {
  auto out = detail::open_out(path);
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) out << (j ? "," : "") << M(i, j);
    out << '\n';
  }
}

inline Eigen::MatrixXd read_dense_csv(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  std::vector<double> values;
  std::string line;
  Eigen::Index cols = -1, rows = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_on(line, ",");
    if (cols >= 0 && static_cast<Eigen::Index>(f.size()) != cols) {
      throw FormatError(path.string() + ":" + std::to_string(rows + 1) + ": ragged row");
    }
    cols = static_cast<Eigen::Index>(f.size());
    for (auto s : f) {
      double v;
      if (!detail::parse_double(s, v)) throw FormatError(path.string() + ": bad number '" + std::string(s) + "'");
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw FormatError(path.string() + ": empty matrix file");
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = values[static_cast<std::size_t>(i * cols + j)];
  return M;
}

/// Picks the reader from the file contents (binary magic or CSV).
inline Eigen::MatrixXd read_dense(const std::filesystem::path& path) {
  {
    auto in = detail::open_in(path, true);
    std::array<char, 8> head{};
    in.read(head.data(), 8);
    if (in && head == dense_magic) return read_dense_binary(path);
  }
  return read_dense_csv(path);
}

// ---- factors ---------------------------------------------------------------

inline void write_factors(const std::filesystem::path& path, const FactorPair& f) {
  auto out = detail::open_out(path, true);
  out.write(factor_magic.data(), 8);
  detail::write_u64(out, static_cast<std::uint64_t>(f.rows()));
  detail::write_u64(out, static_cast<std::uint64_t>(f.cols()));
  detail::write_u64(out, static_cast<std::uint64_t>(f.rank()));
  detail::write_doubles(out, f.U);
  detail::write_doubles(out, f.V);
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline FactorPair read_factors(const std::filesystem::path& path) {
  auto in = detail::open_in(path, true);
  detail::expect_magic(in, factor_magic, "factor");
  const auto m = detail::read_u64(in);
  const auto n = detail::read_u64(in);
  const auto r = detail::read_u64(in);
  if (m == 0 || n == 0 || r == 0 || m > (1ULL << 31) || n > (1ULL << 31) || r > std::min(m, n)) {
    throw FormatError("implausible factor header");
  }
  Eigen::MatrixXd U(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(r));
  Eigen::MatrixXd V(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(r));
  detail::read_doubles(in, U);
  detail::read_doubles(in, V);
  return {std::move(U), std::move(V)};
}

// ---- JSON ------------------------------------------------------------------

using json = nlohmann::json;

/// Non-finite numbers become null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline std::string format_bound(double v) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

inline json to_json(const GroupRow& g) {
  const char* close = std::isinf(g.value_hi) ? ")" : "]";
  return {{"value_range", "(" + format_bound(g.value_lo) + ", " + format_bound(g.value_hi) + close},
          {"probability_range", "(" + format_bound(g.prob_lo) + ", " + format_bound(g.prob_hi) + "]"},
          {"value_lo", number(g.value_lo)},
          {"value_hi", number(g.value_hi)},
          {"prob_lo", number(g.prob_lo)},
          {"prob_hi", number(g.prob_hi)},
          {"count", g.count},
          {"squared_error", number(g.squared_error)},
          {"truth_squared", number(g.truth_squared)},
          {"relative_error", number(g.relative_error)},
          {"hellinger", number(g.hellinger)}};
}

inline json to_json(const EvalReport& r) {
  json j = {{"relative_error", number(r.relative_error)},
            {"hellinger", number(r.hellinger)},
            {"runtime_seconds", number(r.runtime_seconds)}};
  if (r.per_group) {
    j["per_group"] = json::array();
    for (const auto& g : *r.per_group) j["per_group"].push_back(to_json(g));
  }
  return j;
}

inline json to_json(const SignAccuracy& a) {
  json j = {{"sign_accuracy", a.overall}, {"heldout_count", a.count}};
  if (!a.by_rating.empty()) {
    json per = json::object();
    for (const auto& [rating, acc] : a.by_rating) {
      std::ostringstream key;
      key << rating;
      per[key.str()] = {{"accuracy", acc.accuracy}, {"count", acc.count}};
    }
    j["per_rating"] = per;
  }
  return j;
}

inline json to_json(const SolveReport& r) {
  return {{"rank", r.factors.rank()},
          {"rows", r.factors.rows()},
          {"cols", r.factors.cols()},
          {"stop_reason", std::string(to_string(r.stop_reason))},
          {"outer_iterations", r.outer_iterations},
          {"final_rel_change", number(r.final_rel_change)},
          {"ll_trace", r.ll_trace},
          {"step_sizes", r.step_sizes},
          {"inner_iterations", r.inner_iterations},
          {"backtracks", r.backtracks}};
}

inline json to_json(const RankSelection& s) {
  json scores = json::array();
  for (const auto& sc : s.scores) scores.push_back({{"rank", sc.rank}, {"validation_ll", number(sc.validation_ll)}});
  return {{"chosen_rank", s.chosen_rank}, {"per_rank_validation_ll", scores}};
}

inline json to_json(const SolverConfig& c) {
  return {{"rank", c.rank},
          {"tol", c.tol},
          {"max_outer_iter", c.max_outer_iter},
          {"armijo", {{"c1", c.armijo.c1}, {"shrink", c.armijo.shrink}, {"max_backtracks", c.armijo.max_backtracks}}},
          {"inner", {{"tol", c.inner.tol}, {"max_iter", c.inner.max_iter}}},
          {"init", std::string(to_string(c.init))},
          {"seed", c.seed}};
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline json read_json(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace mmgn::io
