#pragma once

// Ratings files -> binarized observation sets (above the global mean is +1).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mmgn/io.hpp"
#include "mmgn/obsdata.hpp"
#include "mmgn/summation.hpp"

namespace mmgn {

enum class RatingsFormat { delimited };

struct RatingRow {
  int user = 0;  // dense index
  int item = 0;  // dense index
  double rating = 0.0;
  std::optional<long long> timestamp;
};

/// Bijection between external positive ids and dense 0-based indices.
class IdDictionary {
 public:
  int intern(long long external) {
    auto [it, inserted] = index_.try_emplace(external, static_cast<int>(ids_.size()));
    if (inserted) ids_.push_back(external);
    return it->second;
  }
  std::optional<int> find(long long external) const {
    auto it = index_.find(external);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  long long external(int dense) const { return ids_.at(static_cast<std::size_t>(dense)); }
  int size() const { return static_cast<int>(ids_.size()); }

 private:
  std::unordered_map<long long, int> index_;
  std::vector<long long> ids_;
};

struct RatingsTable {
  std::vector<RatingRow> rows;
  IdDictionary users;
  IdDictionary items;
  std::vector<std::string> warnings;
};

struct RatingsReadOptions {
  std::string delimiter = "::";
  std::optional<std::pair<double, double>> scale;  // ratings outside trigger a warning
};

inline RatingsTable read_ratings(const std::filesystem::path& path, RatingsFormat = RatingsFormat::delimited,
                                 const RatingsReadOptions& opts = {}) {
  if (opts.delimiter.empty()) throw std::invalid_argument("read_ratings: empty delimiter");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");

  RatingsTable table;
  std::map<std::pair<int, int>, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (io::detail::trim(line).empty()) continue;
    const auto where = path.string() + ":" + std::to_string(lineno) + ": ";
    const auto f = io::detail::split_on(line, opts.delimiter);
    if (f.size() != 3 && f.size() != 4) throw io::FormatError(where + "expected user, item, rating[, timestamp]");
    long long user = 0, item = 0, ts = 0;
    double rating = 0.0;
    if (!io::detail::parse_int(f[0], user) || user < 1) throw io::FormatError(where + "bad user id");
    if (!io::detail::parse_int(f[1], item) || item < 1) throw io::FormatError(where + "bad item id");
    if (!io::detail::parse_double(f[2], rating) || !std::isfinite(rating)) throw io::FormatError(where + "bad rating");
    RatingRow row{table.users.intern(user), table.items.intern(item), rating, std::nullopt};
    if (f.size() == 4) {
      if (!io::detail::parse_int(f[3], ts)) throw io::FormatError(where + "bad timestamp");
      row.timestamp = ts;
    }
    if (opts.scale && (rating < opts.scale->first || rating > opts.scale->second)) {
      table.warnings.push_back(where + "rating outside the declared scale, kept");
    }
    auto [it, inserted] = seen.try_emplace({row.user, row.item}, table.rows.size());
    if (inserted) {
      table.rows.push_back(row);
    } else {
      table.warnings.push_back(where + "duplicate (user, item) pair, keeping the last rating");
      table.rows[it->second] = row;
    }
  }
  if (table.rows.empty()) throw io::FormatError(path.string() + ": no ratings");
  return table;
}

struct BinarizedRatings {
  ObservationSet obs;
  double average = 0.0;
  std::vector<double> ratings;  // original rating per entry, obs storage order
};

/// y = +1 where the rating is strictly above the global mean, else -1.
inline BinarizedRatings binarize(const RatingsTable& table) {
  if (table.rows.empty()) throw std::invalid_argument("binarize: empty table");
  CompensatedSum total;
  for (const auto& r : table.rows) total.add(r.rating);
  BinarizedRatings out;
  out.average = total.value() / static_cast<double>(table.rows.size());

  std::vector<std::pair<Triplet, double>> entries;
  entries.reserve(table.rows.size());
  for (const auto& r : table.rows) {
    entries.push_back({{r.user, r.item, r.rating > out.average ? 1 : -1}, r.rating});
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.first.j != b.first.j ? a.first.j < b.first.j : a.first.i < b.first.i;
  });
  std::vector<Triplet> trip;
  trip.reserve(entries.size());
  out.ratings.reserve(entries.size());
  for (const auto& [t, rating] : entries) {
    trip.push_back(t);
    out.ratings.push_back(rating);
  }
  out.obs = ObservationSet::from_triplets(table.users.size(), table.items.size(), std::move(trip));
  return out;
}

/// Uniform train/test split; `validation` is the test part.
inline SplitPair holdout_split(const ObservationSet& obs, double test_fraction, std::uint64_t seed) {
  return split(obs, test_fraction, seed);
}

inline std::vector<double> gather(const std::vector<double>& values, const std::vector<std::size_t>& positions) {
  std::vector<double> out;
  out.reserve(positions.size());
  for (std::size_t p : positions) out.push_back(values.at(p));
  return out;
}

}  // namespace mmgn
