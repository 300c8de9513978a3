#pragma once

// Observed index set with +1/-1 labels, stored in compressed column order.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mmgn/random.hpp"

namespace mmgn {

struct Triplet {
  int i = 0;
  int j = 0;
  int y = 1;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// Immutable sparse observation set. Entries are ordered by column, then by
/// row; entry k has row row(k), label label(k), and column j with
/// col_begin(j) <= k < col_end(j).
class ObservationSet {
 public:
  ObservationSet() = default;

  static ObservationSet from_triplets(int m, int n, std::vector<Triplet> triplets) {
    if (m <= 0 || n <= 0) throw std::invalid_argument("observation set: dimensions must be positive");
    for (const auto& t : triplets) {
      if (t.i < 0 || t.i >= m || t.j < 0 || t.j >= n) {
        throw std::out_of_range("observation set: index (" + std::to_string(t.i) + "," +
                                std::to_string(t.j) + ") out of range");
      }
      if (t.y != 1 && t.y != -1) {
        throw std::invalid_argument("observation set: label must be +1 or -1, got " +
                                    std::to_string(t.y));
      }
    }
    std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
      return a.j != b.j ? a.j < b.j : a.i < b.i;
    });

    ObservationSet out;
    out.m_ = m;
    out.n_ = n;
    out.col_ptr_.assign(static_cast<std::size_t>(n) + 1, 0);
    out.rows_.reserve(triplets.size());
    out.labels_.reserve(triplets.size());
    for (std::size_t k = 0; k < triplets.size(); ++k) {
      const auto& t = triplets[k];
      if (k > 0 && triplets[k - 1].i == t.i && triplets[k - 1].j == t.j) {
        if (triplets[k - 1].y != t.y) {
          throw std::invalid_argument("observation set: conflicting labels at (" +
                                      std::to_string(t.i) + "," + std::to_string(t.j) + ")");
        }
        continue;
      }
      out.rows_.push_back(t.i);
      out.labels_.push_back(static_cast<std::int8_t>(t.y));
      ++out.col_ptr_[static_cast<std::size_t>(t.j) + 1];
    }
    for (int j = 0; j < n; ++j) out.col_ptr_[j + 1] += out.col_ptr_[j];
    return out;
  }

  int rows() const { return m_; }
  int cols() const { return n_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }

  std::size_t col_begin(int j) const { return col_ptr_[j]; }
  std::size_t col_end(int j) const { return col_ptr_[j + 1]; }
  int row(std::size_t k) const { return rows_[k]; }
  int label(std::size_t k) const { return labels_[k]; }

  std::span<const int> row_indices() const { return rows_; }
  std::span<const std::int8_t> labels() const { return labels_; }
  std::span<const std::size_t> col_pointers() const { return col_ptr_; }

  /// Calls f(k, i, j, y) for every stored entry in storage order.
  template <class F>
  void for_each(F&& f) const {
    for (int j = 0; j < n_; ++j) {
      for (std::size_t k = col_ptr_[j]; k < col_ptr_[j + 1]; ++k) f(k, rows_[k], j, int{labels_[k]});
    }
  }

  std::vector<Triplet> to_triplets() const {
    std::vector<Triplet> out;
    out.reserve(size());
    for_each([&](std::size_t, int i, int j, int y) { out.push_back({i, j, y}); });
    return out;
  }

  /// Subset of entries by storage position; positions must be ascending.
  ObservationSet subset(std::span<const std::size_t> positions) const {
    ObservationSet out;
    out.m_ = m_;
    out.n_ = n_;
    out.col_ptr_.assign(static_cast<std::size_t>(n_) + 1, 0);
    out.rows_.reserve(positions.size());
    out.labels_.reserve(positions.size());
    int j = 0;
    for (std::size_t p : positions) {
      while (p >= col_ptr_[j + 1]) ++j;
      out.rows_.push_back(rows_[p]);
      out.labels_.push_back(labels_[p]);
      ++out.col_ptr_[static_cast<std::size_t>(j) + 1];
    }
    for (int c = 0; c < n_; ++c) out.col_ptr_[c + 1] += out.col_ptr_[c];
    return out;
  }

  /// Two indices and one label per entry.
  std::size_t storage_numbers() const { return 3 * size(); }

  friend bool operator==(const ObservationSet&, const ObservationSet&) = default;

 private:
  int m_ = 0;
  int n_ = 0;
  std::vector<std::size_t> col_ptr_;
  std::vector<int> rows_;
  std::vector<std::int8_t> labels_;
};

struct SplitPair {
  ObservationSet train;
  ObservationSet validation;
  // Storage positions in the source set, ascending.
  std::vector<std::size_t> train_positions;
  std::vector<std::size_t> validation_positions;
};

/// round-half-up of count * fraction.
inline std::size_t split_count(std::size_t count, double fraction) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(count) * fraction + 0.5));
}

/// Uniform partition without replacement; the validation part has
/// round(fraction * |obs|) entries. Positions are drawn from one seeded
/// permutation, validation taking its head when fraction <= 1/2 and its tail
/// otherwise, so split(f) and split(1 - f) with the same seed are mirror
/// images whenever the two counts add up to |obs|.
inline SplitPair split(const ObservationSet& obs, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("split: fraction must lie in (0, 1)");
  }
  if (obs.size() < 2) throw std::invalid_argument("split: need at least two observations");

  const std::size_t total = obs.size();
  const std::size_t wanted = split_count(total, fraction);
  std::vector<std::size_t> perm(total);
  for (std::size_t k = 0; k < total; ++k) perm[k] = k;
  Rng rng(seed);
  for (std::size_t k = total - 1; k > 0; --k) std::swap(perm[k], perm[rng.below(k + 1)]);

  const auto cut = perm.begin() + static_cast<std::ptrdiff_t>(fraction <= 0.5 ? wanted : total - wanted);
  SplitPair out;
  if (fraction <= 0.5) {
    out.validation_positions.assign(perm.begin(), cut);
    out.train_positions.assign(cut, perm.end());
  } else {
    out.train_positions.assign(perm.begin(), cut);
    out.validation_positions.assign(cut, perm.end());
  }
  std::sort(out.train_positions.begin(), out.train_positions.end());
  std::sort(out.validation_positions.begin(), out.validation_positions.end());
  out.train = obs.subset(out.train_positions);
  out.validation = obs.subset(out.validation_positions);
  return out;
}

}  // namespace mmgn
