#pragma once

// Shared fixtures and independent reference implementations for the tests.

#include <unistd.h>

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mmgn/linkfun.hpp"
#include "mmgn/objective.hpp"
#include "mmgn/obsdata.hpp"

namespace testing_support {

// std::mt19937_64 directly, not mmgn::Rng, so fixtures do not share the code under test.
struct Draw {
  explicit Draw(std::uint64_t seed) : gen(seed) {}
  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(gen); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); }
  int sign() { return integer(0, 1) ? 1 : -1; }
  Eigen::MatrixXd matrix(int rows, int cols, double scale = 1.0) {
    Eigen::MatrixXd M(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) M(i, j) = scale * normal();
    return M;
  }
  std::mt19937_64 gen;
};

struct Instance {
  mmgn::FactorPair f;
  mmgn::ObservationSet obs;
};

// Random factors and a random Omega of about `count` distinct cells.
inline Instance random_instance(Draw& d, int m, int n, int r, int count, double scale = 1.0) {
  Instance out;
  out.f = {d.matrix(m, r, scale), d.matrix(n, r, scale)};
  std::vector<mmgn::Triplet> t;
  for (int k = 0; k < count; ++k) t.push_back({d.integer(0, m - 1), d.integer(0, n - 1), 0});
  std::sort(t.begin(), t.end(), [](auto& a, auto& b) { return a.j != b.j ? a.j < b.j : a.i < b.i; });
  t.erase(std::unique(t.begin(), t.end(), [](auto& a, auto& b) { return a.i == b.i && a.j == b.j; }), t.end());
  for (auto& e : t) e.y = d.sign();
  out.obs = mmgn::ObservationSet::from_triplets(m, n, t);
  return out;
}

// Reference link functions in long double through the C library.
inline long double ref_cdf(const mmgn::LinkModel& m, long double x) {
  const long double z = x / m.sigma;
  if (m.kind == mmgn::LinkKind::probit) return 0.5L * std::erfc(-z / std::sqrt(2.0L));
  return 1.0L / (1.0L + std::exp(-z));
}

inline long double ref_pdf(const mmgn::LinkModel& m, long double x) {
  const long double z = x / m.sigma;
  if (m.kind == mmgn::LinkKind::probit) {
    return std::exp(-0.5L * z * z) / std::sqrt(2.0L * 3.141592653589793238462643383279502884L) / m.sigma;
  }
  const long double e = std::exp(-std::fabs(z));
  return e / ((1.0L + e) * (1.0L + e)) / m.sigma;
}

// Direct-sum negative log-likelihood in long double; valid when the
// arguments stay well inside the range where ref_cdf does not underflow.
inline long double ref_neg_log_lik(const mmgn::FactorPair& f, const mmgn::ObservationSet& obs,
                                   const mmgn::LinkModel& model) {
  long double acc = 0.0L;
  obs.for_each([&](std::size_t, int i, int j, int y) {
    long double th = 0.0L;
    for (int c = 0; c < f.rank(); ++c) th += static_cast<long double>(f.U(i, c)) * f.V(j, c);
    acc -= std::log(ref_cdf(model, y * th));
  });
  return acc;
}

// The Jacobian as an explicit |Omega| x (m+n)r matrix in the flattening
// order [vec(dU); vec(dV)].
inline Eigen::MatrixXd dense_jacobian(const mmgn::FactorPair& f, const mmgn::ObservationSet& obs) {
  const int m = f.rows(), n = f.cols(), r = f.rank();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(obs.size()), (m + n) * r);
  obs.for_each([&](std::size_t k, int i, int j, int) {
    for (int c = 0; c < r; ++c) {
      J(static_cast<Eigen::Index>(k), c * m + i) = f.V(j, c);
      J(static_cast<Eigen::Index>(k), m * r + c * n + j) = f.U(i, c);
    }
  });
  return J;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

struct TempDir {
  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("mmgn_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::filesystem::path operator/(const std::string& s) const { return path / s; }
  std::filesystem::path path;
};

}  // namespace testing_support
