#pragma once

// Synthetic low-rank ground truth and 1-bit observations drawn from it.

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mmgn/linkfun.hpp"
#include "mmgn/metrics.hpp"
#include "mmgn/obsdata.hpp"
#include "mmgn/random.hpp"
#include "mmgn/truth.hpp"

namespace mmgn {

namespace detail {

inline void check_truth_shape(int m, int n, int r_star) {
  if (m <= 0 || n <= 0) throw std::invalid_argument("generator: dimensions must be positive");
  if (r_star < 1 || r_star > std::min(m, n)) throw std::invalid_argument("generator: rank out of range");
}

template <class Draw>
Eigen::MatrixXd draw_matrix(Eigen::Index rows, Eigen::Index cols, Draw&& draw) {
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index k = 0; k < out.size(); ++k) out.data()[k] = draw();
  return out;
}

inline GroundTruth assemble(Eigen::MatrixXd U, Eigen::MatrixXd V) {
  GroundTruth t;
  t.rank_star = static_cast<int>(U.cols());
  t.theta_star = U * V.transpose();
  t.U_star = std::move(U);
  t.V_star = std::move(V);
  t.spikiness = spikiness(t.theta_star);
  return t;
}

}  // namespace detail

/// Uniform[-0.5, 0.5] factors, rescaled so that max |theta*_ij| = 1.
inline GroundTruth gen_nonspiky(int m, int n, int r_star, std::uint64_t seed) {
  detail::check_truth_shape(m, n, r_star);
  Rng rng(seed);
  Eigen::MatrixXd U = detail::draw_matrix(m, r_star, [&] { return rng.uniform(-0.5, 0.5); });
  Eigen::MatrixXd V = detail::draw_matrix(n, r_star, [&] { return rng.uniform(-0.5, 0.5); });
  GroundTruth t = detail::assemble(std::move(U), std::move(V));
  const double peak = t.theta_star.cwiseAbs().maxCoeff();
  t.theta_star /= peak;
  t.U_star /= peak;
  return t;
}

/// Student-t factors with `nu` degrees of freedom, not rescaled.
inline GroundTruth gen_spiky(int m, int n, int r_star, double nu, std::uint64_t seed) {
  detail::check_truth_shape(m, n, r_star);
  if (!(nu > 2.0)) throw std::invalid_argument("gen_spiky: degrees of freedom must exceed 2");
  Rng rng(seed);
  Eigen::MatrixXd U = detail::draw_matrix(m, r_star, [&] { return rng.student_t(nu); });
  Eigen::MatrixXd V = detail::draw_matrix(n, r_star, [&] { return rng.student_t(nu); });
  return detail::assemble(std::move(U), std::move(V));
}

struct Cell {
  int i = 0;
  int j = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Uniform sample of round(rho * m * n) distinct cells, in column-major order.
inline std::vector<Cell> sample_omega(int m, int n, double rho, std::uint64_t seed) {
  if (m <= 0 || n <= 0) throw std::invalid_argument("sample_omega: dimensions must be positive");
  if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("sample_omega: rho must lie in (0, 1]");
  const std::uint64_t total = static_cast<std::uint64_t>(m) * static_cast<std::uint64_t>(n);
  std::uint64_t wanted = split_count(total, rho);
  std::vector<Cell> out;
  out.reserve(wanted);
  Rng rng(seed);
  for (std::uint64_t t = 0; t < total && wanted > 0; ++t) {
    if (wanted == total - t || rng.below(total - t) < wanted) {
      out.push_back({static_cast<int>(t % m), static_cast<int>(t / m)});
      --wanted;
    }
  }
  return out;
}

/// y = +1 with probability Phi(theta*_ij), independently per cell.
inline ObservationSet sample_labels(const GroundTruth& truth, const std::vector<Cell>& omega,
                                    const LinkModel& model, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Triplet> trip;
  trip.reserve(omega.size());
  for (const Cell& c : omega) {
    if (c.i < 0 || c.i >= truth.rows() || c.j < 0 || c.j >= truth.cols()) {
      throw std::out_of_range("sample_labels: cell outside the truth matrix");
    }
    const double p = cdf(model, truth.theta_star(c.i, c.j));
    trip.push_back({c.i, c.j, rng.uniform() < p ? 1 : -1});
  }
  return ObservationSet::from_triplets(truth.rows(), truth.cols(), std::move(trip));
}

}  // namespace mmgn
