#pragma once

// Negative log-likelihood of 1-bit observations and its gradient, evaluated
// on the observed entries only. The m x n matrix U V^T is never formed.

#include <Eigen/Core>
#include <stdexcept>
#include <string>

#include "mmgn/linkfun.hpp"
#include "mmgn/obsdata.hpp"
#include "mmgn/summation.hpp"

namespace mmgn {

/// Rank-r factorization Theta = U V^T with U: m x r and V: n x r.
struct FactorPair {
  Eigen::MatrixXd U;
  Eigen::MatrixXd V;

  FactorPair() = default;
  FactorPair(Eigen::MatrixXd u, Eigen::MatrixXd v) : U(std::move(u)), V(std::move(v)) {
    if (U.cols() != V.cols()) throw std::invalid_argument("factor pair: U and V rank differ");
  }

  int rows() const { return static_cast<int>(U.rows()); }
  int cols() const { return static_cast<int>(V.rows()); }
  int rank() const { return static_cast<int>(U.cols()); }

  bool all_finite() const { return U.allFinite() && V.allFinite(); }

  Eigen::MatrixXd dense() const { return U * V.transpose(); }
};

namespace detail {

inline void check_dims(const FactorPair& f, const ObservationSet& obs) {
  if (f.U.cols() != f.V.cols()) throw std::invalid_argument("factor pair: U and V rank differ");
  if (f.rows() != obs.rows() || f.cols() != obs.cols()) {
    throw std::invalid_argument("dimension mismatch: factors are " + std::to_string(f.rows()) + "x" +
                                std::to_string(f.cols()) + ", observations are " +
                                std::to_string(obs.rows()) + "x" + std::to_string(obs.cols()));
  }
}

// <A.row(i), B.row(j)> on column-major storage.
inline double row_dot(const Eigen::MatrixXd& A, int i, const Eigen::MatrixXd& B, int j) {
  const Eigen::Index r = A.cols();
  const double* a = A.data() + i;
  const double* b = B.data() + j;
  const Eigen::Index sa = A.rows();
  const Eigen::Index sb = B.rows();
  double s = 0.0;
  for (Eigen::Index c = 0; c < r; ++c) s += a[c * sa] * b[c * sb];
  return s;
}

}  // namespace detail

/// theta_k = <U_{i_k}, V_{j_k}> for every observed entry, in storage order.
inline Eigen::VectorXd predict_on_omega(const FactorPair& f, const ObservationSet& obs) {
  detail::check_dims(f, obs);
  Eigen::VectorXd out(static_cast<Eigen::Index>(obs.size()));
  for (int j = 0; j < obs.cols(); ++j) {
    for (std::size_t k = obs.col_begin(j); k < obs.col_end(j); ++k) {
      out[static_cast<Eigen::Index>(k)] = detail::row_dot(f.U, obs.row(k), f.V, j);
    }
  }
  return out;
}

/// -sum log Phi(y * theta) over the observed entries, given predictions.
inline double neg_log_lik_from_theta(const Eigen::VectorXd& theta, const ObservationSet& obs,
                                     const LinkModel& model) {
  if (static_cast<std::size_t>(theta.size()) != obs.size()) {
    throw std::invalid_argument("neg_log_lik: prediction length differs from |Omega|");
  }
  CompensatedSum acc;
  const auto labels = obs.labels();
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    acc.add(-log_cdf(model, labels[static_cast<std::size_t>(k)] * theta[k]));
  }
  return acc.value();
}

inline double neg_log_lik(const FactorPair& f, const ObservationSet& obs, const LinkModel& model) {
  return neg_log_lik_from_theta(predict_on_omega(f, obs), obs, model);
}

/// Per-entry gradient -y phi(theta) / Phi(y theta); zero off Omega, so only
/// the observed entries are returned.
inline Eigen::VectorXd grad_from_theta(const Eigen::VectorXd& theta, const ObservationSet& obs,
                                       const LinkModel& model) {
  Eigen::VectorXd g(theta.size());
  const auto labels = obs.labels();
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const int y = labels[static_cast<std::size_t>(k)];
    g[k] = -y * dlog_cdf(model, y * theta[k]);
  }
  return g;
}

inline Eigen::VectorXd grad_neg_log_lik(const FactorPair& f, const ObservationSet& obs,
                                        const LinkModel& model) {
  return grad_from_theta(predict_on_omega(f, obs), obs, model);
}

}  // namespace mmgn
