#pragma once

// Linearized factor update: find the least-norm (dU, dV) minimizing
//   || X - U dV^T - dU V^T ||_Omega
// with a matrix-free LSQR iteration.
//
// Unknowns are flattened as [vec(dU); vec(dV)], both column-major.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>

#include "mmgn/objective.hpp"
#include "mmgn/obsdata.hpp"

namespace mmgn {

/// J(dU, dV)_{ij} = <U_i, dV_j> + <dU_i, V_j> for (i, j) in Omega.
/// Holds references; the anchor and the observations must outlive it.
class JacobianOperator {
 public:
  JacobianOperator(const FactorPair& anchor, const ObservationSet& obs) : anchor_(&anchor), obs_(&obs) {
    detail::check_dims(anchor, obs);
  }

  Eigen::Index rows() const { return static_cast<Eigen::Index>(obs_->size()); }
  Eigen::Index cols() const {
    return static_cast<Eigen::Index>(anchor_->rows() + anchor_->cols()) * anchor_->rank();
  }
  const FactorPair& anchor() const { return *anchor_; }
  const ObservationSet& observations() const { return *obs_; }

  Eigen::VectorXd apply(const Eigen::MatrixXd& dU, const Eigen::MatrixXd& dV) const {
    if (dU.rows() != anchor_->U.rows() || dU.cols() != anchor_->U.cols() ||
        dV.rows() != anchor_->V.rows() || dV.cols() != anchor_->V.cols()) {
      throw std::invalid_argument("jacobian apply: update shape differs from anchor factors");
    }
    Eigen::VectorXd out(rows());
    apply_into(dU.data(), dV.data(), out.data());
    return out;
  }

  std::pair<Eigen::MatrixXd, Eigen::MatrixXd> apply_adjoint(const Eigen::VectorXd& w) const {
    if (w.size() != rows()) throw std::invalid_argument("jacobian adjoint: length differs from |Omega|");
    Eigen::MatrixXd dU = Eigen::MatrixXd::Zero(anchor_->U.rows(), anchor_->U.cols());
    Eigen::MatrixXd dV = Eigen::MatrixXd::Zero(anchor_->V.rows(), anchor_->V.cols());
    adjoint_into(w.data(), dU.data(), dV.data());
    return {std::move(dU), std::move(dV)};
  }

  /// out = J x for flattened x.
  void apply_flat(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
    const Eigen::Index mr = anchor_->U.size();
    out.resize(rows());
    apply_into(x.data(), x.data() + mr, out.data());
  }

  /// out = J^T w, flattened.
  void adjoint_flat(const Eigen::VectorXd& w, Eigen::VectorXd& out) const {
    const Eigen::Index mr = anchor_->U.size();
    out.setZero(cols());
    adjoint_into(w.data(), out.data(), out.data() + mr);
  }

 private:
  void apply_into(const double* dU, const double* dV, double* out) const {
    const Eigen::MatrixXd& U = anchor_->U;
    const Eigen::MatrixXd& V = anchor_->V;
    const Eigen::Index m = U.rows();
    const Eigen::Index n = V.rows();
    const Eigen::Index r = U.cols();
    const double* u = U.data();
    const double* v = V.data();
    for (int j = 0; j < obs_->cols(); ++j) {
      for (std::size_t k = obs_->col_begin(j); k < obs_->col_end(j); ++k) {
        const Eigen::Index i = obs_->row(k);
        double s = 0.0;
        for (Eigen::Index c = 0; c < r; ++c) {
          s += u[i + c * m] * dV[j + c * n] + dU[i + c * m] * v[j + c * n];
        }
        out[k] = s;
      }
    }
  }

  void adjoint_into(const double* w, double* dU, double* dV) const {
    const Eigen::MatrixXd& U = anchor_->U;
    const Eigen::MatrixXd& V = anchor_->V;
    const Eigen::Index m = U.rows();
    const Eigen::Index n = V.rows();
    const Eigen::Index r = U.cols();
    const double* u = U.data();
    const double* v = V.data();
    for (int j = 0; j < obs_->cols(); ++j) {
      for (std::size_t k = obs_->col_begin(j); k < obs_->col_end(j); ++k) {
        const Eigen::Index i = obs_->row(k);
        const double wk = w[k];
        for (Eigen::Index c = 0; c < r; ++c) {
          dU[i + c * m] += wk * v[j + c * n];
          dV[j + c * n] += wk * u[i + c * m];
        }
      }
    }
  }

  const FactorPair* anchor_;
  const ObservationSet* obs_;
};

struct InnerSolverOptions {
  double tol = 1e-6;  // relative residual and normal-equation tolerance
  int max_iter = 0;   // 0 selects min(1000, 2 (m + n) r)
};

inline int default_inner_max_iter(const JacobianOperator& op) {
  return static_cast<int>(std::min<Eigen::Index>(1000, 2 * op.cols()));
}

struct StepResult {
  Eigen::MatrixXd delta_u;
  Eigen::MatrixXd delta_v;
  double residual_norm = 0.0;  // ||x - J(delta)||
  double normal_residual = 0.0;  // ||J^T (x - J(delta))||, recurrence estimate
  int inner_iterations = 0;
  bool converged = true;
};

/// LSQR started from zero. The iterates stay in range(J^T), so the limit is
/// the least-norm least-squares solution.
inline StepResult solve_min_norm(const JacobianOperator& op, const Eigen::VectorXd& x_values, double tol,
                                 int max_iter) {
  if (!(tol > 0.0)) throw std::invalid_argument("solve_min_norm: tol must be positive");
  if (x_values.size() != op.rows()) {
    throw std::invalid_argument("solve_min_norm: right-hand side length differs from |Omega|");
  }
  if (max_iter <= 0) max_iter = default_inner_max_iter(op);

  const Eigen::Index ncols = op.cols();
  StepResult res;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(ncols);
  auto finish = [&](const Eigen::VectorXd& sol) {
    const Eigen::Index mr = op.anchor().U.size();
    res.delta_u = Eigen::Map<const Eigen::MatrixXd>(sol.data(), op.anchor().U.rows(), op.anchor().U.cols());
    res.delta_v =
        Eigen::Map<const Eigen::MatrixXd>(sol.data() + mr, op.anchor().V.rows(), op.anchor().V.cols());
    return res;
  };

  Eigen::VectorXd u = x_values;
  double beta = u.norm();
  const double bnorm = beta;
  if (beta == 0.0) return finish(x);
  u /= beta;

  Eigen::VectorXd v;
  op.adjoint_flat(u, v);
  double alpha = v.norm();
  res.residual_norm = beta;
  if (alpha == 0.0) {
    res.normal_residual = 0.0;
    return finish(x);
  }
  v /= alpha;
  Eigen::VectorXd w = v;
  Eigen::VectorXd Av;
  Eigen::VectorXd Atu;

  double phibar = beta;
  double rhobar = alpha;
  double anorm2 = 0.0;
  res.converged = false;

  for (int itn = 1; itn <= max_iter; ++itn) {
    op.apply_flat(v, Av);
    u = Av - alpha * u;
    beta = u.norm();
    if (beta > 0.0) u /= beta;
    anorm2 += alpha * alpha + beta * beta;

    op.adjoint_flat(u, Atu);
    v = Atu - beta * v;
    alpha = v.norm();
    if (alpha > 0.0) v /= alpha;

    const double rho = std::hypot(rhobar, beta);
    const double c = rhobar / rho;
    const double s = beta / rho;
    const double theta = s * alpha;
    rhobar = -c * alpha;
    const double phi = c * phibar;
    phibar = s * phibar;

    x += (phi / rho) * w;
    w = v - (theta / rho) * w;

    res.inner_iterations = itn;
    res.residual_norm = phibar;
    res.normal_residual = alpha * std::abs(s * phi);

    const double anorm = std::sqrt(anorm2);
    const double xnorm = x.norm();
    const bool small_residual = phibar <= tol * bnorm + tol * anorm * xnorm;
    const bool small_normal = phibar == 0.0 || res.normal_residual <= tol * anorm * phibar;
    if (small_residual || small_normal || alpha == 0.0) {
      res.converged = true;
      break;
    }
  }
  return finish(x);
}

inline StepResult solve_min_norm(const JacobianOperator& op, const Eigen::VectorXd& x_values,
                                 const InnerSolverOptions& opts = {}) {
  return solve_min_norm(op, x_values, opts.tol, opts.max_iter);
}

}  // namespace mmgn
