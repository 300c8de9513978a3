#pragma once

// Majorization-minimization Gauss-Newton driver for rank-constrained 1-bit
// matrix completion, with validation-based rank selection.
//
// Each outer iteration majorizes the negative log-likelihood at the current
// factors, takes one least-norm Gauss-Newton step on the resulting
// least-squares problem, and accepts it (possibly shortened by Armijo
// backtracking) only if the likelihood does not increase.

#include <Eigen/Core>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mmgn/gnstep.hpp"
#include "mmgn/linkfun.hpp"
#include "mmgn/majorize.hpp"
#include "mmgn/objective.hpp"
#include "mmgn/obsdata.hpp"
#include "mmgn/random.hpp"

namespace mmgn {

enum class InitKind { spectral, random };

inline std::string_view to_string(InitKind k) { return k == InitKind::spectral ? "spectral" : "random"; }

inline InitKind parse_init_kind(std::string_view s) {
  if (s == "spectral") return InitKind::spectral;
  if (s == "random") return InitKind::random;
  throw std::invalid_argument("unknown init kind '" + std::string(s) + "'");
}

struct ArmijoOptions {
  double c1 = 1e-4;
  double shrink = 0.5;
  int max_backtracks = 20;
};

struct SolverConfig {
  int rank = 1;
  double tol = 1e-4;
  int max_outer_iter = 1000;
  ArmijoOptions armijo;
  InnerSolverOptions inner;
  InitKind init = InitKind::spectral;
  std::uint64_t seed = 0;

  void validate() const {
    if (rank < 1) throw std::invalid_argument("solver config: rank must be positive");
    if (!(tol > 0.0)) throw std::invalid_argument("solver config: tol must be positive");
    if (max_outer_iter < 1) throw std::invalid_argument("solver config: max_outer_iter must be positive");
    if (!(armijo.c1 > 0.0 && armijo.c1 < 1.0)) throw std::invalid_argument("solver config: c1 must lie in (0, 1)");
    if (!(armijo.shrink > 0.0 && armijo.shrink < 1.0)) {
      throw std::invalid_argument("solver config: shrink must lie in (0, 1)");
    }
    if (armijo.max_backtracks < 0) throw std::invalid_argument("solver config: max_backtracks must be >= 0");
    if (!(inner.tol > 0.0)) throw std::invalid_argument("solver config: inner tol must be positive");
  }
};

enum class StopReason { tol_met, max_iter, stalled };

inline std::string_view to_string(StopReason s) {
  switch (s) {
    case StopReason::tol_met: return "tol_met";
    case StopReason::max_iter: return "max_iter";
    case StopReason::stalled: return "stalled";
  }
  return "unknown";
}

struct SolveReport {
  FactorPair factors;
  std::vector<double> ll_trace;     // l at the initial point, then after every iteration
  std::vector<double> step_sizes;   // alpha_t per completed iteration
  std::vector<int> inner_iterations;
  std::vector<int> backtracks;
  int outer_iterations = 0;
  double final_rel_change = std::numeric_limits<double>::infinity();
  StopReason stop_reason = StopReason::max_iter;
};

namespace detail {

// Sparse fill-in matrix A with a_k = scale * y_k on Omega.
struct FillInOperator {
  const ObservationSet* obs;
  double scale;

  // out (m x b) = A X, X is n x b
  void times(const Eigen::MatrixXd& X, Eigen::MatrixXd& out) const {
    out.setZero(obs->rows(), X.cols());
    for (int j = 0; j < obs->cols(); ++j) {
      for (std::size_t k = obs->col_begin(j); k < obs->col_end(j); ++k) {
        out.row(obs->row(k)) += (scale * obs->label(k)) * X.row(j);
      }
    }
  }

  // out (n x b) = A^T Y, Y is m x b
  void transpose_times(const Eigen::MatrixXd& Y, Eigen::MatrixXd& out) const {
    out.setZero(obs->cols(), Y.cols());
    for (int j = 0; j < obs->cols(); ++j) {
      for (std::size_t k = obs->col_begin(j); k < obs->col_end(j); ++k) {
        out.row(j) += (scale * obs->label(k)) * Y.row(obs->row(k));
      }
    }
  }
};

inline Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& X) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
  return qr.householderQ() * Eigen::MatrixXd::Identity(X.rows(), X.cols());
}

struct TruncatedSvd {
  Eigen::MatrixXd left;
  Eigen::VectorXd values;
  Eigen::MatrixXd right;
};

// Top-r singular triplets by block subspace iteration with Rayleigh-Ritz
// extraction, stopped on the residual ||A v_k - s_k u_k|| <= tol * s_1.
inline TruncatedSvd truncated_svd(const FillInOperator& A, int r, std::uint64_t seed, double tol = 1e-12,
                                  int max_iter = 2000) {
  const int m = A.obs->rows();
  const int n = A.obs->cols();
  const int block = std::min(std::min(m, n), r + std::max(5, r));
  Rng rng(seed);
  Eigen::MatrixXd Qn(n, block);
  for (Eigen::Index k = 0; k < Qn.size(); ++k) Qn.data()[k] = rng.normal();
  Qn = orthonormalize(Qn);

  TruncatedSvd out;
  Eigen::MatrixXd Y, Z, AV;
  for (int it = 0; it < max_iter; ++it) {
    A.times(Qn, Y);
    const Eigen::MatrixXd Qm = orthonormalize(Y);
    A.transpose_times(Qm, Z);  // Z = A^T Qm, so Qm^T A = Z^T
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Z, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.values = svd.singularValues().head(r);
    out.right = svd.matrixU().leftCols(r);
    out.left = Qm * svd.matrixV().leftCols(r);

    A.times(out.right, AV);
    const double top = out.values.size() > 0 ? out.values[0] : 0.0;
    if (top == 0.0) break;
    double worst = 0.0;
    for (int k = 0; k < r; ++k) {
      worst = std::max(worst, (AV.col(k) - out.values[k] * out.left.col(k)).norm());
    }
    if (worst <= tol * top) break;
    Qn = orthonormalize(Z);
  }
  return out;
}

}  // namespace detail

/// Starting factors. Spectral: rank-r truncated SVD A_r S_r B_r^T of the
/// matrix holding y / rho_hat on Omega and 0 elsewhere, split as
/// (A_r S_r^{1/2}, B_r S_r^{1/2}). Random: N(0, 1) / sqrt(r) entries.
inline FactorPair initialize(const ObservationSet& obs, int r, InitKind kind, std::uint64_t seed) {
  if (r < 1 || r > std::min(obs.rows(), obs.cols())) {
    throw std::invalid_argument("initialize: rank " + std::to_string(r) + " out of range");
  }
  if (kind == InitKind::random) {
    Rng rng(seed);
    const double s = 1.0 / std::sqrt(static_cast<double>(r));
    Eigen::MatrixXd U(obs.rows(), r), V(obs.cols(), r);
    for (Eigen::Index k = 0; k < U.size(); ++k) U.data()[k] = s * rng.normal();
    for (Eigen::Index k = 0; k < V.size(); ++k) V.data()[k] = s * rng.normal();
    return {std::move(U), std::move(V)};
  }
  if (obs.empty()) throw std::invalid_argument("initialize: spectral start needs observations");
  const double rho_hat =
      static_cast<double>(obs.size()) / (static_cast<double>(obs.rows()) * static_cast<double>(obs.cols()));
  const detail::FillInOperator A{&obs, 1.0 / rho_hat};
  const detail::TruncatedSvd svd = detail::truncated_svd(A, r, seed);
  const Eigen::VectorXd root = svd.values.cwiseSqrt();
  return {svd.left * root.asDiagonal(), svd.right * root.asDiagonal()};
}

struct StepOutcome {
  FactorPair factors;
  Eigen::VectorXd theta;  // predictions of `factors` on Omega
  double alpha = 0.0;
  double ll = 0.0;
  double slope = 0.0;  // <grad l, J(delta)>_Omega
  int backtracks = 0;
  int inner_iterations = 0;
  bool inner_converged = true;
  bool stalled = false;
};

namespace detail {

inline StepOutcome mmgn_step_cached(const FactorPair& f, const Eigen::VectorXd& theta, double ll,
                                    const ObservationSet& obs, const LinkModel& model,
                                    const SolverConfig& config) {
  const MMTarget target = build_target_from_theta(theta, obs, model);
  const JacobianOperator op(f, obs);
  const StepResult step = solve_min_norm(op, target.x_values, config.inner);

  const Eigen::VectorXd direction = op.apply(step.delta_u, step.delta_v);
  // grad l = -L X on Omega
  const double slope = -target.lipschitz * target.x_values.dot(direction);

  StepOutcome out;
  out.slope = slope;
  out.inner_iterations = step.inner_iterations;
  out.inner_converged = step.converged;

  double alpha = 1.0;
  for (int b = 0; b <= config.armijo.max_backtracks; ++b) {
    FactorPair cand(f.U + alpha * step.delta_u, f.V + alpha * step.delta_v);
    if (cand.all_finite()) {
      Eigen::VectorXd cand_theta = predict_on_omega(cand, obs);
      const double cand_ll = neg_log_lik_from_theta(cand_theta, obs, model);
      if (std::isfinite(cand_ll) && cand_ll <= ll + config.armijo.c1 * alpha * std::min(slope, 0.0) &&
          cand_ll <= ll) {
        out.factors = std::move(cand);
        out.theta = std::move(cand_theta);
        out.alpha = alpha;
        out.ll = cand_ll;
        out.backtracks = b;
        return out;
      }
    }
    alpha *= config.armijo.shrink;
  }
  out.factors = f;
  out.theta = theta;
  out.alpha = 0.0;
  out.ll = ll;
  out.backtracks = config.armijo.max_backtracks;
  out.stalled = true;
  return out;
}

}  // namespace detail

/// One outer iteration from `f`. Never increases the negative log-likelihood;
/// returns the input with alpha = 0 and `stalled` set when no step size in
/// the backtracking schedule is accepted.
inline StepOutcome mmgn_step(const FactorPair& f, const ObservationSet& obs, const LinkModel& model,
                             const SolverConfig& config) {
  config.validate();
  const Eigen::VectorXd theta = predict_on_omega(f, obs);
  return detail::mmgn_step_cached(f, theta, neg_log_lik_from_theta(theta, obs, model), obs, model, config);
}

/// Runs outer iterations from `start` until the relative change in the
/// likelihood drops to config.tol, the iteration cap is hit, or a step stalls.
inline SolveReport solve_from(FactorPair start, const ObservationSet& obs, const LinkModel& model,
                              const SolverConfig& config) {
  config.validate();
  detail::check_dims(start, obs);
  SolveReport rep;
  Eigen::VectorXd theta = predict_on_omega(start, obs);
  double ll = neg_log_lik_from_theta(theta, obs, model);
  rep.factors = std::move(start);
  rep.ll_trace.push_back(ll);

  for (int t = 0; t < config.max_outer_iter; ++t) {
    StepOutcome s = detail::mmgn_step_cached(rep.factors, theta, ll, obs, model, config);
    if (s.stalled) {
      rep.stop_reason = StopReason::stalled;
      return rep;
    }
    const double rel = ll != 0.0 ? std::abs(s.ll - ll) / std::abs(ll) : 0.0;
    rep.factors = std::move(s.factors);
    theta = std::move(s.theta);
    ll = s.ll;
    rep.ll_trace.push_back(ll);
    rep.step_sizes.push_back(s.alpha);
    rep.inner_iterations.push_back(s.inner_iterations);
    rep.backtracks.push_back(s.backtracks);
    rep.outer_iterations = t + 1;
    rep.final_rel_change = rel;
    if (rel <= config.tol) {
      rep.stop_reason = StopReason::tol_met;
      return rep;
    }
  }
  rep.stop_reason = StopReason::max_iter;
  return rep;
}

inline SolveReport solve(const ObservationSet& obs, const LinkModel& model, const SolverConfig& config) {
  config.validate();
  return solve_from(initialize(obs, config.rank, config.init, config.seed), obs, model, config);
}

struct RankScore {
  int rank = 0;
  double validation_ll = 0.0;  // log-likelihood (not negated) on the validation part
};

struct RankSelection {
  int chosen_rank = 0;
  std::vector<RankScore> scores;  // in candidate order
};

namespace detail {

inline int best_rank(const std::vector<RankScore>& scores) {
  const RankScore* best = &scores.front();
  for (const RankScore& s : scores) {
    const double margin = 1e-12 * std::max(std::abs(s.validation_ll), std::abs(best->validation_ll));
    if (s.validation_ll > best->validation_ll + margin) {
      best = &s;
    } else if (std::abs(s.validation_ll - best->validation_ll) <= margin && s.rank < best->rank) {
      best = &s;
    }
  }
  return best->rank;
}

}  // namespace detail

/// Fits every candidate rank on a training split and keeps the one with the
/// largest validation log-likelihood. Values equal to within 1e-12 relative
/// count as ties, which go to the smaller rank.
inline RankSelection select_rank(const ObservationSet& obs, const LinkModel& model, std::vector<int> candidates,
                                 double split_fraction, std::uint64_t seed, SolverConfig base = {}) {
  if (candidates.empty()) throw std::invalid_argument("select_rank: no candidate ranks");
  for (int r : candidates) {
    if (r < 1 || r > std::min(obs.rows(), obs.cols())) {
      throw std::invalid_argument("select_rank: candidate rank " + std::to_string(r) + " out of range");
    }
  }
  const SplitPair parts = split(obs, split_fraction, seed);

  RankSelection sel;
  for (int r : candidates) {
    SolverConfig cfg = base;
    cfg.rank = r;
    const SolveReport rep = solve(parts.train, model, cfg);
    sel.scores.push_back({r, -neg_log_lik(rep.factors, parts.validation, model)});
  }

  sel.chosen_rank = detail::best_rank(sel.scores);
  return sel;
}

struct RankSelectedFit {
  RankSelection selection;
  SolveReport report;  // refit at the chosen rank on all observations
};

inline RankSelectedFit fit_with_rank_selection(const ObservationSet& obs, const LinkModel& model,
                                               std::vector<int> candidates, double split_fraction,
                                               std::uint64_t seed, SolverConfig base = {}) {
  RankSelectedFit out;
  out.selection = select_rank(obs, model, std::move(candidates), split_fraction, seed, base);
  base.rank = out.selection.chosen_rank;
  out.report = solve(obs, model, base);
  return out;
}

}  // namespace mmgn
