#pragma once

// Estimation metrics. Dense comparisons stream over columns of the estimate
// so that U V^T is never held in full.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mmgn/linkfun.hpp"
#include "mmgn/objective.hpp"
#include "mmgn/obsdata.hpp"
#include "mmgn/summation.hpp"
#include "mmgn/truth.hpp"

namespace mmgn {

namespace detail {

inline void check_truth_dims(const FactorPair& f, const Eigen::MatrixXd& truth) {
  if (f.rows() != truth.rows() || f.cols() != truth.cols()) {
    throw std::invalid_argument("metrics: estimate and truth dimensions differ");
  }
}

// Calls f(j, estimate_column, truth_column) for each column j.
template <class F>
void for_each_column(const FactorPair& est, const Eigen::MatrixXd& truth, F&& f) {
  check_truth_dims(est, truth);
  Eigen::VectorXd col(truth.rows());
  for (Eigen::Index j = 0; j < truth.cols(); ++j) {
    col.noalias() = est.U * est.V.row(j).transpose();
    f(j, col, truth.col(j));
  }
}

inline double hellinger_sq(double p, double q) {
  const double a = std::sqrt(p) - std::sqrt(q);
  const double b = std::sqrt(1.0 - p) - std::sqrt(1.0 - q);
  return a * a + b * b;
}

}  // namespace detail

/// ||estimate - truth||_F^2 / ||truth||_F^2.
inline double relative_error(const FactorPair& estimate, const Eigen::MatrixXd& truth) {
  CompensatedSum num;
  CompensatedSum den;
  detail::for_each_column(estimate, truth, [&](Eigen::Index, const Eigen::VectorXd& e, const auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double d = e[i] - t[i];
      num.add(d * d);
      den.add(t[i] * t[i]);
    }
  });
  if (den.value() == 0.0) throw std::invalid_argument("relative_error: truth is the zero matrix");
  return num.value() / den.value();
}

inline double relative_error(const FactorPair& estimate, const GroundTruth& truth) {
  return relative_error(estimate, truth.theta_star);
}

/// Mean per-entry squared Hellinger distance between two probability matrices.
inline double hellinger_distance(const Eigen::MatrixXd& p_est, const Eigen::MatrixXd& p_true) {
  if (p_est.rows() != p_true.rows() || p_est.cols() != p_true.cols()) {
    throw std::invalid_argument("hellinger_distance: dimensions differ");
  }
  if (p_est.size() == 0) throw std::invalid_argument("hellinger_distance: empty matrices");
  CompensatedSum acc;
  for (Eigen::Index j = 0; j < p_est.cols(); ++j) {
    for (Eigen::Index i = 0; i < p_est.rows(); ++i) {
      const double p = p_est(i, j);
      const double q = p_true(i, j);
      if (!(p >= 0.0 && p <= 1.0 && q >= 0.0 && q <= 1.0)) {
        throw std::domain_error("hellinger_distance: probability outside [0, 1]");
      }
      acc.add(detail::hellinger_sq(p, q));
    }
  }
  return acc.value() / static_cast<double>(p_est.size());
}

/// Hellinger distance between Phi(estimate) and Phi(truth), streamed.
inline double hellinger_distance(const FactorPair& estimate, const Eigen::MatrixXd& truth,
                                 const LinkModel& model) {
  CompensatedSum acc;
  detail::for_each_column(estimate, truth, [&](Eigen::Index, const Eigen::VectorXd& e, const auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) acc.add(detail::hellinger_sq(cdf(model, e[i]), cdf(model, t[i])));
  });
  return acc.value() / static_cast<double>(truth.size());
}

/// sqrt(mn) ||theta||_max / ||theta||_F.
inline double spikiness(const Eigen::MatrixXd& theta) {
  if (theta.size() == 0) throw std::invalid_argument("spikiness: empty matrix");
  const double fro = theta.norm();
  if (fro == 0.0) throw std::invalid_argument("spikiness: zero matrix");
  return std::sqrt(static_cast<double>(theta.rows()) * static_cast<double>(theta.cols())) *
         theta.cwiseAbs().maxCoeff() / fro;
}

/// sign(0) is taken as +1.
inline int sign_of(double x) { return x >= 0.0 ? 1 : -1; }

struct RatingAccuracy {
  double accuracy = 0.0;
  std::size_t count = 0;
};

struct SignAccuracy {
  double overall = 0.0;
  std::size_t count = 0;
  std::map<double, RatingAccuracy> by_rating;  // empty unless ratings were given
};

/// Fraction of held-out entries whose label matches sign(theta_hat). When
/// `ratings` is non-empty it must align with the held-out storage order.
inline SignAccuracy sign_accuracy(const FactorPair& estimate, const ObservationSet& heldout,
                                  std::span<const double> ratings = {}) {
  if (heldout.empty()) throw std::invalid_argument("sign_accuracy: empty held-out set");
  if (!ratings.empty() && ratings.size() != heldout.size()) {
    throw std::invalid_argument("sign_accuracy: ratings do not align with held-out entries");
  }
  const Eigen::VectorXd theta = predict_on_omega(estimate, heldout);
  std::size_t hits = 0;
  std::map<double, std::pair<std::size_t, std::size_t>> tally;
  for (std::size_t k = 0; k < heldout.size(); ++k) {
    const bool hit = sign_of(theta[static_cast<Eigen::Index>(k)]) == heldout.label(k);
    hits += hit;
    if (!ratings.empty()) {
      auto& t = tally[ratings[k]];
      t.first += hit;
      ++t.second;
    }
  }
  SignAccuracy out;
  out.count = heldout.size();
  out.overall = static_cast<double>(hits) / static_cast<double>(heldout.size());
  for (const auto& [rating, t] : tally) {
    out.by_rating[rating] = {static_cast<double>(t.first) / static_cast<double>(t.second), t.second};
  }
  return out;
}

struct GroupRow {
  double value_lo = 0.0;  // exclusive; -inf for the first group
  double value_hi = 0.0;  // inclusive; +inf for the last group
  double prob_lo = 0.0;
  double prob_hi = 1.0;
  std::size_t count = 0;
  double squared_error = 0.0;  // sum over the group of (estimate - truth)^2
  double truth_squared = 0.0;  // sum over the group of truth^2
  double relative_error = std::numeric_limits<double>::quiet_NaN();
  double hellinger = std::numeric_limits<double>::quiet_NaN();
};

/// Bins the cells of the truth by value into (-inf, e1], (e1, e2], ...,
/// (ek, inf) and reports per-bin errors. Probability labels are the edges
/// mapped through Phi.
inline std::vector<GroupRow> group_breakdown(const FactorPair& estimate, const Eigen::MatrixXd& truth,
                                             const LinkModel& model, std::span<const double> edges) {
  for (std::size_t e = 1; e < edges.size(); ++e) {
    if (!(edges[e] > edges[e - 1])) throw std::invalid_argument("group_breakdown: edges must increase");
  }
  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t groups = edges.size() + 1;
  std::vector<GroupRow> rows(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    rows[g].value_lo = g == 0 ? -inf : edges[g - 1];
    rows[g].value_hi = g + 1 == groups ? inf : edges[g];
    rows[g].prob_lo = g == 0 ? 0.0 : cdf(model, rows[g].value_lo);
    rows[g].prob_hi = g + 1 == groups ? 1.0 : cdf(model, rows[g].value_hi);
  }
  std::vector<CompensatedSum> sq(groups), tsq(groups), hel(groups);
  detail::for_each_column(estimate, truth, [&](Eigen::Index, const Eigen::VectorXd& e, const auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double v = t[i];
      const auto g = static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), v) - edges.begin());
      const double d = e[i] - v;
      sq[g].add(d * d);
      tsq[g].add(v * v);
      hel[g].add(detail::hellinger_sq(cdf(model, e[i]), cdf(model, v)));
      ++rows[g].count;
    }
  });
  for (std::size_t g = 0; g < groups; ++g) {
    rows[g].squared_error = sq[g].value();
    rows[g].truth_squared = tsq[g].value();
    if (rows[g].count > 0) {
      rows[g].hellinger = hel[g].value() / static_cast<double>(rows[g].count);
      if (rows[g].truth_squared > 0.0) rows[g].relative_error = rows[g].squared_error / rows[g].truth_squared;
    }
  }
  return rows;
}

struct EvalReport {
  double relative_error = 0.0;
  double hellinger = 0.0;
  double runtime_seconds = 0.0;
  std::optional<std::vector<GroupRow>> per_group;
};

inline EvalReport evaluate(const FactorPair& estimate, const GroundTruth& truth, const LinkModel& model,
                           double runtime_seconds = 0.0) {
  EvalReport r;
  r.relative_error = relative_error(estimate, truth);
  r.hellinger = hellinger_distance(estimate, truth.theta_star, model);
  r.runtime_seconds = runtime_seconds;
  return r;
}

}  // namespace mmgn
