#pragma once

// Quadratic majorizer of the negative log-likelihood:
//   g(Theta | anchor) = (L/2) || Theta - anchor - X ||^2_Omega + c,
// with X = (1/L) Y o phi(anchor) / Phi(Y o anchor) and c chosen so that
// g(anchor | anchor) = l(anchor).

#include <Eigen/Core>

#include "mmgn/linkfun.hpp"
#include "mmgn/objective.hpp"
#include "mmgn/obsdata.hpp"
#include "mmgn/summation.hpp"

namespace mmgn {

struct MMTarget {
  Eigen::VectorXd x_values;  // on Omega, storage order
  double anchor_ll = 0.0;
  double lipschitz = 1.0;
};

inline MMTarget build_target_from_theta(const Eigen::VectorXd& theta, const ObservationSet& obs,
                                        const LinkModel& model) {
  MMTarget t;
  t.x_values.resize(theta.size());
  const auto labels = obs.labels();
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    t.x_values[k] = mm_ratio(model, labels[static_cast<std::size_t>(k)], theta[k]);
  }
  t.anchor_ll = neg_log_lik_from_theta(theta, obs, model);
  t.lipschitz = lipschitz(model);
  return t;
}

inline MMTarget build_target(const FactorPair& anchor, const ObservationSet& obs,
                             const LinkModel& model) {
  return build_target_from_theta(predict_on_omega(anchor, obs), obs, model);
}

namespace detail {

inline double sum_squares(const Eigen::VectorXd& v) {
  CompensatedSum acc;
  for (Eigen::Index k = 0; k < v.size(); ++k) acc.add(v[k] * v[k]);
  return acc.value();
}

}  // namespace detail

inline double surrogate_constant(const MMTarget& target) {
  return target.anchor_ll - 0.5 * target.lipschitz * detail::sum_squares(target.x_values);
}

inline double surrogate_value_from_theta(const MMTarget& target, const Eigen::VectorXd& candidate_theta,
                                         const Eigen::VectorXd& anchor_theta) {
  CompensatedSum acc;
  for (Eigen::Index k = 0; k < candidate_theta.size(); ++k) {
    const double d = candidate_theta[k] - anchor_theta[k] - target.x_values[k];
    acc.add(d * d);
  }
  // Same summation order as sum_squares, so candidate == anchor gives
  // anchor_ll bit for bit.
  return target.anchor_ll +
         0.5 * target.lipschitz * (acc.value() - detail::sum_squares(target.x_values));
}

inline double surrogate_value(const MMTarget& target, const FactorPair& candidate,
                              const FactorPair& anchor, const ObservationSet& obs) {
  return surrogate_value_from_theta(target, predict_on_omega(candidate, obs),
                                    predict_on_omega(anchor, obs));
}

}  // namespace mmgn
