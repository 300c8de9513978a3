#pragma once

// Probit and logistic link models for 1-bit observations.
//
// Every kernel works in standardized units z = x / sigma; sigma only enters
// at the boundary. The probit tail goes through a scaled complementary error
// function so that log-CDF values and density/CDF ratios stay exact far into
// the left tail instead of underflowing around z = -8.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mmgn {

enum class LinkKind { probit, logistic };

struct LinkModel {
  LinkKind kind = LinkKind::probit;
  double sigma = 1.0;

  LinkModel() = default;
  LinkModel(LinkKind k, double s) : kind(k), sigma(s) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw std::invalid_argument("link model: sigma must be positive and finite");
    }
  }

  static LinkModel probit(double s = 1.0) { return {LinkKind::probit, s}; }
  static LinkModel logistic(double s = 1.0) { return {LinkKind::logistic, s}; }
};

inline std::string_view to_string(LinkKind k) {
  return k == LinkKind::probit ? "probit" : "logistic";
}

inline LinkKind parse_link_kind(std::string_view s) {
  if (s == "probit") return LinkKind::probit;
  if (s == "logistic") return LinkKind::logistic;
  throw std::invalid_argument("unknown link model '" + std::string(s) + "'");
}

namespace detail {

inline void require_finite(double x) {
  if (!std::isfinite(x)) throw std::domain_error("link function: non-finite argument");
}

// exp(t * t) without losing the low-order bits of t * t.
inline double exp_square(double t) {
  const double hi = t * t;
  const double lo = std::fma(t, t, -hi);
  return std::exp(hi) * std::exp(lo);
}

// erfcx(t) = exp(t^2) erfc(t) for t >= 0.
inline double erfcx_nonneg(double t) {
  constexpr double series_start = 20.0;
  if (t < series_start) return exp_square(t) * std::erfc(t);
  // erfcx(t) ~ 1/(t sqrt(pi)) * sum_k (-1)^k (2k-1)!! / (2 t^2)^k
  const double inv2t2 = 0.5 / (t * t);
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 30; ++k) {
    term *= -(2.0 * k - 1.0) * inv2t2;
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return sum / (t * std::sqrt(std::numbers::pi));
}

// Standard normal hazard-like ratio phi(z) / Phi(z).
inline double std_normal_mills(double z) {
  if (z < 0.0) {
    return std::sqrt(2.0 / std::numbers::pi) / erfcx_nonneg(-z / std::numbers::sqrt2);
  }
  const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return phi / (0.5 * std::erfc(-z / std::numbers::sqrt2));
}

inline double std_normal_log_cdf(double z) {
  if (z < -1.0) {
    const double t = -z / std::numbers::sqrt2;
    // log Phi(z) = log(erfcx(t) / 2) - t^2, with t^2 = z^2 / 2.
    return std::log(0.5 * erfcx_nonneg(t)) - 0.5 * z * z;
  }
  return std::log1p(-0.5 * std::erfc(z / std::numbers::sqrt2));
}

// Logistic sigmoid 1 / (1 + exp(-z)).
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(a)).
inline double softplus(double a) {
  return std::max(a, 0.0) + std::log1p(std::exp(-std::abs(a)));
}

}  // namespace detail

inline double cdf(const LinkModel& model, double x) {
  detail::require_finite(x);
  const double z = x / model.sigma;
  if (model.kind == LinkKind::probit) return 0.5 * std::erfc(-z / std::numbers::sqrt2);
  return detail::sigmoid(z);
}

inline double pdf(const LinkModel& model, double x) {
  detail::require_finite(x);
  const double z = x / model.sigma;
  if (model.kind == LinkKind::probit) {
    return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * model.sigma);
  }
  const double e = std::exp(-std::abs(z));
  return e / ((1.0 + e) * (1.0 + e) * model.sigma);
}

inline double log_cdf(const LinkModel& model, double x) {
  detail::require_finite(x);
  const double z = x / model.sigma;
  if (model.kind == LinkKind::probit) return detail::std_normal_log_cdf(z);
  return -detail::softplus(-z);
}

/// d/dx log Phi(x) = phi(x) / Phi(x).
inline double dlog_cdf(const LinkModel& model, double x) {
  detail::require_finite(x);
  const double z = x / model.sigma;
  if (model.kind == LinkKind::probit) return detail::std_normal_mills(z) / model.sigma;
  return detail::sigmoid(-z) / model.sigma;
}

/// Lipschitz constant of d/dx log Phi; also the curvature of the quadratic
/// majorizer.
inline double lipschitz(const LinkModel& model) {
  const double s2 = model.sigma * model.sigma;
  return model.kind == LinkKind::probit ? 1.0 / s2 : 0.25 / s2;
}

/// (1/L) * y * phi(theta) / Phi(y * theta): the per-entry offset between the
/// majorizer's target and the anchor.
inline double mm_ratio(const LinkModel& model, int y, double theta) {
  detail::require_finite(theta);
  if (y != 1 && y != -1) throw std::invalid_argument("mm_ratio: label must be +1 or -1");
  const double u = y * theta / model.sigma;
  if (model.kind == LinkKind::probit) {
    // sigma^2 * phi_sigma(u) / Phi(u) = sigma * mills(u)
    return y * model.sigma * detail::std_normal_mills(u);
  }
  return y * 4.0 * model.sigma * detail::sigmoid(-u);
}

}  // namespace mmgn
