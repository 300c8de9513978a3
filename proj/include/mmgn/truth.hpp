#pragma once

#include <Eigen/Core>

namespace mmgn {

/// Dense ground-truth matrix of exact rank rank_star, with the factors it was
/// built from (theta_star == U_star * V_star^T up to rounding).
struct GroundTruth {
  Eigen::MatrixXd theta_star;
  Eigen::MatrixXd U_star;
  Eigen::MatrixXd V_star;
  int rank_star = 0;
  double spikiness = 0.0;

  int rows() const { return static_cast<int>(theta_star.rows()); }
  int cols() const { return static_cast<int>(theta_star.cols()); }
};

}  // namespace mmgn
