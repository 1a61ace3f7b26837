#pragma once

#include <vector>

#include <Eigen/Dense>

#include "pibdfc/data_model.hpp"

namespace pibdfc {

// Quantile of `values` (need not be sorted) by linear interpolation between
// order statistics: position p * (n - 1).
double quantile(std::vector<double> values, double p);

struct SelectionResult {
  Eigen::MatrixXd kappa_hat;              // R x R, off-diagonal meaningful
  double eta_star = 0.0;                  // 0 when nothing is selected
  Eigen::MatrixXi adjacency;              // symmetric, zero diagonal
  Eigen::MatrixXd selected_partial_corr;  // zero where not selected
  double achieved_bfdr = 0.0;
};

// Per-draw kappa = 1 / (1 + lambda2 * tau2), summarized per off-diagonal
// entry by the posterior median (or mean).
Eigen::MatrixXd compute_kappa(const std::vector<Eigen::MatrixXd>& lambda2_draws,
                              const std::vector<double>& tau2_draws,
                              KappaEstimator estimator = KappaEstimator::median);

struct BfdrSelection {
  double eta_star = 0.0;
  std::vector<bool> selected;
  double achieved_bfdr = 0.0;
};

// Largest threshold eta among the distinct kappa values such that
// BFDR(eta) = mean of the kappa values <= eta is below q_star. Empty
// selection (eta_star = 0) when no threshold qualifies.
BfdrSelection bfdr_select(const std::vector<double>& kappa, double q_star);

// Matrix form over the upper triangle of kappa_hat.
SelectionResult bfdr_select_matrix(const Eigen::MatrixXd& kappa_hat, double q_star);

// -omega_jk / sqrt(omega_jj omega_kk) off the diagonal, 1 on it.
Eigen::MatrixXd partial_correlations(const Eigen::MatrixXd& omega);

// Entry selected iff the 25%-75% posterior interval excludes zero.
Eigen::MatrixXi ci50_select(const std::vector<Eigen::MatrixXd>& omega_draws);

// Entry selected iff the posterior mean of |omega_jk| reaches `threshold`.
Eigen::MatrixXi fixed_threshold_select(const std::vector<Eigen::MatrixXd>& omega_draws,
                                       double threshold);

// Upper-triangle (j < k) values in row-major order of (j, k).
std::vector<double> upper_triangle(const Eigen::MatrixXd& m);

}  // namespace pibdfc
