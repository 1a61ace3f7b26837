#pragma once

#include <vector>

#include <Eigen/Dense>

#include "pibdfc/data_model.hpp"
#include "pibdfc/rng.hpp"
#include "pibdfc/state_inference.hpp"

namespace pibdfc {

// Graphical horseshoe state for one connectivity state: off-diagonals
// omega_jk ~ N(0, lambda2_jk * tau2), lambda_jk ~ C+(0, 1), tau ~ C+(0, tau0),
// with the half-Cauchy scales written through inverse-gamma auxiliaries:
// lambda2 | nu ~ IG(1/2, 1/nu), nu ~ IG(1/2, 1),
// tau2 | xi_tau ~ IG(1/2, 1/xi_tau), xi_tau ~ IG(1/2, 1/tau0^2).
struct PrecisionState {
  Eigen::MatrixXd omega;    // R x R, SPD
  Eigen::MatrixXd lambda2;  // symmetric, off-diagonal entries meaningful
  Eigen::MatrixXd nu;       // symmetric, off-diagonal entries meaningful
  double tau2 = 1.0;
  double xi_tau = 1.0;
  double tau0 = 1.0;

  Eigen::Index dim() const { return omega.rows(); }
};

// Diagonal precision with unit local scales and tau2 = tau0^2.
PrecisionState initial_precision(const Eigen::VectorXd& diagonal, double tau0);

struct StateScatter {
  Eigen::MatrixXd scatter;  // sum of y y^T over assigned observations
  double n = 0.0;
};

StateScatter accumulate_scatter(const Dataset& d,
                                const std::vector<StateSequence>& sequences,
                                int state);

// All states in one pass over the data.
std::vector<StateScatter> accumulate_scatters(
    const Dataset& d, const std::vector<StateSequence>& sequences, int n_states);

// One column-wise blocked Gibbs sweep over omega, lambda2 and nu, holding
// tau2 fixed. `diag_prior_rate` is the rate d of the exponential prior
// Exp(d/2) on each diagonal entry (0 = flat).
void ghs_column_sweep(PrecisionState& prec, const StateScatter& sc,
                      double diag_prior_rate, RngStream& rng);

// tau2 ~ IG((M+1)/2, 1/xi_tau + sum_{j<k} omega_jk^2 / (2 lambda2_jk)),
// xi_tau ~ IG(1, 1/tau0^2 + 1/tau2), M = R(R-1)/2.
void update_global_shrinkage(PrecisionState& prec, RngStream& rng);

// Same update with one tau2 shared by every state.
void update_shared_global_shrinkage(std::vector<PrecisionState>& precs,
                                    RngStream& rng);

// Full sweep: columns, then global shrinkage.
void ghs_update(PrecisionState& prec, const StateScatter& sc,
                double diag_prior_rate, RngStream& rng);

// Shape and rate of the tau2 conditional, exposed for tests.
struct InverseGammaParams {
  double shape = 0.0;
  double scale = 0.0;
};
InverseGammaParams global_shrinkage_conditional(const PrecisionState& prec);

// Exact draw from the joint prior (positive-definite truncation applied by
// rejection). Requires diag_prior_rate > 0; intended for small R.
PrecisionState sample_ghs_prior(Eigen::Index R, double tau0,
                                double diag_prior_rate, RngStream& rng,
                                int max_tries = 1000000);

// Edge density of one graph simulated from the shrinkage prior under the
// informal rule: edge (j, k) kept iff 1/(1 + lambda_jk tau) < 1/2.
double prior_edge_density(Eigen::Index R, double tau0, RngStream& rng);

// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Eigen::MatrixXd& m);

}  // namespace pibdfc
