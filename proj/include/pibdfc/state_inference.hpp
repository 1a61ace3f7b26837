#pragma once

#include <vector>

#include <Eigen/Dense>

#include "pibdfc/data_model.hpp"
#include "pibdfc/rng.hpp"

namespace pibdfc {

// 0-based state labels, one entry per time point.
using StateSequence = std::vector<int>;

// log N_R(y | 0, omega^{-1}) via the Cholesky log-determinant of omega.
double emission_loglik(const Eigen::Ref<const Eigen::VectorXd>& y,
                       const Eigen::MatrixXd& omega);

// Emission log-likelihoods for every row of `series` under each state's
// precision: result is T x S. One Cholesky per state.
Eigen::MatrixXd emission_loglik_matrix(const Eigen::MatrixXd& series,
                                       const std::vector<Eigen::MatrixXd>& omegas);

// Per-state Cholesky factors reused across subjects within a sweep.
class EmissionModel {
 public:
  explicit EmissionModel(const std::vector<Eigen::MatrixXd>& omegas);
  Eigen::MatrixXd loglik(const Eigen::MatrixXd& series) const;

 private:
  std::vector<Eigen::MatrixXd> upper_;  // omega = U^T U
  std::vector<double> constant_;        // -(R/2) log 2pi + sum log diag(U)
};

// Exact joint draw of s_{1:T} given emissions and transition matrices
// q_seq[t] for the move t -> t+1. Throws NumericalError("impossible
// emission") if every state has zero likelihood at some time.
StateSequence forward_backward_sample(const Eigen::MatrixXd& loglik,
                                      const std::vector<Eigen::MatrixXd>& q_seq,
                                      const Eigen::VectorXd& pi0, RngStream& rng);

// Forward filter used by the sampler; exposed for tests. Row t is
// p(s_t | y_{1:t}) normalized.
Eigen::MatrixXd forward_filter(const Eigen::MatrixXd& loglik,
                               const std::vector<Eigen::MatrixXd>& q_seq,
                               const Eigen::VectorXd& pi0);

struct StateSummary {
  std::vector<int> map_states;          // pointwise posterior mode
  Eigen::VectorXd occupancy;            // visit fractions, sums to 1
  Eigen::VectorXd change_point_prob;    // length T-1: P(s_{t+1} != s_t)
  Eigen::MatrixXd state_prob;           // T x S posterior marginals
  // 0-based times t with P(s_t != s_{t-1}) above the threshold.
  std::vector<int> flagged(double threshold) const;
};

// `draws` holds the stored sequences of one subject.
StateSummary summarize_states(const std::vector<StateSequence>& draws,
                              int n_states);

}  // namespace pibdfc
