#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pibdfc/data_model.hpp"
#include "pibdfc/rng.hpp"

namespace pibdfc {

// States are 0-based in code; state 0 is the reference state. For every
// subject xi(r, 0) = 0 and rho.row(0) = 0; likewise Z.col(0) = 0 and
// eta.row(0) = 0.
struct TransitionParams {
  std::vector<Eigen::MatrixXd> xi;   // per subject, S x S
  std::vector<Eigen::MatrixXd> rho;  // per subject, S x B
  Eigen::MatrixXd Z;                 // S x S
  Eigen::MatrixXd eta;               // S x B

  // Throws NumericalError if a reference-state zero has been disturbed.
  void check_reference_zeros() const;
};

TransitionParams prior_mean_params(const ModelConfig& config,
                                   std::size_t n_subjects,
                                   Eigen::Index n_covariates);

// Transition matrix for the move t -> t+1 given covariates x_t:
// Q(r, s) = exp(xi(r,s) + x.rho(s)) / sum_l exp(xi(r,l) + x.rho(l)).
Eigen::MatrixXd compute_q(const Eigen::MatrixXd& xi, const Eigen::MatrixXd& rho,
                          const Eigen::Ref<const Eigen::VectorXd>& x);

// All T-1 transition matrices for one subject.
std::vector<Eigen::MatrixXd> compute_q_sequence(const Eigen::MatrixXd& xi,
                                                const Eigen::MatrixXd& rho,
                                                const Eigen::MatrixXd& covariates);

// c = log sum_{m != s} exp(xi(r,m) + x.rho(m) - x.rho(s)), so that the
// binary log-odds of moving r -> s against every other state is xi(r,s) - c.
double holmes_held_offset(int r, int s, const Eigen::MatrixXd& xi,
                          const Eigen::MatrixXd& rho,
                          const Eigen::Ref<const Eigen::VectorXd>& x);

// One Bernoulli observation in a Polya-Gamma augmented logistic update of a
// scalar coefficient beta whose log-odds are design * beta - offset.
struct LogisticTerm {
  double design = 1.0;
  double response = 0.0;  // 0 or 1
  double pg = 0.0;        // PG(1, design * beta - offset) auxiliary
  double offset = 0.0;
};

struct GaussianConditional {
  double mean = 0.0;
  double variance = 0.0;
};

// Conditional of beta ~ N(prior_mean, prior_var) given augmented terms:
// precision = sum design^2 pg + 1/prior_var,
// mean = variance * (prior_mean/prior_var
//                    + sum design (response - 1/2 + pg * offset)).
GaussianConditional logistic_conditional(double prior_mean, double prior_var,
                                         std::span<const LogisticTerm> terms);

// Builds the augmented terms for xi(r, s) of one subject, drawing fresh PG
// auxiliaries at the current parameter values.
std::vector<LogisticTerm> xi_terms(int r, int s, const Eigen::MatrixXd& xi,
                                   const Eigen::MatrixXd& rho,
                                   const Eigen::MatrixXd& covariates,
                                   std::span<const int> states, RngStream& rng);

// Same for rho(s, b); transitions with x_tb = 0 carry no information and are
// skipped.
std::vector<LogisticTerm> rho_terms(int s, Eigen::Index b,
                                    const Eigen::MatrixXd& xi,
                                    const Eigen::MatrixXd& rho,
                                    const Eigen::MatrixXd& covariates,
                                    std::span<const int> states, RngStream& rng);

// Gibbs updates for one subject, in place: every xi(r, s), s >= 1, then
// every rho(s, b), s >= 1.
void gibbs_update_xi(Eigen::MatrixXd& xi, const Eigen::MatrixXd& rho,
                     const Eigen::MatrixXd& Z, double sigma_xi,
                     const Eigen::MatrixXd& covariates,
                     std::span<const int> states, RngStream& rng);
void gibbs_update_rho(const Eigen::MatrixXd& xi, Eigen::MatrixXd& rho,
                      const Eigen::MatrixXd& eta, double sigma_rho,
                      const Eigen::MatrixXd& covariates,
                      std::span<const int> states, RngStream& rng);

// Normal-normal conditional of a group mean given subject coefficients.
GaussianConditional group_conditional(double prior_mean, double prior_var,
                                      double subject_var, double subject_sum,
                                      std::size_t n_subjects);

// Draws Z and eta given every subject's xi and rho.
void gibbs_update_group(TransitionParams& params, const ModelConfig& config,
                        RngStream& rng);

}  // namespace pibdfc
