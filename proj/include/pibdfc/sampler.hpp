#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "pibdfc/data_model.hpp"
#include "pibdfc/ghs.hpp"
#include "pibdfc/rng.hpp"
#include "pibdfc/selection.hpp"
#include "pibdfc/state_inference.hpp"
#include "pibdfc/transition.hpp"

namespace pibdfc {

struct ChainState {
  std::vector<StateSequence> sequences;      // per subject
  TransitionParams trans;
  std::vector<PrecisionState> precisions;    // per state
  int iteration = 0;
};

// Stored thinned draws; outer index is the draw.
struct PosteriorDraws {
  int n_states = 0;
  Eigen::Index n_regions = 0;
  Eigen::Index n_covariates = 0;
  std::vector<std::vector<Eigen::MatrixXd>> omega;    // [draw][state]
  std::vector<std::vector<Eigen::MatrixXd>> lambda2;  // [draw][state]
  std::vector<std::vector<double>> tau2;              // [draw][state]
  std::vector<std::vector<Eigen::MatrixXd>> xi;       // [draw][subject]
  std::vector<std::vector<Eigen::MatrixXd>> rho;      // [draw][subject]
  std::vector<Eigen::MatrixXd> Z;
  std::vector<Eigen::MatrixXd> eta;
  std::vector<std::vector<StateSequence>> sequences;  // [draw][subject]

  std::size_t size() const { return Z.size(); }
  void push(const ChainState& c);
};

// Per-sweep scalar monitor (burn-in included).
struct TraceRow {
  int iteration = 0;
  std::vector<double> tau2;       // per state
  std::vector<double> occupancy;  // per state, fraction of all time points
};

struct RunOptions {
  int workers = 1;
  // Called after every sweep with the 1-based sweep count.
  std::function<void(int)> on_sweep;
};

struct RunResult {
  PosteriorDraws draws;
  std::vector<TraceRow> trace;
  ChainState final_state;
};

// Random stream ids; every (subject, state, phase) owns its stream so draws
// do not depend on the number of workers.
namespace streams {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kGroup = 2;
inline constexpr std::uint64_t kSharedShrinkage = 3;
inline constexpr std::uint64_t kStateBase = 1000;
inline constexpr std::uint64_t kSubjectBase = 1000000;
}  // namespace streams

// k-means labels on windowed covariance features, relabeled so that label 0
// is the most occupied cluster (ties by first appearance).
std::vector<StateSequence> kmeans_initial_states(const Dataset& d, int n_states,
                                                 int window, RngStream& rng);

ChainState initialize(const Dataset& d, const ModelConfig& config, RngStream& rng);

// One full Gibbs sweep in place: xi, rho and state paths per subject, then
// the precision matrices per state, then Z and eta.
void gibbs_sweep(ChainState& chain, const Dataset& d, const ModelConfig& config,
                 std::vector<RngStream>& subject_rngs,
                 std::vector<RngStream>& state_rngs, RngStream& group_rng,
                 RngStream& shared_rng, int workers);

RunResult run_chain(const Dataset& d, const ModelConfig& config,
                    const RunOptions& options = {});

struct EffectSummary {
  int row = 0;  // state (or origin state for Z)
  int col = 0;  // covariate (or destination state for Z)
  double mean = 0.0;       // posterior mean of the coefficient
  double exp_mean = 0.0;   // exp of the posterior mean
  double q025 = 0.0;       // quantiles of the reported scale
  double q50 = 0.0;
  double q975 = 0.0;
};

struct StateReport {
  Eigen::MatrixXd omega_mean;
  Eigen::MatrixXd partial_corr;
  SelectionResult selection;
  double occupancy = 0.0;  // posterior mean fraction of all time points
};

struct SubjectReport {
  std::string subject_id;
  StateSummary states;
  std::vector<EffectSummary> rho_effects;  // quantiles of exp(rho)
};

struct Report {
  std::vector<StateReport> states;
  std::vector<SubjectReport> subjects;
  std::vector<EffectSummary> eta_effects;  // quantiles of exp(eta)
  std::vector<EffectSummary> z_summary;    // quantiles of Z itself
  std::size_t n_draws = 0;
};

Report summarize(const PosteriorDraws& draws, const ModelConfig& config,
                 const Dataset& d);

// Quantile summary helper: `values` are raw draws; if `exponentiate` the
// quantiles are of exp(values).
EffectSummary summarize_effect(const std::vector<double>& values, bool exponentiate);

}  // namespace pibdfc
