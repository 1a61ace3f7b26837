#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pibdfc/data_model.hpp"
#include "pibdfc/rng.hpp"
#include "pibdfc/state_inference.hpp"

namespace pibdfc {

// Transition regime in force while the covariate holds `covariate`.
struct QRegime {
  double covariate = 0.0;
  Eigen::MatrixXd q;  // S x S row-stochastic
};

struct SimSpec {
  int T = 300;
  int R = 16;
  int N = 30;
  int S = 3;
  std::vector<Eigen::MatrixXi> adjacencies;  // S patterns, R x R
  // Segment k (between consecutive switch times) uses regime k mod size.
  std::vector<QRegime> regimes;
  std::vector<int> switch_times;  // 0-based first time of each new segment
  double target_mean_abs_pcorr = 0.6;
  std::uint64_t seed = 1;
  int initial_state = 0;

  void validate() const;
};

// Six signal-strength levels for the mean absolute non-zero partial
// correlation. These are evenly spaced approximations over 0.1-0.6.
const std::vector<double>& signal_presets();

// The three 16-region connectivity patterns used by the default design.
std::vector<Eigen::MatrixXi> default_adjacencies(int R);

// Two regimes (x = 0 then x = 1), switching at T/2.
std::vector<QRegime> default_regimes();

// Default three-state design with N subjects; T = 300, R = 16.
SimSpec default_sim_spec(int N = 30, double target = 0.6, std::uint64_t seed = 1);

SimSpec sim_spec_from_json(const nlohmann::json& j);
nlohmann::json sim_spec_to_json(const SimSpec& spec);

struct SimTruth {
  std::vector<Eigen::MatrixXd> precisions;   // per state, unit diagonal
  std::vector<Eigen::MatrixXi> adjacencies;  // per state
  std::vector<StateSequence> sequences;      // per subject
  Eigen::VectorXd covariate;                 // length T
};

// SPD matrix with zeros exactly where the adjacency has none, rescaled to
// unit diagonal, whose off-diagonal partial correlations have mean absolute
// value equal to `target` over the edges. Throws DataError when the target
// is out of reach after `max_tries` redraws.
Eigen::MatrixXd random_precision(const Eigen::MatrixXi& adjacency, double target,
                                 RngStream& rng, int max_tries = 200);

// Mean |partial correlation| over the off-diagonal non-zeros of adjacency.
double mean_abs_partial_corr(const Eigen::MatrixXd& omega,
                             const Eigen::MatrixXi& adjacency);

// Step covariate implied by the switch times and regimes of a SimSpec.
Eigen::VectorXd covariate_series(const SimSpec& spec);

// Markov paths: s_0 = initial_state, s_{t+1} ~ Q(x_t)(s_t, .).
std::vector<StateSequence> simulate_states(const SimSpec& spec, RngStream& rng);

struct SimResult {
  Dataset dataset;
  SimTruth truth;
};

SimResult simulate_dataset(const SimSpec& spec);

// Writes dataset files, manifest.json and truth/ (adjacency, precision and
// state files) under dir.
void write_simulation(const SimResult& sim, const SimSpec& spec,
                      const std::filesystem::path& dir);

}  // namespace pibdfc
