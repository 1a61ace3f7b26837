#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "pibdfc/state_inference.hpp"

namespace pibdfc {

// Edge recovery over the upper triangle. f1 is the product tpr * tnr, not
// the harmonic mean.
struct EdgeScore {
  double tpr = 1.0;
  double tnr = 1.0;
  double f1 = 1.0;
};

EdgeScore edge_metrics(const Eigen::MatrixXi& truth, const Eigen::MatrixXi& est);

// perm[s] is the estimated label that corresponds to true state s.
using Permutation = std::vector<int>;

// Permutation maximizing the number of matched time points, by exhaustive
// search for S <= 6 and the Hungarian algorithm otherwise.
Permutation align_labels(const std::vector<StateSequence>& truth,
                         const std::vector<StateSequence>& est, int n_states);

// Rectangular-safe Hungarian solver maximizing sum of weight(r, assign[r]).
std::vector<int> hungarian_max(const Eigen::MatrixXd& weight);

struct StateScore {
  // Missing (nullopt) for a state that never occurs in the truth.
  std::vector<std::optional<double>> accuracy;
  Permutation permutation;
};

StateScore state_accuracy(const std::vector<StateSequence>& truth,
                          const std::vector<StateSequence>& est,
                          const Permutation& perm);

struct ChangePointCount {
  std::vector<int> per_subject;
  double mean = 0.0;
};

ChangePointCount count_change_points(const std::vector<Eigen::VectorXd>& change_point_prob,
                                     double threshold = 0.95);

}  // namespace pibdfc
