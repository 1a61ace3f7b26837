#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace pibdfc {

// One subject: T_i x R responses and T_i x B covariates, rows are time points.
struct SubjectData {
  std::string subject_id;
  Eigen::MatrixXd series;
  Eigen::MatrixXd covariates;

  Eigen::Index n_times() const { return series.rows(); }
};

struct Dataset {
  std::vector<SubjectData> subjects;
  Eigen::Index n_regions = 0;     // R
  Eigen::Index n_covariates = 0;  // B

  std::size_t n_subjects() const { return subjects.size(); }
  Eigen::Index total_times() const;
};

// Builds a dataset from subjects and checks every invariant: common R and B,
// T_i >= 2, matching row counts, finite values. Throws DataError.
Dataset make_dataset(std::vector<SubjectData> subjects);
void validate_dataset(const Dataset& d);

// Headerless comma- or whitespace-delimited numeric table.
Eigen::MatrixXd read_table(const std::filesystem::path& path);
// Shortest decimal form that reads back to the identical double.
std::string format_double(double v);

void write_table(const std::filesystem::path& path, const Eigen::MatrixXd& m);

Dataset load_dataset(const std::vector<std::filesystem::path>& series_paths,
                     const std::vector<std::filesystem::path>& covariate_paths);

// Manifest: {"subjects": [{"id": ..., "series": ..., "covariates": ...}]}.
// Relative paths resolve against the manifest's directory.
Dataset load_manifest(const std::filesystem::path& manifest_path);

// Writes one series/covariate file pair per subject plus manifest.json.
void save_dataset(const Dataset& d, const std::filesystem::path& dir);

// Per-subject column mean removal of the series; covariates untouched.
Dataset center_series(const Dataset& d);

// Per-subject z-scoring of covariate columns. Constant columns are centered
// but not scaled.
Dataset standardize_covariates(const Dataset& d);

enum class ThresholdMode { bfdr, fixed_threshold, ci50 };
enum class KappaEstimator { median, mean };

struct ModelConfig {
  int n_states = 3;  // S
  // Prior variances (not standard deviations).
  double sigma_xi = 0.1;
  double sigma_rho = 0.1;
  double sigma_z = 0.1;
  double sigma_eta = 0.1;
  Eigen::MatrixXd z0;  // S x S, column 0 ignored; empty means default
  double tau0 = 1.0;
  // Rate of the exponential prior on the diagonal of each precision matrix;
  // 0 gives the flat prior.
  double diag_prior_rate = 1.0;
  bool shared_global_shrinkage = false;
  int n_burn = 1000;
  int n_samples = 1000;
  int thin = 1;
  std::uint64_t seed = 1;
  double q_star = 0.2;
  Eigen::VectorXd initial_state_dist;  // empty means uniform
  ThresholdMode threshold_mode = ThresholdMode::bfdr;
  double fixed_threshold = 0.5;
  KappaEstimator kappa_estimator = KappaEstimator::median;
  bool pool_states = false;
  double change_point_threshold = 0.95;
  int init_window = 20;
  int init_ghs_sweeps = 10;

  // Fills defaults (z0, initial_state_dist) and checks invariants.
  void finalize();
  void validate() const;

  const Eigen::MatrixXd& prior_z() const { return z0; }
};

// z0 with entries (r, r) = 2 for r >= 2 (1-based) and 0 elsewhere.
Eigen::MatrixXd default_z0(int n_states);

ModelConfig preset_sim1();
ModelConfig preset_case_study();
ModelConfig preset_by_name(const std::string& name);

nlohmann::json config_to_json(const ModelConfig& c);
// Unknown keys are rejected; missing keys keep the values from `base`.
ModelConfig config_from_json(const nlohmann::json& j, ModelConfig base = {});

std::string to_string(ThresholdMode m);
ThresholdMode threshold_mode_from_string(const std::string& s);

}  // namespace pibdfc
