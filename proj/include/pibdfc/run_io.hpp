#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pibdfc/data_model.hpp"
#include "pibdfc/metrics.hpp"
#include "pibdfc/sampler.hpp"

namespace pibdfc {

// 64-bit FNV-1a of a file's bytes as 16 hex digits.
std::string fnv1a_file(const std::filesystem::path& path);

// Writes every per-state, per-subject and group summary file of a fit.
void write_report(const std::filesystem::path& dir, const Report& report,
                  const ModelConfig& config, const Dataset& d);

// One row per sweep: iteration, tau2 per state, occupancy per state.
void write_trace(const std::filesystem::path& dir, const std::vector<TraceRow>& trace,
                 int n_states);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

// Headered CSV of numbers.
struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;

  Eigen::Index column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

// Reads what score and report need back from a run directory.
struct RunContents {
  nlohmann::json summary;
  int n_states = 0;
  std::size_t n_subjects = 0;
  std::vector<Eigen::MatrixXi> adjacencies;     // selected edges per state
  std::vector<StateSequence> map_states;        // 0-based
  std::vector<Eigen::VectorXd> change_point_prob;
};

RunContents read_run(const std::filesystem::path& run_dir);

struct Truth {
  std::vector<Eigen::MatrixXi> adjacencies;
  std::vector<StateSequence> sequences;  // 0-based
};

// Reads adjacency_state{s}.csv and states_subject{i}.csv from a truth
// directory written by the simulator.
Truth read_truth(const std::filesystem::path& truth_dir);

struct ScoreRow {
  std::string metric;
  std::string state;  // 1-based true state label or "all"
  double value = 0.0; // NaN marks a missing value
};

// Edge and state metrics after label alignment, plus change-point counts.
std::vector<ScoreRow> score_run(const RunContents& run, const Truth& truth,
                                double change_point_threshold);

void write_scores(const std::filesystem::path& path, const std::vector<ScoreRow>& rows);

// Long-format plot data under run_dir/report/.
void write_plot_data(const std::filesystem::path& run_dir);

}  // namespace pibdfc
