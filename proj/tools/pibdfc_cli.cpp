#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pibdfc/data_model.hpp"
#include "pibdfc/error.hpp"
#include "pibdfc/run_io.hpp"
#include "pibdfc/sampler.hpp"
#include "pibdfc/simgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pibdfc;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

fs::path resolve_out(const std::string& out, const char* default_leaf) {
  if (!out.empty()) return out;
  if (const char* root = std::getenv("PIBDFC_OUT"); root && *root) {
    return fs::path(root) / default_leaf;
  }
  throw UsageError("no output directory: pass --out or set PIBDFC_OUT");
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw DataError("cannot create output directory " + dir.string() +
                    (ec ? ": " + ec.message() : ""));
  }
}

struct SimulateArgs {
  std::string spec;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> n_subjects;
  std::optional<double> signal;
};

int cmd_simulate(const SimulateArgs& a) {
  const auto start = Clock::now();
  SimSpec spec = default_sim_spec();
  json inputs = json::object();
  if (!a.spec.empty()) {
    spec = sim_spec_from_json(read_json(a.spec));
    inputs[a.spec] = fnv1a_file(a.spec);
  }
  if (a.seed) spec.seed = *a.seed;
  if (a.n_subjects) spec.N = *a.n_subjects;
  if (a.signal) spec.target_mean_abs_pcorr = *a.signal;
  spec.validate();
  const fs::path dir = resolve_out(a.out, "simulation");
  make_dir(dir);
  const SimResult sim = simulate_dataset(spec);
  write_simulation(sim, spec, dir);

  json manifest;
  manifest["command"] = "simulate";
  manifest["version"] = PIBDFC_VERSION;
  manifest["seed"] = spec.seed;
  manifest["spec"] = sim_spec_to_json(spec);
  manifest["inputs"] = inputs;
  manifest["status"] = "complete";
  manifest["timings"] = {{"total_seconds", seconds_since(start)}};
  write_json(dir / "run_manifest.json", manifest);
  std::cout << "wrote " << spec.N << " subjects to " << dir.string() << '\n';
  return 0;
}

struct FitArgs {
  std::string manifest;
  std::string config;
  std::string preset;
  std::string out;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::optional<double> q_star;
  std::string threshold_mode;
  std::optional<int> n_states;
  std::optional<int> n_burn;
  std::optional<int> n_samples;
  std::optional<int> thin;
  std::optional<double> change_point_threshold;
  bool center = false;
  bool standardize = false;
  bool progress = false;
};

ModelConfig build_config(const FitArgs& a, json& inputs) {
  ModelConfig config = a.preset.empty() ? ModelConfig{} : preset_by_name(a.preset);
  config.finalize();
  if (!a.config.empty()) {
    inputs[a.config] = fnv1a_file(a.config);
    try {
      config = config_from_json(read_json(a.config), config);
    } catch (const std::exception& e) {
      throw DataError(a.config + ": " + e.what());
    }
  }
  json overrides = json::object();
  if (a.seed) overrides["seed"] = *a.seed;
  if (a.q_star) overrides["q_star"] = *a.q_star;
  if (!a.threshold_mode.empty()) overrides["threshold_mode"] = a.threshold_mode;
  if (a.n_states) overrides["S"] = *a.n_states;
  if (a.n_burn) overrides["n_burn"] = *a.n_burn;
  if (a.n_samples) overrides["n_samples"] = *a.n_samples;
  if (a.thin) overrides["thin"] = *a.thin;
  if (a.change_point_threshold) overrides["change_point_threshold"] = *a.change_point_threshold;
  try {
    return config_from_json(overrides, config);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

int cmd_fit(const FitArgs& a) {
  const auto start = Clock::now();
  json inputs = json::object();
  const ModelConfig config = build_config(a, inputs);
  const fs::path dir = resolve_out(a.out, "run");

  Dataset data = load_manifest(a.manifest);
  inputs[a.manifest] = fnv1a_file(a.manifest);
  {
    const json m = read_json(a.manifest);
    const fs::path base = fs::path(a.manifest).parent_path();
    for (const auto& s : m.at("subjects")) {
      for (const char* key : {"series", "covariates"}) {
        fs::path p = s.at(key).get<std::string>();
        if (p.is_relative()) p = base / p;
        inputs[p.string()] = fnv1a_file(p);
      }
    }
  }
  if (a.center) data = center_series(data);
  if (a.standardize) data = standardize_covariates(data);
  make_dir(dir);

  json manifest;
  manifest["command"] = "fit";
  manifest["version"] = PIBDFC_VERSION;
  manifest["seed"] = config.seed;
  manifest["config"] = config_to_json(config);
  manifest["options"] = {{"center", a.center},
                         {"standardize_covariates", a.standardize},
                         {"workers", a.workers}};
  manifest["inputs"] = inputs;
  const double load_seconds = seconds_since(start);

  RunOptions options;
  options.workers = a.workers;
  const int total = config.n_burn + config.n_samples;
  if (a.progress) {
    options.on_sweep = [total](int k) {
      if (k % 100 == 0 || k == total) std::cerr << "sweep " << k << "/" << total << '\n';
    };
  }
  const auto sample_start = Clock::now();
  RunResult result;
  try {
    result = run_chain(data, config, options);
  } catch (const std::exception& e) {
    manifest["status"] = "failed";
    manifest["error"] = e.what();
    manifest["timings"] = {{"load_seconds", load_seconds},
                           {"sampling_seconds", seconds_since(sample_start)}};
    write_json(dir / "run_manifest.json", manifest);
    throw;
  }
  const double sampling_seconds = seconds_since(sample_start);

  const auto summary_start = Clock::now();
  const Report report = summarize(result.draws, config, data);
  write_report(dir, report, config, data);
  write_trace(dir, result.trace, config.n_states);
  manifest["status"] = "complete";
  manifest["n_draws"] = result.draws.size();
  manifest["timings"] = {{"load_seconds", load_seconds},
                         {"sampling_seconds", sampling_seconds},
                         {"summary_seconds", seconds_since(summary_start)},
                         {"total_seconds", seconds_since(start)}};
  write_json(dir / "run_manifest.json", manifest);

  std::cout << "fit complete: " << result.draws.size() << " draws, output in "
            << dir.string() << '\n';
  for (std::size_t s = 0; s < report.states.size(); ++s) {
    std::cout << "  state " << s + 1 << ": occupancy " << report.states[s].occupancy
              << ", edges " << report.states[s].selection.adjacency.sum() / 2 << '\n';
  }
  return 0;
}

struct ScoreArgs {
  std::string run;
  std::string truth;
  std::string out;
  double change_point_threshold = 0.95;
};

int cmd_score(const ScoreArgs& a) {
  const RunContents run = read_run(a.run);
  const Truth truth = read_truth(a.truth);
  const auto rows = score_run(run, truth, a.change_point_threshold);
  const fs::path out = a.out.empty() ? fs::path(a.run) / "scores.csv" : fs::path(a.out);
  write_scores(out, rows);
  for (const auto& r : rows) {
    std::cout << r.metric << ',' << r.state << ',' << r.value << '\n';
  }
  return 0;
}

int cmd_report(const std::string& run) {
  write_plot_data(run);
  std::cout << "plot data written to " << (fs::path(run) / "report").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Predictor-informed Bayesian dynamic functional connectivity"};
  app.set_version_flag("--version", PIBDFC_VERSION);
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic multi-subject dataset");
  simulate->add_option("--spec", sim.spec, "Simulation spec (JSON)")->check(CLI::ExistingFile);
  simulate->add_option("--out", sim.out, "Output directory (default $PIBDFC_OUT/simulation)");
  simulate->add_option("--seed", sim.seed, "Random seed");
  simulate->add_option("--subjects", sim.n_subjects, "Number of subjects")->check(CLI::PositiveNumber);
  simulate->add_option("--signal", sim.signal, "Mean |partial correlation| of true edges");

  FitArgs fit;
  auto* fitc = app.add_subcommand("fit", "Run the MCMC sampler and write summaries");
  fitc->add_option("--manifest", fit.manifest, "Dataset manifest (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  fitc->add_option("--config", fit.config, "Model config (JSON)")->check(CLI::ExistingFile);
  fitc->add_option("--preset", fit.preset, "Named hyperparameter preset")
      ->check(CLI::IsMember({"sim1", "case-study"}));
  fitc->add_option("--out", fit.out, "Run directory (default $PIBDFC_OUT/run)");
  fitc->add_option("--seed", fit.seed, "Random seed");
  fitc->add_option("--workers", fit.workers, "Worker threads")->check(CLI::PositiveNumber);
  fitc->add_option("--q-star", fit.q_star, "BFDR level");
  fitc->add_option("--threshold-mode", fit.threshold_mode, "Edge selection rule")
      ->check(CLI::IsMember({"bfdr", "fixed_threshold", "ci50"}));
  fitc->add_option("--states", fit.n_states, "Number of latent states");
  fitc->add_option("--burn", fit.n_burn, "Burn-in sweeps");
  fitc->add_option("--samples", fit.n_samples, "Post burn-in sweeps");
  fitc->add_option("--thin", fit.thin, "Keep every thin-th post burn-in sweep");
  fitc->add_option("--change-point-threshold", fit.change_point_threshold,
                   "Posterior probability for flagging change points");
  fitc->add_flag("--center", fit.center, "Mean-center each region within each subject");
  fitc->add_flag("--standardize-covariates", fit.standardize,
                 "Z-score each covariate within each subject");
  fitc->add_flag("--progress", fit.progress, "Print sweep progress to stderr");

  ScoreArgs score;
  auto* scorec = app.add_subcommand("score", "Score a run against simulation truth");
  scorec->add_option("--run", score.run, "Run directory")->required();
  scorec->add_option("--truth", score.truth, "Truth directory")->required();
  scorec->add_option("--out", score.out, "Score CSV (default <run>/scores.csv)");
  scorec->add_option("--change-point-threshold", score.change_point_threshold,
                     "Posterior probability for counting change points");

  std::string report_run;
  auto* reportc = app.add_subcommand("report", "Write plot-ready data for a finished run");
  reportc->add_option("--run", report_run, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*fitc) return cmd_fit(fit);
    if (*scorec) return cmd_score(score);
    if (*reportc) return cmd_report(report_run);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
