#include "pibdfc/data_model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pibdfc/error.hpp"

namespace pibdfc {

namespace fs = std::filesystem;
using nlohmann::json;

Eigen::Index Dataset::total_times() const {
  Eigen::Index total = 0;
  for (const auto& s : subjects) total += s.n_times();
  return total;
}

namespace {

std::string cell_ref(std::size_t row, std::size_t col) {
  return "(" + std::to_string(row + 1) + "," + std::to_string(col + 1) + ")";
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() &&
           (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) {
      ++i;
    }
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ',' && line[j] != ' ' &&
           line[j] != '\t' && line[j] != '\r') {
      ++j;
    }
    out.push_back(line.substr(i, j - i));
    i = j;
    while (i < line.size() &&
           (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) {
      ++i;
    }
    if (i < line.size() && line[i] == ',') {
      ++i;
      // An empty field between two commas is a malformed cell.
      std::size_t k = i;
      while (k < line.size() && (line[k] == ' ' || line[k] == '\t')) ++k;
      if (k >= line.size() || line[k] == ',' || line[k] == '\r') {
        out.emplace_back();
      }
    }
  }
  return out;
}

double parse_cell(std::string_view s, std::size_t row, std::size_t col,
                  const fs::path& path) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end) {
    throw DataError(path.string() + ": non-numeric cell at " +
                    cell_ref(row, col));
  }
  if (!std::isfinite(v)) {
    throw DataError(path.string() + ": non-finite value at " +
                    cell_ref(row, col));
  }
  return v;
}

void check_finite(const Eigen::MatrixXd& m, const std::string& what) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (!std::isfinite(m(r, c))) {
        throw DataError(what + ": non-finite value at " +
                        cell_ref(static_cast<std::size_t>(r),
                                 static_cast<std::size_t>(c)));
      }
    }
  }
}

}  // namespace

Eigen::MatrixXd read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    auto fields = split_fields(line);
    if (fields.empty()) continue;
    const std::size_t row = rows.size();
    if (row == 0) {
      width = fields.size();
    } else if (fields.size() != width) {
      throw DataError(path.string() + ": row " + std::to_string(row + 1) +
                      " has " + std::to_string(fields.size()) +
                      " columns, expected " + std::to_string(width));
    }
    std::vector<double> values(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      values[c] = parse_cell(fields[c], row, c, path);
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw DataError(path.string() + ": empty table");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rows[r][c];
    }
  }
  return m;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_table(const fs::path& path, const Eigen::MatrixXd& m) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out << ',';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

void validate_dataset(const Dataset& d) {
  if (d.subjects.empty()) throw DataError("dataset has no subjects");
  for (const auto& s : d.subjects) {
    const std::string who = "subject '" + s.subject_id + "'";
    if (s.series.cols() != d.n_regions) {
      throw DataError(who + ": region count " +
                      std::to_string(s.series.cols()) +
                      " differs from R = " + std::to_string(d.n_regions));
    }
    if (s.covariates.cols() != d.n_covariates) {
      throw DataError(who + ": covariate count " +
                      std::to_string(s.covariates.cols()) +
                      " differs from B = " + std::to_string(d.n_covariates));
    }
    if (s.series.rows() != s.covariates.rows()) {
      throw DataError(who + ": row mismatch between series (" +
                      std::to_string(s.series.rows()) + ") and covariates (" +
                      std::to_string(s.covariates.rows()) + ")");
    }
    if (s.series.rows() < 2) {
      throw DataError(who + ": at least two time points are required");
    }
    check_finite(s.series, who + " series");
    check_finite(s.covariates, who + " covariates");
  }
  if (d.n_regions < 1) throw DataError("dataset has no regions");
}

Dataset make_dataset(std::vector<SubjectData> subjects) {
  Dataset d;
  if (!subjects.empty()) {
    d.n_regions = subjects.front().series.cols();
    d.n_covariates = subjects.front().covariates.cols();
  }
  d.subjects = std::move(subjects);
  validate_dataset(d);
  return d;
}

Dataset load_dataset(const std::vector<fs::path>& series_paths,
                     const std::vector<fs::path>& covariate_paths) {
  if (series_paths.size() != covariate_paths.size()) {
    throw DataError("expected one covariate file per series file, got " +
                    std::to_string(series_paths.size()) + " series and " +
                    std::to_string(covariate_paths.size()) + " covariates");
  }
  std::vector<SubjectData> subjects;
  for (std::size_t i = 0; i < series_paths.size(); ++i) {
    SubjectData s;
    s.subject_id = series_paths[i].stem().string();
    s.series = read_table(series_paths[i]);
    s.covariates = read_table(covariate_paths[i]);
    if (s.series.rows() != s.covariates.rows()) {
      throw DataError(series_paths[i].string() + ": row mismatch between " +
                      "series (" + std::to_string(s.series.rows()) +
                      ") and covariates (" +
                      std::to_string(s.covariates.rows()) + ")");
    }
    subjects.push_back(std::move(s));
  }
  return make_dataset(std::move(subjects));
}

Dataset load_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open manifest " + manifest_path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("manifest " + manifest_path.string() + ": " + e.what());
  }
  const fs::path base = manifest_path.parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
  };
  if (!j.contains("subjects") || !j["subjects"].is_array()) {
    throw DataError("manifest must contain a 'subjects' array");
  }
  std::vector<fs::path> series;
  std::vector<fs::path> covs;
  std::vector<std::string> ids;
  for (const auto& entry : j["subjects"]) {
    if (!entry.contains("series") || !entry.contains("covariates")) {
      throw DataError("manifest entry lacks 'series' or 'covariates'");
    }
    series.push_back(resolve(entry["series"].get<std::string>()));
    covs.push_back(resolve(entry["covariates"].get<std::string>()));
    ids.push_back(entry.value("id", series.back().stem().string()));
  }
  Dataset d = load_dataset(series, covs);
  for (std::size_t i = 0; i < ids.size(); ++i) d.subjects[i].subject_id = ids[i];
  return d;
}

void save_dataset(const Dataset& d, const fs::path& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["subjects"] = json::array();
  for (std::size_t i = 0; i < d.subjects.size(); ++i) {
    const auto& s = d.subjects[i];
    const std::string stem = "subject" + std::to_string(i + 1);
    write_table(dir / (stem + "_series.csv"), s.series);
    write_table(dir / (stem + "_covariates.csv"), s.covariates);
    manifest["subjects"].push_back({{"id", s.subject_id},
                                    {"series", stem + "_series.csv"},
                                    {"covariates", stem + "_covariates.csv"}});
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw DataError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

Dataset center_series(const Dataset& d) {
  Dataset out = d;
  for (auto& s : out.subjects) {
    const Eigen::RowVectorXd mean = s.series.colwise().mean();
    s.series.rowwise() -= mean;
  }
  return out;
}

Dataset standardize_covariates(const Dataset& d) {
  Dataset out = d;
  for (auto& s : out.subjects) {
    const Eigen::Index n = s.covariates.rows();
    for (Eigen::Index b = 0; b < s.covariates.cols(); ++b) {
      auto col = s.covariates.col(b);
      const double mean = col.mean();
      col.array() -= mean;
      const double sd =
          n > 1 ? std::sqrt(col.squaredNorm() / static_cast<double>(n - 1))
                : 0.0;
      if (sd > 0.0) col /= sd;
    }
  }
  return out;
}

Eigen::MatrixXd default_z0(int n_states) {
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n_states, n_states);
  for (int r = 1; r < n_states; ++r) z(r, r) = 2.0;
  return z;
}

void ModelConfig::finalize() {
  if (n_states < 1) throw std::invalid_argument("S must be at least 1");
  if (z0.size() == 0) z0 = default_z0(n_states);
  if (initial_state_dist.size() == 0) {
    initial_state_dist =
        Eigen::VectorXd::Constant(n_states, 1.0 / static_cast<double>(n_states));
  }
  validate();
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
  if (n_states < 1) fail("S must be at least 1");
  if (!(sigma_xi > 0) || !(sigma_rho > 0) || !(sigma_z > 0) ||
      !(sigma_eta > 0)) {
    fail("prior variances must be positive");
  }
  if (!(tau0 > 0)) fail("tau0 must be positive");
  if (!(diag_prior_rate >= 0)) fail("diag_prior_rate must be non-negative");
  if (n_burn < 0 || n_samples < 1 || thin < 1) {
    fail("n_burn >= 0, n_samples >= 1 and thin >= 1 are required");
  }
  if (!(q_star > 0 && q_star < 1)) fail("q_star must lie in (0, 1)");
  if (!(fixed_threshold > 0 && fixed_threshold < 1)) {
    fail("fixed_threshold must lie in (0, 1)");
  }
  if (!(change_point_threshold >= 0 && change_point_threshold <= 1)) {
    fail("change_point_threshold must lie in [0, 1]");
  }
  if (init_window < 2) fail("init_window must be at least 2");
  if (init_ghs_sweeps < 0) fail("init_ghs_sweeps must be non-negative");
  if (z0.rows() != n_states || z0.cols() != n_states) {
    fail("z0 must be S x S");
  }
  if (!z0.allFinite()) fail("z0 must be finite");
  if (initial_state_dist.size() != n_states) {
    fail("initial_state_dist must have length S");
  }
  if ((initial_state_dist.array() < 0).any() ||
      std::abs(initial_state_dist.sum() - 1.0) > 1e-9) {
    fail("initial_state_dist must be a probability vector");
  }
}

ModelConfig preset_sim1() {
  ModelConfig c;
  c.finalize();
  return c;
}

ModelConfig preset_case_study() {
  ModelConfig c;
  c.sigma_z = 0.05;
  c.sigma_eta = 0.05;
  c.finalize();
  return c;
}

ModelConfig preset_by_name(const std::string& name) {
  if (name == "sim1") return preset_sim1();
  if (name == "case-study") return preset_case_study();
  throw std::invalid_argument("unknown preset '" + name + "'");
}

std::string to_string(ThresholdMode m) {
  switch (m) {
    case ThresholdMode::bfdr: return "bfdr";
    case ThresholdMode::fixed_threshold: return "fixed_threshold";
    case ThresholdMode::ci50: return "ci50";
  }
  return "bfdr";
}

ThresholdMode threshold_mode_from_string(const std::string& s) {
  if (s == "bfdr") return ThresholdMode::bfdr;
  if (s == "fixed_threshold" || s == "fixed") {
    return ThresholdMode::fixed_threshold;
  }
  if (s == "ci50") return ThresholdMode::ci50;
  throw std::invalid_argument("unknown threshold mode '" + s + "'");
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols) {
      throw std::invalid_argument("ragged matrix in config");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

}  // namespace

json config_to_json(const ModelConfig& c) {
  json j;
  j["S"] = c.n_states;
  j["sigma_xi"] = c.sigma_xi;
  j["sigma_rho"] = c.sigma_rho;
  j["sigma_z"] = c.sigma_z;
  j["sigma_eta"] = c.sigma_eta;
  j["z0"] = matrix_to_json(c.z0);
  j["tau0"] = c.tau0;
  j["diag_prior_rate"] = c.diag_prior_rate;
  j["shared_global_shrinkage"] = c.shared_global_shrinkage;
  j["n_burn"] = c.n_burn;
  j["n_samples"] = c.n_samples;
  j["thin"] = c.thin;
  j["seed"] = c.seed;
  j["q_star"] = c.q_star;
  j["initial_state_dist"] = std::vector<double>(
      c.initial_state_dist.data(),
      c.initial_state_dist.data() + c.initial_state_dist.size());
  j["threshold_mode"] = to_string(c.threshold_mode);
  j["fixed_threshold"] = c.fixed_threshold;
  j["kappa_estimator"] =
      c.kappa_estimator == KappaEstimator::median ? "median" : "mean";
  j["pool_states"] = c.pool_states;
  j["change_point_threshold"] = c.change_point_threshold;
  j["init_window"] = c.init_window;
  j["init_ghs_sweeps"] = c.init_ghs_sweeps;
  return j;
}

ModelConfig config_from_json(const json& j, ModelConfig base) {
  if (!j.is_object()) throw std::invalid_argument("config must be an object");
  const int old_states = base.n_states;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "S") base.n_states = v.get<int>();
    else if (k == "sigma_xi") base.sigma_xi = v.get<double>();
    else if (k == "sigma_rho") base.sigma_rho = v.get<double>();
    else if (k == "sigma_z") base.sigma_z = v.get<double>();
    else if (k == "sigma_eta") base.sigma_eta = v.get<double>();
    else if (k == "z0") base.z0 = matrix_from_json(v);
    else if (k == "tau0") base.tau0 = v.get<double>();
    else if (k == "diag_prior_rate") base.diag_prior_rate = v.get<double>();
    else if (k == "shared_global_shrinkage") base.shared_global_shrinkage = v.get<bool>();
    else if (k == "n_burn") base.n_burn = v.get<int>();
    else if (k == "n_samples") base.n_samples = v.get<int>();
    else if (k == "thin") base.thin = v.get<int>();
    else if (k == "seed") base.seed = v.get<std::uint64_t>();
    else if (k == "q_star") base.q_star = v.get<double>();
    else if (k == "initial_state_dist") {
      auto vec = v.get<std::vector<double>>();
      base.initial_state_dist =
          Eigen::Map<Eigen::VectorXd>(vec.data(), static_cast<Eigen::Index>(vec.size()));
    } else if (k == "threshold_mode") {
      base.threshold_mode = threshold_mode_from_string(v.get<std::string>());
    } else if (k == "fixed_threshold") base.fixed_threshold = v.get<double>();
    else if (k == "kappa_estimator") {
      const auto s = v.get<std::string>();
      if (s == "median") base.kappa_estimator = KappaEstimator::median;
      else if (s == "mean") base.kappa_estimator = KappaEstimator::mean;
      else throw std::invalid_argument("kappa_estimator must be median or mean");
    } else if (k == "pool_states") base.pool_states = v.get<bool>();
    else if (k == "change_point_threshold") base.change_point_threshold = v.get<double>();
    else if (k == "init_window") base.init_window = v.get<int>();
    else if (k == "init_ghs_sweeps") base.init_ghs_sweeps = v.get<int>();
    else throw std::invalid_argument("unknown config key '" + k + "'");
  }
  if (base.n_states != old_states) {
    if (!j.contains("z0")) base.z0.resize(0, 0);
    if (!j.contains("initial_state_dist")) base.initial_state_dist.resize(0);
  }
  base.finalize();
  return base;
}

}  // namespace pibdfc
