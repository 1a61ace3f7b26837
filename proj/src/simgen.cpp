#include "pibdfc/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <string>

#include "pibdfc/error.hpp"

namespace pibdfc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kDominanceMargin = 0.05;

void add_edge(Eigen::MatrixXi& a, int j, int k) {
  const int R = static_cast<int>(a.rows());
  j = ((j % R) + R) % R;
  k = ((k % R) + R) % R;
  if (j == k) return;
  a(j, k) = a(k, j) = 1;
}

Eigen::MatrixXd normalize_unit_diagonal(const Eigen::MatrixXd& omega) {
  const Eigen::VectorXd inv_sd = omega.diagonal().cwiseSqrt().cwiseInverse();
  return inv_sd.asDiagonal() * omega * inv_sd.asDiagonal();
}

// Precision with the given off-diagonal values and diagonal
// (1 + margin) * row sum + shift; isolated nodes get 1.
Eigen::MatrixXd dominant_precision(const Eigen::MatrixXd& offdiag, double shift) {
  Eigen::MatrixXd omega = offdiag;
  for (Eigen::Index j = 0; j < omega.rows(); ++j) {
    const double rowsum = offdiag.row(j).cwiseAbs().sum();
    omega(j, j) = rowsum > 0.0 ? (1.0 + kDominanceMargin) * rowsum + shift : 1.0;
  }
  return omega;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols) {
      throw DataError("ragged matrix in simulation spec");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

template <class M>
json matrix_to_json(const M& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

std::size_t segment_of(const SimSpec& spec, int t) {
  std::size_t seg = 0;
  for (int sw : spec.switch_times) {
    if (t >= sw) ++seg;
  }
  return seg % spec.regimes.size();
}

StateSequence simulate_path(const SimSpec& spec, RngStream& rng) {
  StateSequence seq(static_cast<std::size_t>(spec.T));
  seq[0] = spec.initial_state;
  for (int t = 0; t + 1 < spec.T; ++t) {
    const auto& q = spec.regimes[segment_of(spec, t)].q;
    seq[static_cast<std::size_t>(t + 1)] = static_cast<int>(
        rng.categorical(q.row(seq[static_cast<std::size_t>(t)]).transpose()));
  }
  return seq;
}

}  // namespace

void SimSpec::validate() const {
  auto fail = [](const std::string& m) { throw DataError("simulation spec: " + m); };
  if (T < 2 || R < 1 || N < 1 || S < 1) fail("T >= 2, R, N, S >= 1 required");
  if (static_cast<int>(adjacencies.size()) != S) fail("need one adjacency per state");
  for (const auto& a : adjacencies) {
    if (a.rows() != R || a.cols() != R) fail("adjacency must be R x R");
    if (a != a.transpose()) fail("adjacency must be symmetric");
    if ((a.diagonal().array() != 0).any()) fail("adjacency diagonal must be zero");
    if (((a.array() != 0) && (a.array() != 1)).any()) fail("adjacency must be binary");
  }
  if (regimes.empty()) fail("at least one transition regime is required");
  for (const auto& r : regimes) {
    if (r.q.rows() != S || r.q.cols() != S) fail("Q must be S x S");
    if ((r.q.array() < 0).any()) fail("Q entries must be non-negative");
    for (Eigen::Index k = 0; k < S; ++k) {
      if (std::abs(r.q.row(k).sum() - 1.0) > 1e-9) fail("Q rows must sum to 1");
    }
  }
  for (int sw : switch_times) {
    if (sw < 1 || sw >= T) fail("switch times must lie in [1, T)");
  }
  if (!std::is_sorted(switch_times.begin(), switch_times.end())) {
    fail("switch times must be increasing");
  }
  if (!(target_mean_abs_pcorr > 0.0 && target_mean_abs_pcorr < 1.0)) {
    fail("target_mean_abs_pcorr must lie in (0, 1)");
  }
  if (initial_state < 0 || initial_state >= S) fail("initial state out of range");
}

const std::vector<double>& signal_presets() {
  static const std::vector<double> presets{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  return presets;
}

std::vector<Eigen::MatrixXi> default_adjacencies(int R) {
  if (R < 4) throw DataError("default adjacencies need R >= 4");
  const int half = R / 2;
  std::vector<Eigen::MatrixXi> out(3, Eigen::MatrixXi::Zero(R, R));
  // State 1: neighbouring pairs plus two bridges.
  for (int k = 0; k + 1 < R; k += 2) add_edge(out[0], k, k + 1);
  add_edge(out[0], 1, 2);
  add_edge(out[0], half + 1, half + 2);
  // State 2: mirrored pairs plus two bridges.
  for (int k = 0; k < half; ++k) add_edge(out[1], k, R - 1 - k);
  add_edge(out[1], 3, 4);
  add_edge(out[1], R - 5, R - 4);
  // State 3: pairs half a network apart plus two bridges.
  for (int k = 0; k < half; ++k) add_edge(out[2], k, k + half);
  add_edge(out[2], 0, 4);
  add_edge(out[2], half, half + 4);
  return out;
}

std::vector<QRegime> default_regimes() {
  QRegime off;
  off.covariate = 0.0;
  off.q.resize(3, 3);
  off.q << 0.98, 0.02, 0.0,
           0.1, 0.9, 0.0,
           0.0, 0.5, 0.5;
  QRegime on;
  on.covariate = 1.0;
  on.q.resize(3, 3);
  on.q << 0.0, 0.5, 0.5,
          0.0, 0.7, 0.3,
          0.0, 0.02, 0.98;
  return {off, on};
}

SimSpec default_sim_spec(int N, double target, std::uint64_t seed) {
  SimSpec spec;
  spec.T = 300;
  spec.R = 16;
  spec.N = N;
  spec.S = 3;
  spec.adjacencies = default_adjacencies(spec.R);
  spec.regimes = default_regimes();
  spec.switch_times = {spec.T / 2};
  spec.target_mean_abs_pcorr = target;
  spec.seed = seed;
  return spec;
}

SimSpec sim_spec_from_json(const json& j) {
  if (!j.is_object()) throw DataError("simulation spec must be a JSON object");
  static const std::set<std::string> known{
      "T", "R", "N", "S", "adjacencies", "regimes", "switch_times",
      "target_mean_abs_pcorr", "seed", "initial_state", "preset"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) {
      throw DataError("simulation spec: unknown key '" + it.key() + "'");
    }
  }
  try {
    SimSpec spec = default_sim_spec();
    spec.T = j.value("T", spec.T);
    spec.R = j.value("R", spec.R);
    spec.N = j.value("N", spec.N);
    spec.S = j.value("S", spec.S);
    spec.target_mean_abs_pcorr = j.value("target_mean_abs_pcorr", spec.target_mean_abs_pcorr);
    spec.seed = j.value("seed", spec.seed);
    spec.initial_state = j.value("initial_state", 1) - 1;
    if (j.contains("adjacencies")) {
      spec.adjacencies.clear();
      for (const auto& a : j["adjacencies"]) {
        spec.adjacencies.push_back(matrix_from_json(a).cast<int>());
      }
    } else if (spec.R != 16 || spec.S != 3) {
      if (spec.S != 3) throw DataError("simulation spec: adjacencies required when S != 3");
      spec.adjacencies = default_adjacencies(spec.R);
    }
    if (j.contains("regimes")) {
      spec.regimes.clear();
      for (const auto& r : j["regimes"]) {
        QRegime q;
        q.covariate = r.at("covariate").get<double>();
        q.q = matrix_from_json(r.at("Q"));
        spec.regimes.push_back(q);
      }
    }
    if (j.contains("switch_times")) {
      spec.switch_times = j["switch_times"].get<std::vector<int>>();
    } else {
      spec.switch_times = {spec.T / 2};
    }
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw DataError(std::string("simulation spec: ") + e.what());
  }
}

json sim_spec_to_json(const SimSpec& spec) {
  json j;
  j["T"] = spec.T;
  j["R"] = spec.R;
  j["N"] = spec.N;
  j["S"] = spec.S;
  j["target_mean_abs_pcorr"] = spec.target_mean_abs_pcorr;
  j["seed"] = spec.seed;
  j["initial_state"] = spec.initial_state + 1;
  j["switch_times"] = spec.switch_times;
  j["adjacencies"] = json::array();
  for (const auto& a : spec.adjacencies) j["adjacencies"].push_back(matrix_to_json(a));
  j["regimes"] = json::array();
  for (const auto& r : spec.regimes) {
    j["regimes"].push_back({{"covariate", r.covariate}, {"Q", matrix_to_json(r.q)}});
  }
  return j;
}

double mean_abs_partial_corr(const Eigen::MatrixXd& omega,
                             const Eigen::MatrixXi& adjacency) {
  double sum = 0.0;
  int count = 0;
  for (Eigen::Index j = 0; j < omega.rows(); ++j) {
    for (Eigen::Index k = j + 1; k < omega.cols(); ++k) {
      if (adjacency(j, k) == 0) continue;
      sum += std::abs(omega(j, k)) / std::sqrt(omega(j, j) * omega(k, k));
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / count;
}

Eigen::MatrixXd random_precision(const Eigen::MatrixXi& adjacency, double target,
                                 RngStream& rng, int max_tries) {
  const Eigen::Index R = adjacency.rows();
  if (adjacency.cols() != R || adjacency != adjacency.transpose() ||
      (adjacency.diagonal().array() != 0).any()) {
    throw DataError("random_precision: adjacency must be symmetric with zero diagonal");
  }
  if ((adjacency.array() == 0).all()) return Eigen::MatrixXd::Identity(R, R);
  if (!(target > 0.0 && target < 1.0)) {
    throw DataError("random_precision: target must lie in (0, 1)");
  }
  for (int attempt = 0; attempt < max_tries; ++attempt) {
    Eigen::MatrixXd off = Eigen::MatrixXd::Zero(R, R);
    for (Eigen::Index j = 0; j < R; ++j) {
      for (Eigen::Index k = j + 1; k < R; ++k) {
        if (adjacency(j, k) != 0) off(j, k) = off(k, j) = 2.0 * rng.uniform() - 1.0;
      }
    }
    auto strength = [&](double shift) {
      return mean_abs_partial_corr(dominant_precision(off, shift), adjacency);
    };
    if (strength(0.0) < target) continue;
    // Strength falls monotonically as the diagonal grows.
    double lo = 0.0;
    double hi = off.cwiseAbs().maxCoeff();
    while (strength(hi) > target) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      if (strength(mid) > target) lo = mid; else hi = mid;
    }
    return normalize_unit_diagonal(dominant_precision(off, 0.5 * (lo + hi)));
  }
  throw DataError("random_precision: target mean |partial correlation| " +
                  std::to_string(target) + " is infeasible for this pattern");
}

Eigen::VectorXd covariate_series(const SimSpec& spec) {
  Eigen::VectorXd x(spec.T);
  for (int t = 0; t < spec.T; ++t) x(t) = spec.regimes[segment_of(spec, t)].covariate;
  return x;
}

std::vector<StateSequence> simulate_states(const SimSpec& spec, RngStream& rng) {
  spec.validate();
  std::vector<StateSequence> out;
  for (int i = 0; i < spec.N; ++i) out.push_back(simulate_path(spec, rng));
  return out;
}

SimResult simulate_dataset(const SimSpec& spec) {
  spec.validate();
  SimResult out;
  RngStream prec_rng(spec.seed, 0);
  for (const auto& a : spec.adjacencies) {
    out.truth.precisions.push_back(random_precision(a, spec.target_mean_abs_pcorr, prec_rng));
    out.truth.adjacencies.push_back(a);
  }
  std::vector<Eigen::MatrixXd> upper;
  for (const auto& p : out.truth.precisions) {
    Eigen::LLT<Eigen::MatrixXd> llt(p);
    upper.push_back(llt.matrixU());
  }
  out.truth.covariate = covariate_series(spec);
  std::vector<SubjectData> subjects;
  for (int i = 0; i < spec.N; ++i) {
    RngStream rng(spec.seed, 100 + static_cast<std::uint64_t>(i));
    StateSequence seq = simulate_path(spec, rng);
    SubjectData sd;
    sd.subject_id = "subject" + std::to_string(i + 1);
    sd.series.resize(spec.T, spec.R);
    Eigen::VectorXd z(spec.R);
    for (int t = 0; t < spec.T; ++t) {
      for (int r = 0; r < spec.R; ++r) z(r) = rng.normal();
      // y = U^{-1} z has covariance (U^T U)^{-1} = omega^{-1}.
      const auto& u = upper[static_cast<std::size_t>(seq[static_cast<std::size_t>(t)])];
      sd.series.row(t) = u.triangularView<Eigen::Upper>().solve(z).transpose();
    }
    sd.covariates = out.truth.covariate;
    subjects.push_back(std::move(sd));
    out.truth.sequences.push_back(std::move(seq));
  }
  out.dataset = make_dataset(std::move(subjects));
  return out;
}

void write_simulation(const SimResult& sim, const SimSpec& spec, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "truth", ec);
  if (ec) throw DataError("cannot create " + (dir / "truth").string() + ": " + ec.message());
  save_dataset(sim.dataset, dir);
  const fs::path truth = dir / "truth";
  for (std::size_t s = 0; s < sim.truth.precisions.size(); ++s) {
    const std::string tag = std::to_string(s + 1);
    write_table(truth / ("precision_state" + tag + ".csv"), sim.truth.precisions[s]);
    write_table(truth / ("adjacency_state" + tag + ".csv"),
                sim.truth.adjacencies[s].cast<double>());
  }
  for (std::size_t i = 0; i < sim.truth.sequences.size(); ++i) {
    const auto& seq = sim.truth.sequences[i];
    Eigen::MatrixXd col(static_cast<Eigen::Index>(seq.size()), 1);
    for (std::size_t t = 0; t < seq.size(); ++t) {
      col(static_cast<Eigen::Index>(t), 0) = seq[t] + 1;
    }
    write_table(truth / ("states_subject" + std::to_string(i + 1) + ".csv"), col);
  }
  write_table(truth / "covariate.csv", sim.truth.covariate);
  std::ofstream out(dir / "sim_spec.json");
  if (!out) throw DataError("cannot write " + (dir / "sim_spec.json").string());
  out << sim_spec_to_json(spec).dump(2) << '\n';
}

}  // namespace pibdfc
