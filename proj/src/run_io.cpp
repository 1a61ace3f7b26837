#include "pibdfc/run_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "pibdfc/error.hpp"

namespace pibdfc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::string idx(std::size_t k) { return std::to_string(k + 1); }

json effect_json(const EffectSummary& e, const char* row_name, const char* col_name) {
  return {{row_name, e.row + 1}, {col_name, e.col + 1}, {"mean", e.mean},
          {"exp_mean", e.exp_mean}, {"q025", e.q025}, {"q50", e.q50},
          {"q975", e.q975}};
}

Eigen::MatrixXi to_adjacency(const Eigen::MatrixXd& m, const fs::path& path) {
  if (m.rows() != m.cols()) throw DataError(path.string() + ": matrix must be square");
  Eigen::MatrixXi a = Eigen::MatrixXi::Zero(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.rows(); ++j) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      if (m(j, k) != 0.0 && m(j, k) != 1.0) {
        throw DataError(path.string() + ": adjacency entries must be 0 or 1");
      }
      a(j, k) = m(j, k) != 0.0 ? 1 : 0;
    }
  }
  return a;
}

StateSequence to_states(const Eigen::VectorXd& v, const fs::path& path) {
  StateSequence out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index t = 0; t < v.size(); ++t) {
    const double x = v(t);
    if (x < 1 || x != std::floor(x)) {
      throw DataError(path.string() + ": state labels must be positive integers");
    }
    out[static_cast<std::size_t>(t)] = static_cast<int>(x) - 1;
  }
  return out;
}

std::size_t count_files(const fs::path& dir, const std::string& prefix) {
  std::size_t n = 0;
  while (fs::exists(dir / (prefix + idx(n) + ".csv"))) ++n;
  return n;
}

}  // namespace

std::string fnv1a_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize k = 0; k < in.gcount(); ++k) {
      h ^= static_cast<unsigned char>(buf[k]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_report(const fs::path& dir, const Report& report, const ModelConfig& config,
                  const Dataset& d) {
  const std::size_t S = report.states.size();
  json summary;
  summary["n_draws"] = report.n_draws;
  summary["n_states"] = S;
  summary["n_subjects"] = report.subjects.size();
  summary["n_regions"] = d.n_regions;
  summary["threshold_mode"] = to_string(config.threshold_mode);
  summary["states"] = json::array();

  for (std::size_t s = 0; s < S; ++s) {
    const auto& st = report.states[s];
    write_table(dir / ("omega_state" + idx(s) + ".csv"), st.omega_mean);
    write_table(dir / ("partial_corr_state" + idx(s) + ".csv"), st.partial_corr);
    auto out = open_out(dir / ("edges_state" + idx(s) + ".csv"));
    out << "j,k,kappa_hat,partial_corr,selected\n";
    const auto R = st.omega_mean.rows();
    for (Eigen::Index j = 0; j < R; ++j) {
      for (Eigen::Index k = j + 1; k < R; ++k) {
        out << j + 1 << ',' << k + 1 << ',' << format_double(st.selection.kappa_hat(j, k))
            << ',' << format_double(st.partial_corr(j, k)) << ','
            << st.selection.adjacency(j, k) << '\n';
      }
    }
    summary["states"].push_back({{"state", s + 1},
                                 {"occupancy", st.occupancy},
                                 {"eta_star", st.selection.eta_star},
                                 {"achieved_bfdr", st.selection.achieved_bfdr},
                                 {"n_edges", st.selection.adjacency.sum() / 2}});
  }

  for (std::size_t i = 0; i < report.subjects.size(); ++i) {
    const auto& sr = report.subjects[i];
    const auto& ss = sr.states;
    auto out = open_out(dir / ("states_subject" + idx(i) + ".csv"));
    out << "t,map_state";
    for (std::size_t s = 0; s < S; ++s) out << ",prob_state" << s + 1;
    out << '\n';
    for (std::size_t t = 0; t < ss.map_states.size(); ++t) {
      out << t + 1 << ',' << ss.map_states[t] + 1;
      for (std::size_t s = 0; s < S; ++s) {
        out << ',' << format_double(ss.state_prob(static_cast<Eigen::Index>(t),
                                                  static_cast<Eigen::Index>(s)));
      }
      out << '\n';
    }
    // Row t reports P(s_t != s_{t-1}) for t = 2..T.
    auto cp = open_out(dir / ("changepoints_subject" + idx(i) + ".csv"));
    cp << "t,prob,flagged\n";
    for (Eigen::Index t = 0; t < ss.change_point_prob.size(); ++t) {
      const double p = ss.change_point_prob(t);
      cp << t + 2 << ',' << format_double(p) << ','
         << (p > config.change_point_threshold ? 1 : 0) << '\n';
    }
    json ej;
    ej["subject"] = i + 1;
    ej["subject_id"] = sr.subject_id;
    ej["occupancy"] = std::vector<double>(ss.occupancy.data(),
                                          ss.occupancy.data() + ss.occupancy.size());
    ej["n_change_points"] = ss.flagged(config.change_point_threshold).size();
    ej["exp_rho"] = json::array();
    for (const auto& e : sr.rho_effects) {
      ej["exp_rho"].push_back(effect_json(e, "state", "covariate"));
    }
    write_json(dir / ("effects_subject" + idx(i) + ".json"), ej);
  }

  json group;
  group["exp_eta"] = json::array();
  for (const auto& e : report.eta_effects) {
    group["exp_eta"].push_back(effect_json(e, "state", "covariate"));
  }
  group["Z"] = json::array();
  for (const auto& e : report.z_summary) {
    group["Z"].push_back(effect_json(e, "from", "to"));
  }
  write_json(dir / "effects_group.json", group);
  write_json(dir / "summary.json", summary);
}

void write_trace(const fs::path& dir, const std::vector<TraceRow>& trace, int n_states) {
  auto out = open_out(dir / "trace.csv");
  out << "iteration";
  for (int s = 0; s < n_states; ++s) out << ",tau2_state" << s + 1;
  for (int s = 0; s < n_states; ++s) out << ",occupancy_state" << s + 1;
  out << '\n';
  for (const auto& row : trace) {
    out << row.iteration;
    for (double v : row.tau2) out << ',' << format_double(v);
    for (double v : row.occupancy) out << ',' << format_double(v);
    out << '\n';
  }
}

Eigen::Index CsvTable::column(const std::string& name) const {
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == name) return static_cast<Eigen::Index>(c);
  }
  throw DataError("missing column '" + name + "'");
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  {
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) table.header.push_back(field);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<double> row;
    while (std::getline(ss, field, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw DataError(path.string() + ": non-numeric cell '" + field + "'");
      }
    }
    if (row.size() != table.header.size()) {
      throw DataError(path.string() + ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return table;
}

RunContents read_run(const fs::path& run_dir) {
  const fs::path summary_path = run_dir / "summary.json";
  if (!fs::exists(summary_path)) {
    throw DataError("incomplete run directory: missing " + summary_path.string());
  }
  RunContents run;
  run.summary = read_json(summary_path);
  if (run.summary.value("n_draws", 0) == 0) throw DataError("no samples stored");
  run.n_states = run.summary.at("n_states").get<int>();
  run.n_subjects = run.summary.at("n_subjects").get<std::size_t>();
  const auto R = run.summary.at("n_regions").get<Eigen::Index>();
  for (int s = 0; s < run.n_states; ++s) {
    const fs::path p = run_dir / ("edges_state" + idx(static_cast<std::size_t>(s)) + ".csv");
    if (!fs::exists(p)) throw DataError("incomplete run directory: missing " + p.string());
    const CsvTable t = read_csv(p);
    const auto cj = t.column("j"), ck = t.column("k"), cs = t.column("selected");
    Eigen::MatrixXi a = Eigen::MatrixXi::Zero(R, R);
    for (Eigen::Index r = 0; r < t.values.rows(); ++r) {
      const auto j = static_cast<Eigen::Index>(t.values(r, cj)) - 1;
      const auto k = static_cast<Eigen::Index>(t.values(r, ck)) - 1;
      if (j < 0 || k < 0 || j >= R || k >= R) throw DataError(p.string() + ": index out of range");
      if (t.values(r, cs) != 0.0) a(j, k) = a(k, j) = 1;
    }
    run.adjacencies.push_back(a);
  }
  for (std::size_t i = 0; i < run.n_subjects; ++i) {
    const fs::path sp = run_dir / ("states_subject" + idx(i) + ".csv");
    const fs::path cp = run_dir / ("changepoints_subject" + idx(i) + ".csv");
    for (const auto& p : {sp, cp}) {
      if (!fs::exists(p)) throw DataError("incomplete run directory: missing " + p.string());
    }
    const CsvTable st = read_csv(sp);
    run.map_states.push_back(to_states(st.values.col(st.column("map_state")), sp));
    const CsvTable ct = read_csv(cp);
    run.change_point_prob.push_back(ct.values.col(ct.column("prob")));
  }
  return run;
}

Truth read_truth(const fs::path& truth_dir) {
  Truth truth;
  const std::size_t S = count_files(truth_dir, "adjacency_state");
  const std::size_t N = count_files(truth_dir, "states_subject");
  if (S == 0) throw DataError("missing truth files: no adjacency_state1.csv in " + truth_dir.string());
  if (N == 0) throw DataError("missing truth files: no states_subject1.csv in " + truth_dir.string());
  for (std::size_t s = 0; s < S; ++s) {
    const fs::path p = truth_dir / ("adjacency_state" + idx(s) + ".csv");
    truth.adjacencies.push_back(to_adjacency(read_table(p), p));
  }
  for (std::size_t i = 0; i < N; ++i) {
    const fs::path p = truth_dir / ("states_subject" + idx(i) + ".csv");
    const Eigen::MatrixXd m = read_table(p);
    if (m.cols() != 1) throw DataError(p.string() + ": expected one column");
    truth.sequences.push_back(to_states(m.col(0), p));
  }
  return truth;
}

std::vector<ScoreRow> score_run(const RunContents& run, const Truth& truth,
                                double change_point_threshold) {
  if (truth.sequences.size() != run.map_states.size()) {
    throw DataError("subject count differs between run (" +
                    std::to_string(run.map_states.size()) + ") and truth (" +
                    std::to_string(truth.sequences.size()) + ")");
  }
  const Eigen::Index R = run.adjacencies.empty() ? 0 : run.adjacencies[0].rows();
  for (const auto& a : truth.adjacencies) {
    if (a.rows() != R) {
      throw DataError("region count differs between run (R = " + std::to_string(R) +
                      ") and truth (R = " + std::to_string(a.rows()) + ")");
    }
  }
  // Score in a label space large enough for both sides.
  const int S = std::max(run.n_states, static_cast<int>(truth.adjacencies.size()));
  const Permutation perm = align_labels(truth.sequences, run.map_states, S);
  const StateScore acc = state_accuracy(truth.sequences, run.map_states, perm);

  std::vector<ScoreRow> rows;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t s = 0; s < truth.adjacencies.size(); ++s) {
    const int e = perm[s];
    const std::string label = idx(s);
    if (e < run.n_states) {
      const EdgeScore es = edge_metrics(truth.adjacencies[s],
                                        run.adjacencies[static_cast<std::size_t>(e)]);
      rows.push_back({"edge_tpr", label, es.tpr});
      rows.push_back({"edge_tnr", label, es.tnr});
      rows.push_back({"edge_f1", label, es.f1});
    } else {
      rows.push_back({"edge_tpr", label, nan});
      rows.push_back({"edge_tnr", label, nan});
      rows.push_back({"edge_f1", label, nan});
    }
    rows.push_back({"state_accuracy", label, acc.accuracy[s] ? *acc.accuracy[s] : nan});
    rows.push_back({"matched_estimated_state", label, static_cast<double>(e + 1)});
  }
  const ChangePointCount cp = count_change_points(run.change_point_prob, change_point_threshold);
  rows.push_back({"change_points_mean", "all", cp.mean});
  std::size_t true_cp = 0;
  for (const auto& seq : truth.sequences) {
    for (std::size_t t = 1; t < seq.size(); ++t) true_cp += seq[t] != seq[t - 1];
  }
  rows.push_back({"true_change_points_mean", "all",
                  static_cast<double>(true_cp) / static_cast<double>(truth.sequences.size())});
  return rows;
}

void write_scores(const fs::path& path, const std::vector<ScoreRow>& rows) {
  auto out = open_out(path);
  out << "metric,state,value\n";
  for (const auto& r : rows) {
    out << r.metric << ',' << r.state << ','
        << (std::isnan(r.value) ? std::string("NA") : format_double(r.value)) << '\n';
  }
}

void write_plot_data(const fs::path& run_dir) {
  const RunContents run = read_run(run_dir);
  const fs::path out_dir = run_dir / "report";
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create " + out_dir.string() + ": " + ec.message());

  for (int s = 0; s < run.n_states; ++s) {
    const std::string tag = idx(static_cast<std::size_t>(s));
    const fs::path pc_path = run_dir / ("partial_corr_state" + tag + ".csv");
    if (!fs::exists(pc_path)) throw DataError("incomplete run directory: missing " + pc_path.string());
    const Eigen::MatrixXd pc = read_table(pc_path);
    const auto& adj = run.adjacencies[static_cast<std::size_t>(s)];
    auto out = open_out(out_dir / ("heatmap_state" + tag + ".csv"));
    out << "row,col,partial_corr,selected,selected_partial_corr\n";
    for (Eigen::Index j = 0; j < pc.rows(); ++j) {
      for (Eigen::Index k = 0; k < pc.cols(); ++k) {
        const int sel = j == k ? 1 : adj(j, k);
        out << j + 1 << ',' << k + 1 << ',' << format_double(pc(j, k)) << ',' << sel << ','
            << format_double(sel ? pc(j, k) : 0.0) << '\n';
      }
    }
  }
  for (std::size_t i = 0; i < run.n_subjects; ++i) {
    auto out = open_out(out_dir / ("raster_subject" + idx(i) + ".csv"));
    out << "subject,t,map_state,change_point_prob\n";
    const auto& seq = run.map_states[i];
    const auto& cp = run.change_point_prob[i];
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const double p = t == 0 ? 0.0 : cp(static_cast<Eigen::Index>(t - 1));
      out << i + 1 << ',' << t + 1 << ',' << seq[t] + 1 << ',' << format_double(p) << '\n';
    }
  }
  const fs::path group_path = run_dir / "effects_group.json";
  if (!fs::exists(group_path)) throw DataError("incomplete run directory: missing " + group_path.string());
  const json group = read_json(group_path);
  auto out = open_out(out_dir / "effects_group.csv");
  out << "parameter,row,col,mean,exp_mean,q025,q50,q975\n";
  auto emit = [&](const json& arr, const char* name, const char* rk, const char* ck) {
    for (const auto& e : arr) {
      out << name << ',' << e.at(rk).get<int>() << ',' << e.at(ck).get<int>() << ','
          << format_double(e.at("mean").get<double>()) << ','
          << format_double(e.at("exp_mean").get<double>()) << ','
          << format_double(e.at("q025").get<double>()) << ','
          << format_double(e.at("q50").get<double>()) << ','
          << format_double(e.at("q975").get<double>()) << '\n';
    }
  };
  emit(group.at("exp_eta"), "exp_eta", "state", "covariate");
  emit(group.at("Z"), "Z", "from", "to");
}

}  // namespace pibdfc
