#include "pibdfc/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>

#include "pibdfc/error.hpp"
#include "pibdfc/parallel.hpp"

namespace pibdfc {

namespace {

// Windowed covariance features, one row per (subject, time).
Eigen::MatrixXd window_features(const Dataset& d, int window) {
  const Eigen::Index R = d.n_regions;
  const Eigen::Index F = R * (R + 1) / 2;
  Eigen::MatrixXd feats(d.total_times(), F);
  Eigen::Index row = 0;
  for (const auto& subj : d.subjects) {
    const auto& y = subj.series;
    const Eigen::Index T = y.rows();
    Eigen::MatrixXd p1 = Eigen::MatrixXd::Zero(T + 1, R);
    Eigen::MatrixXd p2 = Eigen::MatrixXd::Zero(T + 1, F);
    for (Eigen::Index t = 0; t < T; ++t) {
      p1.row(t + 1) = p1.row(t) + y.row(t);
      Eigen::Index f = 0;
      for (Eigen::Index a = 0; a < R; ++a) {
        for (Eigen::Index b = a; b < R; ++b, ++f) {
          p2(t + 1, f) = p2(t, f) + y(t, a) * y(t, b);
        }
      }
    }
    const Eigen::Index half = window / 2;
    for (Eigen::Index t = 0; t < T; ++t) {
      const Eigen::Index lo = std::max<Eigen::Index>(0, t - half);
      const Eigen::Index hi = std::min<Eigen::Index>(T, t - half + window);
      const auto n = static_cast<double>(hi - lo);
      const Eigen::RowVectorXd mean = (p1.row(hi) - p1.row(lo)) / n;
      Eigen::Index f = 0;
      for (Eigen::Index a = 0; a < R; ++a) {
        for (Eigen::Index b = a; b < R; ++b, ++f) {
          feats(row, f) = (p2(hi, f) - p2(lo, f)) / n - mean(a) * mean(b);
        }
      }
      ++row;
    }
  }
  return feats;
}

// Lloyd iterations from a k-means++ seeding; returns labels and inertia.
std::pair<std::vector<int>, double> kmeans_once(const Eigen::MatrixXd& x, int k,
                                                RngStream& rng) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd centers(k, x.cols());
  Eigen::VectorXd d2 = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  centers.row(0) = x.row(static_cast<Eigen::Index>(
      rng.categorical(Eigen::VectorXd::Ones(n))));
  for (int c = 1; c < k; ++c) {
    for (Eigen::Index i = 0; i < n; ++i) {
      d2(i) = std::min(d2(i), (x.row(i) - centers.row(c - 1)).squaredNorm());
    }
    const Eigen::VectorXd w = d2.sum() > 0 ? d2 : Eigen::VectorXd::Ones(n);
    centers.row(c) = x.row(static_cast<Eigen::Index>(rng.categorical(w)));
  }
  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  double inertia = 0.0;
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      const double dist = (centers.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
      inertia += dist;
      if (labels[static_cast<std::size_t>(i)] != static_cast<int>(best)) {
        labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(labels[static_cast<std::size_t>(i)]) += x.row(i);
      counts(labels[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (int c = 0; c < k; ++c) {
      if (counts(c) > 0) centers.row(c) = sums.row(c) / counts(c);
    }
  }
  return {labels, inertia};
}

std::string step_context(int iteration, const char* step) {
  return " [iteration " + std::to_string(iteration) + ", step " + step + "]";
}

template <class Fn>
void with_context(int iteration, const char* step, Fn&& fn) {
  try {
    fn();
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(e.what()) + step_context(iteration, step));
  }
}

}  // namespace

void PosteriorDraws::push(const ChainState& c) {
  std::vector<Eigen::MatrixXd> om;
  std::vector<Eigen::MatrixXd> l2;
  std::vector<double> t2;
  for (const auto& p : c.precisions) {
    om.push_back(p.omega);
    l2.push_back(p.lambda2);
    t2.push_back(p.tau2);
  }
  omega.push_back(std::move(om));
  lambda2.push_back(std::move(l2));
  tau2.push_back(std::move(t2));
  xi.push_back(c.trans.xi);
  rho.push_back(c.trans.rho);
  Z.push_back(c.trans.Z);
  eta.push_back(c.trans.eta);
  sequences.push_back(c.sequences);
}

std::vector<StateSequence> kmeans_initial_states(const Dataset& d, int n_states,
                                                 int window, RngStream& rng) {
  std::vector<StateSequence> seqs;
  for (const auto& s : d.subjects) {
    seqs.emplace_back(static_cast<std::size_t>(s.n_times()), 0);
  }
  if (n_states == 1) return seqs;
  const Eigen::MatrixXd feats = window_features(d, window);
  std::vector<int> best;
  double best_inertia = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < 5; ++restart) {
    auto [labels, inertia] = kmeans_once(feats, n_states, rng);
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best = std::move(labels);
    }
  }
  // Relabel by decreasing occupancy, ties broken by first appearance.
  std::vector<int> count(static_cast<std::size_t>(n_states), 0);
  std::vector<int> first(static_cast<std::size_t>(n_states), std::numeric_limits<int>::max());
  for (std::size_t i = 0; i < best.size(); ++i) {
    const auto c = static_cast<std::size_t>(best[i]);
    ++count[c];
    first[c] = std::min(first[c], static_cast<int>(i));
  }
  std::vector<int> order(static_cast<std::size_t>(n_states));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto ua = static_cast<std::size_t>(a);
    const auto ub = static_cast<std::size_t>(b);
    if (count[ua] != count[ub]) return count[ua] > count[ub];
    return first[ua] < first[ub];
  });
  std::vector<int> relabel(static_cast<std::size_t>(n_states));
  for (int k = 0; k < n_states; ++k) {
    relabel[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = k;
  }
  std::size_t pos = 0;
  for (auto& seq : seqs) {
    for (auto& v : seq) v = relabel[static_cast<std::size_t>(best[pos++])];
  }
  return seqs;
}

ChainState initialize(const Dataset& d, const ModelConfig& config,
                      RngStream& rng) {
  validate_dataset(d);
  config.validate();
  const int S = config.n_states;
  if (d.n_regions < 1) throw DataError("R must be at least 1");
  if (S > d.total_times()) {
    throw DataError("S = " + std::to_string(S) + " exceeds the " +
                    std::to_string(d.total_times()) + " available time points");
  }
  ChainState c;
  c.sequences = kmeans_initial_states(d, S, config.init_window, rng);
  c.trans = prior_mean_params(config, d.n_subjects(), d.n_covariates);

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d.n_regions);
  Eigen::VectorXd sum2 = Eigen::VectorXd::Zero(d.n_regions);
  for (const auto& s : d.subjects) {
    sum += s.series.colwise().sum().transpose();
    sum2 += s.series.colwise().squaredNorm().transpose();
  }
  const auto n = static_cast<double>(d.total_times());
  Eigen::VectorXd var = (sum2 - sum.cwiseProduct(sum) / n) / std::max(n - 1.0, 1.0);
  var = var.cwiseMax(1e-8);
  const PrecisionState start = initial_precision(var.cwiseInverse(), config.tau0);
  c.precisions.assign(static_cast<std::size_t>(S), start);

  // Warm the precisions against the initial labels so the first state draw
  // sees state-specific emissions.
  const auto scatters = accumulate_scatters(d, c.sequences, S);
  for (int sweep = 0; sweep < config.init_ghs_sweeps; ++sweep) {
    for (int s = 0; s < S; ++s) {
      auto& p = c.precisions[static_cast<std::size_t>(s)];
      ghs_column_sweep(p, scatters[static_cast<std::size_t>(s)],
                       config.diag_prior_rate, rng);
      if (!config.shared_global_shrinkage) update_global_shrinkage(p, rng);
    }
    if (config.shared_global_shrinkage) update_shared_global_shrinkage(c.precisions, rng);
  }
  return c;
}

void gibbs_sweep(ChainState& chain, const Dataset& d, const ModelConfig& config,
                 std::vector<RngStream>& subject_rngs,
                 std::vector<RngStream>& state_rngs, RngStream& group_rng,
                 RngStream& shared_rng, int workers) {
  const int S = config.n_states;
  const int iter = chain.iteration + 1;
  std::vector<Eigen::MatrixXd> omegas;
  for (const auto& p : chain.precisions) omegas.push_back(p.omega);
  std::optional<EmissionModel> emissions;
  with_context(iter, "emission factorization", [&] { emissions.emplace(omegas); });

  parallel_for(d.n_subjects(), workers, [&](std::size_t i) {
    const auto& subj = d.subjects[i];
    auto& rng = subject_rngs[i];
    auto& xi = chain.trans.xi[i];
    auto& rho = chain.trans.rho[i];
    auto& seq = chain.sequences[i];
    if (S > 1) {
      with_context(iter, "xi", [&] {
        gibbs_update_xi(xi, rho, chain.trans.Z, config.sigma_xi, subj.covariates, seq, rng);
      });
      with_context(iter, "rho", [&] {
        gibbs_update_rho(xi, rho, chain.trans.eta, config.sigma_rho, subj.covariates, seq, rng);
      });
    }
    with_context(iter, "states", [&] {
      const Eigen::MatrixXd ll = emissions->loglik(subj.series);
      const auto q = compute_q_sequence(xi, rho, subj.covariates);
      seq = forward_backward_sample(ll, q, config.initial_state_dist, rng);
    });
  });

  const auto scatters = accumulate_scatters(d, chain.sequences, S);
  parallel_for(static_cast<std::size_t>(S), workers, [&](std::size_t s) {
    with_context(iter, ("precision of state " + std::to_string(s)).c_str(), [&] {
      auto& p = chain.precisions[s];
      ghs_column_sweep(p, scatters[s], config.diag_prior_rate, state_rngs[s]);
      if (!config.shared_global_shrinkage) update_global_shrinkage(p, state_rngs[s]);
    });
  });
  if (config.shared_global_shrinkage) {
    update_shared_global_shrinkage(chain.precisions, shared_rng);
  }

  if (S > 1) gibbs_update_group(chain.trans, config, group_rng);
  chain.trans.check_reference_zeros();
  chain.iteration = iter;
}

RunResult run_chain(const Dataset& d, const ModelConfig& config,
                    const RunOptions& options) {
  RngStream init_rng(config.seed, streams::kInit);
  RunResult out;
  ChainState chain = initialize(d, config, init_rng);

  std::vector<RngStream> subject_rngs;
  for (std::size_t i = 0; i < d.n_subjects(); ++i) {
    subject_rngs.emplace_back(config.seed, streams::kSubjectBase + i);
  }
  std::vector<RngStream> state_rngs;
  for (int s = 0; s < config.n_states; ++s) {
    state_rngs.emplace_back(config.seed, streams::kStateBase + static_cast<std::uint64_t>(s));
  }
  RngStream group_rng(config.seed, streams::kGroup);
  RngStream shared_rng(config.seed, streams::kSharedShrinkage);

  out.draws.n_states = config.n_states;
  out.draws.n_regions = d.n_regions;
  out.draws.n_covariates = d.n_covariates;
  const int total = config.n_burn + config.n_samples;
  const auto total_times = static_cast<double>(d.total_times());
  for (int sweep = 1; sweep <= total; ++sweep) {
    gibbs_sweep(chain, d, config, subject_rngs, state_rngs, group_rng,
                shared_rng, options.workers);
    TraceRow row;
    row.iteration = sweep;
    row.occupancy.assign(static_cast<std::size_t>(config.n_states), 0.0);
    for (const auto& p : chain.precisions) row.tau2.push_back(p.tau2);
    for (const auto& seq : chain.sequences) {
      for (int v : seq) row.occupancy[static_cast<std::size_t>(v)] += 1.0 / total_times;
    }
    out.trace.push_back(std::move(row));
    const int post = sweep - config.n_burn;
    if (post > 0 && post % config.thin == 0) out.draws.push(chain);
    if (options.on_sweep) options.on_sweep(sweep);
  }
  out.final_state = std::move(chain);
  return out;
}

EffectSummary summarize_effect(const std::vector<double>& values,
                               bool exponentiate) {
  EffectSummary e;
  double sum = 0.0;
  for (double v : values) sum += v;
  e.mean = sum / static_cast<double>(values.size());
  e.exp_mean = std::exp(e.mean);
  std::vector<double> scaled = values;
  if (exponentiate) {
    for (auto& v : scaled) v = std::exp(v);
  }
  e.q025 = quantile(scaled, 0.025);
  e.q50 = quantile(scaled, 0.5);
  e.q975 = quantile(scaled, 0.975);
  return e;
}

Report summarize(const PosteriorDraws& draws, const ModelConfig& config,
                 const Dataset& d) {
  if (draws.size() == 0) throw DataError("no samples stored");
  const int S = draws.n_states;
  const Eigen::Index R = draws.n_regions;
  const std::size_t n = draws.size();
  Report rep;
  rep.n_draws = n;

  std::vector<std::vector<Eigen::MatrixXd>> omega_by_state(static_cast<std::size_t>(S));
  std::vector<std::vector<Eigen::MatrixXd>> lambda_by_state(static_cast<std::size_t>(S));
  std::vector<std::vector<double>> tau_by_state(static_cast<std::size_t>(S));
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t s = 0; s < static_cast<std::size_t>(S); ++s) {
      omega_by_state[s].push_back(draws.omega[k][s]);
      lambda_by_state[s].push_back(draws.lambda2[k][s]);
      tau_by_state[s].push_back(draws.tau2[k][s]);
    }
  }

  rep.states.resize(static_cast<std::size_t>(S));
  std::vector<Eigen::MatrixXd> kappas;
  for (std::size_t s = 0; s < static_cast<std::size_t>(S); ++s) {
    auto& st = rep.states[s];
    st.omega_mean = Eigen::MatrixXd::Zero(R, R);
    for (const auto& m : omega_by_state[s]) st.omega_mean += m;
    st.omega_mean /= static_cast<double>(n);
    st.partial_corr = partial_correlations(st.omega_mean);
    kappas.push_back(compute_kappa(lambda_by_state[s], tau_by_state[s],
                                   config.kappa_estimator));
  }

  // BFDR threshold: per state, or one threshold over the pooled entries.
  std::vector<SelectionResult> selections;
  if (config.threshold_mode == ThresholdMode::bfdr && config.pool_states) {
    std::vector<double> pooled;
    for (const auto& k : kappas) {
      auto u = upper_triangle(k);
      pooled.insert(pooled.end(), u.begin(), u.end());
    }
    const auto sel = bfdr_select(pooled, config.q_star);
    std::size_t pos = 0;
    for (const auto& k : kappas) {
      SelectionResult r;
      r.kappa_hat = k;
      r.eta_star = sel.eta_star;
      r.achieved_bfdr = sel.achieved_bfdr;
      r.adjacency = Eigen::MatrixXi::Zero(R, R);
      for (Eigen::Index a = 0; a < R; ++a) {
        for (Eigen::Index b = a + 1; b < R; ++b, ++pos) {
          if (sel.selected[pos]) r.adjacency(a, b) = r.adjacency(b, a) = 1;
        }
      }
      selections.push_back(std::move(r));
    }
  } else {
    for (std::size_t s = 0; s < static_cast<std::size_t>(S); ++s) {
      SelectionResult r;
      switch (config.threshold_mode) {
        case ThresholdMode::bfdr:
          r = bfdr_select_matrix(kappas[s], config.q_star);
          break;
        case ThresholdMode::fixed_threshold:
          r.kappa_hat = kappas[s];
          r.adjacency = fixed_threshold_select(omega_by_state[s], config.fixed_threshold);
          break;
        case ThresholdMode::ci50:
          r.kappa_hat = kappas[s];
          r.adjacency = ci50_select(omega_by_state[s]);
          break;
      }
      selections.push_back(std::move(r));
    }
  }
  for (std::size_t s = 0; s < static_cast<std::size_t>(S); ++s) {
    auto& st = rep.states[s];
    st.selection = std::move(selections[s]);
    st.selection.selected_partial_corr =
        st.partial_corr.cwiseProduct(st.selection.adjacency.cast<double>());
  }

  const std::size_t N = d.n_subjects();
  const auto total_times = static_cast<double>(d.total_times());
  for (std::size_t i = 0; i < N; ++i) {
    SubjectReport sr;
    sr.subject_id = d.subjects[i].subject_id;
    std::vector<StateSequence> seqs;
    seqs.reserve(n);
    for (std::size_t k = 0; k < n; ++k) seqs.push_back(draws.sequences[k][i]);
    sr.states = summarize_states(seqs, S);
    const auto Ti = static_cast<double>(d.subjects[i].n_times());
    for (int s = 0; s < S; ++s) {
      rep.states[static_cast<std::size_t>(s)].occupancy +=
          sr.states.occupancy(s) * Ti / total_times;
    }
    for (int s = 1; s < S; ++s) {
      for (Eigen::Index b = 0; b < draws.n_covariates; ++b) {
        std::vector<double> v(n);
        for (std::size_t k = 0; k < n; ++k) v[k] = draws.rho[k][i](s, b);
        auto e = summarize_effect(v, true);
        e.row = s;
        e.col = static_cast<int>(b);
        sr.rho_effects.push_back(e);
      }
    }
    rep.subjects.push_back(std::move(sr));
  }

  for (int s = 1; s < S; ++s) {
    for (Eigen::Index b = 0; b < draws.n_covariates; ++b) {
      std::vector<double> v(n);
      for (std::size_t k = 0; k < n; ++k) v[k] = draws.eta[k](s, b);
      auto e = summarize_effect(v, true);
      e.row = s;
      e.col = static_cast<int>(b);
      rep.eta_effects.push_back(e);
    }
  }
  for (int r = 0; r < S; ++r) {
    for (int s = 1; s < S; ++s) {
      std::vector<double> v(n);
      for (std::size_t k = 0; k < n; ++k) v[k] = draws.Z[k](r, s);
      auto e = summarize_effect(v, false);
      e.row = r;
      e.col = s;
      rep.z_summary.push_back(e);
    }
  }
  return rep;
}

}  // namespace pibdfc
