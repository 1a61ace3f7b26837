#pragma once

// Joint-distribution checks: statistics of independent prior draws are
// compared with those of a chain alternating a Gibbs sweep and a fresh data
// draw given the current parameters. Both target the same joint law.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pibdfc/ghs.hpp"
#include "pibdfc/sampler.hpp"
#include "pibdfc/transition.hpp"
#include "test_util.hpp"

namespace geweke {

using namespace pibdfc;

struct Comparison {
  std::string name;
  double prior_mean = 0.0;
  double chain_mean = 0.0;
  double z = 0.0;
};

// Standard error of a correlated series by non-overlapping batch means.
inline double batch_means_se(const std::vector<double>& v, int n_batches = 50) {
  const std::size_t len = v.size() / static_cast<std::size_t>(n_batches);
  std::vector<double> means;
  for (int b = 0; b < n_batches; ++b) {
    double s = 0.0;
    for (std::size_t k = 0; k < len; ++k) s += v[static_cast<std::size_t>(b) * len + k];
    means.push_back(s / static_cast<double>(len));
  }
  return testutil::std_error(means);
}

// First and second moments of each named statistic.
inline std::vector<Comparison> compare(const std::vector<std::string>& names,
                                       const std::vector<std::vector<double>>& prior,
                                       const std::vector<std::vector<double>>& chain) {
  std::vector<Comparison> out;
  for (std::size_t k = 0; k < names.size(); ++k) {
    for (int power = 1; power <= 2; ++power) {
      std::vector<double> a = prior[k], b = chain[k];
      if (power == 2) {
        for (auto& x : a) x *= x;
        for (auto& x : b) x *= x;
      }
      Comparison c;
      c.name = names[k] + (power == 2 ? "^2" : "");
      c.prior_mean = testutil::mean(a);
      c.chain_mean = testutil::mean(b);
      const double se = std::hypot(testutil::std_error(a), batch_means_se(b));
      c.z = (c.chain_mean - c.prior_mean) / se;
      out.push_back(c);
    }
  }
  return out;
}

// Small hidden Markov instance with one step covariate.
struct HmmProblem {
  ModelConfig config;
  Dataset data;  // covariates fixed; series redrawn

  HmmProblem(int N, int T, int R, int S) {
    config.n_states = S;
    config.sigma_xi = 0.7;
    config.sigma_rho = 0.7;
    config.sigma_z = 0.7;
    config.sigma_eta = 0.7;
    config.tau0 = 1.0;
    config.diag_prior_rate = 1.0;
    config.finalize();
    std::vector<SubjectData> subjects;
    for (int i = 0; i < N; ++i) {
      SubjectData s;
      s.subject_id = "s" + std::to_string(i + 1);
      s.series = Eigen::MatrixXd::Zero(T, R);
      s.covariates = Eigen::MatrixXd::Zero(T, 1);
      s.covariates.bottomRows(T / 2).setOnes();
      subjects.push_back(std::move(s));
    }
    data = make_dataset(std::move(subjects));
  }

  void draw_params(ChainState& c, RngStream& rng) const {
    const int S = config.n_states;
    const auto R = data.subjects[0].series.cols();
    const std::size_t N = data.n_subjects();
    c.trans = prior_mean_params(config, N, 1);
    for (int s = 1; s < S; ++s) {
      for (int r = 0; r < S; ++r)
        c.trans.Z(r, s) = config.z0(r, s) + std::sqrt(config.sigma_z) * rng.normal();
      c.trans.eta(s, 0) = std::sqrt(config.sigma_eta) * rng.normal();
    }
    for (std::size_t i = 0; i < N; ++i)
      for (int s = 1; s < S; ++s) {
        for (int r = 0; r < S; ++r)
          c.trans.xi[i](r, s) = c.trans.Z(r, s) + std::sqrt(config.sigma_xi) * rng.normal();
        c.trans.rho[i](s, 0) = c.trans.eta(s, 0) + std::sqrt(config.sigma_rho) * rng.normal();
      }
    c.precisions.clear();
    for (int s = 0; s < S; ++s)
      c.precisions.push_back(sample_ghs_prior(R, config.tau0, config.diag_prior_rate, rng));
    c.sequences.assign(N, {});
    for (std::size_t i = 0; i < N; ++i) {
      const auto& x = data.subjects[i].covariates;
      const auto q = compute_q_sequence(c.trans.xi[i], c.trans.rho[i], x);
      StateSequence seq(static_cast<std::size_t>(x.rows()));
      seq[0] = static_cast<int>(rng.categorical(config.initial_state_dist));
      for (std::size_t t = 1; t < seq.size(); ++t)
        seq[t] = static_cast<int>(rng.categorical(q[t - 1].row(seq[t - 1]).transpose()));
      c.sequences[i] = std::move(seq);
    }
  }

  void draw_data(const ChainState& c, Dataset& d, RngStream& rng) const {
    std::vector<Eigen::MatrixXd> upper;
    for (const auto& p : c.precisions) upper.push_back(p.omega.llt().matrixU());
    for (std::size_t i = 0; i < d.n_subjects(); ++i) {
      auto& y = d.subjects[i].series;
      for (Eigen::Index t = 0; t < y.rows(); ++t) {
        Eigen::VectorXd z(y.cols());
        for (auto& v : z) v = rng.normal();
        const auto& u = upper[static_cast<std::size_t>(c.sequences[i][static_cast<std::size_t>(t)])];
        y.row(t) = u.triangularView<Eigen::Upper>().solve(z).transpose();
      }
    }
  }

  std::vector<std::string> names() const {
    return {"xi_01", "xi_11", "rho_1", "Z_11", "eta_1", "omega_01_state0",
            "omega_00_state0", "log_tau2_state0", "log_tau2_state1", "occupancy_state1",
            "switches"};
  }

  std::vector<double> stats(const ChainState& c) const {
    double occ = 0, switches = 0, total = 0;
    for (const auto& s : c.sequences)
      for (std::size_t t = 0; t < s.size(); ++t) {
        occ += s[t] == 1;
        switches += t > 0 && s[t] != s[t - 1];
        total += 1;
      }
    return {c.trans.xi[0](0, 1), c.trans.xi[0](1, 1), c.trans.rho[0](1, 0),
            c.trans.Z(1, 1), c.trans.eta(1, 0), c.precisions[0].omega(0, 1),
            c.precisions[0].omega(0, 0), std::log(c.precisions[0].tau2),
            std::log(c.precisions[1].tau2), occ / total, switches};
  }

  // Returns one comparison per statistic and moment.
  std::vector<Comparison> run(int n_prior, int n_chain, int burn, std::uint64_t seed) const {
    const auto nm = names();
    std::vector<std::vector<double>> prior(nm.size()), chain(nm.size());
    RngStream rng(seed, 1);
    for (int m = 0; m < n_prior; ++m) {
      ChainState c;
      draw_params(c, rng);
      const auto v = stats(c);
      for (std::size_t k = 0; k < v.size(); ++k) prior[k].push_back(v[k]);
    }
    ChainState c;
    Dataset d = data;
    draw_params(c, rng);
    draw_data(c, d, rng);
    std::vector<RngStream> subject_rngs, state_rngs;
    for (std::size_t i = 0; i < d.n_subjects(); ++i) subject_rngs.emplace_back(seed, 100 + i);
    for (int s = 0; s < config.n_states; ++s) state_rngs.emplace_back(seed, 200 + static_cast<std::uint64_t>(s));
    RngStream group_rng(seed, 3), shared_rng(seed, 4), data_rng(seed, 5);
    for (int it = 0; it < burn + n_chain; ++it) {
      gibbs_sweep(c, d, config, subject_rngs, state_rngs, group_rng, shared_rng, 1);
      draw_data(c, d, data_rng);
      if (it < burn) continue;
      const auto v = stats(c);
      for (std::size_t k = 0; k < v.size(); ++k) chain[k].push_back(v[k]);
    }
    return compare(nm, prior, chain);
  }
};

// Single precision matrix observed through n draws.
struct GhsProblem {
  Eigen::Index R;
  int n;
  double tau0 = 1.0;
  double rate = 1.0;

  std::vector<std::string> names() const {
    return {"omega_01", "omega_12", "omega_00", "log_tau2", "log_lambda2_01"};
  }
  std::vector<double> stats(const PrecisionState& p) const {
    return {p.omega(0, 1), p.omega(1, 2), p.omega(0, 0), std::log(p.tau2),
            std::log(p.lambda2(0, 1))};
  }
  StateScatter draw_scatter(const PrecisionState& p, RngStream& rng) const {
    const Eigen::MatrixXd u = p.omega.llt().matrixU();
    StateScatter sc{Eigen::MatrixXd::Zero(R, R), static_cast<double>(n)};
    for (int t = 0; t < n; ++t) {
      Eigen::VectorXd z(R);
      for (auto& v : z) v = rng.normal();
      const Eigen::VectorXd y = u.triangularView<Eigen::Upper>().solve(z);
      sc.scatter += y * y.transpose();
    }
    return sc;
  }
  std::vector<Comparison> run(int n_prior, int n_chain, int burn, std::uint64_t seed) const {
    const auto nm = names();
    std::vector<std::vector<double>> prior(nm.size()), chain(nm.size());
    RngStream rng(seed, 11);
    for (int m = 0; m < n_prior; ++m) {
      const auto v = stats(sample_ghs_prior(R, tau0, rate, rng));
      for (std::size_t k = 0; k < v.size(); ++k) prior[k].push_back(v[k]);
    }
    PrecisionState p = sample_ghs_prior(R, tau0, rate, rng);
    RngStream sweep_rng(seed, 12), data_rng(seed, 13);
    StateScatter sc = draw_scatter(p, data_rng);
    for (int it = 0; it < burn + n_chain; ++it) {
      ghs_update(p, sc, rate, sweep_rng);
      sc = draw_scatter(p, data_rng);
      if (it < burn) continue;
      const auto v = stats(p);
      for (std::size_t k = 0; k < v.size(); ++k) chain[k].push_back(v[k]);
    }
    return compare(nm, prior, chain);
  }
};

}  // namespace geweke
