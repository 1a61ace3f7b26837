#include <doctest.h>

#include "pibdfc/error.hpp"
#include "pibdfc/ghs.hpp"
#include "pibdfc/simgen.hpp"
#include "test_util.hpp"

using namespace pibdfc;
using doctest::Approx;

namespace {

// Exact marginals p_t(s) of the inhomogeneous chain.
Eigen::MatrixXd forward_marginals(const SimSpec& spec) {
  const Eigen::VectorXd x = covariate_series(spec);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(spec.T, spec.S);
  p(0, spec.initial_state) = 1.0;
  for (int t = 0; t + 1 < spec.T; ++t) {
    const QRegime* reg = nullptr;
    for (const auto& r : spec.regimes)
      if (r.covariate == x(t)) reg = &r;
    p.row(t + 1) = p.row(t) * reg->q;
  }
  return p;
}

SimSpec single_state_spec(int T) {
  SimSpec spec = default_sim_spec(1, 0.5, 17);
  spec.T = T;
  spec.S = 1;
  spec.adjacencies = {default_adjacencies(16)[0]};
  spec.regimes = {QRegime{0.0, Eigen::MatrixXd::Ones(1, 1)}};
  spec.switch_times.clear();
  return spec;
}

}  // namespace

TEST_CASE("random_precision on an empty graph is the identity") {
  RngStream rng(7, 1);
  CHECK(random_precision(Eigen::MatrixXi::Zero(5, 5), 0.5, rng) == Eigen::MatrixXd::Identity(5, 5));
}

TEST_CASE("random_precision with a single edge") {
  RngStream rng(7, 2);
  Eigen::MatrixXi a = Eigen::MatrixXi::Zero(2, 2);
  a(0, 1) = a(1, 0) = 1;
  for (int k = 0; k < 50; ++k) {
    const Eigen::MatrixXd om = random_precision(a, 0.5, rng);
    const double pc = std::abs(om(0, 1)) / std::sqrt(om(0, 0) * om(1, 1));
    CHECK(pc > 0.4);
    CHECK(pc < 0.6);
  }
}

TEST_CASE("random_precision honors the default patterns at every preset") {
  RngStream rng(7, 3);
  for (const auto& adj : default_adjacencies(16)) {
    CHECK(adj == adj.transpose());
    CHECK(adj.diagonal().sum() == 0);
    for (double target : signal_presets()) {
      const Eigen::MatrixXd om = random_precision(adj, target, rng);
      CHECK(min_eigenvalue(om) > 0.0);
      CHECK((om.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12);
      for (int j = 0; j < 16; ++j)
        for (int k = 0; k < 16; ++k)
          if (j != k && adj(j, k) == 0) CHECK(om(j, k) == 0.0);
      const double m = mean_abs_partial_corr(om, adj);
      CHECK(std::abs(m - target) <= 0.2 * target);
    }
  }
}

TEST_CASE("infeasible targets fail after bounded retries") {
  RngStream rng(7, 4);
  const Eigen::MatrixXi full = Eigen::MatrixXi::Ones(6, 6) - Eigen::MatrixXi::Identity(6, 6);
  CHECK_THROWS_AS(random_precision(full, 0.95, rng, 20), DataError);
}

TEST_CASE("default regime before the switch never reaches state 3") {
  SimSpec spec = default_sim_spec(200, 0.6, 3);
  RngStream rng(7, 5);
  const auto seqs = simulate_states(spec, rng);
  for (const auto& s : seqs) {
    CHECK(s[0] == 0);
    for (int t = 0; t < 150; ++t) CHECK(s[static_cast<std::size_t>(t)] != 2);
  }
}

TEST_CASE("mean dwell in state 1 under x = 0 is about 50") {
  SimSpec spec = default_sim_spec(1, 0.6, 3);
  spec.T = 200000;
  spec.switch_times.clear();
  spec.regimes = {default_regimes()[0]};
  RngStream rng(7, 6);
  const auto s = simulate_states(spec, rng)[0];
  double runs = 0, length = 0;
  for (std::size_t t = 0; t < s.size(); ++t) {
    if (s[t] != 0) continue;
    ++length;
    if (t + 1 == s.size() || s[t + 1] != 0) ++runs;
  }
  CHECK(length / runs == Approx(50.0).epsilon(0.06));
}

TEST_CASE("identity transitions give a constant sequence") {
  SimSpec spec = default_sim_spec(5, 0.6, 3);
  for (auto& r : spec.regimes) r.q = Eigen::MatrixXd::Identity(3, 3);
  spec.initial_state = 1;
  RngStream rng(7, 7);
  for (const auto& s : simulate_states(spec, rng)) CHECK(s == StateSequence(300, 1));
}

TEST_CASE("state marginals match the forward recursion") {
  SimSpec spec = default_sim_spec(100000, 0.6, 3);
  spec.T = 12;
  spec.switch_times = {6};
  const Eigen::MatrixXd exact = forward_marginals(spec);
  RngStream rng(7, 8);
  const auto seqs = simulate_states(spec, rng);
  Eigen::MatrixXd freq = Eigen::MatrixXd::Zero(spec.T, spec.S);
  for (const auto& s : seqs)
    for (int t = 0; t < spec.T; ++t) freq(t, s[static_cast<std::size_t>(t)]) += 1.0 / spec.N;
  CHECK((freq - exact).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("subjects are independent") {
  // Agreement between two subjects at the same time point should match the
  // value implied by independent draws from the time-varying marginals.
  SimSpec spec = default_sim_spec(60, 0.6, 9);
  const Eigen::MatrixXd p = forward_marginals(spec);
  const double expected = p.array().square().sum() / spec.T;
  const SimResult sim = simulate_dataset(spec);
  double agree = 0, pairs = 0;
  for (int i = 0; i < spec.N; ++i)
    for (int j = i + 1; j < spec.N; ++j) {
      for (int t = 0; t < spec.T; ++t)
        agree += sim.truth.sequences[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)] ==
                 sim.truth.sequences[static_cast<std::size_t>(j)][static_cast<std::size_t>(t)];
      pairs += spec.T;
    }
  CHECK(agree / pairs == Approx(expected).epsilon(0.05));
}

TEST_CASE("default dataset shape and covariate step") {
  const SimSpec spec = default_sim_spec();
  const SimResult sim = simulate_dataset(spec);
  CHECK(sim.dataset.n_subjects() == 30);
  for (const auto& s : sim.dataset.subjects) {
    CHECK(s.series.rows() == 300);
    CHECK(s.series.cols() == 16);
    CHECK(s.covariates.cols() == 1);
    CHECK(s.covariates.topRows(150).cwiseAbs().maxCoeff() == 0.0);
    CHECK((s.covariates.bottomRows(150).array() == 1.0).all());
  }
  CHECK(sim.truth.precisions.size() == 3);
}

TEST_CASE("same seed gives identical datasets") {
  const SimSpec spec = default_sim_spec(3, 0.4, 12);
  const SimResult a = simulate_dataset(spec);
  const SimResult b = simulate_dataset(spec);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK((a.dataset.subjects[i].series.array() == b.dataset.subjects[i].series.array()).all());
    CHECK(a.truth.sequences[i] == b.truth.sequences[i]);
  }
  SimSpec other = spec;
  other.seed = 13;
  CHECK(simulate_dataset(other).dataset.subjects[0].series(0, 0) != a.dataset.subjects[0].series(0, 0));
}

TEST_CASE("emission covariance converges to the inverse precision") {
  const SimSpec spec = single_state_spec(100000);
  const SimResult sim = simulate_dataset(spec);
  const auto& y = sim.dataset.subjects[0].series;
  const Eigen::MatrixXd emp = y.transpose() * y / static_cast<double>(y.rows());
  const Eigen::MatrixXd cov = sim.truth.precisions[0].inverse();
  CHECK((emp - cov).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("spec JSON round trip and validation") {
  const SimSpec spec = default_sim_spec(4, 0.3, 5);
  const SimSpec back = sim_spec_from_json(sim_spec_to_json(spec));
  CHECK(back.N == 4);
  CHECK(back.target_mean_abs_pcorr == 0.3);
  CHECK(back.adjacencies == spec.adjacencies);
  CHECK(back.regimes[1].q == spec.regimes[1].q);
  CHECK_THROWS_AS(sim_spec_from_json(nlohmann::json{{"bogus", 1}}), DataError);
  CHECK_THROWS_AS(sim_spec_from_json(nlohmann::json{{"T", "three hundred"}}), DataError);
  SimSpec bad = spec;
  bad.regimes[0].q(0, 0) = 0.5;
  CHECK_THROWS_AS(bad.validate(), DataError);
}
