#include <doctest.h>

#include "pibdfc/error.hpp"
#include "pibdfc/transition.hpp"
#include "test_util.hpp"

using namespace pibdfc;
using doctest::Approx;

TEST_CASE("compute_q examples") {
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(1);
  const Eigen::MatrixXd q = compute_q(Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Zero(3, 1), x0);
  CHECK((q.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);

  Eigen::MatrixXd rho(2, 1);
  rho << 0.0, std::log(3.0);
  const Eigen::MatrixXd q2 = compute_q(Eigen::MatrixXd::Zero(2, 2), rho, Eigen::VectorXd::Ones(1));
  CHECK(q2(0, 0) == Approx(0.25));
  CHECK(q2(0, 1) == Approx(0.75));

  Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(3, 3);
  xi.row(0) << 0.0, std::log(2.0), std::log(2.0);
  const Eigen::MatrixXd q3 = compute_q(xi, Eigen::MatrixXd::Zero(3, 1), x0);
  CHECK(q3(0, 0) == Approx(0.2));
  CHECK(q3(0, 1) == Approx(0.4));
  CHECK(q3(0, 2) == Approx(0.4));
}

TEST_CASE("compute_q rows are stochastic and shift invariant") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> n(0.0, 20.0);
  for (int rep = 0; rep < 200; ++rep) {
    const int S = 2 + rep % 4;
    Eigen::MatrixXd xi = Eigen::MatrixXd::NullaryExpr(S, S, [&] { return n(gen); });
    Eigen::MatrixXd rho = Eigen::MatrixXd::NullaryExpr(S, 2, [&] { return n(gen); });
    xi.col(0).setZero();
    rho.row(0).setZero();
    Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(2, [&] { return n(gen) / 10; });
    const Eigen::MatrixXd q = compute_q(xi, rho, x);
    CHECK((q.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK(q.minCoeff() >= 0.0);
    CHECK(q.maxCoeff() <= 1.0);
    // Adding a constant to a whole row of scores leaves the softmax unchanged.
    Eigen::MatrixXd shifted = xi;
    shifted.row(0).array() += 3.75;
    const Eigen::MatrixXd qs = compute_q(shifted, rho, x);
    CHECK((qs.row(0) - q.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("compute_q rejects non-finite input") {
  Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(2, 2);
  xi(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(compute_q(xi, Eigen::MatrixXd::Zero(2, 1), Eigen::VectorXd::Zero(1)),
                  NumericalError);
  Eigen::VectorXd x(1);
  x << std::numeric_limits<double>::infinity();
  CHECK_THROWS(compute_q(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 1), x));
}

TEST_CASE("holmes_held_offset examples") {
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  CHECK(holmes_held_offset(0, 1, Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Zero(3, 1), x) ==
        Approx(std::log(2.0)));

  Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(2, 2);
  xi(1, 1) = 0.8;
  Eigen::MatrixXd rho(2, 1);
  rho << 0.0, -0.4;
  Eigen::VectorXd x1(1);
  x1 << 1.5;
  // Target s = 0, the only other state is m = 1.
  CHECK(holmes_held_offset(1, 0, xi, rho, x1) == Approx(0.8 + 1.5 * -0.4 - 0.0));
  // Target s = 1, the only other state is m = 0.
  CHECK(holmes_held_offset(1, 1, xi, rho, x1) == Approx(0.0 - 1.5 * -0.4));

  std::mt19937_64 gen(8);
  std::normal_distribution<double> n;
  Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(4, 4, [&] { return n(gen); });
  Eigen::MatrixXd r = Eigen::MatrixXd::NullaryExpr(4, 1, [&] { return n(gen); });
  a.col(0).setZero();
  r.row(0).setZero();
  for (int s = 0; s < 4; ++s) {
    const double before = a(2, s) - holmes_held_offset(2, s, a, r, x1);
    Eigen::MatrixXd b = a;
    b.row(2).array() += 5.0;
    const double after = b(2, s) - holmes_held_offset(2, s, b, r, x1);
    CHECK(after == Approx(before).epsilon(1e-12));
  }
}

TEST_CASE("logistic conditional arithmetic") {
  std::vector<LogisticTerm> terms(3);
  terms[0].pg = 2.0;
  terms[1].pg = 3.0;
  terms[2].pg = 4.0;
  const auto g = logistic_conditional(0.0, 0.1, terms);
  CHECK(g.variance == Approx(1.0 / 19.0));
  CHECK(g.variance == Approx(0.052632).epsilon(1e-5));
  const auto prior = logistic_conditional(1.5, 0.1, {});
  CHECK(prior.mean == Approx(1.5));
  CHECK(prior.variance == Approx(0.1));
}

TEST_CASE("xi for an unvisited origin state follows its prior") {
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(3, 3);
  Z(2, 1) = 0.7;
  const Eigen::MatrixXd cov = Eigen::MatrixXd::Ones(30, 1);
  std::vector<int> states(30, 0);
  for (int t = 10; t < 20; ++t) states[static_cast<std::size_t>(t)] = 1;
  RngStream rng(2, 1);
  std::vector<double> draws;
  Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(3, 3);
  const Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(3, 1);
  for (int k = 0; k < 40000; ++k) {
    gibbs_update_xi(xi, rho, Z, 0.1, cov, states, rng);
    draws.push_back(xi(2, 1));
    CHECK_UNARY(xi(2, 0) == 0.0);
  }
  CHECK(std::abs(testutil::mean(draws) - 0.7) < 3 * testutil::std_error(draws));
  CHECK(testutil::variance(draws) == Approx(0.1).epsilon(0.03));
}

TEST_CASE("rho with all-zero covariates follows its prior") {
  Eigen::MatrixXd eta = Eigen::MatrixXd::Zero(2, 1);
  eta(1, 0) = -0.3;
  const Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(25, 1);
  std::vector<int> states(25);
  for (int t = 0; t < 25; ++t) states[static_cast<std::size_t>(t)] = (t / 3) % 2;
  RngStream rng(2, 2);
  Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(2, 1);
  std::vector<double> draws;
  for (int k = 0; k < 40000; ++k) {
    gibbs_update_rho(Eigen::MatrixXd::Zero(2, 2), rho, eta, 0.1, cov, states, rng);
    draws.push_back(rho(1, 0));
    CHECK_UNARY(rho(0, 0) == 0.0);
  }
  CHECK(std::abs(testutil::mean(draws) + 0.3) < 3 * testutil::std_error(draws));
  CHECK(testutil::variance(draws) == Approx(0.1).epsilon(0.03));
}

TEST_CASE("with x = 1 the rho update reduces to the xi update") {
  // Every transition leaves state 0, so both updates see the same events;
  // with rho(1) = xi(0, 1) the two offsets agree as well.
  std::vector<int> states(40, 0);
  states.back() = 1;
  const Eigen::MatrixXd cov = Eigen::MatrixXd::Ones(40, 1);
  Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(2, 2);
  xi(0, 1) = 0.6;
  xi(1, 1) = -0.4;
  Eigen::MatrixXd rho(2, 1);
  rho << 0.0, 0.6;
  RngStream r1(3, 1), r2(3, 1);
  const auto a = xi_terms(0, 1, xi, rho, cov, states, r1);
  const auto b = rho_terms(1, 0, xi, rho, cov, states, r2);
  REQUIRE(a.size() == 39);
  REQUIRE(b.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].design == b[i].design);
    CHECK(a[i].response == b[i].response);
    CHECK(a[i].offset == Approx(b[i].offset));
    CHECK(a[i].pg == Approx(b[i].pg));
  }
  const auto ga = logistic_conditional(0.25, 0.1, a);
  const auto gb = logistic_conditional(0.25, 0.1, b);
  CHECK(ga.mean == Approx(gb.mean));
  CHECK(ga.variance == Approx(gb.variance));
}

TEST_CASE("group conditional arithmetic") {
  const auto g = group_conditional(0.0, 0.1, 0.1, 2.0, 4);
  CHECK(g.mean == Approx(0.4));
  CHECK(g.variance == Approx(0.02));
  const auto none = group_conditional(1.3, 0.1, 0.1, 0.0, 0);
  CHECK(none.mean == Approx(1.3));
  CHECK(none.variance == Approx(0.1));
  const auto flat = group_conditional(1.3, 0.1, 1e9, 50.0, 10);
  CHECK(flat.mean == Approx(1.3).epsilon(1e-6));
  CHECK(flat.variance == Approx(0.1).epsilon(1e-6));
}

TEST_CASE("group update keeps reference zeros") {
  ModelConfig c;
  c.n_states = 3;
  c.z0.resize(0, 0);
  c.initial_state_dist.resize(0);
  c.finalize();
  TransitionParams p = prior_mean_params(c, 4, 2);
  RngStream rng(4, 1);
  for (int k = 0; k < 100; ++k) {
    gibbs_update_group(p, c, rng);
    CHECK_NOTHROW(p.check_reference_zeros());
  }
  p.Z(1, 0) = 0.5;
  CHECK_THROWS_AS(p.check_reference_zeros(), NumericalError);
}
