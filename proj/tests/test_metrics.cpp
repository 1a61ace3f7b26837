#include <doctest.h>

#include "pibdfc/error.hpp"
#include "pibdfc/metrics.hpp"
#include "test_util.hpp"

using namespace pibdfc;
using doctest::Approx;

namespace {

Eigen::MatrixXi graph(int R, std::initializer_list<std::pair<int, int>> edges) {
  Eigen::MatrixXi a = Eigen::MatrixXi::Zero(R, R);
  for (auto [j, k] : edges) a(j, k) = a(k, j) = 1;
  return a;
}

EdgeScore naive_edge_metrics(const Eigen::MatrixXi& t, const Eigen::MatrixXi& e) {
  double tp = 0, p = 0, tn = 0, n = 0;
  for (int j = 0; j < t.rows(); ++j)
    for (int k = 0; k < t.cols(); ++k) {
      if (j >= k) continue;
      if (t(j, k)) { p += 1; tp += e(j, k) ? 1 : 0; }
      else { n += 1; tn += e(j, k) ? 0 : 1; }
    }
  EdgeScore s;
  s.tpr = p ? tp / p : 1.0;
  s.tnr = n ? tn / n : 1.0;
  s.f1 = s.tpr * s.tnr;
  return s;
}

}  // namespace

TEST_CASE("edge_metrics examples") {
  const auto truth = graph(4, {{0, 1}, {2, 3}});
  const auto same = edge_metrics(truth, truth);
  CHECK(same.tpr == 1.0);
  CHECK(same.tnr == 1.0);
  CHECK(same.f1 == 1.0);
  const Eigen::MatrixXi complement =
      (Eigen::MatrixXi::Ones(4, 4) - Eigen::MatrixXi::Identity(4, 4)) - truth;
  CHECK(edge_metrics(truth, complement).tpr == 0.0);
  const auto s = edge_metrics(graph(3, {{0, 1}}), graph(3, {{0, 1}, {0, 2}}));
  CHECK(s.tpr == 1.0);
  CHECK(s.tnr == 0.5);
  CHECK(s.f1 == 0.5);
  CHECK(edge_metrics(graph(3, {}), graph(3, {{0, 1}})).tpr == 1.0);
  const auto full = graph(3, {{0, 1}, {0, 2}, {1, 2}});
  CHECK(edge_metrics(full, graph(3, {})).tnr == 1.0);
  CHECK_THROWS_AS(edge_metrics(graph(3, {}), graph(4, {})), DataError);
}

TEST_CASE("edge_metrics agrees with a naive double loop") {
  std::mt19937_64 gen(31);
  std::bernoulli_distribution b(0.3);
  for (int rep = 0; rep < 300; ++rep) {
    const int R = 2 + rep % 9;
    Eigen::MatrixXi t = Eigen::MatrixXi::Zero(R, R), e = t;
    for (int j = 0; j < R; ++j)
      for (int k = j + 1; k < R; ++k) {
        t(j, k) = t(k, j) = b(gen);
        e(j, k) = e(k, j) = b(gen);
      }
    const auto a = edge_metrics(t, e);
    const auto n = naive_edge_metrics(t, e);
    CHECK(a.tpr == n.tpr);
    CHECK(a.tnr == n.tnr);
    CHECK(a.f1 == a.tpr * a.tnr);
  }
}

TEST_CASE("align_labels examples") {
  const std::vector<StateSequence> truth{{0, 0, 1, 1, 2}, {2, 2, 1, 0, 0}};
  CHECK(align_labels(truth, truth, 3) == Permutation{0, 1, 2});
  std::vector<StateSequence> swapped = truth;
  for (auto& s : swapped)
    for (auto& v : s) v = v == 0 ? 1 : v == 1 ? 0 : v;
  CHECK(align_labels(truth, swapped, 3) == Permutation{1, 0, 2});
}

TEST_CASE("alignment beats the pigeonhole bound and matches brute force") {
  std::mt19937_64 gen(32);
  for (int S : {2, 3, 4, 7}) {
    std::uniform_int_distribution<int> u(0, S - 1);
    std::vector<StateSequence> a(3, StateSequence(40)), b = a;
    for (auto& s : a) for (auto& v : s) v = u(gen);
    for (auto& s : b) for (auto& v : s) v = u(gen);
    const auto perm = align_labels(a, b, S);
    double matched = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t t = 0; t < 40; ++t) matched += perm[static_cast<std::size_t>(a[i][t])] == b[i][t];
    CHECK(matched / 120.0 >= 1.0 / S);
    if (S <= 7) {
      Permutation p(static_cast<std::size_t>(S));
      std::iota(p.begin(), p.end(), 0);
      double best = 0;
      do {
        double m = 0;
        for (std::size_t i = 0; i < a.size(); ++i)
          for (std::size_t t = 0; t < 40; ++t) m += p[static_cast<std::size_t>(a[i][t])] == b[i][t];
        best = std::max(best, m);
      } while (std::next_permutation(p.begin(), p.end()));
      CHECK(matched == best);
    }
  }
}

TEST_CASE("hungarian solver finds the optimal assignment") {
  Eigen::MatrixXd w(3, 3);
  w << 1, 9, 2,
       8, 7, 1,
       2, 3, 6;
  CHECK(hungarian_max(w) == std::vector<int>{1, 0, 2});
}

TEST_CASE("state_accuracy examples") {
  const std::vector<StateSequence> truth{{0, 0, 1, 1}};
  const std::vector<StateSequence> est{{0, 1, 1, 1}};
  const auto s = state_accuracy(truth, est, {0, 1});
  CHECK(*s.accuracy[0] == 0.5);
  CHECK(*s.accuracy[1] == 1.0);
  const auto self = state_accuracy(truth, truth, {0, 1, 2});
  CHECK(*self.accuracy[0] == 1.0);
  CHECK(!self.accuracy[2].has_value());
  const auto disjoint = state_accuracy(truth, {{1, 1, 0, 0}}, {0, 1});
  CHECK(*disjoint.accuracy[0] == 0.0);
  CHECK_THROWS(state_accuracy(truth, {{0, 0, 1}}, {0, 1}));
}

TEST_CASE("metrics are invariant under joint relabeling") {
  const std::vector<StateSequence> truth{{0, 0, 1, 2, 2, 1}};
  const std::vector<StateSequence> est{{1, 1, 1, 2, 0, 0}};
  const Permutation relabel{2, 0, 1};
  auto apply = [&](std::vector<StateSequence> v) {
    for (auto& s : v) for (auto& x : s) x = relabel[static_cast<std::size_t>(x)];
    return v;
  };
  const auto p1 = align_labels(truth, est, 3);
  const auto p2 = align_labels(apply(truth), apply(est), 3);
  const auto a1 = state_accuracy(truth, est, p1);
  const auto a2 = state_accuracy(apply(truth), apply(est), p2);
  for (int s = 0; s < 3; ++s) CHECK(*a1.accuracy[static_cast<std::size_t>(s)] == *a2.accuracy[static_cast<std::size_t>(relabel[static_cast<std::size_t>(s)])]);
}

TEST_CASE("count_change_points examples") {
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(5);
  CHECK(count_change_points({zero}).per_subject[0] == 0);
  Eigen::VectorXd p(3);
  p << 0.99, 0.3, 0.96;
  const auto c = count_change_points({p, zero}, 0.95);
  CHECK(c.per_subject == std::vector<int>{2, 0});
  CHECK(c.mean == 1.0);
}
