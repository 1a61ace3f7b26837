#include "pibdfc/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "pibdfc/error.hpp"

namespace pibdfc {

EdgeScore edge_metrics(const Eigen::MatrixXi& truth, const Eigen::MatrixXi& est) {
  if (truth.rows() != truth.cols() || est.rows() != truth.rows() ||
      est.cols() != truth.cols()) {
    throw DataError("edge_metrics: shape mismatch between truth (" +
                    std::to_string(truth.rows()) + "x" + std::to_string(truth.cols()) +
                    ") and estimate (" + std::to_string(est.rows()) + "x" +
                    std::to_string(est.cols()) + ")");
  }
  long tp = 0, pos = 0, tn = 0, neg = 0;
  for (Eigen::Index j = 0; j < truth.rows(); ++j) {
    for (Eigen::Index k = j + 1; k < truth.cols(); ++k) {
      const bool t = truth(j, k) != 0;
      const bool e = est(j, k) != 0;
      if (t) {
        ++pos;
        if (e) ++tp;
      } else {
        ++neg;
        if (!e) ++tn;
      }
    }
  }
  EdgeScore s;
  s.tpr = pos == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(pos);
  s.tnr = neg == 0 ? 1.0 : static_cast<double>(tn) / static_cast<double>(neg);
  s.f1 = s.tpr * s.tnr;
  return s;
}

namespace {

void check_shapes(const std::vector<StateSequence>& truth,
                  const std::vector<StateSequence>& est) {
  if (truth.size() != est.size()) {
    throw DataError("subject count differs between truth and estimate");
  }
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i].size() != est[i].size()) {
      throw DataError("sequence length differs for subject " + std::to_string(i + 1));
    }
  }
}

// confusion(s, e) counts time points with true state s and estimate e.
Eigen::MatrixXd confusion(const std::vector<StateSequence>& truth,
                          const std::vector<StateSequence>& est, int n_states) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n_states, n_states);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (std::size_t t = 0; t < truth[i].size(); ++t) {
      const int a = truth[i][t];
      const int b = est[i][t];
      if (a < 0 || a >= n_states || b < 0 || b >= n_states) {
        throw DataError("state label out of range in subject " + std::to_string(i + 1));
      }
      c(a, b) += 1.0;
    }
  }
  return c;
}

}  // namespace

std::vector<int> hungarian_max(const Eigen::MatrixXd& weight) {
  // Classic O(n^3) potentials method on a square cost matrix.
  const int n = static_cast<int>(std::max(weight.rows(), weight.cols()));
  const double big = weight.size() ? weight.maxCoeff() : 0.0;
  Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(n, n, big);
  cost.topLeftCorner(weight.rows(), weight.cols()) =
      (big - weight.array()).matrix();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assign(static_cast<std::size_t>(weight.rows()), -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] - 1 < weight.rows() && j - 1 < weight.cols()) {
      assign[static_cast<std::size_t>(p[j] - 1)] = j - 1;
    }
  }
  return assign;
}

Permutation align_labels(const std::vector<StateSequence>& truth,
                         const std::vector<StateSequence>& est, int n_states) {
  check_shapes(truth, est);
  if (n_states < 1) throw std::invalid_argument("align_labels: n_states must be >= 1");
  const Eigen::MatrixXd c = confusion(truth, est, n_states);
  if (n_states > 6) return hungarian_max(c);
  Permutation perm(static_cast<std::size_t>(n_states));
  std::iota(perm.begin(), perm.end(), 0);
  Permutation best = perm;
  double best_score = -1.0;
  // Lexicographic enumeration keeps the identity on ties.
  do {
    double score = 0.0;
    for (int s = 0; s < n_states; ++s) score += c(s, perm[static_cast<std::size_t>(s)]);
    if (score > best_score) {
      best_score = score;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

StateScore state_accuracy(const std::vector<StateSequence>& truth,
                          const std::vector<StateSequence>& est,
                          const Permutation& perm) {
  check_shapes(truth, est);
  const int n_states = static_cast<int>(perm.size());
  std::vector<bool> seen(perm.size(), false);
  for (int e : perm) {
    if (e < 0 || e >= n_states || seen[static_cast<std::size_t>(e)]) {
      throw std::invalid_argument("state_accuracy: permutation is not a bijection");
    }
    seen[static_cast<std::size_t>(e)] = true;
  }
  const Eigen::MatrixXd c = confusion(truth, est, n_states);
  StateScore out;
  out.permutation = perm;
  for (int s = 0; s < n_states; ++s) {
    const double total = c.row(s).sum();
    if (total == 0.0) {
      out.accuracy.push_back(std::nullopt);
    } else {
      out.accuracy.push_back(c(s, perm[static_cast<std::size_t>(s)]) / total);
    }
  }
  return out;
}

ChangePointCount count_change_points(const std::vector<Eigen::VectorXd>& change_point_prob,
                                     double threshold) {
  ChangePointCount out;
  for (const auto& p : change_point_prob) {
    out.per_subject.push_back(static_cast<int>((p.array() > threshold).count()));
  }
  if (!out.per_subject.empty()) {
    out.mean = std::accumulate(out.per_subject.begin(), out.per_subject.end(), 0.0) /
               static_cast<double>(out.per_subject.size());
  }
  return out;
}

}  // namespace pibdfc
