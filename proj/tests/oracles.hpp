#pragma once

// Slow reference implementations used to check the fast samplers.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "pibdfc/selection.hpp"
#include "pibdfc/state_inference.hpp"

namespace oracles {

using pibdfc::StateSequence;

// Exact posterior over every path by enumeration.
inline std::vector<double> enumerate_posterior(const Eigen::MatrixXd& loglik,
                                        const std::vector<Eigen::MatrixXd>& q,
                                        const Eigen::VectorXd& pi0) {
  const int T = static_cast<int>(loglik.rows());
  const int S = static_cast<int>(loglik.cols());
  int n_paths = 1;
  for (int t = 0; t < T; ++t) n_paths *= S;
  std::vector<double> w(static_cast<std::size_t>(n_paths));
  for (int code = 0; code < n_paths; ++code) {
    int c = code;
    std::vector<int> path(static_cast<std::size_t>(T));
    for (int t = T - 1; t >= 0; --t) {
      path[static_cast<std::size_t>(t)] = c % S;
      c /= S;
    }
    double lw = std::log(pi0(path[0])) + loglik(0, path[0]);
    for (int t = 1; t < T; ++t) {
      lw += std::log(q[static_cast<std::size_t>(t - 1)](path[static_cast<std::size_t>(t - 1)],
                                                        path[static_cast<std::size_t>(t)]));
      lw += loglik(t, path[static_cast<std::size_t>(t)]);
    }
    w[static_cast<std::size_t>(code)] = lw;
  }
  const double mx = *std::max_element(w.begin(), w.end());
  double total = 0.0;
  for (auto& x : w) total += (x = std::exp(x - mx));
  for (auto& x : w) x /= total;
  return w;
}

inline int encode(const StateSequence& s, int S) {
  int code = 0;
  for (int v : s) code = code * S + v;
  return code;
}

inline Eigen::MatrixXd random_q(int S, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Eigen::MatrixXd q = Eigen::MatrixXd::NullaryExpr(S, S, [&] { return u(gen); });
  for (int r = 0; r < S; ++r) q.row(r) /= q.row(r).sum();
  return q;
}

// Truncated infinite-convolution representation of PG(1, c), with the mean
// of the omitted tail added back.
inline double pg_series_oracle(double c, std::mt19937_64& gen, int terms = 200) {
  std::gamma_distribution<double> g(1.0, 1.0);
  const double pi2 = M_PI * M_PI;
  const double c2 = c * c / (4.0 * pi2);
  double sum = 0.0;
  for (int k = 1; k <= terms; ++k) {
    const double h = (k - 0.5) * (k - 0.5);
    sum += g(gen) / (h + c2);
  }
  double tail = 0.0;
  for (int k = terms + 1; k <= terms + 100000; ++k) tail += 1.0 / ((k - 0.5) * (k - 0.5) + c2);
  return (sum + tail) / (2.0 * pi2);
}

// Try every kappa value as the threshold and keep the largest that works.
inline pibdfc::BfdrSelection exhaustive_bfdr(const std::vector<double>& kappa, double q) {
  pibdfc::BfdrSelection best;
  best.selected.assign(kappa.size(), false);
  bool any = false;
  for (double eta : kappa) {
    double sum = 0.0;
    int n = 0;
    for (double k : kappa) {
      if (k <= eta) {
        sum += k;
        ++n;
      }
    }
    const double b = sum / n;
    if (b < q && (!any || eta > best.eta_star)) {
      any = true;
      best.eta_star = eta;
      best.achieved_bfdr = b;
    }
  }
  if (any) {
    for (std::size_t i = 0; i < kappa.size(); ++i) best.selected[i] = kappa[i] <= best.eta_star;
  }
  return best;
}

}  // namespace oracles
