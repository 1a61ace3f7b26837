#include "pibdfc/selection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pibdfc/error.hpp"

namespace pibdfc {

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<double> upper_triangle(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  for (Eigen::Index j = 0; j < m.rows(); ++j) {
    for (Eigen::Index k = j + 1; k < m.cols(); ++k) out.push_back(m(j, k));
  }
  return out;
}

Eigen::MatrixXd compute_kappa(const std::vector<Eigen::MatrixXd>& lambda2_draws,
                              const std::vector<double>& tau2_draws,
                              KappaEstimator estimator) {
  if (lambda2_draws.empty() || lambda2_draws.size() != tau2_draws.size()) {
    throw std::invalid_argument("compute_kappa: need matching non-empty draws");
  }
  const Eigen::Index R = lambda2_draws.front().rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Ones(R, R);
  std::vector<double> values(lambda2_draws.size());
  for (Eigen::Index j = 0; j < R; ++j) {
    for (Eigen::Index k = j + 1; k < R; ++k) {
      for (std::size_t d = 0; d < lambda2_draws.size(); ++d) {
        values[d] = 1.0 / (1.0 + lambda2_draws[d](j, k) * tau2_draws[d]);
      }
      double v = 0.0;
      if (estimator == KappaEstimator::median) {
        v = quantile(values, 0.5);
      } else {
        for (double x : values) v += x;
        v /= static_cast<double>(values.size());
      }
      out(j, k) = out(k, j) = v;
    }
  }
  return out;
}

BfdrSelection bfdr_select(const std::vector<double>& kappa, double q_star) {
  BfdrSelection out;
  out.selected.assign(kappa.size(), false);
  std::vector<double> sorted = kappa;
  std::sort(sorted.begin(), sorted.end());
  // Running BFDR over the sorted values; only the last index of a run of
  // ties is a valid threshold because I(kappa <= eta) takes them together.
  double sum = 0.0;
  bool any = false;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    sum += sorted[k];
    if (k + 1 < sorted.size() && sorted[k + 1] == sorted[k]) continue;
    const double bfdr = sum / static_cast<double>(k + 1);
    if (bfdr < q_star) {
      out.eta_star = sorted[k];
      out.achieved_bfdr = bfdr;
      any = true;
    }
  }
  if (any) {
    for (std::size_t k = 0; k < kappa.size(); ++k) {
      out.selected[k] = kappa[k] <= out.eta_star;
    }
  }
  return out;
}

SelectionResult bfdr_select_matrix(const Eigen::MatrixXd& kappa_hat,
                                   double q_star) {
  const Eigen::Index R = kappa_hat.rows();
  const auto sel = bfdr_select(upper_triangle(kappa_hat), q_star);
  SelectionResult out;
  out.kappa_hat = kappa_hat;
  out.eta_star = sel.eta_star;
  out.achieved_bfdr = sel.achieved_bfdr;
  out.adjacency = Eigen::MatrixXi::Zero(R, R);
  std::size_t k = 0;
  for (Eigen::Index a = 0; a < R; ++a) {
    for (Eigen::Index b = a + 1; b < R; ++b, ++k) {
      if (sel.selected[k]) out.adjacency(a, b) = out.adjacency(b, a) = 1;
    }
  }
  return out;
}

Eigen::MatrixXd partial_correlations(const Eigen::MatrixXd& omega) {
  const Eigen::Index R = omega.rows();
  const Eigen::VectorXd d = omega.diagonal();
  if ((d.array() <= 0.0).any()) {
    throw NumericalError("partial_correlations: non-positive diagonal entry");
  }
  Eigen::MatrixXd out(R, R);
  for (Eigen::Index j = 0; j < R; ++j) {
    for (Eigen::Index k = 0; k < R; ++k) {
      out(j, k) = j == k ? 1.0 : -omega(j, k) / std::sqrt(d(j) * d(k));
    }
  }
  return out;
}

Eigen::MatrixXi ci50_select(const std::vector<Eigen::MatrixXd>& omega_draws) {
  if (omega_draws.size() < 4) {
    throw std::invalid_argument("ci50_select needs at least 4 draws");
  }
  const Eigen::Index R = omega_draws.front().rows();
  Eigen::MatrixXi adj = Eigen::MatrixXi::Zero(R, R);
  std::vector<double> values(omega_draws.size());
  for (Eigen::Index j = 0; j < R; ++j) {
    for (Eigen::Index k = j + 1; k < R; ++k) {
      for (std::size_t d = 0; d < omega_draws.size(); ++d) {
        values[d] = omega_draws[d](j, k);
      }
      const double lo = quantile(values, 0.25);
      const double hi = quantile(values, 0.75);
      if (lo > 0.0 || hi < 0.0) adj(j, k) = adj(k, j) = 1;
    }
  }
  return adj;
}

Eigen::MatrixXi fixed_threshold_select(const std::vector<Eigen::MatrixXd>& omega_draws,
                                       double threshold) {
  if (omega_draws.empty()) throw std::invalid_argument("no draws");
  const Eigen::Index R = omega_draws.front().rows();
  Eigen::MatrixXd mean_abs = Eigen::MatrixXd::Zero(R, R);
  for (const auto& d : omega_draws) mean_abs += d.cwiseAbs();
  mean_abs /= static_cast<double>(omega_draws.size());
  Eigen::MatrixXi adj = Eigen::MatrixXi::Zero(R, R);
  for (Eigen::Index j = 0; j < R; ++j) {
    for (Eigen::Index k = j + 1; k < R; ++k) {
      if (mean_abs(j, k) >= threshold) adj(j, k) = adj(k, j) = 1;
    }
  }
  return adj;
}

}  // namespace pibdfc
