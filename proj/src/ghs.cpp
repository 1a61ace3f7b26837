#include "pibdfc/ghs.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "pibdfc/error.hpp"

namespace pibdfc {

namespace {

constexpr double kMinScale = 1e-300;

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string(what) + " is not positive definite");
  }
  return llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

std::vector<Eigen::Index> others(Eigen::Index R, Eigen::Index j) {
  std::vector<Eigen::Index> idx;
  idx.reserve(static_cast<std::size_t>(R - 1));
  for (Eigen::Index k = 0; k < R; ++k) {
    if (k != j) idx.push_back(k);
  }
  return idx;
}

}  // namespace

PrecisionState initial_precision(const Eigen::VectorXd& diagonal, double tau0) {
  const Eigen::Index R = diagonal.size();
  PrecisionState p;
  p.omega = diagonal.asDiagonal();
  p.lambda2 = Eigen::MatrixXd::Ones(R, R);
  p.nu = Eigen::MatrixXd::Ones(R, R);
  p.tau0 = tau0;
  p.tau2 = tau0 * tau0;
  p.xi_tau = 1.0;
  return p;
}

StateScatter accumulate_scatter(const Dataset& d,
                                const std::vector<StateSequence>& sequences,
                                int state) {
  StateScatter sc;
  sc.scatter = Eigen::MatrixXd::Zero(d.n_regions, d.n_regions);
  for (std::size_t i = 0; i < d.subjects.size(); ++i) {
    const auto& y = d.subjects[i].series;
    for (Eigen::Index t = 0; t < y.rows(); ++t) {
      if (sequences[i][static_cast<std::size_t>(t)] != state) continue;
      sc.scatter.noalias() += y.row(t).transpose() * y.row(t);
      sc.n += 1.0;
    }
  }
  return sc;
}

std::vector<StateScatter> accumulate_scatters(
    const Dataset& d, const std::vector<StateSequence>& sequences,
    int n_states) {
  std::vector<StateScatter> out(static_cast<std::size_t>(n_states));
  const Eigen::Index R = d.n_regions;
  for (int s = 0; s < n_states; ++s) {
    // Gather the rows of each state so the product is one matrix multiply.
    Eigen::Index count = 0;
    for (std::size_t i = 0; i < d.subjects.size(); ++i) {
      for (int v : sequences[i]) count += (v == s);
    }
    Eigen::MatrixXd rows(count, R);
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < d.subjects.size(); ++i) {
      const auto& y = d.subjects[i].series;
      for (Eigen::Index t = 0; t < y.rows(); ++t) {
        if (sequences[i][static_cast<std::size_t>(t)] == s) rows.row(k++) = y.row(t);
      }
    }
    auto& sc = out[static_cast<std::size_t>(s)];
    sc.scatter = Eigen::MatrixXd::Zero(R, R);
    if (count > 0) sc.scatter.noalias() = rows.transpose() * rows;
    sc.n = static_cast<double>(count);
  }
  return out;
}

void ghs_column_sweep(PrecisionState& prec, const StateScatter& sc,
                      double diag_prior_rate, RngStream& rng) {
  const Eigen::Index R = prec.dim();
  Eigen::MatrixXd sigma = spd_inverse(prec.omega, "precision matrix");
  const double shape = 0.5 * sc.n + 1.0;
  for (Eigen::Index j = 0; j < R; ++j) {
    const double s22 = sc.scatter(j, j) + diag_prior_rate;
    if (!(s22 > 0.0)) {
      throw NumericalError(
          "improper diagonal conditional in column " + std::to_string(j) +
          ": no data and flat diagonal prior");
    }
    const double gamma = sample_gamma(shape, 0.5 * s22, rng);
    if (R == 1) {
      prec.omega(0, 0) = gamma;
      sigma(0, 0) = 1.0 / gamma;
      continue;
    }
    const auto idx = others(R, j);
    const Eigen::MatrixXd sigma11 = sigma(idx, idx);
    const Eigen::VectorXd sigma12 = sigma(idx, j);
    const double sigma22 = sigma(j, j);
    const Eigen::MatrixXd inv_omega11 =
        sigma11 - sigma12 * sigma12.transpose() / sigma22;
    const Eigen::VectorXd s21 = sc.scatter(idx, j);
    const Eigen::VectorXd lambda2 = prec.lambda2(idx, j);
    const Eigen::VectorXd nu = prec.nu(idx, j);

    Eigen::MatrixXd inv_c = s22 * inv_omega11;
    inv_c.diagonal().array() += 1.0 / (lambda2.array() * prec.tau2);
    Eigen::VectorXd beta;
    try {
      beta = sample_mvn_canonical(-s21, inv_c, rng, "column conditional precision");
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " (column " +
                           std::to_string(j) + ")");
    }

    const double omega22 = gamma + beta.dot(inv_omega11 * beta);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const Eigen::Index other = idx[k];
      const auto kk = static_cast<Eigen::Index>(k);
      const double b = beta(kk);
      prec.omega(other, j) = b;
      prec.omega(j, other) = b;
      const double rate = b * b / (2.0 * prec.tau2) + 1.0 / nu(kk);
      const double l2 = std::max(sample_inverse_gamma(1.0, rate, rng), kMinScale);
      const double n2 = sample_inverse_gamma(1.0, 1.0 + 1.0 / l2, rng);
      prec.lambda2(other, j) = l2;
      prec.lambda2(j, other) = l2;
      prec.nu(other, j) = n2;
      prec.nu(j, other) = n2;
    }
    prec.omega(j, j) = omega22;

    const Eigen::VectorXd temp = inv_omega11 * beta;
    const Eigen::MatrixXd new_sigma11 =
        inv_omega11 + temp * temp.transpose() / gamma;
    for (std::size_t a = 0; a < idx.size(); ++a) {
      for (std::size_t b = 0; b < idx.size(); ++b) {
        sigma(idx[a], idx[b]) = new_sigma11(static_cast<Eigen::Index>(a),
                                            static_cast<Eigen::Index>(b));
      }
      const double v = -temp(static_cast<Eigen::Index>(a)) / gamma;
      sigma(idx[a], j) = v;
      sigma(j, idx[a]) = v;
    }
    sigma(j, j) = 1.0 / gamma;
  }
}

InverseGammaParams global_shrinkage_conditional(const PrecisionState& prec) {
  const Eigen::Index R = prec.dim();
  double quad = 0.0;
  for (Eigen::Index k = 1; k < R; ++k) {
    for (Eigen::Index j = 0; j < k; ++j) {
      quad += prec.omega(j, k) * prec.omega(j, k) / (2.0 * prec.lambda2(j, k));
    }
  }
  const double m = 0.5 * static_cast<double>(R * (R - 1));
  return {0.5 * (m + 1.0), 1.0 / prec.xi_tau + quad};
}

void update_global_shrinkage(PrecisionState& prec, RngStream& rng) {
  const auto ig = global_shrinkage_conditional(prec);
  prec.tau2 = std::max(sample_inverse_gamma(ig.shape, ig.scale, rng), kMinScale);
  prec.xi_tau = sample_inverse_gamma(
      1.0, 1.0 / (prec.tau0 * prec.tau0) + 1.0 / prec.tau2, rng);
}

void update_shared_global_shrinkage(std::vector<PrecisionState>& precs,
                                    RngStream& rng) {
  if (precs.empty()) return;
  const double xi_tau = precs.front().xi_tau;
  const double tau0 = precs.front().tau0;
  double m_total = 0.0;
  double quad = 0.0;
  for (auto& p : precs) {
    p.xi_tau = xi_tau;
    const auto ig = global_shrinkage_conditional(p);
    m_total += 2.0 * ig.shape - 1.0;
    quad += ig.scale - 1.0 / xi_tau;
  }
  const double tau2 = std::max(
      sample_inverse_gamma(0.5 * (m_total + 1.0), 1.0 / xi_tau + quad, rng),
      kMinScale);
  const double new_xi = sample_inverse_gamma(1.0, 1.0 / (tau0 * tau0) + 1.0 / tau2, rng);
  for (auto& p : precs) {
    p.tau2 = tau2;
    p.xi_tau = new_xi;
  }
}

void ghs_update(PrecisionState& prec, const StateScatter& sc,
                double diag_prior_rate, RngStream& rng) {
  ghs_column_sweep(prec, sc, diag_prior_rate, rng);
  update_global_shrinkage(prec, rng);
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

PrecisionState sample_ghs_prior(Eigen::Index R, double tau0,
                                double diag_prior_rate, RngStream& rng,
                                int max_tries) {
  if (!(diag_prior_rate > 0.0)) {
    throw std::invalid_argument("prior draws need a proper diagonal prior");
  }
  PrecisionState p = initial_precision(Eigen::VectorXd::Ones(R), tau0);
  // The truncation to positive definite matrices also reweights the scales,
  // so a rejected proposal redraws everything.
  for (int attempt = 0; attempt < max_tries; ++attempt) {
    p.xi_tau = sample_inverse_gamma(0.5, 1.0 / (tau0 * tau0), rng);
    p.tau2 = std::max(sample_inverse_gamma(0.5, 1.0 / p.xi_tau, rng), kMinScale);
    const double sd = std::sqrt(p.tau2);
    for (Eigen::Index j = 0; j < R; ++j) {
      p.omega(j, j) = sample_gamma(1.0, 0.5 * diag_prior_rate, rng);
    }
    for (Eigen::Index k = 1; k < R; ++k) {
      for (Eigen::Index j = 0; j < k; ++j) {
        const double n2 = sample_inverse_gamma(0.5, 1.0, rng);
        const double l2 =
            std::max(sample_inverse_gamma(0.5, 1.0 / n2, rng), kMinScale);
        p.nu(j, k) = p.nu(k, j) = n2;
        p.lambda2(j, k) = p.lambda2(k, j) = l2;
        const double w = std::sqrt(l2) * sd * rng.normal();
        p.omega(j, k) = p.omega(k, j) = w;
      }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(p.omega);
    if (llt.info() == Eigen::Success && min_eigenvalue(p.omega) > 0.0) return p;
  }
  throw NumericalError("sample_ghs_prior: positive-definite draw not found");
}

double prior_edge_density(Eigen::Index R, double tau0, RngStream& rng) {
  const double xi_tau = sample_inverse_gamma(0.5, 1.0 / (tau0 * tau0), rng);
  const double tau = std::sqrt(sample_inverse_gamma(0.5, 1.0 / xi_tau, rng));
  std::size_t kept = 0;
  std::size_t total = 0;
  for (Eigen::Index k = 1; k < R; ++k) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const double nu = sample_inverse_gamma(0.5, 1.0, rng);
      const double lambda = std::sqrt(sample_inverse_gamma(0.5, 1.0 / nu, rng));
      if (1.0 / (1.0 + lambda * tau) < 0.5) ++kept;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(kept) / static_cast<double>(total);
}

}  // namespace pibdfc
