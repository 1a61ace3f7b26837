#include "pibdfc/transition.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "pibdfc/error.hpp"

namespace pibdfc {

namespace {

// log sum_{m != skip} exp(v(m)); -inf when the sum is empty.
double log_sum_exp_except(const Eigen::VectorXd& v, Eigen::Index skip) {
  double hi = -std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; m < v.size(); ++m) {
    if (m != skip) hi = std::max(hi, v(m));
  }
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (Eigen::Index m = 0; m < v.size(); ++m) {
    if (m != skip) acc += std::exp(v(m) - hi);
  }
  return hi + std::log(acc);
}

// Scores xi(r, l) + x.rho(l) for every destination l.
Eigen::VectorXd row_scores(int r, const Eigen::MatrixXd& xi,
                           const Eigen::MatrixXd& rho,
                           const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::VectorXd v = xi.row(r).transpose();
  if (rho.cols() > 0) v += rho * x;
  return v;
}

double draw_normal(const GaussianConditional& g, RngStream& rng) {
  return g.mean + std::sqrt(g.variance) * rng.normal();
}

}  // namespace

void TransitionParams::check_reference_zeros() const {
  auto fail = [](const std::string& what) {
    throw NumericalError("reference-state constraint violated: " + what);
  };
  for (std::size_t i = 0; i < xi.size(); ++i) {
    if ((xi[i].col(0).array() != 0.0).any()) {
      fail("xi column 0 of subject " + std::to_string(i));
    }
    if (rho[i].rows() > 0 && rho[i].cols() > 0 &&
        (rho[i].row(0).array() != 0.0).any()) {
      fail("rho row 0 of subject " + std::to_string(i));
    }
  }
  if (Z.size() > 0 && (Z.col(0).array() != 0.0).any()) fail("Z column 0");
  if (eta.size() > 0 && (eta.row(0).array() != 0.0).any()) fail("eta row 0");
}

TransitionParams prior_mean_params(const ModelConfig& config,
                                   std::size_t n_subjects,
                                   Eigen::Index n_covariates) {
  const int S = config.n_states;
  TransitionParams p;
  p.Z = config.z0;
  p.Z.col(0).setZero();
  p.eta = Eigen::MatrixXd::Zero(S, n_covariates);
  p.xi.assign(n_subjects, p.Z);
  p.rho.assign(n_subjects, p.eta);
  return p;
}

Eigen::MatrixXd compute_q(const Eigen::MatrixXd& xi, const Eigen::MatrixXd& rho,
                          const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Eigen::Index S = xi.rows();
  if (!xi.allFinite() || !rho.allFinite() || !x.allFinite()) {
    throw NumericalError("compute_q: non-finite parameter or covariate");
  }
  Eigen::VectorXd cov_term = Eigen::VectorXd::Zero(S);
  if (rho.cols() > 0) cov_term = rho * x;
  Eigen::MatrixXd q(S, S);
  for (Eigen::Index r = 0; r < S; ++r) {
    Eigen::RowVectorXd v = xi.row(r) + cov_term.transpose();
    const double hi = v.maxCoeff();
    v = (v.array() - hi).exp();
    q.row(r) = v / v.sum();
  }
  return q;
}

std::vector<Eigen::MatrixXd> compute_q_sequence(
    const Eigen::MatrixXd& xi, const Eigen::MatrixXd& rho,
    const Eigen::MatrixXd& covariates) {
  std::vector<Eigen::MatrixXd> out;
  const Eigen::Index T = covariates.rows();
  out.reserve(static_cast<std::size_t>(std::max<Eigen::Index>(T - 1, 0)));
  for (Eigen::Index t = 0; t + 1 < T; ++t) {
    out.push_back(compute_q(xi, rho, covariates.row(t).transpose()));
  }
  return out;
}

double holmes_held_offset(int r, int s, const Eigen::MatrixXd& xi,
                          const Eigen::MatrixXd& rho,
                          const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Eigen::VectorXd v = row_scores(r, xi, rho, x);
  const double own_cov = v(s) - xi(r, s);
  return log_sum_exp_except(v, s) - own_cov;
}

GaussianConditional logistic_conditional(double prior_mean, double prior_var,
                                         std::span<const LogisticTerm> terms) {
  double precision = 1.0 / prior_var;
  double linear = prior_mean / prior_var;
  for (const auto& t : terms) {
    precision += t.design * t.design * t.pg;
    linear += t.design * (t.response - 0.5 + t.pg * t.offset);
  }
  GaussianConditional g;
  g.variance = 1.0 / precision;
  g.mean = g.variance * linear;
  return g;
}

std::vector<LogisticTerm> xi_terms(int r, int s, const Eigen::MatrixXd& xi,
                                   const Eigen::MatrixXd& rho,
                                   const Eigen::MatrixXd& covariates,
                                   std::span<const int> states, RngStream& rng) {
  std::vector<LogisticTerm> terms;
  for (std::size_t t = 0; t + 1 < states.size(); ++t) {
    if (states[t] != r) continue;
    const auto x = covariates.row(static_cast<Eigen::Index>(t)).transpose();
    LogisticTerm term;
    term.design = 1.0;
    term.response = states[t + 1] == s ? 1.0 : 0.0;
    term.offset = holmes_held_offset(r, s, xi, rho, x);
    term.pg = sample_pg(xi(r, s) - term.offset, rng);
    terms.push_back(term);
  }
  return terms;
}

std::vector<LogisticTerm> rho_terms(int s, Eigen::Index b,
                                    const Eigen::MatrixXd& xi,
                                    const Eigen::MatrixXd& rho,
                                    const Eigen::MatrixXd& covariates,
                                    std::span<const int> states, RngStream& rng) {
  std::vector<LogisticTerm> terms;
  for (std::size_t t = 0; t + 1 < states.size(); ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    const double xb = covariates(ti, b);
    if (xb == 0.0) continue;
    const int r = states[t];
    const Eigen::VectorXd v = row_scores(r, xi, rho, covariates.row(ti).transpose());
    LogisticTerm term;
    term.design = xb;
    term.response = states[t + 1] == s ? 1.0 : 0.0;
    // log-odds = v(s) - lse_{m != s} v(m) = xb * rho(s, b) - offset
    term.offset = log_sum_exp_except(v, s) - (v(s) - xb * rho(s, b));
    term.pg = sample_pg(xb * rho(s, b) - term.offset, rng);
    terms.push_back(term);
  }
  return terms;
}

void gibbs_update_xi(Eigen::MatrixXd& xi, const Eigen::MatrixXd& rho,
                     const Eigen::MatrixXd& Z, double sigma_xi,
                     const Eigen::MatrixXd& covariates,
                     std::span<const int> states, RngStream& rng) {
  const int S = static_cast<int>(xi.rows());
  for (int r = 0; r < S; ++r) {
    for (int s = 1; s < S; ++s) {
      const auto terms = xi_terms(r, s, xi, rho, covariates, states, rng);
      const auto g = logistic_conditional(Z(r, s), sigma_xi, terms);
      xi(r, s) = draw_normal(g, rng);
    }
  }
}

void gibbs_update_rho(const Eigen::MatrixXd& xi, Eigen::MatrixXd& rho,
                      const Eigen::MatrixXd& eta, double sigma_rho,
                      const Eigen::MatrixXd& covariates,
                      std::span<const int> states, RngStream& rng) {
  const int S = static_cast<int>(rho.rows());
  for (int s = 1; s < S; ++s) {
    for (Eigen::Index b = 0; b < rho.cols(); ++b) {
      const auto terms = rho_terms(s, b, xi, rho, covariates, states, rng);
      const auto g = logistic_conditional(eta(s, b), sigma_rho, terms);
      rho(s, b) = draw_normal(g, rng);
    }
  }
}

GaussianConditional group_conditional(double prior_mean, double prior_var,
                                      double subject_var, double subject_sum,
                                      std::size_t n_subjects) {
  GaussianConditional g;
  g.variance =
      1.0 / (1.0 / prior_var + static_cast<double>(n_subjects) / subject_var);
  g.mean = g.variance * (prior_mean / prior_var + subject_sum / subject_var);
  return g;
}

void gibbs_update_group(TransitionParams& params, const ModelConfig& config,
                        RngStream& rng) {
  const Eigen::Index S = params.Z.rows();
  const std::size_t N = params.xi.size();
  // Subject sums run in subject-index order so results do not depend on
  // the worker count.
  for (Eigen::Index r = 0; r < S; ++r) {
    for (Eigen::Index s = 1; s < S; ++s) {
      double sum = 0.0;
      for (std::size_t i = 0; i < N; ++i) sum += params.xi[i](r, s);
      const auto g = group_conditional(config.z0(r, s), config.sigma_z,
                                       config.sigma_xi, sum, N);
      params.Z(r, s) = draw_normal(g, rng);
    }
  }
  for (Eigen::Index s = 1; s < S; ++s) {
    for (Eigen::Index b = 0; b < params.eta.cols(); ++b) {
      double sum = 0.0;
      for (std::size_t i = 0; i < N; ++i) sum += params.rho[i](s, b);
      const auto g = group_conditional(0.0, config.sigma_eta, config.sigma_rho,
                                       sum, N);
      params.eta(s, b) = draw_normal(g, rng);
    }
  }
}

}  // namespace pibdfc
