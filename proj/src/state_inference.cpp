#include "pibdfc/state_inference.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "pibdfc/error.hpp"

namespace pibdfc {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

Eigen::MatrixXd upper_cholesky(const Eigen::MatrixXd& omega, double& log_det) {
  Eigen::LLT<Eigen::MatrixXd> llt(omega);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(
        "emission precision is not positive definite (Cholesky failed)");
  }
  Eigen::MatrixXd u = llt.matrixU();
  log_det = 2.0 * u.diagonal().array().log().sum();
  return u;
}

}  // namespace

double emission_loglik(const Eigen::Ref<const Eigen::VectorXd>& y,
                       const Eigen::MatrixXd& omega) {
  double log_det = 0.0;
  const Eigen::MatrixXd u = upper_cholesky(omega, log_det);
  const double quad = (u * y).squaredNorm();
  const auto R = static_cast<double>(y.size());
  return -0.5 * R * kLog2Pi + 0.5 * log_det - 0.5 * quad;
}

EmissionModel::EmissionModel(const std::vector<Eigen::MatrixXd>& omegas) {
  for (const auto& omega : omegas) {
    double log_det = 0.0;
    upper_.push_back(upper_cholesky(omega, log_det));
    const auto R = static_cast<double>(omega.rows());
    constant_.push_back(-0.5 * R * kLog2Pi + 0.5 * log_det);
  }
}

Eigen::MatrixXd EmissionModel::loglik(const Eigen::MatrixXd& series) const {
  const auto S = static_cast<Eigen::Index>(upper_.size());
  Eigen::MatrixXd out(series.rows(), S);
  for (Eigen::Index s = 0; s < S; ++s) {
    // Row t of series * U^T is (U y_t)^T.
    const Eigen::MatrixXd w = series * upper_[static_cast<std::size_t>(s)].transpose();
    out.col(s) = (-0.5 * w.rowwise().squaredNorm()).array() +
                 constant_[static_cast<std::size_t>(s)];
  }
  return out;
}

Eigen::MatrixXd emission_loglik_matrix(const Eigen::MatrixXd& series,
                                       const std::vector<Eigen::MatrixXd>& omegas) {
  return EmissionModel(omegas).loglik(series);
}

Eigen::MatrixXd forward_filter(const Eigen::MatrixXd& loglik,
                               const std::vector<Eigen::MatrixXd>& q_seq,
                               const Eigen::VectorXd& pi0) {
  const Eigen::Index T = loglik.rows();
  const Eigen::Index S = loglik.cols();
  if (static_cast<Eigen::Index>(q_seq.size()) + 1 != T) {
    throw std::invalid_argument("forward_filter: need T-1 transition matrices");
  }
  Eigen::MatrixXd alpha(T, S);
  Eigen::RowVectorXd prior = pi0.transpose();
  for (Eigen::Index t = 0; t < T; ++t) {
    if (t > 0) prior = alpha.row(t - 1) * q_seq[static_cast<std::size_t>(t - 1)];
    const double hi = loglik.row(t).maxCoeff();
    if (!(hi > -std::numeric_limits<double>::infinity())) {
      throw NumericalError("impossible emission at time " + std::to_string(t));
    }
    Eigen::RowVectorXd a =
        prior.array() * (loglik.row(t).array() - hi).exp();
    const double total = a.sum();
    if (!(total > 0.0) || !std::isfinite(total)) {
      throw NumericalError("impossible emission at time " + std::to_string(t));
    }
    alpha.row(t) = a / total;
  }
  return alpha;
}

StateSequence forward_backward_sample(const Eigen::MatrixXd& loglik,
                                      const std::vector<Eigen::MatrixXd>& q_seq,
                                      const Eigen::VectorXd& pi0,
                                      RngStream& rng) {
  const Eigen::Index T = loglik.rows();
  const Eigen::Index S = loglik.cols();
  if (S == 1) {
    if (!(loglik.array() > -std::numeric_limits<double>::infinity()).all()) {
      throw NumericalError("impossible emission");
    }
    return StateSequence(static_cast<std::size_t>(T), 0);
  }
  const Eigen::MatrixXd alpha = forward_filter(loglik, q_seq, pi0);
  StateSequence states(static_cast<std::size_t>(T));
  states.back() = static_cast<int>(rng.categorical(alpha.row(T - 1).transpose()));
  for (Eigen::Index t = T - 1; t-- > 0;) {
    const int next = states[static_cast<std::size_t>(t + 1)];
    const Eigen::VectorXd w = alpha.row(t).transpose().cwiseProduct(
        q_seq[static_cast<std::size_t>(t)].col(next));
    states[static_cast<std::size_t>(t)] = static_cast<int>(rng.categorical(w));
  }
  return states;
}

std::vector<int> StateSummary::flagged(double threshold) const {
  std::vector<int> out;
  for (Eigen::Index t = 0; t < change_point_prob.size(); ++t) {
    if (change_point_prob(t) > threshold) out.push_back(static_cast<int>(t + 1));
  }
  return out;
}

StateSummary summarize_states(const std::vector<StateSequence>& draws,
                              int n_states) {
  if (draws.empty()) throw std::invalid_argument("summarize_states: no draws");
  const auto T = static_cast<Eigen::Index>(draws.front().size());
  StateSummary out;
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(T, n_states);
  Eigen::VectorXd changes = Eigen::VectorXd::Zero(std::max<Eigen::Index>(T - 1, 0));
  for (const auto& seq : draws) {
    if (static_cast<Eigen::Index>(seq.size()) != T) {
      throw std::invalid_argument("summarize_states: ragged draws");
    }
    for (Eigen::Index t = 0; t < T; ++t) {
      counts(t, seq[static_cast<std::size_t>(t)]) += 1.0;
      if (t > 0 && seq[static_cast<std::size_t>(t)] != seq[static_cast<std::size_t>(t - 1)]) {
        changes(t - 1) += 1.0;
      }
    }
  }
  const auto n = static_cast<double>(draws.size());
  out.state_prob = counts / n;
  out.change_point_prob = changes / n;
  out.map_states.resize(static_cast<std::size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) {
    Eigen::Index best = 0;
    for (Eigen::Index s = 1; s < n_states; ++s) {
      if (counts(t, s) > counts(t, best)) best = s;
    }
    out.map_states[static_cast<std::size_t>(t)] = static_cast<int>(best);
  }
  out.occupancy = counts.colwise().sum().transpose() / (n * static_cast<double>(T));
  return out;
}

}  // namespace pibdfc
