#include "pibdfc/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "pibdfc/error.hpp"

namespace pibdfc {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kPiSq = kPi * kPi;
// Switch point between the inverse-Gaussian and exponential proposal pieces.
constexpr double kTrunc = 0.64;
constexpr double kTruncRecip = 1.0 / kTrunc;

std::seed_seq make_seed_seq(std::uint64_t seed, std::uint64_t stream_id) {
  return std::seed_seq{static_cast<std::uint32_t>(seed),
                       static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(stream_id),
                       static_cast<std::uint32_t>(stream_id >> 32),
                       0x9e3779b9u};
}

double log_normal_cdf(double x) {
  return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
}

// n-th coefficient of the alternating series for the J*(1) density.
double series_coef(int n, double x) {
  const double k = (n + 0.5) * kPi;
  if (x > kTrunc) return k * std::exp(-0.5 * k * k * x);
  if (x <= 0.0) return 0.0;
  const double log_val = -1.5 * (std::log(0.5 * kPi) + std::log(x)) +
                         std::log(k) - 2.0 * (n + 0.5) * (n + 0.5) / x;
  return std::exp(log_val);
}

// Probability of proposing from the truncated exponential piece.
double exponential_mass(double z) {
  const double fz = 0.125 * kPiSq + 0.5 * z * z;
  const double b = std::sqrt(1.0 / kTrunc) * (kTrunc * z - 1.0);
  const double a = -std::sqrt(1.0 / kTrunc) * (kTrunc * z + 1.0);
  const double x0 = std::log(fz) + fz * kTrunc;
  const double xb = x0 - z + log_normal_cdf(b);
  const double xa = x0 + z + log_normal_cdf(a);
  const double q_over_p = 4.0 / kPi * (std::exp(xb) + std::exp(xa));
  return 1.0 / (1.0 + q_over_p);
}

// Inverse Gaussian IG(1/z, 1) truncated to (0, kTrunc).
double truncated_inverse_gaussian(double z, RngStream& rng) {
  double x = kTrunc + 1.0;
  if (kTruncRecip > z) {
    double alpha = 0.0;
    while (rng.uniform() > alpha) {
      double e1 = rng.exponential();
      double e2 = rng.exponential();
      while (e1 * e1 > 2.0 * e2 / kTrunc) {
        e1 = rng.exponential();
        e2 = rng.exponential();
      }
      x = 1.0 + e1 * kTrunc;
      x = kTrunc / (x * x);
      alpha = std::exp(-0.5 * z * z * x);
    }
  } else {
    const double mu = 1.0 / z;
    while (x > kTrunc) {
      double y = rng.normal();
      y *= y;
      const double half_mu = 0.5 * mu;
      const double mu_y = mu * y;
      x = mu + half_mu * mu_y - half_mu * std::sqrt(4.0 * mu_y + mu_y * mu_y);
      if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
    }
  }
  return x;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  auto seq = make_seed_seq(seed, stream_id);
  engine_.seed(seq);
}

double RngStream::uniform() {
  double u = 0.0;
  do {
    u = std::generate_canonical<double, 53>(engine_);
  } while (u <= 0.0 || u >= 1.0);
  return u;
}

double RngStream::normal() { return normal_(engine_); }

double RngStream::exponential() { return -std::log(uniform()); }

double RngStream::gamma(double shape) {
  std::gamma_distribution<double> dist(shape, 1.0);
  return dist(engine_);
}

std::size_t RngStream::categorical(
    const Eigen::Ref<const Eigen::VectorXd>& weights) {
  const double total = weights.sum();
  double u = uniform() * total;
  const auto n = static_cast<std::size_t>(weights.size());
  for (std::size_t k = 0; k < n; ++k) {
    u -= weights(static_cast<Eigen::Index>(k));
    if (u <= 0.0 && weights(static_cast<Eigen::Index>(k)) > 0.0) return k;
  }
  // Rounding left a sliver of mass: return the last positive-weight entry.
  for (std::size_t k = n; k-- > 0;) {
    if (weights(static_cast<Eigen::Index>(k)) > 0.0) return k;
  }
  throw NumericalError("categorical draw with no positive weight");
}

double pg_mean(double c) {
  const double a = std::abs(c);
  if (a < 1e-6) return 0.25 - a * a / 48.0;
  return std::tanh(0.5 * a) / (2.0 * a);
}

double sample_pg(double c, RngStream& rng) {
  const double z = 0.5 * std::abs(c);
  const double fz = 0.125 * kPiSq + 0.5 * z * z;
  const double texp_mass = exponential_mass(z);
  for (;;) {
    double x = 0.0;
    if (rng.uniform() < texp_mass) {
      x = kTrunc + rng.exponential() / fz;
    } else {
      x = truncated_inverse_gaussian(z, rng);
    }
    double s = series_coef(0, x);
    const double y = rng.uniform() * s;
    for (int n = 1;; ++n) {
      if (n % 2 == 1) {
        s -= series_coef(n, x);
        if (y <= s) return 0.25 * x;
      } else {
        s += series_coef(n, x);
        if (y > s) break;
      }
    }
  }
}

double sample_gamma(double shape, double rate, RngStream& rng) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw std::invalid_argument("gamma parameters must be positive");
  }
  return rng.gamma(shape) / rate;
}

double sample_inverse_gamma(double shape, double scale, RngStream& rng) {
  if (!(shape > 0.0) || !(scale > 0.0)) {
    throw std::invalid_argument("inverse gamma parameters must be positive");
  }
  const double g = rng.gamma(shape);
  constexpr double kFloor = 1e-300;
  return scale / std::max(g, kFloor);
}

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean,
                           const Eigen::MatrixXd& covariance, RngStream& rng,
                           const std::string& what) {
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("Cholesky factorization failed: " + what +
                         " is not symmetric positive definite");
  }
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = rng.normal();
  return mean + llt.matrixL() * z;
}

Eigen::VectorXd sample_mvn_canonical(const Eigen::VectorXd& b,
                                     const Eigen::MatrixXd& precision,
                                     RngStream& rng, const std::string& what) {
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("Cholesky factorization failed: " + what +
                         " is not symmetric positive definite");
  }
  Eigen::VectorXd z(b.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = rng.normal();
  Eigen::VectorXd mean = llt.solve(b);
  return mean + llt.matrixU().solve(z);
}

}  // namespace pibdfc
