#pragma once

#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>

namespace pibdfc {

// Seeded random stream. Two streams built from the same (seed, stream_id)
// produce identical draw sequences; distinct stream ids are decorrelated
// through std::seed_seq.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  double uniform();               // (0, 1)
  double normal();                // N(0, 1)
  double exponential();           // Exp(1)
  double gamma(double shape);     // Gamma(shape, rate 1)
  std::size_t categorical(const Eigen::Ref<const Eigen::VectorXd>& weights);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Draw from the Polya-Gamma distribution PG(1, c) using Devroye's exact
// alternating-series rejection sampler.
double sample_pg(double c, RngStream& rng);

// Mean of PG(1, c): tanh(c/2) / (2c), with limit 1/4 at c = 0.
double pg_mean(double c);

// Gamma with the given shape and rate.
double sample_gamma(double shape, double rate, RngStream& rng);

// Inverse gamma with density proportional to x^{-shape-1} exp(-scale/x).
double sample_inverse_gamma(double shape, double scale, RngStream& rng);

// Multivariate normal N(mean, covariance). Throws NumericalError naming
// `what` when the covariance is not symmetric positive definite.
Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean,
                           const Eigen::MatrixXd& covariance, RngStream& rng,
                           const std::string& what = "covariance");

// Draws from N(P^{-1} b, P^{-1}) through the Cholesky factor of the
// precision P, without forming the inverse.
Eigen::VectorXd sample_mvn_canonical(const Eigen::VectorXd& b,
                                     const Eigen::MatrixXd& precision,
                                     RngStream& rng,
                                     const std::string& what = "precision");

}  // namespace pibdfc
