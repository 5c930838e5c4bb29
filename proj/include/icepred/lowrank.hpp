#pragma once

#include <filesystem>
#include <functional>
#include <random>

#include <Eigen/Core>

#include "icepred/prior.hpp"

namespace icepred {

struct GevdConfig {
  int r_max = 20;
  int oversample = 10;
  int power_iters = 1;
  double threshold = 0.2;
  int threads = 1;

  void validate() const;
};

struct GevdResult {
  /// All Ritz values of the sketch, descending, and their Gamma_prior^-1
  /// orthonormal vectors.
  Eigen::VectorXd ritz_values;
  Eigen::MatrixXd ritz_vectors;
  /// Retained pairs (lambda >= threshold, at most r_max).
  Eigen::VectorXd lambda;
  Eigen::MatrixXd W;
  int hessian_actions = 0;
  int negative_ritz = 0;
  bool spectrum_exhausted = true;  // false if lambda_{r_max} >= threshold
};

using BasalOperator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Double-pass randomized generalized eigensolver for H w = lambda Gamma_prior^-1 w.
GevdResult randomized_gevd(const BasalOperator& hessian, const PriorModel& prior, const GevdConfig& cfg,
                           std::mt19937_64& rng);

/// Gaussian approximation Gamma_post = Gamma_prior - W D W^T around a MAP point.
///
/// Evaluated as P Gamma_prior P^T + W (I + Lambda)^-1 W^T with the projector
/// P = I - W V^T, V = Gamma_prior^-1 W, which equals the update form but avoids
/// subtracting the large prior variance of well-informed modes.
class LowRankPosterior {
 public:
  LowRankPosterior(const PriorModel& prior, Eigen::VectorXd beta_map, Eigen::VectorXd lambda, Eigen::MatrixXd W);

  const Eigen::VectorXd& beta_map() const { return beta_map_; }
  const Eigen::VectorXd& lambda() const { return lambda_; }
  const Eigen::MatrixXd& W() const { return W_; }
  int rank() const { return static_cast<int>(lambda_.size()); }
  const PriorModel& prior() const { return *prior_; }
  /// lambda / (1 + lambda).
  Eigen::VectorXd d() const;

  Eigen::VectorXd covariance_apply(const Eigen::VectorXd& w) const;
  /// w^T Gamma_post w for a dual vector w.
  double quadratic_form(const Eigen::VectorXd& w) const;
  /// w^T Gamma_prior w, evaluated in the same split.
  double prior_quadratic_form(const Eigen::VectorXd& w) const;
  Eigen::VectorXd pointwise_variance() const;
  Eigen::VectorXd sample(std::mt19937_64& rng) const;
  Eigen::MatrixXd dense_covariance() const;

 private:
  const PriorModel* prior_;
  Eigen::VectorXd beta_map_, lambda_;
  Eigen::MatrixXd W_, V_;
};

void write_spectrum_csv(const std::filesystem::path& path, const Eigen::VectorXd& lambda);
Eigen::VectorXd read_spectrum_csv(const std::filesystem::path& path);

}  // namespace icepred
