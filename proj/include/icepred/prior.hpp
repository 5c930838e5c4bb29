#pragma once

#include <memory>
#include <random>

#include <Eigen/Core>

#include "icepred/mesh.hpp"

namespace icepred {

struct PriorParams {
  double gamma = 10.0;
  double delta = 1e-5;
  double kappa = 1.0;  // 0.5 or 1
  double beta0 = 0.0;

  void validate() const;
};

/// Elliptic prior on the basal trace with K = gamma S + delta M. The discrete
/// precision is K for kappa = 1/2 and K M^-1 K for kappa = 1.
class PriorModel {
 public:
  PriorModel(const FlowlineMesh& mesh, const PriorParams& params);
  PriorModel(SparseMatrix stiffness, SparseMatrix mass, const PriorParams& params);
  ~PriorModel();
  PriorModel(const PriorModel&);
  PriorModel& operator=(const PriorModel&) = delete;

  int size() const { return static_cast<int>(mass_.rows()); }
  const PriorParams& params() const { return params_; }
  const SparseMatrix& mass() const { return mass_; }
  const SparseMatrix& stiffness() const { return stiffness_; }
  const SparseMatrix& operator_k() const { return k_; }
  Eigen::VectorXd mean() const { return Eigen::VectorXd::Constant(size(), params_.beta0); }

  PriorModel with_gamma(double gamma) const;

  /// Gamma_prior^-1 v (dual).
  Eigen::VectorXd precision_apply(const Eigen::VectorXd& v) const;
  /// Gamma_prior w (primal).
  Eigen::VectorXd covariance_apply(const Eigen::VectorXd& w) const;
  Eigen::VectorXd mass_solve(const Eigen::VectorXd& w) const;
  /// sqrt(w^T M^-1 w), the norm of a dual vector.
  double dual_norm(const Eigen::VectorXd& w) const;

  Eigen::VectorXd reg_gradient(const Eigen::VectorXd& beta) const;
  double reg_cost(const Eigen::VectorXd& beta) const;

  /// Zero-mean draw with covariance Gamma_prior.
  Eigen::VectorXd sample_zero_mean(std::mt19937_64& rng) const;
  Eigen::VectorXd sample(std::mt19937_64& rng) const { return mean() + sample_zero_mean(rng); }
  Eigen::VectorXd pointwise_variance() const;
  Eigen::MatrixXd dense_covariance() const;

 private:
  struct Factors;
  void factorize();

  PriorParams params_;
  SparseMatrix stiffness_, mass_, k_;
  std::unique_ptr<Factors> factors_;
};

}  // namespace icepred
