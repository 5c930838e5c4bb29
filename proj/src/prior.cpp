#include "icepred/prior.hpp"

#include <cmath>

#include <Eigen/SparseCholesky>

#include "icepred/errors.hpp"
#include "icepred/random.hpp"

namespace icepred {

void PriorParams::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("prior gamma must be positive");
  if (!(delta > 0.0) || !std::isfinite(delta)) throw ConfigError("prior delta must be positive");
  if (kappa != 0.5 && kappa != 1.0) throw ConfigError("prior kappa must be 0.5 or 1");
  if (!std::isfinite(beta0)) throw ConfigError("prior mean must be finite");
}

using Cholesky = Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>>;

struct PriorModel::Factors {
  Cholesky k;
  Cholesky m;
};

PriorModel::PriorModel(const FlowlineMesh& mesh, const PriorParams& params)
    : PriorModel(assemble_boundary_stiffness(mesh, BoundaryTag::bottom),
                 assemble_boundary_mass(mesh, BoundaryTag::bottom, TraceSpace::linear), params) {}

PriorModel::PriorModel(SparseMatrix stiffness, SparseMatrix mass, const PriorParams& params)
    : params_(params), stiffness_(std::move(stiffness)), mass_(std::move(mass)) {
  params_.validate();
  if (stiffness_.rows() != mass_.rows() || stiffness_.rows() != stiffness_.cols() || mass_.rows() != mass_.cols())
    throw InvalidArgument("prior stiffness and mass must be square and of equal size");
  factorize();
}

PriorModel::PriorModel(const PriorModel& o)
    : params_(o.params_), stiffness_(o.stiffness_), mass_(o.mass_) {
  factorize();
}

PriorModel::~PriorModel() = default;

void PriorModel::factorize() {
  k_ = params_.gamma * stiffness_ + params_.delta * mass_;
  factors_ = std::make_unique<Factors>();
  factors_->k.compute(k_);
  if (factors_->k.info() != Eigen::Success) throw NumericError("prior operator K is not positive definite");
  factors_->m.compute(mass_);
  if (factors_->m.info() != Eigen::Success) throw NumericError("basal mass matrix is not positive definite");
}

PriorModel PriorModel::with_gamma(double gamma) const {
  PriorParams p = params_;
  p.gamma = gamma;
  return PriorModel(stiffness_, mass_, p);
}

Eigen::VectorXd PriorModel::precision_apply(const Eigen::VectorXd& v) const {
  if (v.size() != size()) throw InvalidArgument("prior: vector has the wrong size");
  if (params_.kappa == 0.5) return k_ * v;
  return k_ * factors_->m.solve(Eigen::VectorXd(k_ * v));
}

Eigen::VectorXd PriorModel::covariance_apply(const Eigen::VectorXd& w) const {
  if (w.size() != size()) throw InvalidArgument("prior: vector has the wrong size");
  if (params_.kappa == 0.5) return factors_->k.solve(w);
  const Eigen::VectorXd y = factors_->k.solve(w);
  return factors_->k.solve(Eigen::VectorXd(mass_ * y));
}

Eigen::VectorXd PriorModel::mass_solve(const Eigen::VectorXd& w) const { return factors_->m.solve(w); }

double PriorModel::dual_norm(const Eigen::VectorXd& w) const { return std::sqrt(std::max(0.0, w.dot(mass_solve(w)))); }

Eigen::VectorXd PriorModel::reg_gradient(const Eigen::VectorXd& beta) const {
  return precision_apply(beta - mean());
}

double PriorModel::reg_cost(const Eigen::VectorXd& beta) const {
  const Eigen::VectorXd d = beta - mean();
  return 0.5 * d.dot(precision_apply(d));
}

Eigen::VectorXd PriorModel::sample_zero_mean(std::mt19937_64& rng) const {
  const Eigen::VectorXd z = standard_normal(rng, size());
  if (params_.kappa == 0.5) {
    // K = L L^T, sample L^-T z has covariance K^-1.
    return factors_->k.matrixU().solve(z);
  }
  // M = L L^T, sample K^-1 L z has covariance K^-1 M K^-1.
  const Eigen::VectorXd lz = factors_->m.matrixL() * z;
  return factors_->k.solve(lz);
}

Eigen::VectorXd PriorModel::pointwise_variance() const {
  Eigen::VectorXd var(size());
  for (int i = 0; i < size(); ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(size());
    e[i] = 1.0;
    var[i] = covariance_apply(e)[i];
  }
  return var;
}

Eigen::MatrixXd PriorModel::dense_covariance() const {
  Eigen::MatrixXd c(size(), size());
  for (int i = 0; i < size(); ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(size());
    e[i] = 1.0;
    c.col(i) = covariance_apply(e);
  }
  return c;
}

}  // namespace icepred
