#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "icepred/lowrank.hpp"
#include "icepred/stokes.hpp"

namespace icepred {

/// Outflow flux Q = rho * int_{Gamma_o} u.n ds * unit_factor. Gamma_o collects
/// the facets of `boundary` whose midpoint elevation lies in [z_min, z_max].
struct QoiSpec {
  std::string tag = "outflow";
  BoundaryTag boundary = BoundaryTag::right;
  double z_min = -std::numeric_limits<double>::infinity();
  double z_max = std::numeric_limits<double>::infinity();
  double rho = 910.0;
  double unit_factor = 1.0;

  void validate() const;
};

/// Indices into mesh.facets(spec.boundary) forming Gamma_o; throws if empty.
std::vector<int> outflow_facets(const QoiSpec& spec, const FlowlineMesh& mesh);

double eval_qoi(const StokesState& state, const QoiSpec& spec, const FlowlineMesh& mesh);
/// dQ/du as a full velocity dual vector (Q is linear in u).
Eigen::VectorXd qoi_source(const QoiSpec& spec, const FlowlineMesh& mesh);

struct PredictionGradient {
  StokesState adjoint;
  Eigen::VectorXd gradient;  // basal dual vector F
};

/// Q-adjoint solve with the factorized Jacobian at beta, then F = exp(beta) Tu.Tv.
PredictionGradient prediction_gradient(const StokesProblem& problem, const Eigen::VectorXd& beta,
                                       const ForwardSolution& forward, const QoiSpec& spec);

struct PredictionVariance {
  double var_post = 0.0;
  double var_prior = 0.0;
  double sigma_post() const { return std::sqrt(var_post); }
  double sigma_prior() const { return std::sqrt(var_prior); }
};

PredictionVariance prediction_variance(const Eigen::VectorXd& F, const LowRankPosterior& post);

struct IfpDirection {
  Eigen::VectorXd direction;
  double sigma2 = 0.0;
};

/// Influential direction Sigma^{-1/2} Gamma_post F with Sigma^2 = F^T Gamma_post F.
IfpDirection ifp_direction(const Eigen::VectorXd& F, const LowRankPosterior& post);

struct PredictionReport {
  std::string tag;
  double q_map = 0.0;
  double sigma_post = 0.0;
  double sigma_prior = 0.0;
  double sigma2 = 0.0;
  Eigen::VectorXd gradient;
  Eigen::VectorXd direction;
};

void write_prediction_csv(const std::filesystem::path& path, const std::vector<PredictionReport>& reports);

}  // namespace icepred
