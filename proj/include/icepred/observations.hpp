#pragma once

#include <filesystem>

#include <Eigen/Core>

#include "icepred/mesh.hpp"
#include "icepred/stokes.hpp"

namespace icepred {

enum class MisfitMode { deterministic, bayesian };

const char* to_string(MisfitMode mode);
MisfitMode misfit_mode_from_string(const std::string& name);

struct NoiseModel {
  double relative_level = 0.1;
  double eps_norm = 1e-9;        // km^2/a^2
  double reference_length = 1.0;  // km of surface represented by one observation
};

/// Surface velocity data at the top velocity nodes, interleaved (x, z) per
/// node, with the weighting that defines the misfit 1/2 r^T W r.
///
/// Deterministic mode discretizes 1/2 int |u - u_obs|^2 / (|u_obs|^2 + eps) ds
/// with the consistent surface mass matrix. Bayesian mode uses the diagonal
/// noise covariance sigma_i^2 * reference_length / w_i, where w_i is the lumped
/// surface weight of node i, so that the data term approximates a continuous
/// white-noise misfit independent of the mesh.
class ObservationSet {
 public:
  ObservationSet(const FlowlineMesh& mesh, Eigen::VectorXd data, MisfitMode mode, NoiseModel noise = {});

  int size() const { return static_cast<int>(data_.size()); }
  MisfitMode mode() const { return mode_; }
  const NoiseModel& noise() const { return noise_; }
  const Eigen::VectorXd& data() const { return data_; }
  /// Per-observation noise standard deviation relative_level * (|d_i|^2 + eps)^(1/2).
  const Eigen::VectorXd& sigma() const { return sigma_; }
  /// Diagonal of the noise covariance (bayesian mode).
  const Eigen::VectorXd& noise_variance() const { return noise_variance_; }
  const SparseMatrix& weight() const { return weight_; }

  double misfit(const Eigen::VectorXd& predicted) const;
  /// W (predicted - d).
  Eigen::VectorXd weighted_residual(const Eigen::VectorXd& predicted) const;
  /// Adjoint of the surface trace: dual vector on full velocity.
  Eigen::VectorXd lift(const Eigen::VectorXd& surface_dual) const;
  /// Scales the misfit weight (used to check linearity in the weight).
  ObservationSet scaled(double factor) const;

 private:
  std::vector<int> top_nodes_;
  int num_velocity_dofs_;
  Eigen::VectorXd data_, sigma_, noise_variance_;
  MisfitMode mode_;
  NoiseModel noise_;
  SparseMatrix weight_;
};

/// Per-node noise standard deviation for surface velocity data.
Eigen::VectorXd noise_sigma(const Eigen::VectorXd& data, const NoiseModel& noise);

void write_observations(const std::filesystem::path& path, const FlowlineMesh& mesh, const Eigen::VectorXd& data);
Eigen::VectorXd read_observations(const std::filesystem::path& path, const FlowlineMesh& mesh);

}  // namespace icepred
