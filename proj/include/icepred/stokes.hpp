#pragma once

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "icepred/errors.hpp"
#include "icepred/linear_solvers.hpp"
#include "icepred/mesh.hpp"
#include "icepred/rheology.hpp"

namespace icepred {

struct NewtonConfig {
  double rel_tol = 1e-11;
  double abs_tol = 1e-14;
  int max_iters = 60;
  LinearSolverKind solver = LinearSolverKind::direct;
  /// Upper bound of the inner Krylov tolerance; tightened as the residual drops.
  double krylov_forcing = 1e-2;
  double armijo_c1 = 1e-4;
  double shrink = 0.5;
  double min_step = 1e-8;

  void validate() const;
};

/// Velocity at all nodes (2 * node + component, km/a) and the deviation p' of
/// pressure from the hydrostatic field rho g (s_h(x) - z) (MPa).
struct StokesState {
  Eigen::VectorXd u;
  Eigen::VectorXd p;
};

struct ForwardRecord {
  std::vector<double> residual_norms;
  std::vector<double> step_lengths;
  std::vector<int> linear_iterations;
  double reference_norm = 0.0;  // residual of the zero state
  int iterations = 0;
  int residual_evaluations = 0;
  bool converged = false;
};

class NonconvergenceError : public Error {
 public:
  NonconvergenceError(const std::string& what, ForwardRecord record)
      : Error(ErrorKind::nonconvergence, what), record_(std::move(record)) {}
  const ForwardRecord& record() const { return record_; }

 private:
  ForwardRecord record_;
};

struct ForwardSolution {
  StokesState state;
  ForwardRecord record;
  /// Factorized Jacobian at the converged state; shared by the adjoint and
  /// incremental solves.
  std::shared_ptr<const SaddleSolver> jacobian;
};

using Vec2 = std::array<double, 2>;

/// Loads beyond gravity, used by manufactured-solution tests.
struct ExtraLoads {
  std::function<Vec2(double x, double z)> body_force;
  std::function<Vec2(BoundaryTag tag, double x, double z)> traction;
};

/// Discrete nonlinear Stokes problem on a flowline mesh with exp(beta) Robin
/// sliding and no-normal-flow on the bed. Unknowns of the linear(ized) systems
/// are [free velocity coordinates; pressure], where full velocity = R * free.
class StokesProblem {
 public:
  StokesProblem(const FlowlineMesh& mesh, const PhysicsParams& physics, bool gravity = true,
                ExtraLoads loads = {});

  const FlowlineMesh& mesh() const { return *mesh_; }
  const PhysicsParams& physics() const { return physics_; }
  int num_free_velocity() const { return static_cast<int>(constraint_.cols()); }
  int num_pressure() const { return mesh_->num_pressure_dofs(); }
  int system_size() const { return num_free_velocity() + num_pressure(); }
  const SparseMatrix& constraint() const { return constraint_; }
  const std::vector<Vec2>& basal_normals() const { return basal_normals_; }

  Eigen::VectorXd to_system(const StokesState& state) const;
  StokesState from_system(const Eigen::VectorXd& x) const;
  StokesState zero_state() const;
  /// System-sized vector [R^T f; 0] for a dual vector f on full velocity.
  Eigen::VectorXd reduce_dual(const Eigen::VectorXd& full_velocity_dual) const;

  Eigen::VectorXd residual(const StokesState& state, const Eigen::VectorXd& beta) const;
  SparseMatrix jacobian(const StokesState& state, const Eigen::VectorXd& beta) const;
  /// -|K| / eta_K lumped pressure mass, the Schur complement approximation.
  Eigen::VectorXd schur_diagonal(const StokesState& state) const;
  std::shared_ptr<const SaddleSolver> factorize(const StokesState& state, const Eigen::VectorXd& beta,
                                                LinearSolverKind kind) const;

  ForwardSolution solve(const Eigen::VectorXd& beta, const NewtonConfig& cfg,
                        const StokesState* initial = nullptr) const;

  /// Basal dual vector: int exp(beta_h) w_h phi_j (T a).(T b) ds. An empty
  /// weight means w = 1.
  Eigen::VectorXd basal_pairing(const Eigen::VectorXd& beta, const Eigen::VectorXd& weight,
                                const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
  /// Full velocity dual: int exp(beta_h) w_h (T a).(T w) ds.
  Eigen::VectorXd basal_load(const Eigen::VectorXd& beta, const Eigen::VectorXd& weight,
                             const Eigen::VectorXd& a) const;
  /// Full velocity dual of the second variation of the viscous stress at u:
  /// int d2 sigma(u)[eps(a), eps(b)] : eps(w).
  Eigen::VectorXd viscous_second_variation(const Eigen::VectorXd& u, const Eigen::VectorXd& a,
                                           const Eigen::VectorXd& b) const;

  /// Per-cell integral of div u.
  Eigen::VectorXd cell_divergence(const Eigen::VectorXd& u) const;
  /// L2 norm of u - exact over the domain.
  double velocity_l2_error(const Eigen::VectorXd& u,
                           const std::function<Vec2(double, double)>& exact) const;
  /// Total pressure at the pressure nodes.
  Eigen::VectorXd total_pressure(const StokesState& state) const;
  /// Hydrostatic reference pressure rho g (s_h(x) - z).
  double hydrostatic_pressure(double x, double z) const;

 private:
  void build_constraint();
  void check_inputs(const StokesState& state, const Eigen::VectorXd& beta) const;

  const FlowlineMesh* mesh_;
  PhysicsParams physics_;
  bool gravity_;
  ExtraLoads loads_;
  SparseMatrix constraint_;
  SparseMatrix constraint_t_;
  SparseMatrix divergence_;  // B on full velocity: -int psi_q div phi_i
  std::vector<Vec2> basal_normals_;
};

/// Surface velocity at the top nodes, interleaved (u_x, u_z) per node.
Eigen::VectorXd surface_velocity(const StokesState& state, const FlowlineMesh& mesh);

}  // namespace icepred
