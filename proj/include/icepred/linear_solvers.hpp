#pragma once

#include <memory>

#include <Eigen/Core>

#include "icepred/mesh.hpp"

namespace icepred {

enum class LinearSolverKind { direct, krylov };

const char* to_string(LinearSolverKind kind);
LinearSolverKind linear_solver_from_string(const std::string& name);

struct SolveStats {
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Factorized saddle-point operator [[A, B^T], [B, 0]] of a linearized Stokes
/// problem. The first `num_velocity` unknowns are velocity.
///
/// `direct` factors the whole system with sparse LU. `krylov` runs restarted
/// flexible GMRES, right-preconditioned by the upper block-triangular operator
/// [[A, B^T], [0, S]] with A factored directly and S the diagonal Schur
/// approximation supplied by the caller.
class SaddleSolver {
 public:
  SaddleSolver(SparseMatrix system, int num_velocity, LinearSolverKind kind,
               Eigen::VectorXd schur_diagonal = {});
  ~SaddleSolver();
  SaddleSolver(SaddleSolver&&) noexcept;
  SaddleSolver& operator=(SaddleSolver&&) noexcept;

  const SparseMatrix& matrix() const { return system_; }
  int size() const { return static_cast<int>(system_.rows()); }
  int num_velocity() const { return num_velocity_; }
  LinearSolverKind kind() const { return kind_; }

  /// Thread-safe for concurrent callers.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs, double rel_tol = 1e-12,
                        SolveStats* stats = nullptr) const;

 private:
  struct Impl;
  SparseMatrix system_;
  int num_velocity_;
  LinearSolverKind kind_;
  std::unique_ptr<Impl> impl_;
};

/// Restarted right-preconditioned flexible GMRES. Returns the iteration count.
template <class Op, class Prec>
int fgmres(const Op& apply, const Prec& precondition, const Eigen::VectorXd& b, Eigen::VectorXd& x,
           double rel_tol, int max_iters, int restart, double* final_relres = nullptr);

}  // namespace icepred

#include "icepred/fgmres_impl.hpp"
