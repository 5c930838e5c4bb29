#include "icepred/linear_solvers.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "icepred/errors.hpp"

namespace icepred {

const char* to_string(LinearSolverKind kind) {
  return kind == LinearSolverKind::direct ? "direct" : "krylov";
}

LinearSolverKind linear_solver_from_string(const std::string& name) {
  if (name == "direct") return LinearSolverKind::direct;
  if (name == "krylov") return LinearSolverKind::krylov;
  throw ConfigError("unknown linear solver '" + name + "'");
}

struct SaddleSolver::Impl {
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  Eigen::SimplicialLDLT<SparseMatrix> velocity;
  SparseMatrix b_transpose;
  Eigen::VectorXd schur;
};

SaddleSolver::SaddleSolver(SparseMatrix system, int num_velocity, LinearSolverKind kind,
                           Eigen::VectorXd schur_diagonal)
    : system_(std::move(system)), num_velocity_(num_velocity), kind_(kind), impl_(std::make_unique<Impl>()) {
  system_.makeCompressed();
  if (kind_ == LinearSolverKind::direct) {
    impl_->lu.compute(system_);
    if (impl_->lu.info() != Eigen::Success)
      throw SolverError("sparse LU factorization of the Stokes system failed: " +
                        impl_->lu.lastErrorMessage());
  } else {
    const int np = size() - num_velocity_;
    if (schur_diagonal.size() != np) throw InvalidArgument("krylov solver needs a Schur diagonal");
    impl_->schur = std::move(schur_diagonal);
    const SparseMatrix a = system_.topLeftCorner(num_velocity_, num_velocity_);
    impl_->b_transpose = system_.topRightCorner(num_velocity_, np);
    impl_->velocity.compute(a);
    if (impl_->velocity.info() != Eigen::Success)
      throw SolverError("factorization of the viscous block failed");
  }
}

SaddleSolver::~SaddleSolver() = default;
SaddleSolver::SaddleSolver(SaddleSolver&&) noexcept = default;
SaddleSolver& SaddleSolver::operator=(SaddleSolver&&) noexcept = default;

Eigen::VectorXd SaddleSolver::solve(const Eigen::VectorXd& rhs, double rel_tol, SolveStats* stats) const {
  if (rhs.size() != size()) throw InvalidArgument("saddle solve: right-hand side has the wrong size");
  if (kind_ == LinearSolverKind::direct) {
    Eigen::VectorXd x = impl_->lu.solve(rhs);
    if (!x.allFinite()) throw SolverError("direct Stokes solve produced non-finite values");
    if (stats) {
      stats->iterations = 1;
      const double bn = rhs.norm();
      stats->relative_residual = bn > 0 ? (system_ * x - rhs).norm() / bn : 0.0;
    }
    return x;
  }
  const int nu = num_velocity_;
  const int np = size() - nu;
  auto apply = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return system_ * v; };
  auto precondition = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    Eigen::VectorXd out(v.size());
    out.tail(np) = v.tail(np).cwiseQuotient(impl_->schur);
    out.head(nu) = impl_->velocity.solve(v.head(nu) - impl_->b_transpose * out.tail(np));
    return out;
  };
  Eigen::VectorXd x = Eigen::VectorXd::Zero(rhs.size());
  double relres = 0.0;
  const int iters = fgmres(apply, precondition, rhs, x, rel_tol, 1000, 200, &relres);
  if (stats) {
    stats->iterations = iters;
    stats->relative_residual = relres;
  }
  if (!(relres <= std::max(rel_tol, 1e-14) * 10.0))
    throw SolverError("FGMRES did not reach the requested tolerance");
  return x;
}

}  // namespace icepred
