#pragma once

#include <atomic>
#include <memory>

#include <Eigen/Core>

#include "icepred/observations.hpp"
#include "icepred/prior.hpp"
#include "icepred/stokes.hpp"

namespace icepred {

enum class HessianMode { full, gauss_newton };

const char* to_string(HessianMode mode);
HessianMode hessian_mode_from_string(const std::string& name);

struct CostValue {
  double misfit = 0.0;
  double reg = 0.0;
  double total = 0.0;
};

/// Misfit plus optional regularization at a converged forward state.
CostValue eval_cost(const StokesState& state, const Eigen::VectorXd& beta, const ObservationSet& obs,
                    const PriorModel* prior, const FlowlineMesh& mesh);

/// Derivative of the misfit with respect to velocity, as a full velocity dual.
Eigen::VectorXd misfit_source(const StokesState& state, const ObservationSet& obs, const FlowlineMesh& mesh);

/// Solves the adjoint Stokes system K [v; q] = -[R^T source; 0] with the
/// factorized forward Jacobian.
StokesState solve_adjoint(const StokesProblem& problem, const SaddleSolver& jacobian,
                          const Eigen::VectorXd& source);

/// Gradient dual vector exp(beta) Tu.Tv + prior term (if a prior is given).
Eigen::VectorXd eval_gradient(const StokesProblem& problem, const Eigen::VectorXd& beta, const StokesState& state,
                              const StokesState& adjoint, const PriorModel* prior);

/// Forward state, adjoint and factorization at one parameter; immutable once
/// built, so Hessian actions may run concurrently.
class LinearizedPoint {
 public:
  /// Runs the forward and adjoint solves. `warm` seeds the Newton iteration.
  LinearizedPoint(const StokesProblem& problem, const ObservationSet& obs, const PriorModel* prior,
                  Eigen::VectorXd beta, const NewtonConfig& newton, const StokesState* warm = nullptr);
  /// Reuses an already converged forward solution.
  LinearizedPoint(const StokesProblem& problem, const ObservationSet& obs, const PriorModel* prior,
                  Eigen::VectorXd beta, ForwardSolution forward);

  const Eigen::VectorXd& beta() const { return beta_; }
  const StokesState& state() const { return forward_.state; }
  const StokesState& adjoint() const { return adjoint_; }
  const ForwardSolution& forward() const { return forward_; }
  const SaddleSolver& jacobian() const { return *forward_.jacobian; }
  const CostValue& cost() const { return cost_; }
  /// Gradient of misfit + reg.
  const Eigen::VectorXd& gradient() const { return gradient_; }
  const Eigen::VectorXd& misfit_gradient() const { return misfit_gradient_; }
  const StokesProblem& problem() const { return *problem_; }
  const PriorModel* prior() const { return prior_; }

  /// Cost and gradient under a different prior, reusing the state and adjoint.
  CostValue cost_with(const PriorModel* prior) const;
  Eigen::VectorXd gradient_with(const PriorModel* prior) const;

  /// Hessian action on a basal direction; costs two linearized solves.
  Eigen::VectorXd hessian_action(const Eigen::VectorXd& direction, HessianMode mode,
                                 bool include_prior = true) const;
  int incremental_solves() const { return incremental_solves_.load(); }

 private:
  void finish();

  const StokesProblem* problem_;
  const ObservationSet* obs_;
  const PriorModel* prior_;
  Eigen::VectorXd beta_;
  ForwardSolution forward_;
  StokesState adjoint_;
  CostValue cost_;
  Eigen::VectorXd misfit_gradient_, gradient_;
  mutable std::atomic<int> incremental_solves_{0};
};

}  // namespace icepred
