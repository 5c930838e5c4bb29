#include "icepred/adjoint.hpp"

namespace icepred {

const char* to_string(HessianMode mode) { return mode == HessianMode::full ? "full" : "gauss-newton"; }

HessianMode hessian_mode_from_string(const std::string& name) {
  if (name == "full") return HessianMode::full;
  if (name == "gauss-newton") return HessianMode::gauss_newton;
  throw ConfigError("unknown Hessian mode '" + name + "'");
}

CostValue eval_cost(const StokesState& state, const Eigen::VectorXd& beta, const ObservationSet& obs,
                    const PriorModel* prior, const FlowlineMesh& mesh) {
  CostValue c;
  c.misfit = obs.misfit(surface_velocity(state, mesh));
  c.reg = prior ? prior->reg_cost(beta) : 0.0;
  c.total = c.misfit + c.reg;
  return c;
}

Eigen::VectorXd misfit_source(const StokesState& state, const ObservationSet& obs, const FlowlineMesh& mesh) {
  return obs.lift(obs.weighted_residual(surface_velocity(state, mesh)));
}

StokesState solve_adjoint(const StokesProblem& problem, const SaddleSolver& jacobian, const Eigen::VectorXd& source) {
  if (source.isZero(0.0)) return problem.zero_state();
  return problem.from_system(jacobian.solve(-problem.reduce_dual(source)));
}

Eigen::VectorXd eval_gradient(const StokesProblem& problem, const Eigen::VectorXd& beta, const StokesState& state,
                              const StokesState& adjoint, const PriorModel* prior) {
  Eigen::VectorXd g = problem.basal_pairing(beta, {}, state.u, adjoint.u);
  if (prior) g += prior->reg_gradient(beta);
  return g;
}

LinearizedPoint::LinearizedPoint(const StokesProblem& problem, const ObservationSet& obs, const PriorModel* prior,
                                 Eigen::VectorXd beta, const NewtonConfig& newton, const StokesState* warm)
    : problem_(&problem), obs_(&obs), prior_(prior), beta_(std::move(beta)) {
  forward_ = problem.solve(beta_, newton, warm);
  finish();
}

LinearizedPoint::LinearizedPoint(const StokesProblem& problem, const ObservationSet& obs, const PriorModel* prior,
                                 Eigen::VectorXd beta, ForwardSolution forward)
    : problem_(&problem), obs_(&obs), prior_(prior), beta_(std::move(beta)), forward_(std::move(forward)) {
  finish();
}

void LinearizedPoint::finish() {
  const FlowlineMesh& mesh = problem_->mesh();
  adjoint_ = solve_adjoint(*problem_, *forward_.jacobian, misfit_source(forward_.state, *obs_, mesh));
  cost_ = eval_cost(forward_.state, beta_, *obs_, prior_, mesh);
  misfit_gradient_ = eval_gradient(*problem_, beta_, forward_.state, adjoint_, nullptr);
  gradient_ = prior_ ? Eigen::VectorXd(misfit_gradient_ + prior_->reg_gradient(beta_)) : misfit_gradient_;
}

CostValue LinearizedPoint::cost_with(const PriorModel* prior) const {
  CostValue c = cost_;
  c.reg = prior ? prior->reg_cost(beta_) : 0.0;
  c.total = c.misfit + c.reg;
  return c;
}

Eigen::VectorXd LinearizedPoint::gradient_with(const PriorModel* prior) const {
  return prior ? Eigen::VectorXd(misfit_gradient_ + prior->reg_gradient(beta_)) : misfit_gradient_;
}

Eigen::VectorXd LinearizedPoint::hessian_action(const Eigen::VectorXd& direction, HessianMode mode,
                                                bool include_prior) const {
  if (direction.size() != beta_.size()) throw InvalidArgument("Hessian direction has the wrong size");
  const StokesProblem& p = *problem_;
  const FlowlineMesh& mesh = p.mesh();
  const StokesState& fwd = forward_.state;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(beta_.size());
  if (include_prior && prior_) out += prior_->precision_apply(direction);
  if (direction.isZero(0.0)) return out;

  // Incremental forward: K uhat = -int exp(beta) bhat Tu.Tw
  const StokesState uhat = p.from_system(jacobian().solve(-p.reduce_dual(p.basal_load(beta_, direction, fwd.u))));
  // Incremental adjoint: K vhat = -[B^T W B uhat + second-order terms]
  Eigen::VectorXd source = obs_->lift(obs_->weight() * surface_velocity(uhat, mesh));
  if (mode == HessianMode::full) {
    source += p.viscous_second_variation(fwd.u, uhat.u, adjoint_.u);
    source += p.basal_load(beta_, direction, adjoint_.u);
  }
  const StokesState vhat = p.from_system(jacobian().solve(-p.reduce_dual(source)));
  incremental_solves_ += 2;

  out += p.basal_pairing(beta_, {}, fwd.u, vhat.u);
  if (mode == HessianMode::full) {
    out += p.basal_pairing(beta_, {}, uhat.u, adjoint_.u);
    out += p.basal_pairing(beta_, direction, fwd.u, adjoint_.u);
  }
  return out;
}

}  // namespace icepred
