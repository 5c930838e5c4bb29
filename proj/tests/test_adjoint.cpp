#include "doctest.h"
#include "support.hpp"

using namespace support;

namespace {

struct Fixture {
  explicit Fixture(MisfitMode mode = MisfitMode::bayesian) : s(make_setup(small_config(12, 3, mode))) {}
  std::unique_ptr<Setup> s;
  std::mt19937_64 rng{11};

  Eigen::VectorXd random_beta() {
    return s->beta_true + 0.3 * standard_normal(rng, s->mesh.num_basal_dofs());
  }
};

}  // namespace

TEST_CASE("misfit gradient matches central differences") {
  for (MisfitMode mode : {MisfitMode::bayesian, MisfitMode::deterministic}) {
    CAPTURE(to_string(mode));
    Fixture f(mode);
    const Eigen::VectorXd beta = f.random_beta();
    const LinearizedPoint pt(f.s->problem, f.s->obs, nullptr, beta, f.s->cfg.forward);
    for (int trial = 0; trial < 3; ++trial) {
      const Eigen::VectorXd d = standard_normal(f.rng, beta.size());
      const double h = 1e-5;
      const double fd = (misfit_at(*f.s, beta + h * d, &pt.state()) - misfit_at(*f.s, beta - h * d, &pt.state())) / (2 * h);
      const double g = pt.misfit_gradient().dot(d);
      CHECK(rel_diff(fd, g) < 1e-6);
    }
  }
}

TEST_CASE("total gradient adds the prior gradient") {
  Fixture f;
  const Eigen::VectorXd beta = f.random_beta();
  const LinearizedPoint pt(f.s->problem, f.s->obs, &f.s->prior, beta, f.s->cfg.forward);
  const Eigen::VectorXd reg = f.s->prior.reg_gradient(beta);
  CHECK((pt.gradient() - pt.misfit_gradient() - reg).norm() <= 1e-12 * reg.norm());
  CHECK(pt.cost().total == doctest::Approx(pt.cost().misfit + f.s->prior.reg_cost(beta)));
}

TEST_CASE("exact data give a zero adjoint and zero misfit gradient") {
  Fixture f;
  const Eigen::VectorXd beta = f.random_beta();
  const ForwardSolution fwd = f.s->problem.solve(beta, f.s->cfg.forward);
  const ObservationSet exact(f.s->mesh, surface_velocity(fwd.state, f.s->mesh), MisfitMode::bayesian);
  const LinearizedPoint pt(f.s->problem, exact, nullptr, beta, fwd);
  CHECK(pt.cost().misfit == 0.0);
  CHECK(pt.adjoint().u.cwiseAbs().maxCoeff() == 0.0);
  CHECK(pt.misfit_gradient().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adjoint and gradient are linear in the misfit weight") {
  Fixture f;
  const Eigen::VectorXd beta = f.random_beta();
  const ForwardSolution fwd = f.s->problem.solve(beta, f.s->cfg.forward);
  const ObservationSet scaled = f.s->obs.scaled(3.0);
  const LinearizedPoint a(f.s->problem, f.s->obs, nullptr, beta, fwd);
  const LinearizedPoint b(f.s->problem, scaled, nullptr, beta, fwd);
  CHECK((b.adjoint().u - 3.0 * a.adjoint().u).norm() <= 1e-12 * b.adjoint().u.norm());
  CHECK((b.misfit_gradient() - 3.0 * a.misfit_gradient()).norm() <= 1e-12 * b.misfit_gradient().norm());
}

TEST_CASE("hessian actions are symmetric and linear") {
  Fixture f;
  const Eigen::VectorXd beta = f.random_beta();
  const LinearizedPoint pt(f.s->problem, f.s->obs, &f.s->prior, beta, f.s->cfg.forward);
  const int n = static_cast<int>(beta.size());
  for (HessianMode mode : {HessianMode::full, HessianMode::gauss_newton}) {
    CAPTURE(to_string(mode));
    for (int trial = 0; trial < 3; ++trial) {
      const Eigen::VectorXd v = standard_normal(f.rng, n), w = standard_normal(f.rng, n);
      const Eigen::VectorXd hv = pt.hessian_action(v, mode, false), hw = pt.hessian_action(w, mode, false);
      const double a = w.dot(hv), b = v.dot(hw);
      CHECK(std::abs(a - b) <= 1e-10 * hv.norm() * w.norm());
      const Eigen::VectorXd hsum = pt.hessian_action(v + 2.0 * w, mode, false);
      CHECK((hsum - hv - 2.0 * hw).norm() <= 1e-10 * hsum.norm());
    }
    CHECK(pt.hessian_action(Eigen::VectorXd::Zero(n), mode).norm() == 0.0);
  }
  const Eigen::VectorXd v = standard_normal(f.rng, n);
  CHECK((pt.hessian_action(v, HessianMode::full, true) - pt.hessian_action(v, HessianMode::full, false) -
         f.s->prior.precision_apply(v))
            .norm() <= 1e-10 * f.s->prior.precision_apply(v).norm());
}

TEST_CASE("full hessian matches differences of the gradient") {
  Fixture f;
  const Eigen::VectorXd beta = f.random_beta();
  const LinearizedPoint pt(f.s->problem, f.s->obs, nullptr, beta, f.s->cfg.forward);
  for (int trial = 0; trial < 2; ++trial) {
    const Eigen::VectorXd d = standard_normal(f.rng, beta.size());
    const double h = 1e-5;
    const Eigen::VectorXd fd =
        (misfit_gradient_at(*f.s, beta + h * d, &pt.state()) - misfit_gradient_at(*f.s, beta - h * d, &pt.state())) /
        (2 * h);
    const Eigen::VectorXd hd = pt.hessian_action(d, HessianMode::full, false);
    CHECK((fd - hd).norm() <= 1e-5 * hd.norm());
  }
}

TEST_CASE("gauss-newton hessian is positive semidefinite") {
  Fixture f;
  const LinearizedPoint pt(f.s->problem, f.s->obs, nullptr, f.random_beta(), f.s->cfg.forward);
  const Eigen::MatrixXd H = dense_misfit_hessian(pt, HessianMode::gauss_newton);
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues();
  CHECK(ev.minCoeff() >= -1e-10 * ev.maxCoeff());
  CHECK(pt.incremental_solves() == 2 * static_cast<int>(H.cols()));
}
