#include <cmath>
#include <random>

#include "doctest.h"
#include "icepred/random.hpp"
#include "icepred/stokes.hpp"
#include "mms_solution.hpp"

using namespace icepred;

namespace {

DomainSpec desk(LateralBc right = LateralBc::hydrostatic_ocean) {
  DomainSpec d;
  d.length = 100.0;
  d.bed = [](double x) { return -0.5 * x / 100.0 + 0.03 * std::sin(2.0 * M_PI * x / 20.0); };
  d.surface = [](double x) { return 0.06 + 1.14 * (1.0 - x * x / 1e4); };
  d.right_bc = right;
  return d;
}

DomainSpec closed_slab() {
  DomainSpec d = DomainSpec::slab(10.0, 1.0);
  d.left_bc = LateralBc::no_slip;
  d.right_bc = LateralBc::no_slip;
  return d;
}

Eigen::VectorXd random_state_vector(const StokesProblem& p, std::mt19937_64& rng, double scale) {
  return scale * standard_normal(rng, p.system_size());
}

double mms_error(int n, int order) {
  DomainSpec spec = DomainSpec::slab(1.0, 1.0);
  spec.left_bc = LateralBc::traction_free;
  spec.right_bc = LateralBc::traction_free;
  FlowlineMesh mesh(spec, n, n, order);
  PhysicsParams ph;
  ph.rheology.A = 1.0;
  ExtraLoads loads;
  loads.body_force = [](double x, double z) {
    const auto f = mms::body_force(x, z);
    return Vec2{f[0], f[1]};
  };
  loads.traction = [](BoundaryTag t, double x, double z) {
    std::array<double, 2> v{};
    switch (t) {
      case BoundaryTag::bottom: v = mms::traction_bottom(x, z); break;
      case BoundaryTag::top: v = mms::traction_top(x, z); break;
      case BoundaryTag::left: v = mms::traction_left(x, z); break;
      case BoundaryTag::right: v = mms::traction_right(x, z); break;
    }
    return Vec2{v[0], v[1]};
  };
  StokesProblem prob(mesh, ph, false, loads);
  const auto sol = prob.solve(Eigen::VectorXd::Zero(mesh.num_basal_dofs()), NewtonConfig{});
  return prob.velocity_l2_error(sol.state.u, [](double x, double z) {
    const auto v = mms::velocity(x, z);
    return Vec2{v[0], v[1]};
  });
}

}  // namespace

TEST_CASE("zero state without gravity has zero residual") {
  FlowlineMesh m(desk(), 6, 2);
  StokesProblem p(m, PhysicsParams{}, false);
  const Eigen::VectorXd beta = Eigen::VectorXd::Zero(m.num_basal_dofs());
  CHECK(p.residual(p.zero_state(), beta).norm() == 0.0);
}

TEST_CASE("closed flat slab is in hydrostatic equilibrium") {
  FlowlineMesh m(closed_slab(), 8, 4);
  PhysicsParams ph;
  StokesProblem p(m, ph);
  const Eigen::VectorXd beta = Eigen::VectorXd::Constant(m.num_basal_dofs(), 1.0);
  CHECK(p.residual(p.zero_state(), beta).norm() < 1e-10 * ph.rho_g());
  const auto sol = p.solve(beta, NewtonConfig{});
  CHECK(sol.record.iterations <= 1);
  CHECK(sol.state.u.cwiseAbs().maxCoeff() < 1e-10);
  // Total pressure is the hydrostatic field.
  const Eigen::VectorXd pt = p.total_pressure(sol.state);
  for (int i = 0; i < m.num_pressure_dofs(); ++i) {
    const Point q = m.pressure_point(i);
    CHECK(pt[i] == doctest::Approx(ph.rho_g() * (1.0 - q.z)).epsilon(1e-12));
  }
}

TEST_CASE("newtonian problem converges in one Newton step") {
  FlowlineMesh m(desk(), 8, 2);
  PhysicsParams ph;
  ph.rheology.n = 1.0;
  StokesProblem p(m, ph);
  const auto sol = p.solve(Eigen::VectorXd::Constant(m.num_basal_dofs(), 0.5), NewtonConfig{});
  CHECK(sol.record.converged);
  CHECK(sol.record.iterations == 1);
}

TEST_CASE("newtonian jacobian is independent of the state") {
  FlowlineMesh m(desk(), 4, 2);
  PhysicsParams ph;
  ph.rheology.n = 1.0;
  StokesProblem p(m, ph);
  std::mt19937_64 rng(1);
  const Eigen::VectorXd beta = Eigen::VectorXd::Constant(m.num_basal_dofs(), 0.2);
  const SparseMatrix a = p.jacobian(p.from_system(random_state_vector(p, rng, 1.0)), beta);
  const SparseMatrix b = p.jacobian(p.from_system(random_state_vector(p, rng, 1.0)), beta);
  CHECK((Eigen::MatrixXd(a) - Eigen::MatrixXd(b)).cwiseAbs().maxCoeff() < 1e-12 * Eigen::MatrixXd(a).cwiseAbs().maxCoeff());
}

TEST_CASE("jacobian is symmetric and matches finite differences of the residual") {
  FlowlineMesh m(desk(), 6, 2);
  StokesProblem p(m, PhysicsParams{});
  std::mt19937_64 rng(2);
  const Eigen::VectorXd beta = 0.3 * standard_normal(rng, m.num_basal_dofs());
  const Eigen::VectorXd x = random_state_vector(p, rng, 0.5);
  const StokesState s = p.from_system(x);
  const SparseMatrix J = p.jacobian(s, beta);
  const Eigen::VectorXd a = standard_normal(rng, p.system_size()), b = standard_normal(rng, p.system_size());
  const double ab = (J * a).dot(b), ba = a.dot(J * b);
  CHECK(std::abs(ab - ba) < 1e-12 * (std::abs(ab) + (J * a).norm() * b.norm()));

  const Eigen::VectorXd d = standard_normal(rng, p.system_size());
  const double h = 1e-6;
  const Eigen::VectorXd fd = (p.residual(p.from_system(x + h * d), beta) - p.residual(p.from_system(x - h * d), beta)) / (2 * h);
  const Eigen::VectorXd jd = J * d;
  CHECK((fd - jd).norm() < 1e-6 * jd.norm());
}

TEST_CASE("forward solve: convergence, mass conservation and factorization reuse") {
  FlowlineMesh m(desk(), 16, 4);
  StokesProblem p(m, PhysicsParams{});
  Eigen::VectorXd beta(m.num_basal_dofs());
  for (int i = 0; i < beta.size(); ++i) beta[i] = 0.5 - 2.5 * std::exp(-0.5 * std::pow((m.column_x(i) - 60) / 8, 2));
  const auto sol = p.solve(beta, NewtonConfig{});
  CHECK(sol.record.converged);
  CHECK(sol.record.residual_norms.back() <= 1e-11 * sol.record.reference_norm);
  const double umax = sol.state.u.cwiseAbs().maxCoeff();
  CHECK(umax > 0.1);
  CHECK(p.cell_divergence(sol.state.u).cwiseAbs().maxCoeff() < 1e-12 * umax);
  const SparseMatrix J = p.jacobian(sol.state, beta);
  CHECK((Eigen::MatrixXd(sol.jacobian->matrix()) - Eigen::MatrixXd(J)).cwiseAbs().maxCoeff() == 0.0);

  SUBCASE("warm start from the solution needs no iterations") {
    const auto again = p.solve(beta, NewtonConfig{}, &sol.state);
    CHECK(again.record.iterations <= 1);
  }
  SUBCASE("krylov inner solver reaches the same state") {
    NewtonConfig cfg;
    cfg.solver = LinearSolverKind::krylov;
    const auto k = p.solve(beta, cfg);
    CHECK(k.record.converged);
    CHECK((k.state.u - sol.state.u).cwiseAbs().maxCoeff() < 1e-8 * umax);
  }
}

TEST_CASE("nonconvergence is reported with its record") {
  FlowlineMesh m(desk(), 8, 2);
  StokesProblem p(m, PhysicsParams{});
  NewtonConfig cfg;
  cfg.max_iters = 2;
  CHECK_THROWS_AS(p.solve(Eigen::VectorXd::Zero(m.num_basal_dofs()), cfg), NonconvergenceError);
}

TEST_CASE("basal pairing is symmetric and linear in the weight") {
  FlowlineMesh m(desk(), 6, 2);
  StokesProblem p(m, PhysicsParams{});
  std::mt19937_64 rng(4);
  const Eigen::VectorXd beta = standard_normal(rng, m.num_basal_dofs());
  const Eigen::VectorXd a = standard_normal(rng, m.num_velocity_dofs()), b = standard_normal(rng, m.num_velocity_dofs());
  const Eigen::VectorXd w = standard_normal(rng, m.num_basal_dofs());
  CHECK((p.basal_pairing(beta, {}, a, b) - p.basal_pairing(beta, {}, b, a)).norm() < 1e-13 * p.basal_pairing(beta, {}, a, b).norm());
  CHECK((p.basal_pairing(beta, 2.0 * w, a, b) - 2.0 * p.basal_pairing(beta, w, a, b)).norm() < 1e-13 * p.basal_pairing(beta, w, a, b).norm());
  // basal_load pairs with a test velocity to the same number.
  CHECK(p.basal_load(beta, w, a).dot(b) == doctest::Approx(p.basal_pairing(beta, w, a, b).sum()).epsilon(1e-12));
}

TEST_CASE("manufactured solution converges at second order for k = 2") {
  const double e4 = mms_error(4, 2), e8 = mms_error(8, 2), e16 = mms_error(16, 2);
  CHECK(std::log2(e4 / e8) >= 2.0);
  CHECK(std::log2(e8 / e16) >= 2.0);
}

TEST_CASE("manufactured solution converges at third order for k = 3") {
  const double e2 = mms_error(2, 3), e4 = mms_error(4, 3), e8 = mms_error(8, 3);
  CHECK(std::log2(e4 / e8) >= 2.8);
}
