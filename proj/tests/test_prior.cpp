#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "icepred/errors.hpp"
#include "icepred/prior.hpp"
#include "icepred/random.hpp"

using namespace icepred;

namespace {

FlowlineMesh small_mesh() {
  DomainSpec d = DomainSpec::slab(10.0, 1.0);
  d.bed = [](double x) { return 0.1 * std::sin(x); };
  return FlowlineMesh(d, 8, 1);
}

Eigen::MatrixXd dense_precision(const PriorModel& p) {
  const Eigen::MatrixXd K(p.operator_k()), M(p.mass());
  return p.params().kappa == 1.0 ? Eigen::MatrixXd(K * M.inverse() * K) : K;
}

PriorParams params(double kappa, double gamma = 1.0, double delta = 0.1) {
  PriorParams p;
  p.kappa = kappa;
  p.gamma = gamma;
  p.delta = delta;
  return p;
}

}  // namespace

TEST_CASE("operator is gamma S + delta M") {
  const FlowlineMesh m = small_mesh();
  const PriorModel p(m, params(1.0, 3.0, 0.2));
  const Eigen::MatrixXd expect = 3.0 * Eigen::MatrixXd(p.stiffness()) + 0.2 * Eigen::MatrixXd(p.mass());
  CHECK((Eigen::MatrixXd(p.operator_k()) - expect).norm() < 1e-14 * expect.norm());
}

TEST_CASE("precision and covariance match dense algebra") {
  const FlowlineMesh m = small_mesh();
  std::mt19937_64 rng(3);
  for (double kappa : {0.5, 1.0}) {
    CAPTURE(kappa);
    const PriorModel p(m, params(kappa));
    const Eigen::MatrixXd P = dense_precision(p);
    const Eigen::VectorXd v = standard_normal(rng, p.size());
    CHECK((p.precision_apply(v) - P * v).norm() < 1e-12 * (P * v).norm());
    CHECK((p.covariance_apply(p.precision_apply(v)) - v).norm() < 1e-10 * v.norm());
    const Eigen::MatrixXd C = p.dense_covariance();
    CHECK((C - P.inverse()).norm() < 1e-10 * C.norm());
    CHECK((C - C.transpose()).norm() < 1e-12 * C.norm());
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(C).eigenvalues().minCoeff() > 0.0);
    CHECK((p.pointwise_variance() - C.diagonal()).norm() < 1e-10 * C.diagonal().norm());
  }
}

TEST_CASE("regularization cost, gradient and dual norm") {
  const FlowlineMesh m = small_mesh();
  std::mt19937_64 rng(4);
  PriorParams pp = params(1.0);
  pp.beta0 = 0.7;
  const PriorModel p(m, pp);
  const Eigen::VectorXd beta = standard_normal(rng, p.size());
  const Eigen::VectorXd r = beta - p.mean();
  CHECK(p.reg_cost(beta) == doctest::Approx(0.5 * r.dot(dense_precision(p) * r)).epsilon(1e-12));
  CHECK((p.reg_gradient(beta) - p.precision_apply(r)).norm() < 1e-12 * p.reg_gradient(beta).norm());
  CHECK(p.reg_cost(p.mean()) == 0.0);
  const Eigen::VectorXd w = standard_normal(rng, p.size());
  const Eigen::MatrixXd M(p.mass());
  CHECK(p.dual_norm(w) == doctest::Approx(std::sqrt(w.dot(M.inverse() * w))).epsilon(1e-12));
}

TEST_CASE("sample covariance approaches the prior covariance") {
  const FlowlineMesh m = small_mesh();
  for (double kappa : {0.5, 1.0}) {
    CAPTURE(kappa);
    const PriorModel p(m, params(kappa));
    std::mt19937_64 rng(5);
    const int count = 20000;
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(p.size(), p.size());
    for (int i = 0; i < count; ++i) {
      const Eigen::VectorXd x = p.sample_zero_mean(rng);
      C += x * x.transpose();
    }
    C /= count;
    const Eigen::MatrixXd exact = p.dense_covariance();
    // Monte Carlo error of a variance estimate is about sqrt(2 / count).
    CHECK((C - exact).norm() < 0.05 * exact.norm());
  }
}

TEST_CASE("samples are reproducible per stream") {
  const FlowlineMesh m = small_mesh();
  const PriorModel p(m, params(1.0));
  const RandomStreams s(9);
  auto a = s.stream("prior-sample"), b = s.stream("prior-sample");
  CHECK((p.sample(a) - p.sample(b)).norm() == 0.0);
}

TEST_CASE("larger delta lowers the variance") {
  const FlowlineMesh m = small_mesh();
  const Eigen::VectorXd lo = PriorModel(m, params(1.0, 1.0, 0.1)).pointwise_variance();
  const Eigen::VectorXd hi = PriorModel(m, params(1.0, 1.0, 1.0)).pointwise_variance();
  CHECK((hi.array() < lo.array()).all());
}

TEST_CASE("with_gamma changes only gamma") {
  const FlowlineMesh m = small_mesh();
  const PriorModel p(m, params(1.0, 2.0, 0.3));
  const PriorModel q = p.with_gamma(5.0);
  CHECK(q.params().gamma == 5.0);
  CHECK(q.params().delta == 0.3);
  CHECK((Eigen::MatrixXd(q.operator_k()) - Eigen::MatrixXd(PriorModel(m, params(1.0, 5.0, 0.3)).operator_k())).norm() == 0.0);
}

TEST_CASE("invalid parameters are rejected") {
  const FlowlineMesh m = small_mesh();
  CHECK_THROWS_AS(PriorModel(m, params(0.75)), ConfigError);
  CHECK_THROWS_AS(PriorModel(m, params(1.0, 0.0)), ConfigError);
  CHECK_THROWS_AS(PriorModel(m, params(1.0, 1.0, -1.0)), ConfigError);
}
