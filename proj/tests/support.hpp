#pragma once

#include <cmath>
#include <memory>
#include <random>

#include <Eigen/Core>

#include "icepred/adjoint.hpp"
#include "icepred/config.hpp"
#include "icepred/pipeline.hpp"
#include "icepred/random.hpp"

namespace support {

using namespace icepred;

/// Default configuration shrunk to a mesh of nx x nz cells.
inline RunConfig small_config(int nx, int nz, MisfitMode mode = MisfitMode::bayesian) {
  RunConfig cfg = RunConfig::defaults(mode);
  cfg.mesh.nx = nx;
  cfg.mesh.nz = nz;
  cfg.gevd.r_max = std::min(cfg.gevd.r_max, std::max(1, nx + 1 - cfg.gevd.oversample));
  return cfg;
}

/// Mesh, forward problem, synthetic data and prior of one configuration.
struct Setup {
  explicit Setup(const RunConfig& c)
      : cfg(c),
        mesh(c.geometry.domain(), c.mesh.nx, c.mesh.nz, c.mesh.order),
        problem(mesh, c.physics),
        beta_true(basal_values(c.beta_true, mesh)),
        synth(synthesize_observations(c)),
        obs(mesh, synth.data, c.mode, c.noise),
        prior(mesh, c.prior) {}
  Setup(const Setup&) = delete;

  Eigen::VectorXd beta_init() const { return initial_beta(cfg.init, beta_true); }

  RunConfig cfg;
  FlowlineMesh mesh;
  StokesProblem problem;
  Eigen::VectorXd beta_true;
  SyntheticData synth;
  ObservationSet obs;
  PriorModel prior;
};

inline std::unique_ptr<Setup> make_setup(const RunConfig& cfg) { return std::make_unique<Setup>(cfg); }

inline double rel_diff(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

/// Misfit of the forward solution at beta, warm-started from `warm`.
inline double misfit_at(const Setup& s, const Eigen::VectorXd& beta, const StokesState* warm) {
  const ForwardSolution f = s.problem.solve(beta, s.cfg.forward, warm);
  return s.obs.misfit(surface_velocity(f.state, s.mesh));
}

/// Gradient of the misfit (no prior) at beta.
inline Eigen::VectorXd misfit_gradient_at(const Setup& s, const Eigen::VectorXd& beta, const StokesState* warm) {
  return LinearizedPoint(s.problem, s.obs, nullptr, beta, s.cfg.forward, warm).misfit_gradient();
}

/// Dense Hessian of the misfit, column by column.
inline Eigen::MatrixXd dense_misfit_hessian(const LinearizedPoint& pt, HessianMode mode) {
  const int n = static_cast<int>(pt.beta().size());
  Eigen::MatrixXd H(n, n);
  for (int j = 0; j < n; ++j) H.col(j) = pt.hessian_action(Eigen::VectorXd::Unit(n, j), mode, false);
  return 0.5 * (H + H.transpose());
}

}  // namespace support
