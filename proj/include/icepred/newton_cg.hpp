#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "icepred/adjoint.hpp"

namespace icepred {

using LinearOperator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct NewtonCGConfig {
  double grad_reduction = 1e-5;
  int max_newton = 60;
  int max_cg = 200;
  double ew_gamma = 0.9;
  double ew_alpha = 2.0;
  double ew_floor = 1e-6;
  double ew_cap = 0.5;
  double armijo_c1 = 1e-4;
  double shrink = 0.5;
  double min_alpha = 1e-8;
  /// Continuation: start at gamma * factor^stages, divide by factor per stage.
  double continuation_factor = 10.0;
  int continuation_stages = 2;
  double stage_reduction = 1e-2;
  HessianMode hessian_mode = HessianMode::full;
  /// Use Gauss-Newton until the gradient has dropped by this factor (0 disables).
  double gauss_newton_until = 1e-2;

  void validate() const;
};

struct CgResult {
  Eigen::VectorXd step;
  int iterations = 0;
  bool negative_curvature = false;
  bool converged = false;
};

using DualNorm = std::function<double(const Eigen::VectorXd&)>;

/// Preconditioned CG on H s = -g, truncated at negative curvature. The
/// tolerance is relative; residuals are measured with `norm` if given, else in
/// the preconditioned norm sqrt(r^T P r).
CgResult steihaug_pcg(const LinearOperator& hessian, const Eigen::VectorXd& gradient,
                      const LinearOperator& preconditioner, double tol, int max_iters,
                      const DualNorm& norm = {});

/// Backtracking until cost(beta + alpha step) <= cost0 + c1 alpha slope.
/// `cost` may throw to reject a trial point.
struct ArmijoResult {
  double alpha = 1.0;
  int evaluations = 0;
};
ArmijoResult armijo_linesearch(const std::function<double(double alpha)>& cost, double cost0, double slope,
                               double c1, double shrink, double min_alpha = 1e-8);

struct NewtonIterationLog {
  int stage = 0;
  double gamma = 0.0;
  double grad_norm = 0.0;
  double misfit = 0.0;
  double reg = 0.0;
  double total = 0.0;
  int cg_iters = 0;
  double step_length = 0.0;
  double forcing = 0.0;
  bool negative_curvature = false;
  std::string hessian_mode;
};

struct InversionRecord {
  std::vector<NewtonIterationLog> iterations;
  int newton_iters = 0;
  int cg_iters = 0;
  int forward_solves = 0;
  int adjoint_solves = 0;
  int linesearch_evaluations = 0;
  int incremental_solves = 0;
  int forward_newton_iters = 0;
  double initial_grad_norm = 0.0;
  double final_grad_norm = 0.0;
  bool converged = false;
  CostValue final_cost;

  int stokes_solves() const { return forward_solves + adjoint_solves + 2 * cg_iters + linesearch_evaluations; }
  std::string to_text() const;
};

class InversionError : public Error {
 public:
  InversionError(const std::string& what, InversionRecord record)
      : Error(ErrorKind::nonconvergence, what), record_(std::move(record)) {}
  const InversionRecord& record() const { return record_; }

 private:
  InversionRecord record_;
};

struct InversionResult {
  Eigen::VectorXd beta;
  InversionRecord record;
  StokesState state;
};

/// Inexact Newton-CG for misfit + prior, with continuation in gamma.
InversionResult invert(const StokesProblem& problem, const ObservationSet& obs, const PriorModel& prior,
                       const Eigen::VectorXd& beta_init, const NewtonConfig& newton, const NewtonCGConfig& cfg);

struct LCurvePoint {
  double gamma = 0.0;
  double misfit = 0.0;
  double reg = 0.0;  // regularization functional at gamma = 1
  double total = 0.0;
  int newton_iters = 0;
  int cg_iters = 0;
  int stokes_solves = 0;
  bool ok = false;
  std::string error;
};

/// One inversion per gamma; failures are recorded and the scan continues.
/// Runs up to `threads` inversions concurrently.
std::vector<LCurvePoint> lcurve_scan(const StokesProblem& problem, const ObservationSet& obs,
                                     const PriorModel& prior_template, const std::vector<double>& gammas,
                                     const Eigen::VectorXd& beta_init, const NewtonConfig& newton,
                                     const NewtonCGConfig& cfg, int threads = 1);

/// Signed Menger curvature of (log misfit, log reg) at each interior point,
/// positive at an L-shaped corner; NaN where undefined.
std::vector<double> lcurve_curvature(const std::vector<double>& misfit, const std::vector<double>& reg);

/// Index of maximum Menger curvature of (log misfit, log reg); -1 if fewer
/// than three usable points.
int lcurve_corner(const std::vector<double>& misfit, const std::vector<double>& reg);

void write_lcurve_csv(const std::filesystem::path& path, const std::vector<LCurvePoint>& points);

}  // namespace icepred
