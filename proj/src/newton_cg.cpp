#include "icepred/newton_cg.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

namespace icepred {

void NewtonCGConfig::validate() const {
  if (!(grad_reduction > 0.0 && grad_reduction < 1.0)) throw ConfigError("grad_reduction must lie in (0, 1)");
  if (max_newton < 1 || max_cg < 1) throw ConfigError("Newton and CG iteration limits must be >= 1");
  if (!(ew_gamma > 0.0 && ew_gamma <= 1.0) || !(ew_alpha > 1.0 && ew_alpha <= 2.0))
    throw ConfigError("Eisenstat-Walker constants out of range");
  if (!(ew_floor > 0.0 && ew_floor <= ew_cap && ew_cap < 1.0)) throw ConfigError("forcing bounds out of range");
  if (!(armijo_c1 > 0.0 && armijo_c1 < 1.0) || !(shrink > 0.0 && shrink < 1.0) || !(min_alpha > 0.0))
    throw ConfigError("line-search constants out of range");
  if (!(continuation_factor >= 1.0) || continuation_stages < 0)
    throw ConfigError("continuation schedule out of range");
  if (!(stage_reduction > 0.0 && stage_reduction < 1.0)) throw ConfigError("stage_reduction must lie in (0, 1)");
  if (!(gauss_newton_until >= 0.0 && gauss_newton_until < 1.0))
    throw ConfigError("gauss_newton_until must lie in [0, 1)");
}

CgResult steihaug_pcg(const LinearOperator& hessian, const Eigen::VectorXd& gradient,
                      const LinearOperator& preconditioner, double tol, int max_iters, const DualNorm& norm) {
  CgResult res;
  res.step = Eigen::VectorXd::Zero(gradient.size());
  if (gradient.isZero(0.0)) {
    res.converged = true;
    return res;
  }
  Eigen::VectorXd r = -gradient;
  Eigen::VectorXd z = preconditioner(r);
  Eigen::VectorXd d = z;
  double rz = r.dot(z);
  const double r0 = norm ? norm(r) : std::sqrt(rz);
  for (int i = 0; i < max_iters; ++i) {
    const Eigen::VectorXd hd = hessian(d);
    ++res.iterations;
    const double dhd = d.dot(hd);
    if (dhd <= 0.0) {
      res.negative_curvature = true;
      if (i == 0) res.step = d;
      return res;
    }
    const double alpha = rz / dhd;
    res.step += alpha * d;
    r -= alpha * hd;
    z = preconditioner(r);
    const double rz_new = r.dot(z);
    const double rn = norm ? norm(r) : std::sqrt(std::max(rz_new, 0.0));
    if (rn <= tol * r0) {
      res.converged = true;
      return res;
    }
    d = z + (rz_new / rz) * d;
    rz = rz_new;
  }
  return res;
}

ArmijoResult armijo_linesearch(const std::function<double(double)>& cost, double cost0, double slope, double c1,
                               double shrink, double min_alpha) {
  if (!(slope < 0.0)) throw InvalidArgument("Armijo line search needs a descent direction");
  ArmijoResult res;
  double alpha = 1.0;
  while (alpha >= min_alpha) {
    const double c = cost(alpha);
    ++res.evaluations;
    if (std::isfinite(c) && c <= cost0 + c1 * alpha * slope) {
      res.alpha = alpha;
      return res;
    }
    alpha *= shrink;
  }
  throw NumericError("Armijo line search failed: step length fell below " + std::to_string(min_alpha));
}

std::string InversionRecord::to_text() const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "converged=" << (converged ? 1 : 0) << '\n'
      << "newton_iters=" << newton_iters << '\n'
      << "cg_iters=" << cg_iters << '\n'
      << "forward_solves=" << forward_solves << '\n'
      << "adjoint_solves=" << adjoint_solves << '\n'
      << "linesearch_evaluations=" << linesearch_evaluations << '\n'
      << "incremental_solves=" << incremental_solves << '\n'
      << "stokes_solves=" << stokes_solves() << '\n'
      << "forward_newton_iters=" << forward_newton_iters << '\n'
      << "initial_grad_norm=" << initial_grad_norm << '\n'
      << "final_grad_norm=" << final_grad_norm << '\n'
      << "final_misfit=" << final_cost.misfit << '\n'
      << "final_reg=" << final_cost.reg << '\n'
      << "final_total=" << final_cost.total << '\n';
  for (std::size_t i = 0; i < iterations.size(); ++i) {
    const NewtonIterationLog& it = iterations[i];
    out << "iter." << i << "=stage:" << it.stage << " gamma:" << it.gamma << " grad_norm:" << it.grad_norm
        << " misfit:" << it.misfit << " reg:" << it.reg << " total:" << it.total << " cg:" << it.cg_iters
        << " forcing:" << it.forcing << " alpha:" << it.step_length
        << " negative_curvature:" << (it.negative_curvature ? 1 : 0) << " hessian:" << it.hessian_mode << '\n';
  }
  return out.str();
}

InversionResult invert(const StokesProblem& problem, const ObservationSet& obs, const PriorModel& prior,
                       const Eigen::VectorXd& beta_init, const NewtonConfig& newton, const NewtonCGConfig& cfg) {
  cfg.validate();
  if (beta_init.size() != prior.size()) throw InvalidArgument("initial parameter has the wrong size");
  InversionRecord rec;
  const double gamma_target = prior.params().gamma;
  const int stages = cfg.continuation_stages;

  auto forward_iters = [&](const ForwardSolution& f) { rec.forward_newton_iters += f.record.iterations; };

  std::optional<PriorModel> stage_prior;
  stage_prior.emplace(prior.with_gamma(gamma_target * std::pow(cfg.continuation_factor, stages)));
  auto ctx = std::make_unique<LinearizedPoint>(problem, obs, &*stage_prior, beta_init, newton);
  ++rec.forward_solves;
  ++rec.adjoint_solves;
  forward_iters(ctx->forward());
  const double g_ref = prior.dual_norm(ctx->gradient_with(&prior));
  rec.initial_grad_norm = g_ref;

  auto fail = [&](const std::string& msg) -> InversionError {
    rec.incremental_solves += ctx->incremental_solves();
    return InversionError(msg, rec);
  };

  for (int s = 0; s <= stages; ++s) {
    const double gamma = gamma_target * std::pow(cfg.continuation_factor, stages - s);
    if (s > 0) {
      rec.incremental_solves += ctx->incremental_solves();
      stage_prior.emplace(s == stages ? PriorModel(prior) : prior.with_gamma(gamma));
      ForwardSolution fwd = ctx->forward();
      ctx = std::make_unique<LinearizedPoint>(problem, obs, &*stage_prior, ctx->beta(), std::move(fwd));
      ++rec.adjoint_solves;
    }
    const PriorModel& ps = *stage_prior;
    const double stage_ref = ps.dual_norm(ctx->gradient());
    const double tol = s == stages ? cfg.grad_reduction * g_ref : cfg.stage_reduction * stage_ref;
    double prev_norm = 0.0, prev_forcing = cfg.ew_cap;
    bool first = true;

    while (true) {
      const double gnorm = ps.dual_norm(ctx->gradient());
      NewtonIterationLog log;
      log.stage = s;
      log.gamma = gamma;
      log.grad_norm = gnorm;
      log.misfit = ctx->cost().misfit;
      log.reg = ctx->cost().reg;
      log.total = ctx->cost().total;
      if (gnorm <= tol) {
        rec.iterations.push_back(log);
        break;
      }
      if (rec.newton_iters >= cfg.max_newton) {
        rec.iterations.push_back(log);
        rec.final_grad_norm = gnorm;
        throw fail("Newton-CG did not converge in " + std::to_string(cfg.max_newton) + " iterations");
      }
      const HessianMode mode = (cfg.gauss_newton_until > 0.0 && gnorm > cfg.gauss_newton_until * g_ref)
                                   ? HessianMode::gauss_newton
                                   : cfg.hessian_mode;
      double forcing = cfg.ew_cap;
      if (!first) {
        forcing = cfg.ew_gamma * std::pow(gnorm / prev_norm, cfg.ew_alpha);
        const double safeguard = cfg.ew_gamma * std::pow(prev_forcing, cfg.ew_alpha);
        if (safeguard > 0.1) forcing = std::max(forcing, safeguard);
        forcing = std::clamp(forcing, cfg.ew_floor, cfg.ew_cap);
      }
      const LinearizedPoint& c = *ctx;
      const CgResult cg = steihaug_pcg([&](const Eigen::VectorXd& v) { return c.hessian_action(v, mode); },
                                       c.gradient(), [&](const Eigen::VectorXd& v) { return ps.covariance_apply(v); },
                                       forcing, cfg.max_cg, [&](const Eigen::VectorXd& v) { return ps.dual_norm(v); });
      rec.cg_iters += cg.iterations;
      Eigen::VectorXd step = cg.step;
      double slope = step.dot(c.gradient());
      if (!(slope < 0.0)) {
        step = -ps.covariance_apply(c.gradient());
        slope = step.dot(c.gradient());
      }

      std::optional<ForwardSolution> trial;
      double trial_alpha = -1.0;
      ArmijoResult ls;
      try {
        ls = armijo_linesearch(
            [&](double alpha) {
              const Eigen::VectorXd b = c.beta() + alpha * step;
              try {
                ForwardSolution f = problem.solve(b, newton, &c.state());
                forward_iters(f);
                const double j = eval_cost(f.state, b, obs, &ps, problem.mesh()).total;
                trial.emplace(std::move(f));
                trial_alpha = alpha;
                return j;
              } catch (const NonconvergenceError&) {
                trial.reset();
                return std::numeric_limits<double>::infinity();
              }
            },
            c.cost().total, slope, cfg.armijo_c1, cfg.shrink, cfg.min_alpha);
      } catch (const NumericError& e) {
        rec.iterations.push_back(log);
        rec.final_grad_norm = gnorm;
        throw fail(e.what());
      }
      rec.linesearch_evaluations += ls.evaluations;
      if (!trial || trial_alpha != ls.alpha) throw fail("internal: accepted trial state missing");

      log.cg_iters = cg.iterations;
      log.step_length = ls.alpha;
      log.forcing = forcing;
      log.negative_curvature = cg.negative_curvature;
      log.hessian_mode = to_string(mode);
      rec.iterations.push_back(log);
      ++rec.newton_iters;

      rec.incremental_solves += ctx->incremental_solves();
      const Eigen::VectorXd b = c.beta() + ls.alpha * step;
      ctx = std::make_unique<LinearizedPoint>(problem, obs, &ps, b, std::move(*trial));
      ++rec.adjoint_solves;
      prev_norm = gnorm;
      prev_forcing = forcing;
      first = false;
    }
  }
  rec.incremental_solves += ctx->incremental_solves();
  rec.converged = true;
  rec.final_grad_norm = prior.dual_norm(ctx->gradient());
  rec.final_cost = ctx->cost();
  return {ctx->beta(), rec, ctx->state()};
}

std::vector<LCurvePoint> lcurve_scan(const StokesProblem& problem, const ObservationSet& obs,
                                     const PriorModel& prior_template, const std::vector<double>& gammas,
                                     const Eigen::VectorXd& beta_init, const NewtonConfig& newton,
                                     const NewtonCGConfig& cfg, int threads) {
  for (double g : gammas)
    if (!(g > 0.0)) throw InvalidArgument("L-curve gamma values must be positive");
  if (!std::is_sorted(gammas.begin(), gammas.end()) && !std::is_sorted(gammas.rbegin(), gammas.rend()))
    throw InvalidArgument("L-curve gamma values must be sorted");
  std::vector<LCurvePoint> out(gammas.size());
  const PriorModel unit_prior = prior_template.with_gamma(1.0);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < gammas.size(); i = next++) {
      LCurvePoint& pt = out[i];
      pt.gamma = gammas[i];
      try {
        const PriorModel prior = prior_template.with_gamma(gammas[i]);
        const InversionResult r = invert(problem, obs, prior, beta_init, newton, cfg);
        pt.misfit = r.record.final_cost.misfit;
        pt.reg = unit_prior.reg_cost(r.beta);
        pt.total = r.record.final_cost.total;
        pt.newton_iters = r.record.newton_iters;
        pt.cg_iters = r.record.cg_iters;
        pt.stokes_solves = r.record.stokes_solves();
        pt.ok = true;
      } catch (const InversionError& e) {
        pt.error = e.what();
        pt.stokes_solves = e.record().stokes_solves();
      } catch (const std::exception& e) {
        pt.error = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(gammas.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

std::vector<double> lcurve_curvature(const std::vector<double>& misfit, const std::vector<double>& reg) {
  if (misfit.size() != reg.size()) throw InvalidArgument("L-curve columns differ in length");
  std::vector<double> kappa(misfit.size(), std::nan(""));
  std::vector<std::array<double, 2>> pts;
  std::vector<int> index;
  for (std::size_t i = 0; i < misfit.size(); ++i) {
    if (misfit[i] > 0.0 && reg[i] > 0.0 && std::isfinite(misfit[i]) && std::isfinite(reg[i])) {
      pts.push_back({std::log(misfit[i]), std::log(reg[i])});
      index.push_back(static_cast<int>(i));
    }
  }
  if (pts.size() < 3) return kappa;
  // Orient the curve from the high-misfit end so the corner is a clockwise turn.
  if (pts.front()[0] < pts.back()[0]) {
    std::reverse(pts.begin(), pts.end());
    std::reverse(index.begin(), index.end());
  }
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const auto &a = pts[i - 1], &b = pts[i], &c = pts[i + 1];
    const double cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
    const double ab = std::hypot(b[0] - a[0], b[1] - a[1]);
    const double bc = std::hypot(c[0] - b[0], c[1] - b[1]);
    const double ac = std::hypot(c[0] - a[0], c[1] - a[1]);
    if (ab == 0.0 || bc == 0.0 || ac == 0.0) continue;
    kappa[index[i]] = -2.0 * cross / (ab * bc * ac);
  }
  return kappa;
}

int lcurve_corner(const std::vector<double>& misfit, const std::vector<double>& reg) {
  const std::vector<double> kappa = lcurve_curvature(misfit, reg);
  int best = -1;
  double best_kappa = 0.0;
  for (std::size_t i = 0; i < kappa.size(); ++i) {
    if (kappa[i] > best_kappa) {
      best_kappa = kappa[i];
      best = static_cast<int>(i);
    }
  }
  return best;
}

void write_lcurve_csv(const std::filesystem::path& path, const std::vector<LCurvePoint>& points) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "gamma,misfit,reg,total,newton_iters,cg_iters\n" << std::setprecision(17);
  for (const LCurvePoint& p : points) {
    if (p.ok)
      out << p.gamma << ',' << p.misfit << ',' << p.reg << ',' << p.total << ',' << p.newton_iters << ','
          << p.cg_iters << '\n';
    else
      out << p.gamma << ",nan,nan,nan,-1,-1\n";
  }
}

}  // namespace icepred
