#include "icepred/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "icepred/errors.hpp"
#include "icepred/field_io.hpp"
#include "icepred/random.hpp"

namespace icepred {

namespace fs = std::filesystem;

namespace {

constexpr Stage kStages[] = {Stage::forward, Stage::synth,  Stage::invert, Stage::lcurve,
                             Stage::spectrum, Stage::sample, Stage::predict, Stage::all};

using Entries = std::vector<std::pair<std::string, std::string>>;

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string brief(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

struct Context {
  Context(const RunConfig& cfg, int refine)
      : mesh(cfg.geometry.domain(), cfg.mesh.nx * refine, cfg.mesh.nz * refine, cfg.mesh.order),
        problem(mesh, cfg.physics),
        beta_true(basal_values(cfg.beta_true, mesh)) {}
  Context(const Context&) = delete;

  FlowlineMesh mesh;
  StokesProblem problem;
  Eigen::VectorXd beta_true;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}


fs::path require(const fs::path& dir, const std::string& file, Stage producer) {
  const fs::path p = dir / file;
  if (!fs::exists(p))
    throw MissingArtifactError(p.string() + " not found; run the '" + std::string(to_string(producer)) +
                               "' stage first");
  return p;
}

void write_velocity(const fs::path& dir, const std::string& prefix, const FlowlineMesh& mesh,
                    const StokesState& state) {
  const int n = mesh.num_velocity_nodes();
  Eigen::VectorXd ux(n), uz(n);
  for (int i = 0; i < n; ++i) {
    ux[i] = state.u[2 * i];
    uz[i] = state.u[2 * i + 1];
  }
  write_field(dir / (prefix + "velocity_x"), nodal_field(mesh, prefix + "velocity_x", ux));
  write_field(dir / (prefix + "velocity_z"), nodal_field(mesh, prefix + "velocity_z", uz));
}

void append_text(Entries& out, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    out.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
}

}  // namespace

Eigen::VectorXd basal_values(const BetaFieldConfig& field, const FlowlineMesh& mesh) {
  Eigen::VectorXd b(mesh.num_basal_dofs());
  for (int i = 0; i < mesh.num_basal_dofs(); ++i) b[i] = field(mesh.column_x(i));
  return b;
}

Eigen::VectorXd initial_beta(const InitConfig& init, const Eigen::VectorXd& beta_true) {
  std::vector<double> e(beta_true.size());
  for (Eigen::Index i = 0; i < beta_true.size(); ++i) e[i] = std::exp(beta_true[i]);
  return Eigen::VectorXd::Constant(beta_true.size(), std::log(init.factor * median(e)));
}

SyntheticData synthesize_observations(const RunConfig& cfg) {
  const int f = cfg.synth.fine_factor;
  Context fine(cfg, f);
  Context coarse(cfg, 1);
  const ForwardSolution sol = fine.problem.solve(fine.beta_true, cfg.forward);
  const Eigen::VectorXd fine_surface = surface_velocity(sol.state, fine.mesh);
  const int ntop = static_cast<int>(coarse.mesh.boundary_nodes(BoundaryTag::top).size());
  SyntheticData out;
  out.forward_newton_iters = sol.record.iterations;
  out.clean.resize(2 * ntop);
  for (int i = 0; i < ntop; ++i) out.clean.segment<2>(2 * i) = fine_surface.segment<2>(2 * f * i);

  out.data = out.clean;
  if (cfg.noise.relative_level == 0.0) return out;
  const ObservationSet noise_model(coarse.mesh, out.clean, MisfitMode::bayesian, cfg.noise);
  auto rng = RandomStreams(cfg.seed).stream("noise");
  const Eigen::VectorXd xi = standard_normal(rng, out.clean.size());
  for (Eigen::Index i = 0; i < out.data.size(); ++i)
    out.data[i] += std::sqrt(noise_model.noise_variance()[i]) * xi[i];
  return out;
}

const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::forward: return "forward";
    case Stage::synth: return "synth";
    case Stage::invert: return "invert";
    case Stage::lcurve: return "lcurve";
    case Stage::spectrum: return "spectrum";
    case Stage::sample: return "sample";
    case Stage::predict: return "predict";
    case Stage::all: return "all";
  }
  return "unknown";
}

Stage stage_from_string(const std::string& name) {
  for (Stage s : kStages)
    if (name == to_string(s)) return s;
  throw InvalidArgument("unknown stage '" + name + "'");
}

void RunRecord::load(const fs::path& path) {
  groups_.clear();
  std::ifstream in(path);
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    const auto dot = line.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) continue;
    const std::string group = line.substr(0, dot);
    auto it = std::find_if(groups_.begin(), groups_.end(), [&](const auto& g) { return g.first == group; });
    if (it == groups_.end()) it = groups_.insert(groups_.end(), {group, {}});
    it->second.emplace_back(line.substr(dot + 1, eq - dot - 1), line.substr(eq + 1));
  }
}

void RunRecord::save(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& [group, entries] : groups_)
    for (const auto& [k, v] : entries) out << group << '.' << k << '=' << v << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

void RunRecord::replace(const std::string& group, Entries entries) {
  // Groups stay in stage order, with the ledger last.
  auto rank = [](const std::string& g) {
    for (int i = 0; i < static_cast<int>(std::size(kStages)); ++i)
      if (g == to_string(kStages[i])) return i;
    return static_cast<int>(std::size(kStages));
  };
  auto it = std::find_if(groups_.begin(), groups_.end(), [&](const auto& g) { return g.first == group; });
  if (it != groups_.end()) {
    it->second = std::move(entries);
    return;
  }
  auto pos = std::find_if(groups_.begin(), groups_.end(), [&](const auto& g) { return rank(g.first) > rank(group); });
  groups_.insert(pos, {group, std::move(entries)});
}

std::string RunRecord::get(const std::string& key) const {
  const auto dot = key.find('.');
  if (dot == std::string::npos) return {};
  for (const auto& [group, entries] : groups_) {
    if (group != key.substr(0, dot)) continue;
    for (const auto& [k, v] : entries)
      if (k == key.substr(dot + 1)) return v;
  }
  return {};
}

Pipeline::Pipeline(RunConfig cfg, LogSink log) : cfg_(std::move(cfg)), log_(std::move(log)) {
  cfg_.gevd.threads = cfg_.threads;
  cfg_.validate();
}

void Pipeline::log(const std::string& line) const {
  if (log_) log_(line);
}

void Pipeline::commit(const std::string& stage, Entries entries, long solves) {
  const fs::path path = output_dir() / "record.txt";
  record_.load(path);
  record_.replace(stage, std::move(entries));
  Entries ledger;
  long total = 0;
  for (Stage s : kStages) {
    const std::string name = to_string(s);
    std::string v = name == stage ? std::to_string(solves) : record_.get("ledger." + name);
    if (v.empty()) continue;
    total += std::stol(v);
    ledger.emplace_back(name, v);
  }
  ledger.emplace_back("total", std::to_string(total));
  record_.replace("ledger", std::move(ledger));
  record_.save(path);
}

void Pipeline::run(Stage stage) {
  fs::create_directories(output_dir());
  record_.load(output_dir() / "record.txt");
  const auto t0 = std::chrono::steady_clock::now();
  switch (stage) {
    case Stage::forward: run_forward(); break;
    case Stage::synth: run_synth(); break;
    case Stage::invert: run_invert(); break;
    case Stage::lcurve: run_lcurve(); break;
    case Stage::spectrum: run_spectrum(); break;
    case Stage::sample: run_sample(); break;
    case Stage::predict: run_predict(); break;
    case Stage::all:
      for (Stage s : {Stage::synth, Stage::forward, Stage::invert, Stage::lcurve, Stage::spectrum, Stage::sample,
                      Stage::predict})
        run(s);
      return;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream os;
  os << to_string(stage) << " done in " << std::fixed << std::setprecision(1) << secs << " s";
  log(os.str());
}

void Pipeline::run_forward() {
  Context ctx(cfg_, 1);
  const ForwardSolution sol = ctx.problem.solve(ctx.beta_true, cfg_.forward);
  const fs::path dir = output_dir();
  write_velocity(dir, "", ctx.mesh, sol.state);
  write_field(dir / "pressure", pressure_field(ctx.mesh, "pressure", ctx.problem.total_pressure(sol.state)));
  write_field(dir / "beta_true", basal_field(ctx.mesh, "beta_true", ctx.beta_true));
  const double umax = sol.state.u.cwiseAbs().maxCoeff();
  log("forward: " + std::to_string(sol.record.iterations) + " Newton iterations, max |u| = " + brief(umax) + " km/a");
  commit("forward",
         {{"newton_iters", std::to_string(sol.record.iterations)},
          {"residual_evaluations", std::to_string(sol.record.residual_evaluations)},
          {"final_residual", num(sol.record.residual_norms.back())},
          {"reference_residual", num(sol.record.reference_norm)},
          {"max_velocity", num(umax)},
          {"max_cell_divergence", num(ctx.problem.cell_divergence(sol.state.u).cwiseAbs().maxCoeff())}},
         1);
}

void Pipeline::run_synth() {
  Context coarse(cfg_, 1);
  const SyntheticData syn = synthesize_observations(cfg_);
  const fs::path dir = output_dir();
  write_observations(dir / "observations.txt", coarse.mesh, syn.data);
  write_field(dir / "beta_true", basal_field(coarse.mesh, "beta_true", coarse.beta_true));
  const double rel_noise = (syn.data - syn.clean).norm() / syn.clean.norm();
  log("synth: " + std::to_string(syn.data.size() / 2) + " surface points, relative noise " + brief(rel_noise));
  commit("synth",
         {{"fine_factor", std::to_string(cfg_.synth.fine_factor)},
          {"forward_newton_iters", std::to_string(syn.forward_newton_iters)},
          {"observations", std::to_string(syn.data.size())},
          {"relative_noise", num(rel_noise)}},
         1);
}

void Pipeline::run_invert() {
  Context ctx(cfg_, 1);
  const fs::path dir = output_dir();
  const Eigen::VectorXd data = read_observations(require(dir, "observations.txt", Stage::synth), ctx.mesh);
  const ObservationSet obs(ctx.mesh, data, cfg_.mode, cfg_.noise);
  const PriorModel prior(ctx.mesh, cfg_.prior);
  const Eigen::VectorXd beta0 = initial_beta(cfg_.init, ctx.beta_true);
  InversionResult res;
  try {
    res = invert(ctx.problem, obs, prior, beta0, cfg_.forward, cfg_.inversion);
  } catch (const InversionError& e) {
    Entries entries;
    append_text(entries, e.record().to_text());
    commit("invert", std::move(entries), e.record().stokes_solves());
    throw;
  }
  write_field(dir / "beta_map", basal_field(ctx.mesh, "beta_map", res.beta));
  write_field(dir / "beta_init", basal_field(ctx.mesh, "beta_init", beta0));
  write_velocity(dir, "map_", ctx.mesh, res.state);
  const double err = (res.beta - ctx.beta_true).norm() / ctx.beta_true.norm();
  std::ostringstream os;
  os << "invert: " << res.record.newton_iters << " Newton / " << res.record.cg_iters << " CG iterations, gradient "
     << res.record.initial_grad_norm << " -> " << res.record.final_grad_norm;
  log(os.str());
  Entries entries;
  append_text(entries, res.record.to_text());
  entries.emplace_back("beta_relative_error", num(err));
  commit("invert", std::move(entries), res.record.stokes_solves());
}

void Pipeline::run_lcurve() {
  Context ctx(cfg_, 1);
  const fs::path dir = output_dir();
  const Eigen::VectorXd data = read_observations(require(dir, "observations.txt", Stage::synth), ctx.mesh);
  const ObservationSet obs(ctx.mesh, data, cfg_.mode, cfg_.noise);
  const PriorModel prior(ctx.mesh, cfg_.prior);
  const auto points = lcurve_scan(ctx.problem, obs, prior, cfg_.lcurve.gammas, initial_beta(cfg_.init, ctx.beta_true),
                                  cfg_.forward, cfg_.inversion, cfg_.threads);
  write_lcurve_csv(dir / "lcurve.csv", points);
  std::vector<double> misfit, reg;
  long solves = 0;
  int failed = 0;
  for (const auto& p : points) {
    misfit.push_back(p.ok ? p.misfit : std::nan(""));
    reg.push_back(p.ok ? p.reg : std::nan(""));
    solves += p.stokes_solves;
    if (!p.ok) ++failed;
  }
  const int corner = lcurve_corner(misfit, reg);
  Entries entries{{"points", std::to_string(points.size())},
                  {"failed", std::to_string(failed)},
                  {"corner_index", std::to_string(corner)},
                  {"corner_gamma", corner >= 0 ? num(points[corner].gamma) : "nan"}};
  for (std::size_t i = 0; i < points.size(); ++i)
    if (!points[i].ok) entries.emplace_back("error." + std::to_string(i), points[i].error);
  log("lcurve: " + std::to_string(points.size()) + " points, " + std::to_string(failed) + " failed, corner gamma " +
      entries[3].second);
  commit("lcurve", std::move(entries), solves);
}

namespace {

struct PosteriorFiles {
  Eigen::VectorXd beta_map, lambda;
  Eigen::MatrixXd W;
};

PosteriorFiles load_posterior(const fs::path& dir, const FlowlineMesh& mesh) {
  PosteriorFiles p;
  p.beta_map = load_basal_field(require(dir, "beta_map", Stage::invert), mesh);
  p.lambda = read_spectrum_csv(require(dir, "spectrum.csv", Stage::spectrum));
  p.W.resize(mesh.num_basal_dofs(), p.lambda.size());
  for (Eigen::Index i = 0; i < p.lambda.size(); ++i)
    p.W.col(i) = load_basal_field(require(dir, "evec_" + std::to_string(i), Stage::spectrum), mesh);
  return p;
}

}  // namespace

void Pipeline::run_spectrum() {
  Context ctx(cfg_, 1);
  const fs::path dir = output_dir();
  const Eigen::VectorXd beta_map = load_basal_field(require(dir, "beta_map", Stage::invert), ctx.mesh);
  const Eigen::VectorXd data = read_observations(require(dir, "observations.txt", Stage::synth), ctx.mesh);
  const ObservationSet obs(ctx.mesh, data, cfg_.mode, cfg_.noise);
  const PriorModel prior(ctx.mesh, cfg_.prior);
  const LinearizedPoint point(ctx.problem, obs, &prior, beta_map, cfg_.forward);
  const RandomStreams streams(cfg_.seed);

  HessianMode mode = cfg_.gevd_hessian;
  auto run_gevd = [&](HessianMode m, const char* stream) {
    auto rng = streams.stream(stream);
    return randomized_gevd([&](const Eigen::VectorXd& v) { return point.hessian_action(v, m, false); }, prior,
                           cfg_.gevd, rng);
  };
  GevdResult g = run_gevd(mode, "gevd");
  int actions = g.hessian_actions;
  const int negative = g.negative_ritz;
  if (mode == HessianMode::full && negative > 0) {
    log("spectrum: " + std::to_string(negative) + " negative Ritz values, repeating with the Gauss-Newton Hessian");
    mode = HessianMode::gauss_newton;
    g = run_gevd(mode, "gevd-gauss-newton");
    actions += g.hessian_actions;
  }
  const LowRankPosterior post(prior, beta_map, g.lambda, g.W);

  write_spectrum_csv(dir / "spectrum.csv", g.lambda);
  write_spectrum_csv(dir / "ritz.csv", g.ritz_values);
  for (Eigen::Index i = 0; i < g.lambda.size(); ++i)
    write_field(dir / ("evec_" + std::to_string(i)),
                basal_field(ctx.mesh, "evec_" + std::to_string(i), Eigen::VectorXd(g.W.col(i))));
  const Eigen::VectorXd prior_var = prior.pointwise_variance();
  const Eigen::VectorXd post_var = post.pointwise_variance();
  write_field(dir / "prior_variance", basal_field(ctx.mesh, "prior_variance", prior_var));
  write_field(dir / "posterior_variance", basal_field(ctx.mesh, "posterior_variance", post_var));

  const Eigen::MatrixXd gram = g.W.transpose() * [&] {
    Eigen::MatrixXd pw(g.W.rows(), g.W.cols());
    for (Eigen::Index i = 0; i < g.W.cols(); ++i) pw.col(i) = prior.precision_apply(g.W.col(i));
    return pw;
  }();
  const double ortho = g.W.cols() ? (gram - Eigen::MatrixXd::Identity(g.W.cols(), g.W.cols())).cwiseAbs().maxCoeff()
                                  : 0.0;
  log("spectrum: rank " + std::to_string(g.lambda.size()) + " at threshold " + brief(cfg_.gevd.threshold) +
      (g.spectrum_exhausted ? "" : " (spectrum not exhausted at r_max)"));
  commit("spectrum",
         {{"hessian_mode", to_string(mode)},
          {"rank", std::to_string(g.lambda.size())},
          {"lambda_max", g.lambda.size() ? num(g.lambda[0]) : "nan"},
          {"lambda_min_retained", g.lambda.size() ? num(g.lambda[g.lambda.size() - 1]) : "nan"},
          {"negative_ritz", std::to_string(negative)},
          {"spectrum_exhausted", g.spectrum_exhausted ? "1" : "0"},
          {"hessian_actions", std::to_string(actions)},
          {"orthonormality_error", num(ortho)},
          {"mean_prior_variance", num(prior_var.mean())},
          {"mean_posterior_variance", num(post_var.mean())}},
         2 + 2L * actions);
}

void Pipeline::run_sample() {
  Context ctx(cfg_, 1);
  const fs::path dir = output_dir();
  const PosteriorFiles files = load_posterior(dir, ctx.mesh);
  const PriorModel prior(ctx.mesh, cfg_.prior);
  const LowRankPosterior post(prior, files.beta_map, files.lambda, files.W);
  const RandomStreams streams(cfg_.seed);
  auto prior_rng = streams.stream("prior-sample");
  auto post_rng = streams.stream("posterior-sample");
  for (int i = 0; i < cfg_.samples.count; ++i) {
    const std::string id = std::to_string(i);
    write_field(dir / ("prior_sample_" + id), basal_field(ctx.mesh, "prior_sample_" + id, prior.sample(prior_rng)));
    write_field(dir / ("posterior_sample_" + id),
                basal_field(ctx.mesh, "posterior_sample_" + id, post.sample(post_rng)));
  }
  log("sample: " + std::to_string(cfg_.samples.count) + " prior and posterior samples");
  commit("sample", {{"count", std::to_string(cfg_.samples.count)}, {"rank", std::to_string(post.rank())}}, 0);
}

void Pipeline::run_predict() {
  Context ctx(cfg_, 1);
  const fs::path dir = output_dir();
  const PosteriorFiles files = load_posterior(dir, ctx.mesh);
  const PriorModel prior(ctx.mesh, cfg_.prior);
  const LowRankPosterior post(prior, files.beta_map, files.lambda, files.W);
  const ForwardSolution fwd = ctx.problem.solve(files.beta_map, cfg_.forward);

  std::vector<PredictionReport> reports;
  Entries entries;
  for (const auto& spec : cfg_.qoi) {
    PredictionReport r;
    r.tag = spec.tag;
    r.q_map = eval_qoi(fwd.state, spec, ctx.mesh);
    r.gradient = prediction_gradient(ctx.problem, files.beta_map, fwd, spec).gradient;
    const PredictionVariance v = prediction_variance(r.gradient, post);
    r.sigma_post = v.sigma_post();
    r.sigma_prior = v.sigma_prior();
    if (r.gradient.isZero(0.0)) {
      r.sigma2 = 0.0;
      r.direction = Eigen::VectorXd::Zero(r.gradient.size());
    } else {
      const IfpDirection d = ifp_direction(r.gradient, post);
      r.sigma2 = d.sigma2;
      r.direction = d.direction;
    }
    write_field(dir / ("pred_gradient_" + spec.tag), basal_field(ctx.mesh, "pred_gradient_" + spec.tag, r.gradient));
    write_field(dir / ("ifp_" + spec.tag), basal_field(ctx.mesh, "ifp_" + spec.tag, r.direction));
    entries.emplace_back(spec.tag + ".q_map", num(r.q_map));
    entries.emplace_back(spec.tag + ".sigma_post", num(r.sigma_post));
    entries.emplace_back(spec.tag + ".sigma_prior", num(r.sigma_prior));
    log("predict: " + spec.tag + " Q = " + brief(r.q_map) + " +- " + brief(r.sigma_post) + " (prior " +
        brief(r.sigma_prior) + ")");
    reports.push_back(std::move(r));
  }
  write_prediction_csv(dir / "prediction.csv", reports);
  commit("predict", std::move(entries), 1 + static_cast<long>(cfg_.qoi.size()));
}

}  // namespace icepred
