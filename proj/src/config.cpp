#include "icepred/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "icepred/errors.hpp"

namespace icepred {

using nlohmann::json;

DomainSpec GeometryConfig::domain() const {
  DomainSpec spec;
  if (kind == "desk") {
    spec.length = length;
    const double L = length, drop = bed_drop, amp = bed_amplitude, wl = bed_wavelength;
    const double top = surface_divide, front = surface_terminus;
    spec.bed = [=](double x) { return -drop * x / L + amp * std::sin(2.0 * M_PI * x / wl); };
    spec.surface = [=](double x) { return front + (top - front) * (1.0 - (x / L) * (x / L)); };
  } else if (kind == "slab") {
    spec = DomainSpec::slab(length, thickness);
  } else if (kind == "tabulated") {
    spec = DomainSpec::tabulated(x, bed, surface);
  } else {
    throw ConfigError("unknown geometry kind '" + kind + "'");
  }
  spec.left_bc = left_bc;
  spec.right_bc = right_bc;
  spec.sea_level = sea_level;
  return spec;
}

double BetaFieldConfig::operator()(double x) const {
  double b = background;
  for (const auto& g : bumps) b += g.amplitude * std::exp(-0.5 * std::pow((x - g.center) / g.width, 2));
  return b;
}

RunConfig RunConfig::defaults(MisfitMode mode) {
  RunConfig cfg;
  cfg.mode = mode;
  if (mode == MisfitMode::deterministic) {
    cfg.prior.kappa = 0.5;
    cfg.prior.delta = 1e-8;
  }
  for (int i = 0; i < 13; ++i) cfg.lcurve.gammas.push_back(std::pow(10.0, 3.0 - 0.5 * i));
  QoiSpec all;
  all.tag = "terminus";
  QoiSpec lower;
  lower.tag = "terminus_lower";
  lower.z_max = -0.25;
  cfg.qoi = {all, lower};
  return cfg;
}

void RunConfig::validate() const {
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir must be nonempty");
  if (mesh.nx < 1 || mesh.nz < 1) throw ConfigError("mesh needs nx, nz >= 1");
  if (mesh.order < 2 || mesh.order > 4) throw ConfigError("mesh order must be 2, 3 or 4");
  geometry.domain().validate();
  physics.validate();
  for (const auto& g : beta_true.bumps)
    if (!(g.width > 0.0)) throw ConfigError("beta_true bump width must be positive");
  if (!(init.factor > 0.0) || !std::isfinite(init.factor)) throw ConfigError("init.factor must be positive");
  prior.validate();
  if (!(noise.relative_level >= 0.0) || !(noise.eps_norm > 0.0) || !(noise.reference_length > 0.0))
    throw ConfigError("noise parameters out of range");
  if (mode == MisfitMode::bayesian && noise.relative_level == 0.0)
    throw ConfigError("the bayesian mode needs a positive noise level");
  if (synth.fine_factor < 1) throw ConfigError("synth.fine_factor must be >= 1");
  forward.validate();
  inversion.validate();
  gevd.validate();
  if (gevd.r_max + gevd.oversample > mesh.nx + 1)
    throw ConfigError("gevd.r_max + gevd.oversample exceeds the number of basal dofs");
  if (samples.count < 0) throw ConfigError("samples.count must be >= 0");
  if (lcurve.gammas.empty()) throw ConfigError("lcurve.gammas must be nonempty");
  for (std::size_t i = 0; i < lcurve.gammas.size(); ++i) {
    if (!(lcurve.gammas[i] > 0.0)) throw ConfigError("lcurve.gammas must be positive");
    if (i > 0 && !(lcurve.gammas[i] < lcurve.gammas[i - 1]))
      throw ConfigError("lcurve.gammas must be strictly decreasing");
  }
  std::set<std::string> tags;
  for (const auto& q : qoi) {
    q.validate();
    if (!tags.insert(q.tag).second) throw ConfigError("duplicate QoI tag '" + q.tag + "'");
  }
}

namespace {

// Reads members of one JSON object and rejects keys that were never asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigError("unknown key '" + path_ + item.key() + "'");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void get(const std::string& key, double& out) {
    if (auto v = find(key)) {
      if (!v->is_number()) throw ConfigError(path_ + key + " must be a number");
      out = v->get<double>();
    }
  }
  void get(const std::string& key, int& out) {
    if (auto v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(path_ + key + " must be an integer");
      out = v->get<int>();
    }
  }
  void get(const std::string& key, std::uint64_t& out) {
    if (auto v = find(key)) {
      if (!v->is_number_unsigned()) throw ConfigError(path_ + key + " must be a nonnegative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void get(const std::string& key, std::string& out) {
    if (auto v = find(key)) {
      if (!v->is_string()) throw ConfigError(path_ + key + " must be a string");
      out = v->get<std::string>();
    }
  }
  void get(const std::string& key, std::vector<double>& out) {
    if (auto v = find(key)) {
      if (!v->is_array()) throw ConfigError(path_ + key + " must be an array of numbers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number()) throw ConfigError(path_ + key + " must be an array of numbers");
        out.push_back(e.get<double>());
      }
    }
  }
  template <class Enum, class Parse>
  void get_enum(const std::string& key, Enum& out, Parse parse) {
    std::string s;
    get(key, s);
    if (find(key)) {
      try {
        out = parse(s);
      } catch (const Error& e) {
        throw ConfigError(path_ + key + ": " + e.what());
      }
    }
  }
  std::string child(const std::string& key) const { return path_ + key + "."; }

 private:
  std::string where() const { return path_.empty() ? "configuration" : path_.substr(0, path_.size() - 1); }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
void with_section(Section& parent, const std::string& key, F&& f) {
  if (auto v = parent.find(key)) {
    Section s(*v, parent.child(key));
    f(s);
  }
}

QoiSpec parse_qoi(const json& j, const std::string& path) {
  QoiSpec q;
  Section s(j, path);
  s.get("tag", q.tag);
  s.get_enum("boundary", q.boundary, boundary_tag_from_string);
  s.get("z_min", q.z_min);
  s.get("z_max", q.z_max);
  s.get("rho", q.rho);
  s.get("unit_factor", q.unit_factor);
  return q;
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("configuration must be a JSON object");

  MisfitMode mode = MisfitMode::bayesian;
  if (auto it = root.find("mode"); it != root.end()) {
    if (!it->is_string()) throw ConfigError("mode must be a string");
    try {
      mode = misfit_mode_from_string(it->get<std::string>());
    } catch (const Error& e) {
      throw ConfigError(std::string("mode: ") + e.what());
    }
  }
  RunConfig cfg = RunConfig::defaults(mode);
  {
    Section s(root, "");
    s.find("mode");
    s.get("seed", cfg.seed);
    s.get("threads", cfg.threads);
    s.get("output_dir", cfg.output_dir);
    with_section(s, "geometry", [&](Section& g) {
      auto& c = cfg.geometry;
      g.get("kind", c.kind);
      g.get("length", c.length);
      g.get("bed_drop", c.bed_drop);
      g.get("bed_amplitude", c.bed_amplitude);
      g.get("bed_wavelength", c.bed_wavelength);
      g.get("surface_divide", c.surface_divide);
      g.get("surface_terminus", c.surface_terminus);
      g.get("thickness", c.thickness);
      g.get("x", c.x);
      g.get("bed", c.bed);
      g.get("surface", c.surface);
      g.get_enum("left_bc", c.left_bc, lateral_bc_from_string);
      g.get_enum("right_bc", c.right_bc, lateral_bc_from_string);
      g.get("sea_level", c.sea_level);
    });
    with_section(s, "mesh", [&](Section& m) {
      m.get("nx", cfg.mesh.nx);
      m.get("nz", cfg.mesh.nz);
      m.get("order", cfg.mesh.order);
    });
    with_section(s, "physics", [&](Section& p) {
      p.get("n", cfg.physics.rheology.n);
      p.get("A", cfg.physics.rheology.A);
      p.get("eps_reg", cfg.physics.rheology.eps_reg);
      p.get("rho", cfg.physics.rho);
      p.get("g", cfg.physics.g);
      p.get("rho_water", cfg.physics.rho_water);
    });
    with_section(s, "beta_true", [&](Section& b) {
      b.get("background", cfg.beta_true.background);
      if (auto v = b.find("bumps")) {
        if (!v->is_array()) throw ConfigError("beta_true.bumps must be an array");
        cfg.beta_true.bumps.clear();
        for (std::size_t i = 0; i < v->size(); ++i) {
          GaussianBump g;
          Section e((*v)[i], "beta_true.bumps[" + std::to_string(i) + "].");
          e.get("center", g.center);
          e.get("width", g.width);
          e.get("amplitude", g.amplitude);
          cfg.beta_true.bumps.push_back(g);
        }
      }
    });
    with_section(s, "init", [&](Section& i) { i.get("factor", cfg.init.factor); });
    with_section(s, "prior", [&](Section& p) {
      p.get("kappa", cfg.prior.kappa);
      p.get("gamma", cfg.prior.gamma);
      p.get("delta", cfg.prior.delta);
      p.get("beta0", cfg.prior.beta0);
    });
    with_section(s, "noise", [&](Section& n) {
      n.get("relative_level", cfg.noise.relative_level);
      n.get("eps_norm", cfg.noise.eps_norm);
      n.get("reference_length", cfg.noise.reference_length);
    });
    with_section(s, "synth", [&](Section& y) { y.get("fine_factor", cfg.synth.fine_factor); });
    with_section(s, "forward", [&](Section& f) {
      auto& c = cfg.forward;
      f.get("rel_tol", c.rel_tol);
      f.get("abs_tol", c.abs_tol);
      f.get("max_iters", c.max_iters);
      f.get_enum("solver", c.solver, linear_solver_from_string);
      f.get("krylov_forcing", c.krylov_forcing);
      f.get("armijo_c1", c.armijo_c1);
      f.get("shrink", c.shrink);
      f.get("min_step", c.min_step);
    });
    with_section(s, "inversion", [&](Section& n) {
      auto& c = cfg.inversion;
      n.get("grad_reduction", c.grad_reduction);
      n.get("max_newton", c.max_newton);
      n.get("max_cg", c.max_cg);
      n.get("ew_gamma", c.ew_gamma);
      n.get("ew_alpha", c.ew_alpha);
      n.get("ew_floor", c.ew_floor);
      n.get("ew_cap", c.ew_cap);
      n.get("armijo_c1", c.armijo_c1);
      n.get("shrink", c.shrink);
      n.get("min_alpha", c.min_alpha);
      n.get("continuation_factor", c.continuation_factor);
      n.get("continuation_stages", c.continuation_stages);
      n.get("stage_reduction", c.stage_reduction);
      n.get_enum("hessian_mode", c.hessian_mode, hessian_mode_from_string);
      n.get("gauss_newton_until", c.gauss_newton_until);
    });
    with_section(s, "gevd", [&](Section& g) {
      g.get("r_max", cfg.gevd.r_max);
      g.get("oversample", cfg.gevd.oversample);
      g.get("power_iters", cfg.gevd.power_iters);
      g.get("threshold", cfg.gevd.threshold);
      g.get_enum("hessian_mode", cfg.gevd_hessian, hessian_mode_from_string);
    });
    with_section(s, "samples", [&](Section& m) { m.get("count", cfg.samples.count); });
    with_section(s, "lcurve", [&](Section& l) { l.get("gammas", cfg.lcurve.gammas); });
    if (auto v = s.find("qoi")) {
      if (!v->is_array()) throw ConfigError("qoi must be an array");
      cfg.qoi.clear();
      for (std::size_t i = 0; i < v->size(); ++i)
        cfg.qoi.push_back(parse_qoi((*v)[i], "qoi[" + std::to_string(i) + "]."));
    }
  }
  cfg.gevd.threads = cfg.threads;
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open configuration " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& cfg) {
  json j;
  j["mode"] = to_string(cfg.mode);
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["output_dir"] = cfg.output_dir;
  const auto& g = cfg.geometry;
  j["geometry"] = {{"kind", g.kind},
                   {"length", g.length},
                   {"bed_drop", g.bed_drop},
                   {"bed_amplitude", g.bed_amplitude},
                   {"bed_wavelength", g.bed_wavelength},
                   {"surface_divide", g.surface_divide},
                   {"surface_terminus", g.surface_terminus},
                   {"thickness", g.thickness},
                   {"x", g.x},
                   {"bed", g.bed},
                   {"surface", g.surface},
                   {"left_bc", to_string(g.left_bc)},
                   {"right_bc", to_string(g.right_bc)},
                   {"sea_level", g.sea_level}};
  j["mesh"] = {{"nx", cfg.mesh.nx}, {"nz", cfg.mesh.nz}, {"order", cfg.mesh.order}};
  j["physics"] = {{"n", cfg.physics.rheology.n},     {"A", cfg.physics.rheology.A},
                  {"eps_reg", cfg.physics.rheology.eps_reg}, {"rho", cfg.physics.rho},
                  {"g", cfg.physics.g},               {"rho_water", cfg.physics.rho_water}};
  json bumps = json::array();
  for (const auto& b : cfg.beta_true.bumps)
    bumps.push_back({{"center", b.center}, {"width", b.width}, {"amplitude", b.amplitude}});
  j["beta_true"] = {{"background", cfg.beta_true.background}, {"bumps", bumps}};
  j["init"] = {{"factor", cfg.init.factor}};
  j["prior"] = {{"kappa", cfg.prior.kappa},
                {"gamma", cfg.prior.gamma},
                {"delta", cfg.prior.delta},
                {"beta0", cfg.prior.beta0}};
  j["noise"] = {{"relative_level", cfg.noise.relative_level},
                {"eps_norm", cfg.noise.eps_norm},
                {"reference_length", cfg.noise.reference_length}};
  j["synth"] = {{"fine_factor", cfg.synth.fine_factor}};
  const auto& f = cfg.forward;
  j["forward"] = {{"rel_tol", f.rel_tol},     {"abs_tol", f.abs_tol},
                  {"max_iters", f.max_iters}, {"solver", to_string(f.solver)},
                  {"krylov_forcing", f.krylov_forcing}, {"armijo_c1", f.armijo_c1},
                  {"shrink", f.shrink},       {"min_step", f.min_step}};
  const auto& n = cfg.inversion;
  j["inversion"] = {{"grad_reduction", n.grad_reduction},
                    {"max_newton", n.max_newton},
                    {"max_cg", n.max_cg},
                    {"ew_gamma", n.ew_gamma},
                    {"ew_alpha", n.ew_alpha},
                    {"ew_floor", n.ew_floor},
                    {"ew_cap", n.ew_cap},
                    {"armijo_c1", n.armijo_c1},
                    {"shrink", n.shrink},
                    {"min_alpha", n.min_alpha},
                    {"continuation_factor", n.continuation_factor},
                    {"continuation_stages", n.continuation_stages},
                    {"stage_reduction", n.stage_reduction},
                    {"hessian_mode", to_string(n.hessian_mode)},
                    {"gauss_newton_until", n.gauss_newton_until}};
  j["gevd"] = {{"r_max", cfg.gevd.r_max},
               {"oversample", cfg.gevd.oversample},
               {"power_iters", cfg.gevd.power_iters},
               {"threshold", cfg.gevd.threshold},
               {"hessian_mode", to_string(cfg.gevd_hessian)}};
  j["samples"] = {{"count", cfg.samples.count}};
  j["lcurve"] = {{"gammas", cfg.lcurve.gammas}};
  json qois = json::array();
  for (const auto& q : cfg.qoi) {
    json e = {{"tag", q.tag}, {"boundary", to_string(q.boundary)}, {"rho", q.rho}, {"unit_factor", q.unit_factor}};
    if (std::isfinite(q.z_min)) e["z_min"] = q.z_min;
    if (std::isfinite(q.z_max)) e["z_max"] = q.z_max;
    qois.push_back(e);
  }
  j["qoi"] = qois;
  return j.dump(2) + "\n";
}

}  // namespace icepred
