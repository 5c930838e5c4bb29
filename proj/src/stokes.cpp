#include "icepred/stokes.hpp"

#include <algorithm>
#include <cmath>

namespace icepred {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

// Strain rate of the vector shape function (node a, component c).
StrainRate shape_strain(double dx, double dz, int c) {
  return c == 0 ? StrainRate{dx, 0.0, 0.5 * dz} : StrainRate{0.0, dz, 0.5 * dx};
}

void gather(const FlowlineMesh& mesh, int cell, const Eigen::VectorXd& field, std::vector<double>& out) {
  const auto nodes = mesh.cell_nodes(cell);
  out.resize(2 * nodes.size());
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    out[2 * a] = field[2 * nodes[a]];
    out[2 * a + 1] = field[2 * nodes[a] + 1];
  }
}

StrainRate strain_at(const CellValues& cv, int qp, int nloc, const std::vector<double>& ul) {
  StrainRate e;
  const std::size_t base = static_cast<std::size_t>(qp) * nloc;
  for (int a = 0; a < nloc; ++a) {
    const double dx = cv.dphi_dx[base + a], dz = cv.dphi_dz[base + a];
    e.xx += ul[2 * a] * dx;
    e.zz += ul[2 * a + 1] * dz;
    e.xz += 0.5 * (ul[2 * a] * dz + ul[2 * a + 1] * dx);
  }
  return e;
}

Vec2 facet_value(const FacetValues& f, int qp, int k, const Eigen::VectorXd& field) {
  Vec2 v{0.0, 0.0};
  for (int a = 0; a <= k; ++a) {
    const double phi = f.phi[qp * (k + 1) + a];
    v[0] += phi * field[2 * f.nodes[a]];
    v[1] += phi * field[2 * f.nodes[a] + 1];
  }
  return v;
}

double tangential_dot(const Vec2& a, const Vec2& b, const std::array<double, 2>& n) {
  return a[0] * b[0] + a[1] * b[1] - (a[0] * n[0] + a[1] * n[1]) * (b[0] * n[0] + b[1] * n[1]);
}

Vec2 tangential(const Vec2& a, const std::array<double, 2>& n) {
  const double an = a[0] * n[0] + a[1] * n[1];
  return {a[0] - an * n[0], a[1] - an * n[1]};
}

double interp_basal(const Eigen::VectorXd& v, int i, double t) {
  return (1.0 - t) * v[i] + t * v[i + 1];
}

}  // namespace

void NewtonConfig::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ConfigError("Newton tolerances must be positive");
  if (max_iters < 1) throw ConfigError("Newton max_iters must be >= 1");
  if (!(krylov_forcing > 0.0 && krylov_forcing < 1.0))
    throw ConfigError("Krylov forcing must lie in (0, 1)");
  if (!(armijo_c1 > 0.0 && armijo_c1 < 1.0)) throw ConfigError("Armijo c1 must lie in (0, 1)");
  if (!(shrink > 0.0 && shrink < 1.0)) throw ConfigError("line-search shrink must lie in (0, 1)");
  if (!(min_step > 0.0 && min_step < 1.0)) throw ConfigError("minimum step must lie in (0, 1)");
}

StokesProblem::StokesProblem(const FlowlineMesh& mesh, const PhysicsParams& physics, bool gravity,
                             ExtraLoads loads)
    : mesh_(&mesh), physics_(physics), gravity_(gravity), loads_(std::move(loads)) {
  physics_.validate();
  build_constraint();

  const int nloc = mesh.local_velocity_nodes();
  const int npl = mesh.pressure_per_cell();
  const int nq = mesh.quadrature_points_per_cell();
  Triplets trips;
  for (int cell = 0; cell < mesh.num_cells(); ++cell) {
    const CellValues& cv = mesh.cell_values(cell);
    const auto nodes = mesh.cell_nodes(cell);
    for (int l = 0; l < npl; ++l) {
      std::vector<double> bx(nloc, 0.0), bz(nloc, 0.0);
      for (int qp = 0; qp < nq; ++qp) {
        const double w = cv.jxw[qp] * cv.psi[static_cast<std::size_t>(qp) * npl + l];
        for (int a = 0; a < nloc; ++a) {
          bx[a] -= w * cv.dphi_dx[static_cast<std::size_t>(qp) * nloc + a];
          bz[a] -= w * cv.dphi_dz[static_cast<std::size_t>(qp) * nloc + a];
        }
      }
      for (int a = 0; a < nloc; ++a) {
        trips.emplace_back(cell * npl + l, 2 * nodes[a], bx[a]);
        trips.emplace_back(cell * npl + l, 2 * nodes[a] + 1, bz[a]);
      }
    }
  }
  divergence_.resize(mesh.num_pressure_dofs(), mesh.num_velocity_dofs());
  divergence_.setFromTriplets(trips.begin(), trips.end());
}

void StokesProblem::build_constraint() {
  const FlowlineMesh& m = *mesh_;
  const int nn = m.num_velocity_nodes();
  const int k = m.order();
  // 0 = two free components, 1 = tangential only, 2 = fixed
  std::vector<int> status(nn, 0);
  for (int n : m.boundary_nodes(BoundaryTag::bottom)) status[n] = 1;
  const DomainSpec& spec = m.domain();
  if (spec.left_bc == LateralBc::no_slip)
    for (int n : m.boundary_nodes(BoundaryTag::left)) status[n] = 2;
  if (spec.right_bc == LateralBc::no_slip)
    for (int n : m.boundary_nodes(BoundaryTag::right)) status[n] = 2;

  // Mass-consistent nodal normals on the bed.
  const auto& bottom_nodes = m.boundary_nodes(BoundaryTag::bottom);
  std::vector<Vec2> normals(bottom_nodes.size(), Vec2{0.0, 0.0});
  for (const FacetValues& f : m.facets(BoundaryTag::bottom)) {
    for (int a = 0; a <= k; ++a) {
      double w = 0.0;
      for (std::size_t qp = 0; qp < f.ds.size(); ++qp) w += f.phi[qp * (k + 1) + a] * f.ds[qp];
      normals[k * f.position + a][0] += w * f.normal[0];
      normals[k * f.position + a][1] += w * f.normal[1];
    }
  }
  for (Vec2& n : normals) {
    const double len = std::hypot(n[0], n[1]);
    n = {n[0] / len, n[1] / len};
  }
  basal_normals_ = normals;
  std::vector<int> basal_slot(nn, -1);
  for (std::size_t i = 0; i < bottom_nodes.size(); ++i) basal_slot[bottom_nodes[i]] = static_cast<int>(i);

  Triplets trips;
  int col = 0;
  for (int n = 0; n < nn; ++n) {
    if (status[n] == 0) {
      trips.emplace_back(2 * n, col++, 1.0);
      trips.emplace_back(2 * n + 1, col++, 1.0);
    } else if (status[n] == 1) {
      const Vec2& nv = normals[basal_slot[n]];
      trips.emplace_back(2 * n, col, -nv[1]);
      trips.emplace_back(2 * n + 1, col, nv[0]);
      ++col;
    }
  }
  constraint_.resize(m.num_velocity_dofs(), col);
  constraint_.setFromTriplets(trips.begin(), trips.end());
  constraint_.prune(0.0);
  constraint_t_ = constraint_.transpose();
}

Eigen::VectorXd StokesProblem::to_system(const StokesState& state) const {
  if (state.u.size() != mesh_->num_velocity_dofs() || state.p.size() != num_pressure())
    throw InvalidArgument("Stokes state has the wrong size");
  Eigen::VectorXd x(system_size());
  // R has orthonormal columns, so R^T recovers the free coordinates of u in range(R).
  x.head(num_free_velocity()) = constraint_t_ * state.u;
  x.tail(num_pressure()) = state.p;
  return x;
}

StokesState StokesProblem::from_system(const Eigen::VectorXd& x) const {
  if (x.size() != system_size()) throw InvalidArgument("system vector has the wrong size");
  StokesState s;
  s.u = constraint_ * x.head(num_free_velocity());
  s.p = x.tail(num_pressure());
  return s;
}

StokesState StokesProblem::zero_state() const {
  return {Eigen::VectorXd::Zero(mesh_->num_velocity_dofs()), Eigen::VectorXd::Zero(num_pressure())};
}

Eigen::VectorXd StokesProblem::reduce_dual(const Eigen::VectorXd& f) const {
  if (f.size() != mesh_->num_velocity_dofs()) throw InvalidArgument("velocity dual has the wrong size");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(system_size());
  out.head(num_free_velocity()) = constraint_t_ * f;
  return out;
}

double StokesProblem::hydrostatic_pressure(double x, double z) const {
  return physics_.rho_g() * (mesh_->mesh_surface(x) - z);
}

void StokesProblem::check_inputs(const StokesState& state, const Eigen::VectorXd& beta) const {
  if (state.u.size() != mesh_->num_velocity_dofs() || state.p.size() != num_pressure())
    throw InvalidArgument("Stokes state has the wrong size");
  if (beta.size() != mesh_->num_basal_dofs()) throw InvalidArgument("basal field has the wrong size");
  if (!state.u.allFinite() || !state.p.allFinite()) throw NumericError("non-finite Stokes state");
  if (!beta.allFinite()) throw NumericError("non-finite basal sliding parameter");
}

Eigen::VectorXd StokesProblem::residual(const StokesState& state, const Eigen::VectorXd& beta) const {
  check_inputs(state, beta);
  const FlowlineMesh& m = *mesh_;
  const int nloc = m.local_velocity_nodes();
  const int npl = m.pressure_per_cell();
  const int nq = m.quadrature_points_per_cell();
  const int k = m.order();
  const GlenRheology& rh = physics_.rheology;
  Eigen::VectorXd ru = Eigen::VectorXd::Zero(m.num_velocity_dofs());
  std::vector<double> ul;
  std::vector<double> rl(2 * nloc);

  for (int cell = 0; cell < m.num_cells(); ++cell) {
    const CellValues& cv = m.cell_values(cell);
    const auto nodes = m.cell_nodes(cell);
    gather(m, cell, state.u, ul);
    std::fill(rl.begin(), rl.end(), 0.0);
    const int col = cell % m.nx();
    const double slope =
        (m.column_surface(col + 1) - m.column_surface(col)) / (m.column_x(col + 1) - m.column_x(col));
    for (int qp = 0; qp < nq; ++qp) {
      const StrainRate e = strain_at(cv, qp, nloc, ul);
      const double eta = effective_viscosity(e, rh);
      double p = 0.0;
      for (int l = 0; l < npl; ++l)
        p += cv.psi[static_cast<std::size_t>(qp) * npl + l] * state.p[cell * npl + l];
      Vec2 f{0.0, 0.0};
      if (gravity_) f[0] -= physics_.rho_g() * slope;
      if (loads_.body_force) {
        const Vec2 b = loads_.body_force(cv.x[qp], cv.z[qp]);
        f[0] += b[0];
        f[1] += b[1];
      }
      const double w = cv.jxw[qp];
      const std::size_t base = static_cast<std::size_t>(qp) * nloc;
      for (int a = 0; a < nloc; ++a) {
        const double dx = cv.dphi_dx[base + a], dz = cv.dphi_dz[base + a], phi = cv.phi[base + a];
        for (int c = 0; c < 2; ++c) {
          const StrainRate ea = shape_strain(dx, dz, c);
          const double div = c == 0 ? dx : dz;
          rl[2 * a + c] += w * (2.0 * eta * e.contract(ea) - p * div - f[c] * phi);
        }
      }
    }
    for (int a = 0; a < nloc; ++a) {
      ru[2 * nodes[a]] += rl[2 * a];
      ru[2 * nodes[a] + 1] += rl[2 * a + 1];
    }
  }

  const DomainSpec& spec = m.domain();
  for (BoundaryTag tag : {BoundaryTag::bottom, BoundaryTag::top, BoundaryTag::left, BoundaryTag::right}) {
    const bool no_slip = (tag == BoundaryTag::left && spec.left_bc == LateralBc::no_slip) ||
                         (tag == BoundaryTag::right && spec.right_bc == LateralBc::no_slip);
    const bool ocean = (tag == BoundaryTag::left && spec.left_bc == LateralBc::hydrostatic_ocean) ||
                       (tag == BoundaryTag::right && spec.right_bc == LateralBc::hydrostatic_ocean);
    if (no_slip) continue;
    for (const FacetValues& f : m.facets(tag)) {
      for (std::size_t qp = 0; qp < f.ds.size(); ++qp) {
        // Surface load g with residual contribution -int g . w.
        Vec2 g{0.0, 0.0};
        if (gravity_ && tag != BoundaryTag::top) {
          double pn = hydrostatic_pressure(f.x[qp], f.z[qp]);
          if (ocean) pn -= physics_.rho_water_g() * std::max(0.0, spec.sea_level - f.z[qp]);
          g[0] += pn * f.normal[0];
          g[1] += pn * f.normal[1];
        }
        if (loads_.traction) {
          const Vec2 t = loads_.traction(tag, f.x[qp], f.z[qp]);
          g[0] += t[0];
          g[1] += t[1];
        }
        Vec2 robin{0.0, 0.0};
        if (tag == BoundaryTag::bottom) {
          const double c = std::exp(interp_basal(beta, f.position, f.t[qp]));
          const Vec2 tu = tangential(facet_value(f, static_cast<int>(qp), k, state.u), f.normal);
          robin = {c * tu[0], c * tu[1]};
        }
        for (int a = 0; a <= k; ++a) {
          const double phi = f.phi[qp * (k + 1) + a] * f.ds[qp];
          ru[2 * f.nodes[a]] += phi * (robin[0] - g[0]);
          ru[2 * f.nodes[a] + 1] += phi * (robin[1] - g[1]);
        }
      }
    }
  }

  Eigen::VectorXd r(system_size());
  r.head(num_free_velocity()) = constraint_t_ * ru;
  r.tail(num_pressure()) = divergence_ * state.u;
  return r;
}

SparseMatrix StokesProblem::jacobian(const StokesState& state, const Eigen::VectorXd& beta) const {
  check_inputs(state, beta);
  const FlowlineMesh& m = *mesh_;
  const int nloc = m.local_velocity_nodes();
  const int nq = m.quadrature_points_per_cell();
  const int k = m.order();
  const GlenRheology& rh = physics_.rheology;
  Triplets trips;
  trips.reserve(static_cast<std::size_t>(m.num_cells()) * 4 * nloc * nloc);
  std::vector<double> ul;
  Eigen::MatrixXd kl(2 * nloc, 2 * nloc);
  std::vector<StrainRate> ea(2 * nloc);

  for (int cell = 0; cell < m.num_cells(); ++cell) {
    const CellValues& cv = m.cell_values(cell);
    const auto nodes = m.cell_nodes(cell);
    gather(m, cell, state.u, ul);
    kl.setZero();
    for (int qp = 0; qp < nq; ++qp) {
      const StrainRate e = strain_at(cv, qp, nloc, ul);
      const ViscosityDerivatives vd = viscosity_derivatives(e.second_invariant(), rh);
      const double w = cv.jxw[qp];
      const std::size_t base = static_cast<std::size_t>(qp) * nloc;
      for (int a = 0; a < nloc; ++a)
        for (int c = 0; c < 2; ++c)
          ea[2 * a + c] = shape_strain(cv.dphi_dx[base + a], cv.dphi_dz[base + a], c);
      std::vector<double> ee(2 * nloc);
      for (int i = 0; i < 2 * nloc; ++i) ee[i] = e.contract(ea[i]);
      for (int i = 0; i < 2 * nloc; ++i)
        for (int j = i; j < 2 * nloc; ++j)
          kl(i, j) += w * (2.0 * vd.eta * ea[i].contract(ea[j]) + 2.0 * vd.d1 * ee[i] * ee[j]);
    }
    for (int i = 0; i < 2 * nloc; ++i) {
      for (int j = i; j < 2 * nloc; ++j) {
        const int gi = 2 * nodes[i / 2] + i % 2, gj = 2 * nodes[j / 2] + j % 2;
        trips.emplace_back(gi, gj, kl(i, j));
        if (i != j) trips.emplace_back(gj, gi, kl(i, j));
      }
    }
  }
  for (const FacetValues& f : m.facets(BoundaryTag::bottom)) {
    for (std::size_t qp = 0; qp < f.ds.size(); ++qp) {
      const double c = std::exp(interp_basal(beta, f.position, f.t[qp])) * f.ds[qp];
      for (int a = 0; a <= k; ++a) {
        for (int b = 0; b <= k; ++b) {
          const double pp = c * f.phi[qp * (k + 1) + a] * f.phi[qp * (k + 1) + b];
          for (int ca = 0; ca < 2; ++ca)
            for (int cb = 0; cb < 2; ++cb)
              trips.emplace_back(2 * f.nodes[a] + ca, 2 * f.nodes[b] + cb,
                                 pp * ((ca == cb ? 1.0 : 0.0) - f.normal[ca] * f.normal[cb]));
        }
      }
    }
  }
  SparseMatrix kfull(m.num_velocity_dofs(), m.num_velocity_dofs());
  kfull.setFromTriplets(trips.begin(), trips.end());

  const SparseMatrix kr = constraint_t_ * kfull * constraint_;
  const SparseMatrix br = divergence_ * constraint_;
  const int nf = num_free_velocity();
  Triplets sys;
  sys.reserve(static_cast<std::size_t>(kr.nonZeros() + 2 * br.nonZeros()));
  for (int c = 0; c < kr.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(kr, c); it; ++it) sys.emplace_back(it.row(), it.col(), it.value());
  for (int c = 0; c < br.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(br, c); it; ++it) {
      sys.emplace_back(nf + it.row(), it.col(), it.value());
      sys.emplace_back(it.col(), nf + it.row(), it.value());
    }
  }
  SparseMatrix out(system_size(), system_size());
  out.setFromTriplets(sys.begin(), sys.end());
  out.makeCompressed();
  return out;
}

Eigen::VectorXd StokesProblem::schur_diagonal(const StokesState& state) const {
  const FlowlineMesh& m = *mesh_;
  const int nloc = m.local_velocity_nodes();
  const int npl = m.pressure_per_cell();
  const int nq = m.quadrature_points_per_cell();
  Eigen::VectorXd d(num_pressure());
  std::vector<double> ul;
  for (int cell = 0; cell < m.num_cells(); ++cell) {
    const CellValues& cv = m.cell_values(cell);
    gather(m, cell, state.u, ul);
    double area = 0.0, eta_int = 0.0;
    std::vector<double> mass(npl, 0.0);
    for (int qp = 0; qp < nq; ++qp) {
      const StrainRate e = strain_at(cv, qp, nloc, ul);
      area += cv.jxw[qp];
      eta_int += cv.jxw[qp] * effective_viscosity(e, physics_.rheology);
      for (int l = 0; l < npl; ++l) {
        double row = 0.0;
        for (int l2 = 0; l2 < npl; ++l2)
          row += cv.psi[static_cast<std::size_t>(qp) * npl + l2];
        mass[l] += cv.jxw[qp] * cv.psi[static_cast<std::size_t>(qp) * npl + l] * row;
      }
    }
    const double eta = eta_int / area;
    for (int l = 0; l < npl; ++l) d[cell * npl + l] = -mass[l] / eta;
  }
  return d;
}

std::shared_ptr<const SaddleSolver> StokesProblem::factorize(const StokesState& state,
                                                             const Eigen::VectorXd& beta,
                                                             LinearSolverKind kind) const {
  Eigen::VectorXd schur;
  if (kind == LinearSolverKind::krylov) schur = schur_diagonal(state);
  return std::make_shared<const SaddleSolver>(jacobian(state, beta), num_free_velocity(), kind,
                                              std::move(schur));
}

ForwardSolution StokesProblem::solve(const Eigen::VectorXd& beta, const NewtonConfig& cfg,
                                     const StokesState* initial) const {
  cfg.validate();
  ForwardSolution out;
  ForwardRecord& rec = out.record;
  const StokesState zero = zero_state();
  Eigen::VectorXd x = initial ? to_system(*initial) : to_system(zero);
  const Eigen::VectorXd r_zero = residual(zero, beta);
  rec.reference_norm = r_zero.norm();
  Eigen::VectorXd r = initial ? residual(from_system(x), beta) : r_zero;
  rec.residual_evaluations = initial ? 2 : 1;
  double rn = r.norm();
  rec.residual_norms.push_back(rn);
  const double tol = std::max(cfg.rel_tol * rec.reference_norm, cfg.abs_tol);

  while (rn > tol) {
    if (rec.iterations >= cfg.max_iters)
      throw NonconvergenceError("forward Newton solve did not converge in " +
                                    std::to_string(cfg.max_iters) + " iterations",
                                rec);
    const StokesState current = from_system(x);
    const auto solver = factorize(current, beta, cfg.solver);
    SolveStats stats;
    const double forcing = std::min(cfg.krylov_forcing, std::sqrt(rn / std::max(rec.reference_norm, 1e-300)));
    const double lin_tol = std::max(forcing, 0.1 * tol / rn);
    const Eigen::VectorXd d = solver->solve(-r, cfg.solver == LinearSolverKind::direct ? 0.0 : lin_tol, &stats);
    rec.linear_iterations.push_back(stats.iterations);

    double alpha = 1.0;
    while (true) {
      const Eigen::VectorXd xt = x + alpha * d;
      Eigen::VectorXd rt = residual(from_system(xt), beta);
      ++rec.residual_evaluations;
      const double rtn = rt.norm();
      if (rtn <= (1.0 - cfg.armijo_c1 * alpha) * rn || rtn <= tol) {
        x = xt;
        r = std::move(rt);
        rn = rtn;
        break;
      }
      alpha *= cfg.shrink;
      if (alpha < cfg.min_step)
        throw NonconvergenceError("forward Newton line search failed at residual " + std::to_string(rn),
                                  rec);
    }
    ++rec.iterations;
    rec.step_lengths.push_back(alpha);
    rec.residual_norms.push_back(rn);
  }
  rec.converged = true;
  out.state = from_system(x);
  out.jacobian = factorize(out.state, beta, cfg.solver);
  return out;
}

Eigen::VectorXd StokesProblem::basal_pairing(const Eigen::VectorXd& beta, const Eigen::VectorXd& weight,
                                             const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  const FlowlineMesh& m = *mesh_;
  const int k = m.order();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m.num_basal_dofs());
  for (const FacetValues& f : m.facets(BoundaryTag::bottom)) {
    for (std::size_t qp = 0; qp < f.ds.size(); ++qp) {
      const double t = f.t[qp];
      double c = std::exp(interp_basal(beta, f.position, t)) * f.ds[qp];
      if (weight.size() > 0) c *= interp_basal(weight, f.position, t);
      const Vec2 av = facet_value(f, static_cast<int>(qp), k, a);
      const Vec2 bv = facet_value(f, static_cast<int>(qp), k, b);
      const double v = c * tangential_dot(av, bv, f.normal);
      out[f.position] += (1.0 - t) * v;
      out[f.position + 1] += t * v;
    }
  }
  return out;
}

Eigen::VectorXd StokesProblem::basal_load(const Eigen::VectorXd& beta, const Eigen::VectorXd& weight,
                                          const Eigen::VectorXd& a) const {
  const FlowlineMesh& m = *mesh_;
  const int k = m.order();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m.num_velocity_dofs());
  for (const FacetValues& f : m.facets(BoundaryTag::bottom)) {
    for (std::size_t qp = 0; qp < f.ds.size(); ++qp) {
      const double t = f.t[qp];
      double c = std::exp(interp_basal(beta, f.position, t)) * f.ds[qp];
      if (weight.size() > 0) c *= interp_basal(weight, f.position, t);
      const Vec2 ta = tangential(facet_value(f, static_cast<int>(qp), k, a), f.normal);
      for (int n = 0; n <= k; ++n) {
        const double phi = f.phi[qp * (k + 1) + n];
        out[2 * f.nodes[n]] += c * phi * ta[0];
        out[2 * f.nodes[n] + 1] += c * phi * ta[1];
      }
    }
  }
  return out;
}

Eigen::VectorXd StokesProblem::viscous_second_variation(const Eigen::VectorXd& u, const Eigen::VectorXd& a,
                                                        const Eigen::VectorXd& b) const {
  const FlowlineMesh& m = *mesh_;
  const int nloc = m.local_velocity_nodes();
  const int nq = m.quadrature_points_per_cell();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m.num_velocity_dofs());
  std::vector<double> ul, al, bl;
  for (int cell = 0; cell < m.num_cells(); ++cell) {
    const CellValues& cv = m.cell_values(cell);
    const auto nodes = m.cell_nodes(cell);
    gather(m, cell, u, ul);
    gather(m, cell, a, al);
    gather(m, cell, b, bl);
    for (int qp = 0; qp < nq; ++qp) {
      const StrainRate e = strain_at(cv, qp, nloc, ul);
      const StrainRate ea = strain_at(cv, qp, nloc, al);
      const StrainRate eb = strain_at(cv, qp, nloc, bl);
      const ViscosityDerivatives vd = viscosity_derivatives(e.second_invariant(), physics_.rheology);
      const double e_a = e.contract(ea), e_b = e.contract(eb), a_b = ea.contract(eb);
      // d2 sigma = 2 eta' [(e:b) a + (e:a) b + (a:b) e] + 2 eta'' (e:a)(e:b) e
      const double ca = 2.0 * vd.d1 * e_b, cb = 2.0 * vd.d1 * e_a;
      const double ce = 2.0 * vd.d1 * a_b + 2.0 * vd.d2 * e_a * e_b;
      const StrainRate s{ca * ea.xx + cb * eb.xx + ce * e.xx, ca * ea.zz + cb * eb.zz + ce * e.zz,
                         ca * ea.xz + cb * eb.xz + ce * e.xz};
      const double w = cv.jxw[qp];
      const std::size_t base = static_cast<std::size_t>(qp) * nloc;
      for (int n = 0; n < nloc; ++n) {
        const double dx = cv.dphi_dx[base + n], dz = cv.dphi_dz[base + n];
        out[2 * nodes[n]] += w * s.contract(shape_strain(dx, dz, 0));
        out[2 * nodes[n] + 1] += w * s.contract(shape_strain(dx, dz, 1));
      }
    }
  }
  return out;
}

Eigen::VectorXd StokesProblem::cell_divergence(const Eigen::VectorXd& u) const {
  const FlowlineMesh& m = *mesh_;
  const int nloc = m.local_velocity_nodes();
  const int nq = m.quadrature_points_per_cell();
  Eigen::VectorXd out(m.num_cells());
  std::vector<double> ul;
  for (int cell = 0; cell < m.num_cells(); ++cell) {
    const CellValues& cv = m.cell_values(cell);
    gather(m, cell, u, ul);
    double s = 0.0;
    for (int qp = 0; qp < nq; ++qp) {
      const StrainRate e = strain_at(cv, qp, nloc, ul);
      s += cv.jxw[qp] * (e.xx + e.zz);
    }
    out[cell] = s;
  }
  return out;
}

double StokesProblem::velocity_l2_error(const Eigen::VectorXd& u,
                                        const std::function<Vec2(double, double)>& exact) const {
  const FlowlineMesh& m = *mesh_;
  const int nloc = m.local_velocity_nodes();
  const int nq = m.quadrature_points_per_cell();
  double sum = 0.0;
  std::vector<double> ul;
  for (int cell = 0; cell < m.num_cells(); ++cell) {
    const CellValues& cv = m.cell_values(cell);
    gather(m, cell, u, ul);
    for (int qp = 0; qp < nq; ++qp) {
      Vec2 uh{0.0, 0.0};
      for (int a = 0; a < nloc; ++a) {
        const double phi = cv.phi[static_cast<std::size_t>(qp) * nloc + a];
        uh[0] += phi * ul[2 * a];
        uh[1] += phi * ul[2 * a + 1];
      }
      const Vec2 ue = exact(cv.x[qp], cv.z[qp]);
      sum += cv.jxw[qp] * ((uh[0] - ue[0]) * (uh[0] - ue[0]) + (uh[1] - ue[1]) * (uh[1] - ue[1]));
    }
  }
  return std::sqrt(sum);
}

Eigen::VectorXd StokesProblem::total_pressure(const StokesState& state) const {
  Eigen::VectorXd out(num_pressure());
  for (int i = 0; i < num_pressure(); ++i) {
    const Point pt = mesh_->pressure_point(i);
    out[i] = state.p[i] + (gravity_ ? hydrostatic_pressure(pt.x, pt.z) : 0.0);
  }
  return out;
}

Eigen::VectorXd surface_velocity(const StokesState& state, const FlowlineMesh& mesh) {
  if (state.u.size() != mesh.num_velocity_dofs()) throw InvalidArgument("velocity has the wrong size");
  const auto& top = mesh.boundary_nodes(BoundaryTag::top);
  Eigen::VectorXd out(2 * top.size());
  for (std::size_t i = 0; i < top.size(); ++i) {
    out[2 * i] = state.u[2 * top[i]];
    out[2 * i + 1] = state.u[2 * top[i] + 1];
  }
  return out;
}

}  // namespace icepred
