#include "icepred/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "icepred/errors.hpp"

namespace icepred {

namespace {

int tag_index(BoundaryTag tag) { return static_cast<int>(tag); }

double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const auto i = static_cast<std::size_t>(it - xs.begin()) - 1;
  const double t = (x - xs[i]) / (xs[i + 1] - xs[i]);
  return (1.0 - t) * ys[i] + t * ys[i + 1];
}

}  // namespace

const char* to_string(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::bottom: return "bottom";
    case BoundaryTag::top: return "top";
    case BoundaryTag::left: return "left";
    case BoundaryTag::right: return "right";
  }
  return "?";
}

const char* to_string(LateralBc bc) {
  switch (bc) {
    case LateralBc::no_slip: return "no-slip";
    case LateralBc::traction_free: return "traction-free";
    case LateralBc::hydrostatic_ocean: return "hydrostatic-ocean";
  }
  return "?";
}

LateralBc lateral_bc_from_string(const std::string& name) {
  if (name == "no-slip") return LateralBc::no_slip;
  if (name == "traction-free") return LateralBc::traction_free;
  if (name == "hydrostatic-ocean") return LateralBc::hydrostatic_ocean;
  throw ConfigError("unknown lateral boundary condition '" + name + "'");
}

BoundaryTag boundary_tag_from_string(const std::string& name) {
  if (name == "bottom") return BoundaryTag::bottom;
  if (name == "top") return BoundaryTag::top;
  if (name == "left") return BoundaryTag::left;
  if (name == "right") return BoundaryTag::right;
  throw ConfigError("unknown boundary tag '" + name + "'");
}

DomainSpec DomainSpec::slab(double length, double thickness) {
  DomainSpec spec;
  spec.length = length;
  spec.bed = [](double) { return 0.0; };
  spec.surface = [thickness](double) { return thickness; };
  return spec;
}

DomainSpec DomainSpec::tabulated(std::vector<double> xs, std::vector<double> bed,
                                 std::vector<double> surface) {
  if (xs.size() < 2 || xs.size() != bed.size() || xs.size() != surface.size())
    throw GeometryError("tabulated geometry needs matching arrays with at least two rows");
  if (!std::is_sorted(xs.begin(), xs.end()) ||
      std::adjacent_find(xs.begin(), xs.end()) != xs.end())
    throw GeometryError("tabulated geometry abscissae must be strictly increasing");
  DomainSpec spec;
  spec.length = xs.back() - xs.front();
  const double x0 = xs.front();
  for (double& x : xs) x -= x0;
  spec.bed = [xs, bed](double x) { return interpolate(xs, bed, x); };
  spec.surface = [xs, surface](double x) { return interpolate(xs, surface, x); };
  return spec;
}

void DomainSpec::validate() const {
  if (!(length > 0.0) || !std::isfinite(length))
    throw GeometryError("domain length must be positive");
  if (!bed || !surface) throw GeometryError("domain needs bed and surface functions");
  constexpr int samples = 2000;
  for (int i = 0; i <= samples; ++i) {
    const double x = length * i / samples;
    const double b = bed(x), s = surface(x);
    if (!std::isfinite(b) || !std::isfinite(s))
      throw GeometryError("non-finite bed or surface elevation");
    if (!(s > b)) {
      std::ostringstream msg;
      msg << "degenerate geometry: surface " << s << " <= bed " << b << " at x = " << x;
      throw GeometryError(msg.str());
    }
  }
}

FlowlineMesh::FlowlineMesh(const DomainSpec& spec, int nx, int nz, int order)
    : spec_(spec),
      nx_(nx),
      nz_(nz),
      k_(order),
      basis_(order < 1 ? 1 : order),
      facet_rule_(QuadratureRule::gauss(order + 1)),
      volume_rule_(QuadratureRule2D::tensor(QuadratureRule::gauss(order + 1))) {
  if (nx < 1 || nz < 1) throw InvalidArgument("mesh needs nx, nz >= 1");
  if (order < 2 || order > 4) throw InvalidArgument("velocity order k must be in [2, 4]");
  spec_.validate();

  column_x_.resize(nx_ + 1);
  column_bed_.resize(nx_ + 1);
  column_surface_.resize(nx_ + 1);
  for (int i = 0; i <= nx_; ++i) {
    const double x = spec_.length * i / nx_;
    column_x_[i] = x;
    column_bed_[i] = spec_.bed(x);
    column_surface_[i] = spec_.surface(x);
  }
  build_nodes();
  build_cells();
  build_facets();
}

Point FlowlineMesh::map(int cell, double xi, double zeta) const {
  const int i = cell % nx_, j = cell / nx_;
  auto vz = [&](int ii, int jj) {
    return column_bed_[ii] + (static_cast<double>(jj) / nz_) * (column_surface_[ii] - column_bed_[ii]);
  };
  const double z00 = vz(i, j), z10 = vz(i + 1, j), z01 = vz(i, j + 1), z11 = vz(i + 1, j + 1);
  Point p;
  p.x = (1.0 - xi) * column_x_[i] + xi * column_x_[i + 1];
  p.z = (1.0 - xi) * (1.0 - zeta) * z00 + xi * (1.0 - zeta) * z10 + (1.0 - xi) * zeta * z01 +
        xi * zeta * z11;
  return p;
}

void FlowlineMesh::build_nodes() {
  nodes_.resize(num_velocity_nodes());
  for (int c = 0; c < nodes_z(); ++c) {
    const int j = std::min(c / k_, nz_ - 1);
    const int q = c - k_ * j;
    for (int a = 0; a < nodes_x(); ++a) {
      const int i = std::min(a / k_, nx_ - 1);
      const int p = a - k_ * i;
      nodes_[node_index(a, c)] = map(j * nx_ + i, static_cast<double>(p) / k_,
                                     static_cast<double>(q) / k_);
    }
  }
  const int nloc = local_velocity_nodes();
  cell_nodes_.resize(static_cast<std::size_t>(num_cells()) * nloc);
  for (int j = 0; j < nz_; ++j) {
    for (int i = 0; i < nx_; ++i) {
      const int cell = j * nx_ + i;
      for (int q = 0; q <= k_; ++q)
        for (int p = 0; p <= k_; ++p)
          cell_nodes_[cell * nloc + q * (k_ + 1) + p] = node_index(k_ * i + p, k_ * j + q);
    }
  }
}

std::span<const int> FlowlineMesh::cell_nodes(int cell) const {
  const int nloc = local_velocity_nodes();
  return {cell_nodes_.data() + static_cast<std::size_t>(cell) * nloc,
          static_cast<std::size_t>(nloc)};
}

void FlowlineMesh::build_cells() {
  const int nloc = local_velocity_nodes();
  const int nq = volume_rule_.size();
  const int npl = pressure_per_cell();
  std::vector<double> pnodes;
  for (int a = 0; a <= k_ - 2; ++a) pnodes.push_back(static_cast<double>(a + 1) / k_);
  const LagrangeBasis1D pbasis(pnodes);
  const int pk = k_ - 1;  // pressure nodes per direction

  cells_.resize(num_cells());
  for (int cell = 0; cell < num_cells(); ++cell) {
    const int i = cell % nx_, j = cell / nx_;
    auto vz = [&](int ii, int jj) {
      return column_bed_[ii] +
             (static_cast<double>(jj) / nz_) * (column_surface_[ii] - column_bed_[ii]);
    };
    const double z00 = vz(i, j), z10 = vz(i + 1, j), z01 = vz(i, j + 1), z11 = vz(i + 1, j + 1);
    const double h = column_x_[i + 1] - column_x_[i];

    CellValues& cv = cells_[cell];
    cv.x.resize(nq);
    cv.z.resize(nq);
    cv.jxw.resize(nq);
    cv.phi.resize(static_cast<std::size_t>(nq) * nloc);
    cv.dphi_dx.resize(cv.phi.size());
    cv.dphi_dz.resize(cv.phi.size());
    cv.psi.resize(static_cast<std::size_t>(nq) * npl);
    for (int qp = 0; qp < nq; ++qp) {
      const double xi = volume_rule_.xi[qp], zeta = volume_rule_.zeta[qp];
      const Point pt = map(cell, xi, zeta);
      const double z_xi = (1.0 - zeta) * (z10 - z00) + zeta * (z11 - z01);
      const double z_zeta = (1.0 - xi) * (z01 - z00) + xi * (z11 - z10);
      const double det = h * z_zeta;
      if (!(det > 0.0)) throw GeometryError("inverted or degenerate cell");
      cv.x[qp] = pt.x;
      cv.z[qp] = pt.z;
      cv.jxw[qp] = det * volume_rule_.weights[qp];
      for (int q = 0; q <= k_; ++q) {
        for (int p = 0; p <= k_; ++p) {
          const int a = q * (k_ + 1) + p;
          const double bx = basis_.value(p, xi), bz = basis_.value(q, zeta);
          const double dbx = basis_.derivative(p, xi), dbz = basis_.derivative(q, zeta);
          const double d_xi = dbx * bz, d_zeta = bx * dbz;
          const std::size_t idx = static_cast<std::size_t>(qp) * nloc + a;
          cv.phi[idx] = bx * bz;
          cv.dphi_dx[idx] = d_xi / h - d_zeta * z_xi / det;
          cv.dphi_dz[idx] = d_zeta / z_zeta;
        }
      }
      for (int b = 0; b < pk; ++b)
        for (int a = 0; a < pk; ++a)
          cv.psi[static_cast<std::size_t>(qp) * npl + b * pk + a] =
              pbasis.value(a, xi) * pbasis.value(b, zeta);
    }
  }
}

void FlowlineMesh::build_facets() {
  const int nq = facet_rule_.size();
  auto make = [&](int cell, BoundaryTag tag, int position, std::vector<int> nodes, Point p0,
                  Point p1) {
    FacetValues f;
    f.cell = cell;
    f.tag = tag;
    f.position = position;
    f.nodes = std::move(nodes);
    const double tx = p1.x - p0.x, tz = p1.z - p0.z;
    f.length = std::hypot(tx, tz);
    // Rotating the tangent clockwise gives the outward normal on bottom and
    // right edges; counter-clockwise on top and left.
    if (tag == BoundaryTag::bottom || tag == BoundaryTag::right)
      f.normal = {tz / f.length, -tx / f.length};
    else
      f.normal = {-tz / f.length, tx / f.length};
    for (int qp = 0; qp < nq; ++qp) {
      const double t = facet_rule_.points[qp];
      f.t.push_back(t);
      f.x.push_back((1.0 - t) * p0.x + t * p1.x);
      f.z.push_back((1.0 - t) * p0.z + t * p1.z);
      f.ds.push_back(f.length * facet_rule_.weights[qp]);
      for (int a = 0; a <= k_; ++a) f.phi.push_back(basis_.value(a, t));
    }
    facets_[tag_index(tag)].push_back(std::move(f));
  };

  for (int i = 0; i < nx_; ++i) {
    std::vector<int> bottom, top;
    for (int p = 0; p <= k_; ++p) {
      bottom.push_back(node_index(k_ * i + p, 0));
      top.push_back(node_index(k_ * i + p, k_ * nz_));
    }
    make(i, BoundaryTag::bottom, i, bottom, nodes_[bottom.front()], nodes_[bottom.back()]);
    make((nz_ - 1) * nx_ + i, BoundaryTag::top, i, top, nodes_[top.front()], nodes_[top.back()]);
  }
  for (int j = 0; j < nz_; ++j) {
    std::vector<int> left, right;
    for (int p = 0; p <= k_; ++p) {
      left.push_back(node_index(0, k_ * j + p));
      right.push_back(node_index(k_ * nx_, k_ * j + p));
    }
    make(j * nx_, BoundaryTag::left, j, left, nodes_[left.front()], nodes_[left.back()]);
    make(j * nx_ + nx_ - 1, BoundaryTag::right, j, right, nodes_[right.front()],
         nodes_[right.back()]);
  }

  for (int a = 0; a < nodes_x(); ++a) {
    boundary_nodes_[tag_index(BoundaryTag::bottom)].push_back(node_index(a, 0));
    boundary_nodes_[tag_index(BoundaryTag::top)].push_back(node_index(a, k_ * nz_));
  }
  for (int c = 0; c < nodes_z(); ++c) {
    boundary_nodes_[tag_index(BoundaryTag::left)].push_back(node_index(0, c));
    boundary_nodes_[tag_index(BoundaryTag::right)].push_back(node_index(k_ * nx_, c));
  }
  for (int i = 0; i <= nx_; ++i) {
    boundary_vertices_[tag_index(BoundaryTag::bottom)].push_back(node_index(k_ * i, 0));
    boundary_vertices_[tag_index(BoundaryTag::top)].push_back(node_index(k_ * i, k_ * nz_));
  }
  for (int j = 0; j <= nz_; ++j) {
    boundary_vertices_[tag_index(BoundaryTag::left)].push_back(node_index(0, k_ * j));
    boundary_vertices_[tag_index(BoundaryTag::right)].push_back(node_index(k_ * nx_, k_ * j));
  }

  basal_arclength_.assign(nx_ + 1, 0.0);
  const auto& bottom = facets_[tag_index(BoundaryTag::bottom)];
  for (int i = 0; i < nx_; ++i) basal_arclength_[i + 1] = basal_arclength_[i] + bottom[i].length;
}

const std::vector<FacetValues>& FlowlineMesh::facets(BoundaryTag tag) const {
  return facets_[tag_index(tag)];
}

const std::vector<int>& FlowlineMesh::boundary_nodes(BoundaryTag tag) const {
  return boundary_nodes_[tag_index(tag)];
}

const std::vector<int>& FlowlineMesh::boundary_vertices(BoundaryTag tag) const {
  return boundary_vertices_[tag_index(tag)];
}

Point FlowlineMesh::pressure_point(int dof) const {
  const int npl = pressure_per_cell();
  const int cell = dof / npl, l = dof % npl;
  const int pk = k_ - 1;
  const int a = l % pk, b = l / pk;
  return map(cell, static_cast<double>(a + 1) / k_, static_cast<double>(b + 1) / k_);
}

double FlowlineMesh::mesh_surface(double x) const {
  return interpolate(column_x_, column_surface_, x);
}

double FlowlineMesh::mesh_surface_slope(double x) const {
  const double h = column_x_[1] - column_x_[0];
  int i = static_cast<int>(std::floor(x / h));
  i = std::clamp(i, 0, nx_ - 1);
  return (column_surface_[i + 1] - column_surface_[i]) / (column_x_[i + 1] - column_x_[i]);
}

SparseMatrix assemble_boundary_mass(const FlowlineMesh& mesh, BoundaryTag tag, TraceSpace space) {
  const auto& facets = mesh.facets(tag);
  if (facets.empty()) throw InvalidArgument(std::string("empty boundary tag ") + to_string(tag));
  const int k = mesh.order();
  std::vector<Eigen::Triplet<double>> triplets;
  int n = 0;
  if (space == TraceSpace::linear) {
    n = static_cast<int>(facets.size()) + 1;
    for (const auto& f : facets) {
      for (int qp = 0; qp < static_cast<int>(f.t.size()); ++qp) {
        const double phi[2] = {1.0 - f.t[qp], f.t[qp]};
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            triplets.emplace_back(f.position + a, f.position + b, phi[a] * phi[b] * f.ds[qp]);
      }
    }
  } else {
    n = k * static_cast<int>(facets.size()) + 1;
    for (const auto& f : facets) {
      for (int qp = 0; qp < static_cast<int>(f.t.size()); ++qp) {
        for (int a = 0; a <= k; ++a)
          for (int b = 0; b <= k; ++b)
            triplets.emplace_back(k * f.position + a, k * f.position + b,
                                  f.phi[qp * (k + 1) + a] * f.phi[qp * (k + 1) + b] * f.ds[qp]);
      }
    }
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

SparseMatrix assemble_boundary_stiffness(const FlowlineMesh& mesh, BoundaryTag tag) {
  const auto& facets = mesh.facets(tag);
  if (facets.empty()) throw InvalidArgument(std::string("empty boundary tag ") + to_string(tag));
  const int n = static_cast<int>(facets.size()) + 1;
  std::vector<Eigen::Triplet<double>> triplets;
  for (const auto& f : facets) {
    const double s = 1.0 / f.length;
    const int i = f.position;
    triplets.emplace_back(i, i, s);
    triplets.emplace_back(i + 1, i + 1, s);
    triplets.emplace_back(i, i + 1, -s);
    triplets.emplace_back(i + 1, i, -s);
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

BoundaryTrace::BoundaryTrace(const FlowlineMesh& mesh, BoundaryTag tag)
    : num_volume_(mesh.num_velocity_nodes()),
      nodes_(mesh.boundary_nodes(tag)),
      mass_(assemble_boundary_mass(mesh, tag, TraceSpace::velocity)) {}

Eigen::VectorXd BoundaryTrace::restrict_field(const Eigen::VectorXd& volume_field) const {
  if (volume_field.size() != num_volume_)
    throw InvalidArgument("trace: volume field has the wrong size");
  Eigen::VectorXd out(size());
  for (int i = 0; i < size(); ++i) out[i] = volume_field[nodes_[i]];
  return out;
}

Eigen::VectorXd BoundaryTrace::lift(const Eigen::VectorXd& boundary_field) const {
  if (boundary_field.size() != size()) throw InvalidArgument("trace: boundary field has the wrong size");
  const Eigen::VectorXd weighted = mass_ * boundary_field;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(num_volume_);
  for (int i = 0; i < size(); ++i) out[nodes_[i]] += weighted[i];
  return out;
}

Eigen::VectorXd BoundaryTrace::extend(const Eigen::VectorXd& boundary_field) const {
  if (boundary_field.size() != size()) throw InvalidArgument("trace: boundary field has the wrong size");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(num_volume_);
  for (int i = 0; i < size(); ++i) out[nodes_[i]] = boundary_field[i];
  return out;
}

}  // namespace icepred
