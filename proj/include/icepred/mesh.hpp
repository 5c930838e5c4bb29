#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "icepred/quadrature.hpp"

namespace icepred {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class BoundaryTag { bottom, top, left, right };
enum class LateralBc { no_slip, traction_free, hydrostatic_ocean };

const char* to_string(BoundaryTag tag);
const char* to_string(LateralBc bc);
LateralBc lateral_bc_from_string(const std::string& name);
BoundaryTag boundary_tag_from_string(const std::string& name);

/// Vertical slab geometry: x in [0, length], z in [bed(x), surface(x)], all in km.
struct DomainSpec {
  double length = 1.0;
  std::function<double(double)> bed;
  std::function<double(double)> surface;
  LateralBc left_bc = LateralBc::no_slip;
  LateralBc right_bc = LateralBc::traction_free;
  double sea_level = 0.0;

  /// Rectangle [0, length] x [0, thickness].
  static DomainSpec slab(double length, double thickness);
  /// Piecewise-linear interpolation of tabulated bed and surface elevations.
  static DomainSpec tabulated(std::vector<double> xs, std::vector<double> bed,
                              std::vector<double> surface);

  void validate() const;
};

struct Point {
  double x = 0.0;
  double z = 0.0;
};

/// Finite element data of one cell, evaluated at the volume quadrature points.
/// Shape arrays are laid out as [q * n_local + a].
struct CellValues {
  std::vector<double> x, z, jxw;
  std::vector<double> phi, dphi_dx, dphi_dz;
  std::vector<double> psi;  // pressure basis, [q * n_pressure_local + a]
};

/// A straight boundary edge with its trace quadrature. Parameter t runs along
/// the boundary's ordering direction (increasing x on bottom/top, increasing z
/// on left/right).
struct FacetValues {
  int cell = 0;
  BoundaryTag tag = BoundaryTag::bottom;
  int position = 0;                 // index of the facet along its boundary
  std::array<double, 2> normal{};   // unit outward normal
  double length = 0.0;
  std::vector<int> nodes;           // k + 1 velocity nodes in boundary order
  std::vector<double> t, x, z, ds;  // per quadrature point
  std::vector<double> phi;          // edge shape functions, [q * (k + 1) + a]
};

/// Structured quadrilateral mesh of a vertical slab with Q_k velocity,
/// discontinuous Q_{k-2} pressure, and P1 basal parameter spaces.
class FlowlineMesh {
 public:
  FlowlineMesh(const DomainSpec& spec, int nx, int nz, int order = 2);

  int nx() const { return nx_; }
  int nz() const { return nz_; }
  int order() const { return k_; }
  const DomainSpec& domain() const { return spec_; }

  int num_cells() const { return nx_ * nz_; }
  int nodes_x() const { return k_ * nx_ + 1; }
  int nodes_z() const { return k_ * nz_ + 1; }
  int num_velocity_nodes() const { return nodes_x() * nodes_z(); }
  int num_velocity_dofs() const { return 2 * num_velocity_nodes(); }
  int pressure_per_cell() const { return (k_ - 1) * (k_ - 1); }
  int num_pressure_dofs() const { return num_cells() * pressure_per_cell(); }
  int num_basal_dofs() const { return nx_ + 1; }
  int local_velocity_nodes() const { return (k_ + 1) * (k_ + 1); }

  int node_index(int a, int c) const { return c * nodes_x() + a; }
  const Point& node(int n) const { return nodes_[n]; }
  std::span<const int> cell_nodes(int cell) const;
  Point pressure_point(int dof) const;

  /// Column vertex data (nx + 1 columns).
  double column_x(int i) const { return column_x_[i]; }
  double column_bed(int i) const { return column_bed_[i]; }
  double column_surface(int i) const { return column_surface_[i]; }
  /// Piecewise-linear mesh surface and its slope.
  double mesh_surface(double x) const;
  double mesh_surface_slope(double x) const;

  const CellValues& cell_values(int cell) const { return cells_[cell]; }
  const std::vector<FacetValues>& facets(BoundaryTag tag) const;
  /// Velocity nodes on a boundary in boundary order.
  const std::vector<int>& boundary_nodes(BoundaryTag tag) const;
  /// Velocity nodes at mesh vertices on a boundary (P1 trace space).
  const std::vector<int>& boundary_vertices(BoundaryTag tag) const;
  /// Arc-length coordinate of the basal vertices, starting at 0.
  const std::vector<double>& basal_arclength() const { return basal_arclength_; }

  int quadrature_points_per_cell() const { return volume_rule_.size(); }
  const QuadratureRule& facet_rule() const { return facet_rule_; }
  const LagrangeBasis1D& velocity_basis() const { return basis_; }

 private:
  void build_nodes();
  void build_cells();
  void build_facets();
  Point map(int cell, double xi, double zeta) const;

  DomainSpec spec_;
  int nx_, nz_, k_;
  LagrangeBasis1D basis_;
  QuadratureRule facet_rule_;
  QuadratureRule2D volume_rule_;

  std::vector<double> column_x_, column_bed_, column_surface_;
  std::vector<Point> nodes_;
  std::vector<int> cell_nodes_;
  std::vector<CellValues> cells_;
  std::array<std::vector<FacetValues>, 4> facets_;
  std::array<std::vector<int>, 4> boundary_nodes_;
  std::array<std::vector<int>, 4> boundary_vertices_;
  std::vector<double> basal_arclength_;
};

enum class TraceSpace { linear, velocity };

/// L2 mass matrix on a tagged boundary. `linear` uses the P1 hat functions on
/// the boundary vertices; `velocity` uses the Q_k trace on the boundary nodes.
SparseMatrix assemble_boundary_mass(const FlowlineMesh& mesh, BoundaryTag tag, TraceSpace space);

/// Stiffness (tangential Laplacian, natural boundary conditions) for the P1
/// trace space on a tagged boundary.
SparseMatrix assemble_boundary_stiffness(const FlowlineMesh& mesh, BoundaryTag tag);

/// Restriction of a scalar nodal field on velocity nodes to a boundary, and its
/// mass-weighted adjoint lift. For any u and w:
///   (restrict(u))^T M w == u^T lift(w).
class BoundaryTrace {
 public:
  BoundaryTrace(const FlowlineMesh& mesh, BoundaryTag tag);

  int size() const { return static_cast<int>(nodes_.size()); }
  const SparseMatrix& mass() const { return mass_; }

  Eigen::VectorXd restrict_field(const Eigen::VectorXd& volume_field) const;
  /// Adjoint lift: returns a dual vector on velocity nodes.
  Eigen::VectorXd lift(const Eigen::VectorXd& boundary_field) const;
  /// Primal extension by zero; restrict_field(extend(w)) == w.
  Eigen::VectorXd extend(const Eigen::VectorXd& boundary_field) const;

 private:
  int num_volume_;
  std::vector<int> nodes_;
  SparseMatrix mass_;
};

}  // namespace icepred
