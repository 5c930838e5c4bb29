#pragma once

namespace icepred {

/// Glen's flow law in MPa-km-year units.
struct GlenRheology {
  double n = 3.0;
  double A = 100.0;  // MPa^-n a^-1, i.e. 1e-16 Pa^-3 a^-1 for n = 3
  double eps_reg = 1e-10;

  void validate() const;
};

struct PhysicsParams {
  GlenRheology rheology;
  double rho = 910.0;          // kg/m^3
  double g = 9.81;             // m/s^2
  double rho_water = 1028.0;   // kg/m^3

  /// Body force magnitude in MPa/km.
  double rho_g() const { return rho * g * 1e-3; }
  double rho_water_g() const { return rho_water * g * 1e-3; }

  void validate() const;
};

/// Symmetric 2D strain rate (xx, zz, xz).
struct StrainRate {
  double xx = 0.0;
  double zz = 0.0;
  double xz = 0.0;

  double contract(const StrainRate& o) const { return xx * o.xx + zz * o.zz + 2.0 * xz * o.xz; }
  /// Second invariant 1/2 e:e.
  double second_invariant() const { return 0.5 * contract(*this); }
};

/// eta and its first two derivatives with respect to the second invariant.
struct ViscosityDerivatives {
  double eta = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

double effective_viscosity(const StrainRate& e, const GlenRheology& rheology);
ViscosityDerivatives viscosity_derivatives(double second_invariant, const GlenRheology& rheology);

}  // namespace icepred
