#include "icepred/rheology.hpp"

#include <cmath>

#include "icepred/errors.hpp"

namespace icepred {

void GlenRheology::validate() const {
  if (!(n >= 1.0) || !std::isfinite(n)) throw ConfigError("Glen exponent n must be >= 1");
  if (!(A > 0.0) || !std::isfinite(A)) throw ConfigError("flow-rate factor A must be positive");
  if (!(eps_reg > 0.0)) throw ConfigError("strain-rate regularization must be positive");
}

void PhysicsParams::validate() const {
  rheology.validate();
  if (!(rho > 0.0) || !(g > 0.0)) throw ConfigError("density and gravity must be positive");
  if (!(rho_water > 0.0)) throw ConfigError("water density must be positive");
}

ViscosityDerivatives viscosity_derivatives(double second_invariant, const GlenRheology& r) {
  const double ii = second_invariant + r.eps_reg;
  const double m = (1.0 - r.n) / (2.0 * r.n);
  ViscosityDerivatives out;
  out.eta = 0.5 * std::pow(r.A, -1.0 / r.n) * std::pow(ii, m);
  out.d1 = m * out.eta / ii;
  out.d2 = m * (m - 1.0) * out.eta / (ii * ii);
  return out;
}

double effective_viscosity(const StrainRate& e, const GlenRheology& rheology) {
  return viscosity_derivatives(e.second_invariant(), rheology).eta;
}

}  // namespace icepred
