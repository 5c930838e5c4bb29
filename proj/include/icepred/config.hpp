#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "icepred/lowrank.hpp"
#include "icepred/mesh.hpp"
#include "icepred/newton_cg.hpp"
#include "icepred/observations.hpp"
#include "icepred/prediction.hpp"
#include "icepred/prior.hpp"
#include "icepred/rheology.hpp"
#include "icepred/stokes.hpp"

namespace icepred {

/// Glacier geometry. `kind` is "desk" (sloping bed with undulation, parabolic
/// surface), "slab" (flat rectangle) or "tabulated" (piecewise-linear tables).
struct GeometryConfig {
  std::string kind = "desk";
  double length = 100.0;
  // desk
  double bed_drop = 0.5;
  double bed_amplitude = 0.03;
  double bed_wavelength = 20.0;
  double surface_divide = 1.2;
  double surface_terminus = 0.06;
  // slab
  double thickness = 1.0;
  // tabulated
  std::vector<double> x, bed, surface;
  LateralBc left_bc = LateralBc::no_slip;
  LateralBc right_bc = LateralBc::hydrostatic_ocean;
  double sea_level = 0.0;

  DomainSpec domain() const;
};

struct MeshConfig {
  int nx = 32;
  int nz = 8;
  int order = 2;
};

struct GaussianBump {
  double center = 60.0;
  double width = 8.0;
  double amplitude = -2.5;
};

/// beta(x) = background + sum of amplitude exp(-((x - center) / width)^2 / 2).
struct BetaFieldConfig {
  double background = 0.5;
  std::vector<GaussianBump> bumps{GaussianBump{}};

  double operator()(double x) const;
};

struct SynthConfig {
  int fine_factor = 2;
};

struct InitConfig {
  /// exp(beta_init) = factor * median(exp(beta_true)).
  double factor = 1000.0;
};

struct SampleConfig {
  int count = 5;
};

struct LCurveConfig {
  std::vector<double> gammas;
};

struct RunConfig {
  MisfitMode mode = MisfitMode::bayesian;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string output_dir = "out";
  GeometryConfig geometry;
  MeshConfig mesh;
  PhysicsParams physics;
  BetaFieldConfig beta_true;
  InitConfig init;
  PriorParams prior;
  NoiseModel noise;
  SynthConfig synth;
  NewtonConfig forward;
  NewtonCGConfig inversion;
  GevdConfig gevd;
  HessianMode gevd_hessian = HessianMode::full;
  SampleConfig samples;
  LCurveConfig lcurve;
  std::vector<QoiSpec> qoi;

  /// Defaults of the given mode (the deterministic mode uses kappa = 1/2 and a
  /// weaker mass term in the prior).
  static RunConfig defaults(MisfitMode mode = MisfitMode::bayesian);
  void validate() const;
};

/// Strict JSON: unknown keys and type mismatches are ConfigErrors. Missing keys
/// take the defaults of the configured mode.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const RunConfig& cfg);

}  // namespace icepred
