#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "corshape/levelset.hpp"
#include "corshape/mesh.hpp"
#include "corshape/objectives.hpp"
#include "corshape/optimizer.hpp"

namespace corshape {

enum class Preset { kBridgeCorrelated, kBridgeKernel, kPoissonDirichlet, kPoissonTracking, kCustom };

std::string to_string(Preset preset);

struct ScenarioSpec {
  Preset preset = Preset::kBridgeCorrelated;
  FunctionalKind functional = FunctionalKind::kCompliance;
  double alpha = 0.0;
  int kernel_index = 1;

  int nx = 30;
  int ny = 15;
  Box box{0.0, 0.0, 1.0, 0.5};
  std::vector<Box> dirichlet;
  std::vector<Box> neumann;  // for BRIDGE_CORRELATED: [0] carries g_a, [1] carries g_b
  std::vector<Hole> holes;
  bool disc_initial = false;  // material disc instead of box minus holes
  Point disc_center{0.5, 0.5};
  double disc_radius = 0.3;

  double young = 1.0;
  double poisson = 0.3;
  double eps_ersatz = 1e-3;

  double length = 0.1;
  double amplitude_h = 1e5;
  double amplitude_k = 1e6;
  int profile_axis = 1;
  int decay_axis = 0;
  int h_index = 0;  // CUSTOM: 0 disables the component
  int k_index = 0;

  double load_variation = 0.5;  // Poisson: std. dev. of the linear load mode
  double target_value = 0.02;   // tracking u0
  Box observation{0.35, 0.35, 0.65, 0.65};

  double cholesky_epsilon = 1e-6;
  int max_rank = 5;
};

struct OracleConfig {
  int instances = 100;
  int dim = 20;
  int rank = 5;
  int mc_instances = 10;
  long samples = 100000;
  std::uint64_t seed = 20240601;
};

struct RunConfig {
  ScenarioSpec scenario;
  OptimizationConfig optimization;
  OracleConfig oracle;
};

/// Defaults of a preset (geometry, loads, constants of the experiment).
RunConfig preset_config(Preset preset);

/// Parses an INI-style configuration:
///
///   [section]
///   key = value   # comment
///
/// The scenario preset fixes the defaults; every other key overrides one.
/// Unknown sections or keys, malformed lines and out-of-range values raise
/// ConfigError naming the line or the key.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

}  // namespace corshape
