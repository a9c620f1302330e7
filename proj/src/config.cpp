#include "corshape/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "corshape/error.hpp"

namespace corshape {
namespace {

struct Entry {
  std::string value;
  int line = 0;
};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

[[noreturn]] void bad_value(const std::string& key, const Entry& e, const std::string& why) {
  throw ConfigError("line " + std::to_string(e.line) + ": " + key + ": " + why + " (got '" + e.value + "')");
}

double to_double(const std::string& key, const Entry& e) {
  double v = 0.0;
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) bad_value(key, e, "expected a number");
  return v;
}

long to_long(const std::string& key, const Entry& e) {
  long v = 0;
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) bad_value(key, e, "expected an integer");
  return v;
}

int to_int(const std::string& key, const Entry& e) {
  const long v = to_long(key, e);
  if (v < -1000000000L || v > 1000000000L) bad_value(key, e, "integer out of range");
  return static_cast<int>(v);
}

int to_axis(const std::string& key, const Entry& e) {
  const std::string v = upper(e.value);
  if (v == "X" || v == "0") return 0;
  if (v == "Y" || v == "1") return 1;
  bad_value(key, e, "expected x or y");
}

std::vector<double> numbers(const std::string& key, const Entry& e, const std::string& text) {
  std::istringstream in(text);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    Entry sub{tok, e.line};
    out.push_back(to_double(key, sub));
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string part;
  std::istringstream in(s);
  while (std::getline(in, part, sep)) {
    part = trim(part);
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

// "xmin ymin xmax ymax; ..."
std::vector<Box> to_boxes(const std::string& key, const Entry& e) {
  std::vector<Box> out;
  for (const auto& item : split(e.value, ';')) {
    const auto v = numbers(key, e, item);
    if (v.size() != 4) bad_value(key, e, "each region needs 4 numbers: xmin ymin xmax ymax");
    if (v[2] < v[0] || v[3] < v[1]) bad_value(key, e, "region has xmax < xmin or ymax < ymin");
    out.push_back({v[0], v[1], v[2], v[3]});
  }
  return out;
}

// "circle cx cy r; rect xmin ymin xmax ymax"
std::vector<Hole> to_holes(const std::string& key, const Entry& e) {
  std::vector<Hole> out;
  if (upper(e.value) == "NONE") return out;
  for (const auto& item : split(e.value, ';')) {
    std::istringstream in(item);
    std::string kind;
    in >> kind;
    std::string rest;
    std::getline(in, rest);
    const auto v = numbers(key, e, rest);
    kind = upper(kind);
    if (kind == "CIRCLE" && v.size() == 3) {
      out.push_back(CircleHole{{v[0], v[1]}, v[2]});
    } else if (kind == "RECT" && v.size() == 4) {
      out.push_back(RectHole{{v[0], v[1], v[2], v[3]}});
    } else {
      bad_value(key, e, "expected 'circle cx cy r' or 'rect xmin ymin xmax ymax'");
    }
  }
  return out;
}

Preset to_preset(const std::string& key, const Entry& e) {
  const std::string v = upper(e.value);
  if (v == "BRIDGE_CORRELATED") return Preset::kBridgeCorrelated;
  if (v == "BRIDGE_KERNEL") return Preset::kBridgeKernel;
  if (v == "POISSON_DIRICHLET") return Preset::kPoissonDirichlet;
  if (v == "POISSON_TRACKING") return Preset::kPoissonTracking;
  if (v == "CUSTOM") return Preset::kCustom;
  bad_value(key, e, "unknown preset");
}

FunctionalKind to_functional(const std::string& key, const Entry& e) {
  const std::string v = upper(e.value);
  if (v == "COMPLIANCE") return FunctionalKind::kCompliance;
  if (v == "DIRICHLET_ENERGY") return FunctionalKind::kDirichletEnergy;
  if (v == "TRACKING") return FunctionalKind::kTracking;
  bad_value(key, e, "expected compliance, dirichlet_energy or tracking");
}

std::vector<Hole> hole_grid(const std::vector<double>& xs, const std::vector<double>& ys, double r) {
  std::vector<Hole> out;
  for (double y : ys) {
    for (double x : xs) out.push_back(CircleHole{{x, y}, r});
  }
  return out;
}

using Handler = std::function<void(const std::string&, const Entry&, RunConfig&)>;

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> table = [] {
    std::map<std::string, Handler> h;
    auto dbl = [](double ScenarioSpec::*field) {
      return [field](const std::string& k, const Entry& e, RunConfig& c) { c.scenario.*field = to_double(k, e); };
    };
    auto opt_dbl = [](double OptimizationConfig::*field) {
      return [field](const std::string& k, const Entry& e, RunConfig& c) { c.optimization.*field = to_double(k, e); };
    };
    auto opt_int = [](int OptimizationConfig::*field) {
      return [field](const std::string& k, const Entry& e, RunConfig& c) { c.optimization.*field = to_int(k, e); };
    };
    auto orc_int = [](int OracleConfig::*field) {
      return [field](const std::string& k, const Entry& e, RunConfig& c) { c.oracle.*field = to_int(k, e); };
    };

    h["scenario.preset"] = [](const std::string&, const Entry&, RunConfig&) {};
    h["scenario.functional"] = [](const std::string& k, const Entry& e, RunConfig& c) {
      c.scenario.functional = to_functional(k, e);
    };
    h["scenario.alpha"] = dbl(&ScenarioSpec::alpha);
    h["scenario.kernel_index"] = [](const std::string& k, const Entry& e, RunConfig& c) {
      c.scenario.kernel_index = to_int(k, e);
    };

    h["geometry.nx"] = [](const std::string& k, const Entry& e, RunConfig& c) { c.scenario.nx = to_int(k, e); };
    h["geometry.ny"] = [](const std::string& k, const Entry& e, RunConfig& c) { c.scenario.ny = to_int(k, e); };
    h["geometry.box"] = [](const std::string& k, const Entry& e, RunConfig& c) {
      const auto b = to_boxes(k, e);
      if (b.size() != 1) bad_value(k, e, "expected one region");
      c.scenario.box = b[0];
    };
    h["geometry.dirichlet"] = [](const std::string& k, const Entry& e, RunConfig& c) {
      c.scenario.dirichlet = to_boxes(k, e);
    };
    h["geometry.neumann"] = [](const std::string& k, const Entry& e, RunConfig& c) {
      c.scenario.neumann = to_boxes(k, e);
    };
    h["geometry.holes"] = [](const std::string& k, const Entry& e, RunConfig& c) {
      c.scenario.holes = to_holes(k, e);
      c.scenario.disc_initial = false;
    };
    h["geometry.disc"] = [](const std::string& k, const Entry& e, RunConfig& c) {
      const auto v = numbers(k, e, e.value);
      if (v.size() != 3) bad_value(k, e, "expected 'cx cy r'");
      c.scenario.disc_initial = true;
      c.scenario.disc_center = {v[0], v[1]};
      c.scenario.disc_radius = v[2];
    };
    h["geometry.observation"] = [](const std::string& k, const Entry& e, RunConfig& c) {
      const auto b = to_boxes(k, e);
      if (b.size() != 1) bad_value(k, e, "expected one region");
      c.scenario.observation = b[0];
    };

    h["material.young"] = dbl(&ScenarioSpec::young);
    h["material.poisson"] = dbl(&ScenarioSpec::poisson);
    h["material.eps_ersatz"] = dbl(&ScenarioSpec::eps_ersatz);

    h["kernel.length"] = dbl(&ScenarioSpec::length);
    h["kernel.amplitude_h"] = dbl(&ScenarioSpec::amplitude_h);
    h["kernel.amplitude_k"] = dbl(&ScenarioSpec::amplitude_k);
    h["kernel.profile_axis"] = [](const std::string& k, const Entry& e, RunConfig& c) {
      c.scenario.profile_axis = to_axis(k, e);
    };
    h["kernel.decay_axis"] = [](const std::string& k, const Entry& e, RunConfig& c) {
      c.scenario.decay_axis = to_axis(k, e);
    };
    h["kernel.h_index"] = [](const std::string& k, const Entry& e, RunConfig& c) { c.scenario.h_index = to_int(k, e); };
    h["kernel.k_index"] = [](const std::string& k, const Entry& e, RunConfig& c) { c.scenario.k_index = to_int(k, e); };
    h["kernel.load_variation"] = dbl(&ScenarioSpec::load_variation);
    h["kernel.target_value"] = dbl(&ScenarioSpec::target_value);

    h["cholesky.epsilon"] = dbl(&ScenarioSpec::cholesky_epsilon);
    h["cholesky.max_rank"] = [](const std::string& k, const Entry& e, RunConfig& c) {
      c.scenario.max_rank = to_int(k, e);
    };

    h["optimization.volume_target"] = opt_dbl(&OptimizationConfig::volume_target);
    h["optimization.iterations"] = opt_int(&OptimizationConfig::iterations);
    h["optimization.lambda0"] = opt_dbl(&OptimizationConfig::lambda0);
    h["optimization.penalty0"] = opt_dbl(&OptimizationConfig::penalty0);
    h["optimization.penalty_growth"] = opt_dbl(&OptimizationConfig::penalty_growth);
    h["optimization.penalty_interval"] = opt_int(&OptimizationConfig::penalty_interval);
    h["optimization.penalty_max_factor"] = opt_dbl(&OptimizationConfig::penalty_max_factor);
    h["optimization.cfl"] = opt_dbl(&OptimizationConfig::cfl);
    h["optimization.redistance_every"] = opt_int(&OptimizationConfig::redistance_every);
    h["optimization.smoothing"] = opt_dbl(&OptimizationConfig::smoothing);

    h["solver.tol"] = opt_dbl(&OptimizationConfig::solver_tol);

    h["output.directory"] = [](const std::string&, const Entry& e, RunConfig& c) { c.optimization.output_dir = e.value; };
    h["output.snapshot_every"] = opt_int(&OptimizationConfig::snapshot_every);

    h["oracle.instances"] = orc_int(&OracleConfig::instances);
    h["oracle.dim"] = orc_int(&OracleConfig::dim);
    h["oracle.rank"] = orc_int(&OracleConfig::rank);
    h["oracle.mc_instances"] = orc_int(&OracleConfig::mc_instances);
    h["oracle.samples"] = [](const std::string& k, const Entry& e, RunConfig& c) { c.oracle.samples = to_long(k, e); };
    h["oracle.seed"] = [](const std::string& k, const Entry& e, RunConfig& c) {
      const long v = to_long(k, e);
      if (v < 0) bad_value(k, e, "seed must be non-negative");
      c.oracle.seed = static_cast<std::uint64_t>(v);
    };
    return h;
  }();
  return table;
}

void require(bool ok, const std::string& key, const std::string& why) {
  if (!ok) throw ConfigError(key + ": " + why);
}

void validate(const RunConfig& c, const std::map<std::string, Entry>& given) {
  const ScenarioSpec& s = c.scenario;
  require(std::abs(s.alpha) <= 1.0, "scenario.alpha", "must lie in [-1, 1] (kernel not PSD otherwise)");
  require(s.kernel_index >= 1 && s.kernel_index <= 3, "scenario.kernel_index", "must be 1, 2 or 3");
  require(s.nx >= 1, "geometry.nx", "must be >= 1");
  require(s.ny >= 1, "geometry.ny", "must be >= 1");
  require(s.box.width() > 0.0 && s.box.height() > 0.0, "geometry.box", "must have positive width and height");
  require(s.young > 0.0, "material.young", "must be positive");
  require(s.poisson > -1.0 && s.poisson < 0.5, "material.poisson", "must lie in (-1, 0.5)");
  require(s.eps_ersatz > 0.0 && s.eps_ersatz < 1.0, "material.eps_ersatz", "must lie in (0, 1)");
  require(s.length > 0.0, "kernel.length", "must be positive");
  require(s.amplitude_h >= 0.0, "kernel.amplitude_h", "must be non-negative");
  require(s.amplitude_k >= 0.0, "kernel.amplitude_k", "must be non-negative");
  require(s.h_index >= 0 && s.h_index <= 3, "kernel.h_index", "must be 0 (off), 1, 2 or 3");
  require(s.k_index >= 0 && s.k_index <= 3, "kernel.k_index", "must be 0 (off), 1, 2 or 3");
  require(s.load_variation >= 0.0, "kernel.load_variation", "must be non-negative");
  require(s.cholesky_epsilon > 0.0 && s.cholesky_epsilon < 1.0, "cholesky.epsilon", "must lie in (0, 1)");
  require(s.max_rank >= 1, "cholesky.max_rank", "must be >= 1");
  require(s.disc_radius > 0.0, "geometry.disc", "radius must be positive");
  if (s.preset == Preset::kCustom) {
    require(given.count("scenario.functional") > 0, "scenario.functional", "CUSTOM requires an explicit functional");
    require(given.count("geometry.dirichlet") > 0, "geometry.dirichlet", "CUSTOM requires explicit regions");
    if (s.functional == FunctionalKind::kCompliance) {
      require(given.count("geometry.neumann") > 0, "geometry.neumann", "CUSTOM compliance requires Gamma_N");
      require(s.h_index > 0 || s.k_index > 0, "kernel.h_index", "CUSTOM compliance needs h_index or k_index");
    }
    require(given.count("optimization.volume_target") > 0, "optimization.volume_target",
            "CUSTOM requires an explicit volume target");
  }
  if (s.functional == FunctionalKind::kCompliance) {
    require(!s.dirichlet.empty(), "geometry.dirichlet", "elasticity needs a clamped region");
    require(!s.neumann.empty(), "geometry.neumann", "elasticity needs a loaded region");
  } else {
    require(!s.dirichlet.empty(), "geometry.dirichlet", "Poisson problems need a Dirichlet region");
  }
  if (s.preset == Preset::kBridgeCorrelated) {
    require(s.neumann.size() == 2, "geometry.neumann", "BRIDGE_CORRELATED needs exactly two regions (g_a, g_b)");
  }
  try {
    c.optimization.validate(s.box.area());
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("optimization.") + e.what());
  }
  const OracleConfig& o = c.oracle;
  require(o.instances >= 1, "oracle.instances", "must be >= 1");
  require(o.dim >= 1 && o.dim <= 200, "oracle.dim", "must lie in [1, 200]");
  require(o.rank >= 1 && o.rank <= o.dim, "oracle.rank", "must lie in [1, dim]");
  require(o.mc_instances >= 1, "oracle.mc_instances", "must be >= 1");
  require(o.samples >= 100, "oracle.samples", "must be >= 100");
}

}  // namespace

std::string to_string(Preset preset) {
  switch (preset) {
    case Preset::kBridgeCorrelated:
      return "BRIDGE_CORRELATED";
    case Preset::kBridgeKernel:
      return "BRIDGE_KERNEL";
    case Preset::kPoissonDirichlet:
      return "POISSON_DIRICHLET";
    case Preset::kPoissonTracking:
      return "POISSON_TRACKING";
    case Preset::kCustom:
      return "CUSTOM";
  }
  return "UNKNOWN";
}

RunConfig preset_config(Preset preset) {
  RunConfig c;
  ScenarioSpec& s = c.scenario;
  OptimizationConfig& o = c.optimization;
  s.preset = preset;
  o.iterations = 250;
  switch (preset) {
    case Preset::kBridgeCorrelated:
      s.functional = FunctionalKind::kCompliance;
      s.box = {0.0, 0.0, 1.0, 0.5};
      s.nx = 30;
      s.ny = 15;
      s.dirichlet = {{0.0, 0.0, 0.1, 0.0}, {0.9, 0.0, 1.0, 0.0}};
      s.neumann = {{1.0 / 6.0, 0.5, 1.0 / 3.0, 0.5}, {2.0 / 3.0, 0.5, 5.0 / 6.0, 0.5}};
      s.holes = hole_grid({0.1, 0.3, 0.5, 0.7, 0.9}, {0.15, 0.33}, 0.06);
      o.volume_target = 0.35;
      break;
    case Preset::kBridgeKernel:
      s.functional = FunctionalKind::kCompliance;
      s.box = {0.0, 0.0, 1.0, 1.0};
      s.nx = 30;
      s.ny = 30;
      s.dirichlet = {{0.0, 0.0, 0.1, 0.0}, {0.9, 0.0, 1.0, 0.0}};
      s.neumann = {{0.0, 1.0, 1.0, 1.0}};
      s.holes = hole_grid({0.2, 0.5, 0.8}, {0.25, 0.5, 0.75}, 0.08);
      o.volume_target = 0.75;
      break;
    case Preset::kPoissonDirichlet:
    case Preset::kPoissonTracking:
      s.functional = preset == Preset::kPoissonDirichlet ? FunctionalKind::kDirichletEnergy : FunctionalKind::kTracking;
      s.box = {0.0, 0.0, 1.0, 1.0};
      s.nx = 40;
      s.ny = 40;
      s.dirichlet = {{0.0, 0.0, 1.0, 1.0}};
      s.disc_initial = true;
      s.disc_center = {0.5, 0.5};
      s.disc_radius = 0.3;
      o.volume_target = 0.25;
      o.iterations = 100;
      break;
    case Preset::kCustom:
      s.functional = FunctionalKind::kCompliance;
      s.box = {0.0, 0.0, 1.0, 1.0};
      s.nx = 30;
      s.ny = 30;
      o.volume_target = 0.5;
      break;
  }
  return c;
}

RunConfig parse_config(std::string_view text) {
  std::map<std::string, Entry> entries;
  std::vector<std::string> order;
  std::string section;
  int line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  static const std::vector<std::string> sections = {"scenario", "geometry", "material", "kernel", "optimization",
                                                    "solver",   "cholesky", "output",   "oracle"};
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header '" + line + "'");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (std::find(sections.begin(), sections.end(), section) == sections.end()) {
        throw ConfigError(where + "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value', got '" + line + "'");
    if (section.empty()) throw ConfigError(where + "key outside of any [section]");
    const std::string key = section + "." + trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!handlers().count(key)) throw ConfigError(where + "unknown key '" + key + "'");
    if (value.empty()) throw ConfigError(where + key + ": empty value");
    if (entries.count(key)) {
      throw ConfigError(where + "duplicate key '" + key + "' (first set on line " +
                        std::to_string(entries[key].line) + ")");
    }
    entries[key] = {value, line_no};
    order.push_back(key);
  }

  const auto preset_it = entries.find("scenario.preset");
  if (preset_it == entries.end()) throw ConfigError("scenario.preset: missing (required)");
  RunConfig config = preset_config(to_preset("scenario.preset", preset_it->second));
  for (const auto& key : order) handlers().at(key)(key, entries.at(key), config);
  validate(config, entries);
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace corshape
