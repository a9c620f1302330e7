// Command-line front end: run an optimization, the dense oracle suites, or
// a stand-alone factorization of a scenario's correlation kernel.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "corshape/config.hpp"
#include "corshape/error.hpp"
#include "corshape/io.hpp"
#include "corshape/kron_oracle.hpp"
#include "corshape/optimizer.hpp"
#include "corshape/scenario.hpp"
#include "corshape/simd/kernels.hpp"

namespace {

using namespace corshape;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

int cmd_run(const RunConfig& cfg) {
  const Scenario sc = build_scenario(cfg.scenario);
  OptimizationConfig opt = cfg.optimization;
  opt.rank = static_cast<int>(sc.problem.loads.size());
  const auto t0 = std::chrono::steady_clock::now();
  const OptimizationHistory h = run_optimization(sc.problem, opt);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto& last = h.records.back();
  std::printf("preset %s: %zu records, stop: %s\n", to_string(cfg.scenario.preset).c_str(), h.records.size(),
              h.stop_reason.c_str());
  std::printf("initial objective %.10g  final objective %.10g  final volume %.6g (target %.6g)  %.1f s\n",
              h.records.front().objective, last.objective, last.volume, opt.volume_target, secs);
  if (!opt.output_dir.empty()) std::printf("history written to %s\n", join(opt.output_dir, "history.csv").c_str());
  return kExitOk;
}

int cmd_oracle(const RunConfig& cfg) {
  oracle::SuiteOptions o;
  o.instances = cfg.oracle.instances;
  o.dim = cfg.oracle.dim;
  o.rank = cfg.oracle.rank;
  o.mc_instances = cfg.oracle.mc_instances;
  o.samples = cfg.oracle.samples;
  o.seed = cfg.oracle.seed;
  std::vector<oracle::ReportRow> rows;
  for (auto* suite : {&oracle::equivalence_suite, &oracle::gradient_suite, &oracle::monte_carlo_suite}) {
    auto part = suite(o);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  auto comm = oracle::commutation_suite(o);
  rows.insert(rows.end(), comm.begin(), comm.end());
  std::size_t failed = 0;
  for (const auto& r : rows) failed += !r.pass;
  std::printf("%zu comparisons, %zu failed\n", rows.size(), failed);
  if (!cfg.optimization.output_dir.empty()) {
    const auto path = join(cfg.optimization.output_dir, "oracle_report.csv");
    write_oracle_report(rows, path);
    std::printf("report written to %s\n", path.c_str());
  } else {
    for (const auto& r : rows) {
      if (!r.pass) std::printf("FAIL %s: %.17g vs %.17g (tol %.3g)\n", r.quantity.c_str(), r.formula_value,
                               r.oracle_value, r.tolerance);
    }
  }
  return failed == 0 ? kExitOk : kExitNumerical;
}

int cmd_cholesky(const RunConfig& cfg) {
  const Scenario sc = build_scenario(cfg.scenario);
  if (sc.factorizations.empty()) {
    std::printf("preset %s uses an exact finite-rank kernel: %zu load terms, no factorization needed\n",
                to_string(cfg.scenario.preset).c_str(), sc.problem.loads.size());
    return kExitOk;
  }
  for (const auto& f : sc.factorizations) {
    const auto& fac = f.factorization;
    const double rel = fac.trace > 0.0 ? fac.trace_error / fac.trace : 0.0;
    std::printf("%s (component %d): n = %zu, rank %zu, trace %.6g, relative trace error %.3e (requested %.3e)\n",
                f.name.c_str(), f.component, f.matrix->size(), fac.rank(), fac.trace, rel, fac.tolerance);
    if (!cfg.optimization.output_dir.empty()) {
      const auto path = join(cfg.optimization.output_dir, "factors_" + f.name + ".csv");
      write_factor_csv(fac, *f.matrix, sc.problem.mesh, path);
      std::printf("  factors written to %s\n", path.c_str());
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shape optimization under random loads via low-rank correlation"};
  app.require_subcommand(1);
  std::string backend = "auto";
  app.add_option("--backend", backend, "Kernel backend: auto, scalar or avx2")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  std::string path;
  auto* run = app.add_subcommand("run", "Run the level-set optimization described by a config file");
  run->add_option("config", path, "Configuration file")->required();
  auto* orc = app.add_subcommand("oracle", "Run the dense Kronecker / Monte-Carlo oracle suites");
  orc->add_option("config", path, "Configuration file")->required();
  auto* chol = app.add_subcommand("cholesky", "Factorize the scenario's correlation kernel and report");
  chol->add_option("config", path, "Configuration file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (backend == "scalar") {
      simd::set_backend(simd::Backend::kScalar);
    } else if (backend == "avx2") {
      simd::set_backend(simd::Backend::kAvx2);
    }
    const RunConfig cfg = load_config(path);
    if (*run) return cmd_run(cfg);
    if (*orc) return cmd_oracle(cfg);
    return cmd_cholesky(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}
