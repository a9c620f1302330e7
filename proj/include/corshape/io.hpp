#pragma once

#include <span>
#include <string>
#include <vector>

#include "corshape/correlation.hpp"
#include "corshape/kron_oracle.hpp"
#include "corshape/mesh.hpp"
#include "corshape/optimizer.hpp"

namespace corshape {

inline constexpr const char* kHistoryHeader = "iter,objective,volume,lambda,penalty,dt,rank";

/// CSV with kHistoryHeader and 17 significant digits per value.
void write_history(const OptimizationHistory& history, const std::string& path);
std::vector<IterationRecord> read_history(const std::string& path);

/// Legacy ASCII VTK 4.2 unstructured grid: point data `phi`, cell data
/// `density` and, when given, `grad_density`.
void write_vtk(const Mesh& mesh, std::span<const double> phi, std::span<const double> density,
               std::span<const double> grad_density, const std::string& path);

/// Factor table: a header row of factor indices, a row with the trace error
/// after each factor, then one row per support degree of freedom.
void write_factor_csv(const LowRankFactorization& fac, const CorrelationMatrix& c, const Mesh& mesh,
                      const std::string& path);

/// `quantity,formula_value,oracle_value,tolerance,pass`
void write_oracle_report(std::span<const oracle::ReportRow> rows, const std::string& path);

}  // namespace corshape
