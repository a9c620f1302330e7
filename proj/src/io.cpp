#include "corshape/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "corshape/error.hpp"

namespace corshape {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_for_writing(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace

void write_history(const OptimizationHistory& history, const std::string& path) {
  auto out = open_for_writing(path);
  out << kHistoryHeader << '\n';
  for (const auto& r : history.records) {
    out << r.iter << ',' << fmt(r.objective) << ',' << fmt(r.volume) << ',' << fmt(r.lambda) << ','
        << fmt(r.penalty) << ',' << fmt(r.dt) << ',' << r.rank << '\n';
  }
  finish(out, path);
}

std::vector<IterationRecord> read_history(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kHistoryHeader) throw IoError("'" + path + "' has an unexpected header");
  std::vector<IterationRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw IoError("'" + path + "': malformed row '" + line + "'");
    IterationRecord r;
    r.iter = std::stoi(cells[0]);
    r.objective = std::strtod(cells[1].c_str(), nullptr);
    r.volume = std::strtod(cells[2].c_str(), nullptr);
    r.lambda = std::strtod(cells[3].c_str(), nullptr);
    r.penalty = std::strtod(cells[4].c_str(), nullptr);
    r.dt = std::strtod(cells[5].c_str(), nullptr);
    r.rank = std::stoi(cells[6]);
    out.push_back(r);
  }
  return out;
}

void write_vtk(const Mesh& mesh, std::span<const double> phi, std::span<const double> density,
               std::span<const double> grad_density, const std::string& path) {
  if (phi.size() != mesh.vertex_count()) throw InvalidInput("write_vtk: phi must have one value per vertex");
  if (density.size() != mesh.triangle_count()) throw InvalidInput("write_vtk: density must have one value per triangle");
  if (!grad_density.empty() && grad_density.size() != mesh.triangle_count()) {
    throw InvalidInput("write_vtk: grad_density must have one value per triangle");
  }
  auto out = open_for_writing(path);
  out << "# vtk DataFile Version 4.2\ncorshape level set\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.vertex_count() << " double\n";
  for (const auto& p : mesh.vertices()) out << fmt(p.x) << ' ' << fmt(p.y) << " 0\n";
  out << "CELLS " << mesh.triangle_count() << ' ' << 4 * mesh.triangle_count() << '\n';
  for (const auto& t : mesh.triangles()) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  out << "CELL_TYPES " << mesh.triangle_count() << '\n';
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) out << "5\n";
  out << "POINT_DATA " << mesh.vertex_count() << "\nSCALARS phi double 1\nLOOKUP_TABLE default\n";
  for (double v : phi) out << fmt(v) << '\n';
  out << "CELL_DATA " << mesh.triangle_count() << "\nSCALARS density double 1\nLOOKUP_TABLE default\n";
  for (double v : density) out << fmt(v) << '\n';
  if (!grad_density.empty()) {
    out << "SCALARS grad_density double 1\nLOOKUP_TABLE default\n";
    for (double v : grad_density) out << fmt(v) << '\n';
  }
  finish(out, path);
}

void write_factor_csv(const LowRankFactorization& fac, const CorrelationMatrix& c, const Mesh& mesh,
                      const std::string& path) {
  auto out = open_for_writing(path);
  const auto nodes = c.nodes();
  const int nc = c.components();
  out << "node,component,x,y";
  for (std::size_t k = 1; k <= fac.rank(); ++k) out << ",l" << k;
  out << "\ntrace_error,,,";
  for (std::size_t k = 1; k <= fac.rank(); ++k) out << ',' << fmt(fac.trace_history[k]);
  out << '\n';
  for (std::size_t r = 0; r < c.size(); ++r) {
    const Index v = nodes[r / nc];
    const Point p = mesh.vertices()[v];
    out << v << ',' << (r % nc) + 1 << ',' << fmt(p.x) << ',' << fmt(p.y);
    for (const auto& f : fac.factors) out << ',' << fmt(f[r]);
    out << '\n';
  }
  finish(out, path);
}

void write_oracle_report(std::span<const oracle::ReportRow> rows, const std::string& path) {
  auto out = open_for_writing(path);
  out << "quantity,formula_value,oracle_value,tolerance,pass\n";
  for (const auto& r : rows) {
    out << r.quantity << ',' << fmt(r.formula_value) << ',' << fmt(r.oracle_value) << ',' << fmt(r.tolerance) << ','
        << (r.pass ? "true" : "false") << '\n';
  }
  finish(out, path);
}

}  // namespace corshape
