#include "corshape/levelset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>

#include "corshape/error.hpp"
#include "corshape/fem.hpp"

namespace corshape {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double circle_distance(const CircleHole& c, Point p) { return c.radius - std::hypot(p.x - c.center.x, p.y - c.center.y); }

double rect_distance(const RectHole& r, Point p) {
  const Box& b = r.rect;
  const double dx = std::max({b.xmin - p.x, 0.0, p.x - b.xmax});
  const double dy = std::max({b.ymin - p.y, 0.0, p.y - b.ymax});
  if (dx > 0.0 || dy > 0.0) return -std::hypot(dx, dy);
  return std::min({p.x - b.xmin, b.xmax - p.x, p.y - b.ymin, b.ymax - p.y});
}

double hole_distance(const Hole& h, Point p) {
  return std::visit(
      [p](const auto& v) {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, CircleHole>) {
          return circle_distance(v, p);
        } else {
          return rect_distance(v, p);
        }
      },
      h);
}

Box hole_bounds(const Hole& h) {
  if (const auto* c = std::get_if<CircleHole>(&h)) {
    return {c->center.x - c->radius, c->center.y - c->radius, c->center.x + c->radius, c->center.y + c->radius};
  }
  return std::get<RectHole>(h).rect;
}

bool holes_overlap(const Hole& a, const Hole& b) {
  const auto* ca = std::get_if<CircleHole>(&a);
  const auto* cb = std::get_if<CircleHole>(&b);
  if (ca && cb) return std::hypot(ca->center.x - cb->center.x, ca->center.y - cb->center.y) < ca->radius + cb->radius;
  if (ca) return -rect_distance(std::get<RectHole>(b), ca->center) < ca->radius;
  if (cb) return -rect_distance(std::get<RectHole>(a), cb->center) < cb->radius;
  const Box& ra = std::get<RectHole>(a).rect;
  const Box& rb = std::get<RectHole>(b).rect;
  return std::min(ra.xmax, rb.xmax) > std::max(ra.xmin, rb.xmin) &&
         std::min(ra.ymax, rb.ymax) > std::max(ra.ymin, rb.ymin);
}

void check_phi(const Mesh& mesh, std::span<const double> phi, const char* who) {
  if (phi.size() != mesh.vertex_count()) {
    throw InvalidInput(std::string(who) + ": level set has " + std::to_string(phi.size()) + " values, mesh has " +
                       std::to_string(mesh.vertex_count()) + " vertices");
  }
}

double point_segment_distance(Point p, const Segment& s) {
  const double vx = s.b.x - s.a.x;
  const double vy = s.b.y - s.a.y;
  const double len2 = vx * vx + vy * vy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((p.x - s.a.x) * vx + (p.y - s.a.y) * vy) / len2, 0.0, 1.0);
  return std::hypot(p.x - (s.a.x + t * vx), p.y - (s.a.y + t * vy));
}

// One fast-marching update on the vertex grid.
double eikonal_update(double a, double b, double hx, double hy) {
  if (a == kInf) return b + hy;
  if (b == kInf) return a + hx;
  const double ax = 1.0 / (hx * hx);
  const double by = 1.0 / (hy * hy);
  const double qa = ax + by;
  const double qb = -2.0 * (a * ax + b * by);
  const double qc = a * a * ax + b * b * by - 1.0;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (disc >= 0.0) {
    const double t = (-qb + std::sqrt(disc)) / (2.0 * qa);
    if (t >= std::max(a, b)) return t;
  }
  return std::min(a + hx, b + hy);
}

}  // namespace

LevelSet initialize_levelset(const Mesh& mesh, std::span<const Hole> holes) {
  const Box& box = mesh.box();
  const double tol = 1e-12 * (box.width() + box.height());
  for (std::size_t k = 0; k < holes.size(); ++k) {
    const Box b = hole_bounds(holes[k]);
    const bool degenerate = std::holds_alternative<CircleHole>(holes[k])
                                ? !(std::get<CircleHole>(holes[k]).radius > 0.0)
                                : !(b.width() > 0.0 && b.height() > 0.0);
    if (degenerate) throw InvalidInput("initialize_levelset: hole " + std::to_string(k) + " is degenerate");
    if (b.xmin < box.xmin - tol || b.xmax > box.xmax + tol || b.ymin < box.ymin - tol || b.ymax > box.ymax + tol) {
      throw InvalidInput("initialize_levelset: hole " + std::to_string(k) + " leaves the box");
    }
    for (std::size_t l = 0; l < k; ++l) {
      if (holes_overlap(holes[k], holes[l])) {
        throw InvalidInput("initialize_levelset: holes " + std::to_string(l) + " and " + std::to_string(k) +
                           " overlap");
      }
    }
  }
  LevelSet ls;
  ls.phi.resize(mesh.vertex_count());
  const double outside = -(box.width() + box.height());
  for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
    double phi = outside;
    for (const auto& h : holes) phi = std::max(phi, hole_distance(h, mesh.vertices()[v]));
    ls.phi[v] = phi;
  }
  return ls;
}

double max_stable_substep(const Mesh& mesh, std::span<const double> velocity, double cfl) {
  double vmax = 0.0;
  for (double v : velocity) vmax = std::max(vmax, std::abs(v));
  if (vmax == 0.0) return kInf;
  return cfl / (vmax * (1.0 / mesh.hx() + 1.0 / mesh.hy()));
}

LevelSet advect(const Mesh& mesh, const LevelSet& ls, std::span<const double> velocity, double dt, int substeps,
                double cfl) {
  check_phi(mesh, ls.phi, "advect");
  if (velocity.size() != mesh.vertex_count()) throw InvalidInput("advect: velocity size does not match the mesh");
  if (substeps < 1) throw InvalidInput("advect: substeps must be >= 1");
  if (!(dt >= 0.0)) throw InvalidInput("advect: dt must be non-negative");
  if (!(cfl > 0.0 && cfl <= 0.9)) throw InvalidInput("advect: CFL factor must lie in (0, 0.9]");
  for (double v : velocity) {
    if (!std::isfinite(v)) throw InvalidInput("advect: velocity is not finite");
  }
  const double sub = dt / substeps;
  const double limit = max_stable_substep(mesh, velocity, cfl);
  if (sub > limit) {
    const int needed = static_cast<int>(std::ceil(dt / limit));
    throw NumericalError("advect: CFL violated (substep " + std::to_string(sub) + " > " + std::to_string(limit) +
                         "); use dt <= " + std::to_string(limit * substeps) + " or at least " +
                         std::to_string(needed) + " substeps");
  }

  LevelSet out = ls;
  const int nx = mesh.nx();
  const int ny = mesh.ny();
  const double ihx = 1.0 / mesh.hx();
  const double ihy = 1.0 / mesh.hy();
  std::vector<double> next(out.phi.size());
  for (int s = 0; s < substeps; ++s) {
    const auto& phi = out.phi;
    for (int j = 0; j <= ny; ++j) {
      for (int i = 0; i <= nx; ++i) {
        const std::size_t k = mesh.vertex_index(i, j);
        const double v = velocity[k];
        if (v == 0.0) {
          next[k] = phi[k];
          continue;
        }
        const double c = phi[k];
        const double dmx = i > 0 ? (c - phi[k - 1]) * ihx : 0.0;
        const double dpx = i < nx ? (phi[k + 1] - c) * ihx : 0.0;
        const double dmy = j > 0 ? (c - phi[k - nx - 1]) * ihy : 0.0;
        const double dpy = j < ny ? (phi[k + nx + 1] - c) * ihy : 0.0;
        double gx, gy;
        if (v > 0.0) {
          gx = std::max({dmx, -dpx, 0.0});
          gy = std::max({dmy, -dpy, 0.0});
        } else {
          gx = std::max({-dmx, dpx, 0.0});
          gy = std::max({-dmy, dpy, 0.0});
        }
        next[k] = c - sub * v * std::sqrt(gx * gx + gy * gy);
      }
    }
    out.phi.swap(next);
  }
  out.time += dt;
  out.steps += substeps;
  return out;
}

double Segment::length() const { return std::hypot(b.x - a.x, b.y - a.y); }

std::optional<Segment> interface_segment(const Mesh& mesh, std::size_t t, std::span<const double> phi) {
  const auto& tri = mesh.triangles()[t];
  const double f[3] = {phi[tri[0]], phi[tri[1]], phi[tri[2]]};
  const bool neg = f[0] < 0.0 || f[1] < 0.0 || f[2] < 0.0;
  const bool pos = f[0] > 0.0 || f[1] > 0.0 || f[2] > 0.0;
  if (!(neg && pos)) return std::nullopt;
  Point pts[3];
  int n = 0;
  for (int a = 0; a < 3; ++a) {
    const int b = (a + 1) % 3;
    const Point& pa = mesh.vertices()[tri[a]];
    const Point& pb = mesh.vertices()[tri[b]];
    if (f[a] == 0.0) {
      pts[n++] = pa;
    } else if ((f[a] < 0.0 && f[b] > 0.0) || (f[a] > 0.0 && f[b] < 0.0)) {
      const double s = f[a] / (f[a] - f[b]);
      pts[n++] = {pa.x + s * (pb.x - pa.x), pa.y + s * (pb.y - pa.y)};
    }
  }
  if (n != 2) return std::nullopt;
  return Segment{pts[0], pts[1]};
}

std::vector<unsigned char> interface_triangles(const Mesh& mesh, std::span<const double> phi) {
  check_phi(mesh, phi, "interface_triangles");
  std::vector<unsigned char> out(mesh.triangle_count(), 0);
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles()[t];
    bool neg = false, pos = false;
    for (Index v : tri) {
      neg = neg || phi[v] < 0.0;
      pos = pos || phi[v] > 0.0;
    }
    out[t] = neg && pos;
  }
  return out;
}

Point interface_normal(const Mesh& mesh, std::size_t t, std::span<const double> phi) {
  const Point g = triangle_gradient(mesh, t, phi);
  const double norm = std::hypot(g.x, g.y);
  if (!(norm >= 1e-10)) {
    throw NumericalError("degenerate level-set gradient (|grad phi| = " + std::to_string(norm) + ") on triangle " +
                         std::to_string(t));
  }
  return {g.x / norm, g.y / norm};
}

LevelSet redistance(const Mesh& mesh, const LevelSet& ls, std::optional<double> band) {
  check_phi(mesh, ls.phi, "redistance");
  const auto& phi = ls.phi;
  const bool neg = std::any_of(phi.begin(), phi.end(), [](double v) { return v < 0.0; });
  const bool pos = std::any_of(phi.begin(), phi.end(), [](double v) { return v > 0.0; });
  if (!(neg && pos)) throw InvalidInput("redistance: level set does not change sign (empty or full domain)");
  if (band && !(*band > 0.0)) throw InvalidInput("redistance: band must be positive");

  const int nx = mesh.nx();
  const int ny = mesh.ny();
  const std::size_t nv = mesh.vertex_count();
  std::vector<std::vector<Segment>> cell_segments(static_cast<std::size_t>(nx * ny));
  std::vector<double> dist(nv, kInf);
  std::vector<unsigned char> state(nv, 0);  // 0 far, 1 trial, 2 known

  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    if (auto s = interface_segment(mesh, t, phi)) cell_segments[t / 2].push_back(*s);
  }
  for (std::size_t v = 0; v < nv; ++v) {
    if (phi[v] == 0.0) {
      dist[v] = 0.0;
      state[v] = 2;
    }
  }
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    if (cell_segments[t / 2].empty()) continue;
    for (Index v : mesh.triangles()[t]) {
      if (state[v] == 2) continue;
      const int i = static_cast<int>(v % (nx + 1));
      const int j = static_cast<int>(v / (nx + 1));
      double d = kInf;
      for (int cj = std::max(j - 2, 0); cj <= std::min(j + 1, ny - 1); ++cj) {
        for (int ci = std::max(i - 2, 0); ci <= std::min(i + 1, nx - 1); ++ci) {
          for (const auto& s : cell_segments[cj * nx + ci]) d = std::min(d, point_segment_distance(mesh.vertices()[v], s));
        }
      }
      dist[v] = d;
      state[v] = 2;
    }
  }

  const double hx = mesh.hx();
  const double hy = mesh.hy();
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  auto update = [&](std::size_t v) {
    const int i = static_cast<int>(v % (nx + 1));
    const int j = static_cast<int>(v / (nx + 1));
    double a = kInf, b = kInf;
    if (i > 0 && state[v - 1] == 2) a = std::min(a, dist[v - 1]);
    if (i < nx && state[v + 1] == 2) a = std::min(a, dist[v + 1]);
    if (j > 0 && state[v - nx - 1] == 2) b = std::min(b, dist[v - nx - 1]);
    if (j < ny && state[v + nx + 1] == 2) b = std::min(b, dist[v + nx + 1]);
    const double t = eikonal_update(a, b, hx, hy);
    if (t < dist[v]) {
      dist[v] = t;
      state[v] = 1;
      heap.push({t, v});
    }
  };
  auto visit_neighbors = [&](std::size_t v) {
    const int i = static_cast<int>(v % (nx + 1));
    const int j = static_cast<int>(v / (nx + 1));
    if (i > 0 && state[v - 1] != 2) update(v - 1);
    if (i < nx && state[v + 1] != 2) update(v + 1);
    if (j > 0 && state[v - nx - 1] != 2) update(v - nx - 1);
    if (j < ny && state[v + nx + 1] != 2) update(v + nx + 1);
  };
  for (std::size_t v = 0; v < nv; ++v) {
    if (state[v] == 2) visit_neighbors(v);
  }
  while (!heap.empty()) {
    const auto [d, v] = heap.top();
    heap.pop();
    if (state[v] == 2 || d > dist[v]) continue;
    state[v] = 2;
    visit_neighbors(v);
  }

  LevelSet out = ls;
  for (std::size_t v = 0; v < nv; ++v) {
    double d = dist[v];
    if (band) d = std::min(d, *band);
    if (phi[v] == 0.0) {
      out.phi[v] = 0.0;
    } else {
      // Keep the sign even if the distance underflows.
      if (d == 0.0) d = std::min(std::abs(phi[v]), std::numeric_limits<double>::min());
      out.phi[v] = phi[v] < 0.0 ? -d : d;
    }
  }
  return out;
}

std::vector<double> material_fraction(const Mesh& mesh, std::span<const double> phi) {
  check_phi(mesh, phi, "material_fraction");
  std::vector<double> out(mesh.triangle_count());
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles()[t];
    double f[3] = {phi[tri[0]], phi[tri[1]], phi[tri[2]]};
    const int negatives = (f[0] < 0.0) + (f[1] < 0.0) + (f[2] < 0.0);
    if (negatives == 0 || negatives == 3) {
      out[t] = negatives == 3 ? 1.0 : 0.0;
      continue;
    }
    // Rotate the odd vertex (the lone negative, or the lone non-negative) to slot 0.
    const bool lone_negative = negatives == 1;
    int odd = 0;
    for (int a = 0; a < 3; ++a) {
      if ((f[a] < 0.0) == lone_negative) odd = a;
    }
    const double a = f[odd];
    const double b = f[(odd + 1) % 3];
    const double c = f[(odd + 2) % 3];
    const double corner = a == 0.0 ? 0.0 : a * a / ((a - b) * (a - c));
    out[t] = lone_negative ? corner : 1.0 - corner;
  }
  return out;
}

std::vector<double> density_from_levelset(const Mesh& mesh, const LevelSet& ls, double eps_ersatz) {
  if (!(eps_ersatz > 0.0 && eps_ersatz < 1.0)) throw InvalidInput("density_from_levelset: eps must lie in (0, 1)");
  auto rho = material_fraction(mesh, ls.phi);
  for (double& r : rho) r = r + (1.0 - r) * eps_ersatz;
  return rho;
}

std::vector<double> conductivity_from_levelset(const Mesh& mesh, const LevelSet& ls, double eps_ersatz) {
  auto kappa = density_from_levelset(mesh, ls, eps_ersatz);
  for (double& k : kappa) k = 1.0 / k;
  return kappa;
}

double interface_integral(const Mesh& mesh, std::span<const double> phi, std::span<const double> cell_values,
                          const std::function<double(Point)>& weight) {
  check_phi(mesh, phi, "interface_integral");
  if (cell_values.size() != mesh.triangle_count()) throw InvalidInput("interface_integral: one value per triangle");
  const double g = 0.5 / std::sqrt(3.0);
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    if (cell_values[t] == 0.0) continue;
    const auto s = interface_segment(mesh, t, phi);
    if (!s) continue;
    auto at = [&](double r) { return Point{s->a.x + r * (s->b.x - s->a.x), s->a.y + r * (s->b.y - s->a.y)}; };
    total += cell_values[t] * 0.5 * s->length() * (weight(at(0.5 - g)) + weight(at(0.5 + g)));
  }
  return total;
}

std::vector<double> extend_velocity(const Mesh& mesh, const LevelSet& ls, std::span<const double> cell_values,
                                    double mu) {
  check_phi(mesh, ls.phi, "extend_velocity");
  if (cell_values.size() != mesh.triangle_count()) throw InvalidInput("extend_velocity: one value per triangle");
  if (!(mu >= 0.0)) throw InvalidInput("extend_velocity: smoothing must be non-negative");
  const std::size_t nv = mesh.vertex_count();
  std::vector<double> mass(nv, 0.0), load(nv, 0.0);
  bool any = false;
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto seg = interface_segment(mesh, t, ls.phi);
    if (!seg) continue;
    any = true;
    // int over the segment of each P1 hat function (trapezoid rule is exact)
    const auto& tri = mesh.triangles()[t];
    const auto& g = mesh.basis_gradients(t);
    const Point c = mesh.centroid(t);
    const double half = 0.5 * seg->length();
    for (int a = 0; a < 3; ++a) {
      auto hat = [&](Point p) { return 1.0 / 3.0 + g[a].x * (p.x - c.x) + g[a].y * (p.y - c.y); };
      const double w = half * (hat(seg->a) + hat(seg->b));
      mass[tri[a]] += w;
      load[tri[a]] += w * cell_values[t];
    }
  }
  if (!any) throw InvalidInput("extend_velocity: the level set has no interface");

  if (mu == 0.0) {
    std::vector<double> v(nv, 0.0);
    for (std::size_t i = 0; i < nv; ++i) {
      if (mass[i] > 0.0) v[i] = load[i] / mass[i];
    }
    return v;
  }
  TripletBuilder diag(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    if (mass[i] > 0.0) diag.add(i, i, mass[i]);
  }
  const CsrMatrix k = assemble_poisson(mesh, std::vector<double>(mesh.triangle_count(), 1.0));
  const CsrMatrix system = add(diag.build(true), k, mu);
  return solve_spd(system, Field{FieldKind::kScalar, load}, {1e-10, 0}).values;
}

}  // namespace corshape
