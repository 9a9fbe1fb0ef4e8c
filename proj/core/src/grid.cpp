#include "carlwave/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace carlwave {

Grid make_grid(const Domain& dom, int nx, int ny, double T, double cfl_fraction) {
  if (nx < 4) throw std::invalid_argument("nx must be at least 4");
  if (dom.dim == 2 && ny < 4) throw std::invalid_argument("ny must be at least 4 in 2D");
  if (!(T > 0.0)) throw std::invalid_argument("T must be positive");
  if (!(cfl_fraction > 0.0) || cfl_fraction > 0.99) {
    throw std::invalid_argument("cfl_fraction must lie in (0, 0.99]");
  }
  Grid g;
  g.domain = dom;
  g.nx = nx;
  g.ny = (dom.dim == 2) ? ny : 1;
  g.hx = (dom.hi[0] - dom.lo[0]) / (nx - 1);
  g.hy = (dom.dim == 2) ? (dom.hi[1] - dom.lo[1]) / (ny - 1) : 0.0;
  g.T = T;
  const double dt_max = cfl_fraction * g.h_min() / std::sqrt(static_cast<double>(dom.dim));
  g.nt = static_cast<int>(std::ceil(T / dt_max));
  g.dt = T / g.nt;
  return g;
}

SpatialField SpatialField::sample(const Grid& g, const std::function<double(Point)>& f) {
  SpatialField out;
  out.v.resize(g.num_nodes());
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) out.v[g.index(i, j)] = f(g.node(i, j));
  return out;
}

double SpatialField::max_abs() const {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

SpaceTimeField SpaceTimeField::zeros(const Grid& g, TimeSpan span) {
  SpaceTimeField f;
  f.grid = g;
  f.span = span;
  f.v.assign(static_cast<size_t>(f.levels()) * g.num_nodes(), 0.0);
  return f;
}

SpaceTimeField SpaceTimeField::sample(const Grid& g, TimeSpan span,
                                      const std::function<double(Point, double)>& fn) {
  SpaceTimeField f = zeros(g, span);
  for (int l = 0; l < f.levels(); ++l) {
    const double t = f.time(l);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) f.at(l, g.index(i, j)) = fn(g.node(i, j), t);
  }
  return f;
}

bool SpaceTimeField::has_nan() const {
  for (double x : v)
    if (!std::isfinite(x)) return true;
  return false;
}

double space_l2(const Grid& g, const std::vector<double>& values) {
  double acc = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double x = values[g.index(i, j)];
      acc += g.quad_weight(i, j) * x * x;
    }
  return std::sqrt(acc);
}

double space_l2(const SpaceTimeField& f, int level) {
  const Grid& g = f.grid;
  double acc = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double x = f.at(level, g.index(i, j));
      acc += g.quad_weight(i, j) * x * x;
    }
  return std::sqrt(acc);
}

double spacetime_l2(const SpaceTimeField& f) {
  double acc = 0.0;
  for (int l = 0; l < f.levels(); ++l) {
    const double nl = space_l2(f, l);
    acc += f.time_weight(l) * nl * nl;
  }
  return std::sqrt(acc);
}

double rel_l2_error(const SpaceTimeField& a, const SpaceTimeField& b) {
  if (a.v.size() != b.v.size()) throw std::invalid_argument("field size mismatch");
  double num = 0.0, den = 0.0;
  for (int l = 0; l < a.levels(); ++l) {
    const double wt = a.time_weight(l);
    for (int node = 0; node < a.grid.num_nodes(); ++node) {
      const double w = wt * a.grid.node_weight(node);
      const double d = a.at(l, node) - b.at(l, node);
      num += w * d * d;
      den += w * b.at(l, node) * b.at(l, node);
    }
  }
  return std::sqrt(num) / std::sqrt(den);
}

}  // namespace carlwave
