#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <vector>

#include "carlwave/geometry.hpp"

namespace carlwave {

/// Uniform tensor grid on the closure of the domain, plus the time step.
/// Nodes lie on the boundary; h = (hi-lo)/(n-1) per axis. The time step is
/// the largest value <= cfl_fraction * h_min / sqrt(dim) that divides T into
/// an integer number of intervals.
struct Grid {
  Domain domain;
  int nx = 0;
  int ny = 1;          // 1 in one dimension
  double hx = 0.0;
  double hy = 0.0;
  int nt = 0;          // intervals on [0, T]
  double dt = 0.0;
  double T = 0.0;

  int num_nodes() const { return nx * ny; }
  int index(int i, int j = 0) const { return j * nx + i; }
  Point node(int i, int j) const {
    Point p{domain.lo[0] + i * hx, 0.0};
    if (domain.dim == 2) p.y = domain.lo[1] + j * hy;
    return p;
  }
  Point node(int idx) const { return node(idx % nx, idx / nx); }
  bool is_boundary(int i, int j) const {
    if (i == 0 || i == nx - 1) return true;
    return domain.dim == 2 && (j == 0 || j == ny - 1);
  }
  bool is_boundary(int idx) const { return is_boundary(idx % nx, idx / nx); }
  double h_min() const { return domain.dim == 2 ? std::min(hx, hy) : hx; }

  /// Trapezoidal weight of a node for integrals over the domain.
  double quad_weight(int i, int j) const {
    double w = (i == 0 || i == nx - 1) ? 0.5 * hx : hx;
    if (domain.dim == 2) w *= (j == 0 || j == ny - 1) ? 0.5 * hy : hy;
    return w;
  }
  double node_weight(int idx) const { return quad_weight(idx % nx, idx / nx); }
};

Grid make_grid(const Domain& dom, int nx, int ny, double T, double cfl_fraction = 0.9);

/// Whether the field lives on [0,T] (nt+1 levels) or on the symmetric slab
/// [-T,T] (2*nt+1 levels, level nt at t = 0).
enum class TimeSpan { ZeroToT, SymmetricT };

/// Scalar function sampled on the grid nodes.
struct SpatialField {
  std::vector<double> v;

  static SpatialField zeros(const Grid& g) { return {std::vector<double>(g.num_nodes(), 0.0)}; }
  static SpatialField sample(const Grid& g, const std::function<double(Point)>& f);
  double max_abs() const;
};

/// Scalar function sampled on all grid nodes and all time levels,
/// level-major storage.
struct SpaceTimeField {
  Grid grid;
  TimeSpan span = TimeSpan::ZeroToT;
  std::vector<double> v;

  int levels() const { return span == TimeSpan::ZeroToT ? grid.nt + 1 : 2 * grid.nt + 1; }
  double time(int level) const {
    return span == TimeSpan::ZeroToT ? level * grid.dt : -grid.T + level * grid.dt;
  }
  double& at(int level, int node) { return v[static_cast<size_t>(level) * grid.num_nodes() + node]; }
  double at(int level, int node) const { return v[static_cast<size_t>(level) * grid.num_nodes() + node]; }
  const double* level_data(int level) const { return v.data() + static_cast<size_t>(level) * grid.num_nodes(); }
  double* level_data(int level) { return v.data() + static_cast<size_t>(level) * grid.num_nodes(); }

  static SpaceTimeField zeros(const Grid& g, TimeSpan span);
  static SpaceTimeField sample(const Grid& g, TimeSpan span,
                               const std::function<double(Point, double)>& f);

  /// Trapezoidal weight in time of a level.
  double time_weight(int level) const {
    return (level == 0 || level == levels() - 1) ? 0.5 * grid.dt : grid.dt;
  }
  bool has_nan() const;
};

/// L2(Omega) norm of one time level (trapezoidal quadrature).
double space_l2(const SpaceTimeField& f, int level);
double space_l2(const Grid& g, const std::vector<double>& values);

/// L2(Omega x time span) norm.
double spacetime_l2(const SpaceTimeField& f);

/// Relative L2 distance ||a-b|| / ||b|| over common levels.
double rel_l2_error(const SpaceTimeField& a, const SpaceTimeField& b);

}  // namespace carlwave
