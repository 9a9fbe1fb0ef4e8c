#pragma once

#include <vector>

#include "carlwave/grid.hpp"

namespace carlwave {

/// Bounded potential with an explicit bound m >= ||q||_inf used by energy
/// and stability reports.
struct PotentialField {
  SpatialField q;
  double m = 0.0;

  static PotentialField from_values(SpatialField q);
};

/// Separable right-hand side f(x) R(x,t). r is the coercivity floor
/// min_x |R(x,0)| and K the discrete H1-in-time, sup-in-space size of R.
struct SourceSeparable {
  SpatialField f;
  SpaceTimeField R;
  double r = 0.0;
  double K = 0.0;
};

SourceSeparable make_source(SpatialField f, SpaceTimeField R);

/// Normal-derivative trace on one boundary face, level-major storage of
/// size levels x nodes-on-face.
struct FaceTrace {
  int face = 0;
  int n_nodes = 0;
  std::vector<double> v;

  double& at(int level, int k) { return v[static_cast<size_t>(level) * n_nodes + k]; }
  double at(int level, int k) const { return v[static_cast<size_t>(level) * n_nodes + k]; }
};

/// Flux record on a set of boundary faces over a time span.
struct BoundaryFlux {
  Grid grid;
  TimeSpan span = TimeSpan::ZeroToT;
  std::vector<FaceTrace> faces;

  int levels() const { return span == TimeSpan::ZeroToT ? grid.nt + 1 : 2 * grid.nt + 1; }
  double time(int level) const {
    return span == TimeSpan::ZeroToT ? level * grid.dt : -grid.T + level * grid.dt;
  }

  /// L2 over faces x time (trapezoid in time and along 2D faces; boundary
  /// points carry unit weight in 1D).
  double l2_norm() const;
  /// sqrt(L2^2 + L2(d/dt)^2) with centered time differences.
  double h1_time_norm() const;
  /// Centered second-order time differencing, one-sided at the ends.
  BoundaryFlux time_derivative() const;
};

/// Number of grid nodes lying on a face (1 in one dimension).
int face_node_count(const Grid& g, int face);
/// Flat node index of the k-th node on a face.
int face_node_index(const Grid& g, int face, int k);
/// Quadrature weight of the k-th face node for boundary integrals
/// (trapezoid along 2D faces, counting measure in 1D).
double face_node_weight(const Grid& g, int face, int k);

/// Explicit second-order leapfrog solve of
///   d_tt y - Lap y + q y = g   on (0,T),
///   y = h_bc on the boundary, y(0) = y0, d_t y(0) = y1.
/// h_bc is read only at boundary nodes and must match y0 there at t = 0.
SpaceTimeField solve_dirichlet(const Grid& g, const SpatialField& q, const SpaceTimeField& g_src,
                               const SpaceTimeField& h_bc, const SpatialField& y0,
                               const SpatialField& y1);

/// Same marching with zero initial and boundary data and source f(x) R(x,t).
SpaceTimeField solve_source(const Grid& g, const SpatialField& q, const SpatialField& f,
                            const SpaceTimeField& R);

/// Time derivative system: zero displacement, initial velocity f R(.,0),
/// source f d_t R. Approximates d_t of the solve_source solution.
SpaceTimeField solve_time_derivative(const Grid& g, const SpatialField& q, const SpatialField& f,
                                     const SpaceTimeField& R);

/// One-sided second-order normal derivative (3 v_b - 4 v_in1 + v_in2)/(2h)
/// on the requested faces, every level.
BoundaryFlux normal_flux(const SpaceTimeField& v, const std::vector<int>& faces);

/// ||d_t v||^2 + ||grad v||^2 at one level, trapezoidal quadrature,
/// centered differences inside and one-sided at the ends.
double energy(const SpaceTimeField& v, int level);

/// Reflects a field on [0,T] to the symmetric slab: v(x,-t) = v(x,t).
SpaceTimeField even_extension(const SpaceTimeField& v);

/// L2 norm of the discrete gradient of a nodal function.
double grad_l2(const Grid& g, const std::vector<double>& values);

/// Integral over time of the spatial L2 norm (the L1-in-time, L2-in-space
/// size of a forcing term).
double l1t_l2x(const SpaceTimeField& f);

}  // namespace carlwave
