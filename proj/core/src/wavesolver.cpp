#include "carlwave/wavesolver.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "carlwave/errors.hpp"

namespace carlwave {

namespace {

inline double lap(const Grid& g, const double* u, int i, int j) {
  const int idx = g.index(i, j);
  double s = (u[idx - 1] - 2.0 * u[idx] + u[idx + 1]) / (g.hx * g.hx);
  if (g.domain.dim == 2) {
    s += (u[idx - g.nx] - 2.0 * u[idx] + u[idx + g.nx]) / (g.hy * g.hy);
  }
  return s;
}

void check_finite(const SpaceTimeField& u, int level) {
  const double* p = u.level_data(level);
  for (int k = 0; k < u.grid.num_nodes(); ++k) {
    if (!std::isfinite(p[k])) {
      throw NumericalError("wave solve produced non-finite values at t = " +
                           std::to_string(u.time(level)));
    }
  }
}

// Leapfrog march on [0,T]. src(level, node) is the forcing, bc(level, node)
// the Dirichlet trace (interior nodes never query bc).
template <class SourceFn, class BcFn>
SpaceTimeField march(const Grid& g, const SpatialField& q, SourceFn&& src, BcFn&& bc,
                     const SpatialField& y0, const SpatialField& y1) {
  if (static_cast<int>(q.v.size()) != g.num_nodes()) throw std::invalid_argument("potential size mismatch");
  if (static_cast<int>(y0.v.size()) != g.num_nodes() || static_cast<int>(y1.v.size()) != g.num_nodes()) {
    throw std::invalid_argument("initial data size mismatch");
  }
  SpaceTimeField u = SpaceTimeField::zeros(g, TimeSpan::ZeroToT);
  const double dt = g.dt;
  const double dt2 = dt * dt;

  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const int idx = g.index(i, j);
      u.at(0, idx) = g.is_boundary(i, j) ? bc(0, idx) : y0.v[idx];
    }

  if (g.nt >= 1) {
    const double* u0 = u.level_data(0);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int idx = g.index(i, j);
        if (g.is_boundary(i, j)) {
          u.at(1, idx) = bc(1, idx);
        } else {
          const double acc = lap(g, u0, i, j) - q.v[idx] * u0[idx] + src(0, idx);
          u.at(1, idx) = u0[idx] + dt * y1.v[idx] + 0.5 * dt2 * acc;
        }
      }
  }

  for (int l = 1; l < g.nt; ++l) {
    const double* um = u.level_data(l - 1);
    const double* uc = u.level_data(l);
    double* un = u.level_data(l + 1);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int idx = g.index(i, j);
        if (g.is_boundary(i, j)) {
          un[idx] = bc(l + 1, idx);
        } else {
          const double acc = lap(g, uc, i, j) - q.v[idx] * uc[idx] + src(l, idx);
          un[idx] = 2.0 * uc[idx] - um[idx] + dt2 * acc;
        }
      }
    if ((l & 63) == 0) check_finite(u, l + 1);
  }
  check_finite(u, u.levels() - 1);
  return u;
}

}  // namespace

PotentialField PotentialField::from_values(SpatialField q) {
  PotentialField p;
  p.m = q.max_abs();
  p.q = std::move(q);
  return p;
}

SourceSeparable make_source(SpatialField f, SpaceTimeField R) {
  SourceSeparable s;
  const Grid& g = R.grid;
  double r = std::numeric_limits<double>::infinity();
  for (int k = 0; k < g.num_nodes(); ++k) r = std::min(r, std::abs(R.at(0, k)));

  // H1-in-time of the sup-in-space envelope.
  double acc = 0.0;
  const int L = R.levels();
  for (int l = 0; l < L; ++l) {
    double sup = 0.0, sup_dt = 0.0;
    for (int k = 0; k < g.num_nodes(); ++k) {
      sup = std::max(sup, std::abs(R.at(l, k)));
      double dR;
      if (l == 0)
        dR = (-3.0 * R.at(0, k) + 4.0 * R.at(1, k) - R.at(2, k)) / (2.0 * g.dt);
      else if (l == L - 1)
        dR = (3.0 * R.at(l, k) - 4.0 * R.at(l - 1, k) + R.at(l - 2, k)) / (2.0 * g.dt);
      else
        dR = (R.at(l + 1, k) - R.at(l - 1, k)) / (2.0 * g.dt);
      sup_dt = std::max(sup_dt, std::abs(dR));
    }
    acc += R.time_weight(l) * (sup * sup + sup_dt * sup_dt);
  }
  s.r = r;
  s.K = std::sqrt(acc);
  s.f = std::move(f);
  s.R = std::move(R);
  return s;
}

int face_node_count(const Grid& g, int face) {
  if (g.domain.dim == 1) return 1;
  return (face == kFaceLeft || face == kFaceRight) ? g.ny : g.nx;
}

int face_node_index(const Grid& g, int face, int k) {
  switch (face) {
    case kFaceLeft: return g.index(0, g.domain.dim == 2 ? k : 0);
    case kFaceRight: return g.index(g.nx - 1, g.domain.dim == 2 ? k : 0);
    case kFaceBottom: return g.index(k, 0);
    default: return g.index(k, g.ny - 1);
  }
}

double face_node_weight(const Grid& g, int face, int k) {
  if (g.domain.dim == 1) return 1.0;
  const double h = (face == kFaceLeft || face == kFaceRight) ? g.hy : g.hx;
  const int n = face_node_count(g, face);
  return (k == 0 || k == n - 1) ? 0.5 * h : h;
}

SpaceTimeField solve_dirichlet(const Grid& g, const SpatialField& q, const SpaceTimeField& g_src,
                               const SpaceTimeField& h_bc, const SpatialField& y0,
                               const SpatialField& y1) {
  if (h_bc.span != TimeSpan::ZeroToT || g_src.span != TimeSpan::ZeroToT) {
    throw std::invalid_argument("dirichlet solve expects data on [0,T]");
  }
  double scale = 1.0;
  for (double v : y0.v) scale = std::max(scale, std::abs(v));
  for (int f = 0; f < g.domain.face_count(); ++f)
    for (int k = 0; k < face_node_count(g, f); ++k) {
      const int idx = face_node_index(g, f, k);
      if (std::abs(h_bc.at(0, idx) - y0.v[idx]) > 1e-9 * scale) {
        throw std::invalid_argument("boundary data incompatible with initial displacement at t=0");
      }
    }
  return march(
      g, q, [&](int l, int idx) { return g_src.at(l, idx); },
      [&](int l, int idx) { return h_bc.at(l, idx); }, y0, y1);
}

SpaceTimeField solve_source(const Grid& g, const SpatialField& q, const SpatialField& f,
                            const SpaceTimeField& R) {
  if (static_cast<int>(f.v.size()) != g.num_nodes()) throw std::invalid_argument("source size mismatch");
  const SpatialField zero = SpatialField::zeros(g);
  return march(
      g, q, [&](int l, int idx) { return f.v[idx] * R.at(l, idx); },
      [](int, int) { return 0.0; }, zero, zero);
}

SpaceTimeField solve_time_derivative(const Grid& g, const SpatialField& q, const SpatialField& f,
                                     const SpaceTimeField& R) {
  if (static_cast<int>(f.v.size()) != g.num_nodes()) throw std::invalid_argument("source size mismatch");
  const SpatialField zero = SpatialField::zeros(g);
  SpatialField z1;
  z1.v.resize(g.num_nodes());
  for (int k = 0; k < g.num_nodes(); ++k) z1.v[k] = f.v[k] * R.at(0, k);
  const int L = R.levels();
  auto dR = [&](int l, int idx) {
    if (l == 0) return (-3.0 * R.at(0, idx) + 4.0 * R.at(1, idx) - R.at(2, idx)) / (2.0 * g.dt);
    if (l == L - 1)
      return (3.0 * R.at(l, idx) - 4.0 * R.at(l - 1, idx) + R.at(l - 2, idx)) / (2.0 * g.dt);
    return (R.at(l + 1, idx) - R.at(l - 1, idx)) / (2.0 * g.dt);
  };
  return march(
      g, q, [&](int l, int idx) { return f.v[idx] * dR(l, idx); },
      [](int, int) { return 0.0; }, zero, z1);
}

namespace {

struct FaceStencil {
  int b, in1, in2;
  double h;
};

FaceStencil face_stencil(const Grid& g, int face, int k) {
  switch (face) {
    case kFaceLeft: {
      const int j = g.domain.dim == 2 ? k : 0;
      return {g.index(0, j), g.index(1, j), g.index(2, j), g.hx};
    }
    case kFaceRight: {
      const int j = g.domain.dim == 2 ? k : 0;
      return {g.index(g.nx - 1, j), g.index(g.nx - 2, j), g.index(g.nx - 3, j), g.hx};
    }
    case kFaceBottom: return {g.index(k, 0), g.index(k, 1), g.index(k, 2), g.hy};
    default: return {g.index(k, g.ny - 1), g.index(k, g.ny - 2), g.index(k, g.ny - 3), g.hy};
  }
}

}  // namespace

BoundaryFlux normal_flux(const SpaceTimeField& v, const std::vector<int>& faces) {
  const Grid& g = v.grid;
  BoundaryFlux flux;
  flux.grid = g;
  flux.span = v.span;
  for (int face : faces) {
    if (face < 0 || face >= g.domain.face_count()) throw std::invalid_argument("face index out of range");
    FaceTrace tr;
    tr.face = face;
    tr.n_nodes = face_node_count(g, face);
    tr.v.resize(static_cast<size_t>(v.levels()) * tr.n_nodes);
    for (int l = 0; l < v.levels(); ++l) {
      const double* u = v.level_data(l);
      for (int k = 0; k < tr.n_nodes; ++k) {
        const FaceStencil st = face_stencil(g, face, k);
        tr.at(l, k) = (3.0 * u[st.b] - 4.0 * u[st.in1] + u[st.in2]) / (2.0 * st.h);
      }
    }
    flux.faces.push_back(std::move(tr));
  }
  return flux;
}

double BoundaryFlux::l2_norm() const {
  double acc = 0.0;
  const int L = levels();
  for (int l = 0; l < L; ++l) {
    const double wt = (l == 0 || l == L - 1) ? 0.5 * grid.dt : grid.dt;
    for (const FaceTrace& tr : faces)
      for (int k = 0; k < tr.n_nodes; ++k) {
        const double x = tr.at(l, k);
        acc += wt * face_node_weight(grid, tr.face, k) * x * x;
      }
  }
  return std::sqrt(acc);
}

BoundaryFlux BoundaryFlux::time_derivative() const {
  BoundaryFlux out = *this;
  const int L = levels();
  if (L < 3) throw std::invalid_argument("too few levels to differentiate");
  for (size_t fidx = 0; fidx < faces.size(); ++fidx) {
    const FaceTrace& src = faces[fidx];
    FaceTrace& dst = out.faces[fidx];
    for (int k = 0; k < src.n_nodes; ++k) {
      dst.at(0, k) = (-3.0 * src.at(0, k) + 4.0 * src.at(1, k) - src.at(2, k)) / (2.0 * grid.dt);
      dst.at(L - 1, k) =
          (3.0 * src.at(L - 1, k) - 4.0 * src.at(L - 2, k) + src.at(L - 3, k)) / (2.0 * grid.dt);
      for (int l = 1; l < L - 1; ++l) {
        dst.at(l, k) = (src.at(l + 1, k) - src.at(l - 1, k)) / (2.0 * grid.dt);
      }
    }
  }
  return out;
}

double BoundaryFlux::h1_time_norm() const {
  const double a = l2_norm();
  const double b = time_derivative().l2_norm();
  return std::sqrt(a * a + b * b);
}

namespace {

// Gradient at a node, centered inside, one-sided second order on the boundary.
inline double ddx(const Grid& g, const double* u, int i, int j) {
  const int idx = g.index(i, j);
  if (i == 0) return (-3.0 * u[idx] + 4.0 * u[idx + 1] - u[idx + 2]) / (2.0 * g.hx);
  if (i == g.nx - 1) return (3.0 * u[idx] - 4.0 * u[idx - 1] + u[idx - 2]) / (2.0 * g.hx);
  return (u[idx + 1] - u[idx - 1]) / (2.0 * g.hx);
}

inline double ddy(const Grid& g, const double* u, int i, int j) {
  const int idx = g.index(i, j);
  if (j == 0) return (-3.0 * u[idx] + 4.0 * u[idx + g.nx] - u[idx + 2 * g.nx]) / (2.0 * g.hy);
  if (j == g.ny - 1) return (3.0 * u[idx] - 4.0 * u[idx - g.nx] + u[idx - 2 * g.nx]) / (2.0 * g.hy);
  return (u[idx + g.nx] - u[idx - g.nx]) / (2.0 * g.hy);
}

}  // namespace

double grad_l2(const Grid& g, const std::vector<double>& values) {
  double acc = 0.0;
  const double* u = values.data();
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      double gsq = ddx(g, u, i, j) * ddx(g, u, i, j);
      if (g.domain.dim == 2) gsq += ddy(g, u, i, j) * ddy(g, u, i, j);
      acc += g.quad_weight(i, j) * gsq;
    }
  return std::sqrt(acc);
}

double energy(const SpaceTimeField& v, int level) {
  const Grid& g = v.grid;
  const int L = v.levels();
  if (level < 0 || level >= L) throw std::out_of_range("level");
  std::vector<double> vt(g.num_nodes());
  for (int k = 0; k < g.num_nodes(); ++k) {
    if (level == 0)
      vt[k] = (-3.0 * v.at(0, k) + 4.0 * v.at(1, k) - v.at(2, k)) / (2.0 * g.dt);
    else if (level == L - 1)
      vt[k] = (3.0 * v.at(level, k) - 4.0 * v.at(level - 1, k) + v.at(level - 2, k)) / (2.0 * g.dt);
    else
      vt[k] = (v.at(level + 1, k) - v.at(level - 1, k)) / (2.0 * g.dt);
  }
  double kin = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) kin += g.quad_weight(i, j) * vt[g.index(i, j)] * vt[g.index(i, j)];
  std::vector<double> lvl(v.level_data(level), v.level_data(level) + g.num_nodes());
  const double gn = grad_l2(g, lvl);
  return kin + gn * gn;
}

SpaceTimeField even_extension(const SpaceTimeField& v) {
  if (v.span != TimeSpan::ZeroToT) throw std::invalid_argument("field already spans [-T,T]");
  const Grid& g = v.grid;
  SpaceTimeField out = SpaceTimeField::zeros(g, TimeSpan::SymmetricT);
  for (int l = 0; l <= g.nt; ++l)
    for (int k = 0; k < g.num_nodes(); ++k) {
      out.at(g.nt + l, k) = v.at(l, k);
      out.at(g.nt - l, k) = v.at(l, k);
    }
  return out;
}

double l1t_l2x(const SpaceTimeField& f) {
  double acc = 0.0;
  for (int l = 0; l < f.levels(); ++l) acc += f.time_weight(l) * space_l2(f, l);
  return acc;
}

}  // namespace carlwave
