#include "carlwave/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "carlwave/rng.hpp"

namespace carlwave {

namespace {

constexpr double kTiny = 1e-300;

inline double lap(const Grid& g, const std::vector<double>& u, int i, int j) {
  const int idx = g.index(i, j);
  double acc = (u[idx - 1] - 2.0 * u[idx] + u[idx + 1]) / (g.hx * g.hx);
  if (g.domain.dim == 2) {
    acc += (u[idx - g.nx] - 2.0 * u[idx] + u[idx + g.nx]) / (g.hy * g.hy);
  }
  return acc;
}

double time_quad(const Grid& g, int level) {
  return (level == 0 || level == g.nt) ? 0.5 * g.dt : g.dt;
}

// d_t R with the same stencils the state march uses.
double dR_at(const Grid& g, const SpaceTimeField& R, int l, int idx) {
  const int L = R.levels();
  if (l == 0) return (-3.0 * R.at(0, idx) + 4.0 * R.at(1, idx) - R.at(2, idx)) / (2.0 * g.dt);
  if (l == L - 1) return (3.0 * R.at(l, idx) - 4.0 * R.at(l - 1, idx) + R.at(l - 2, idx)) / (2.0 * g.dt);
  return (R.at(l + 1, idx) - R.at(l - 1, idx)) / (2.0 * g.dt);
}

// Interior application of the one-step operator A = 2 I + dt^2 (Lap - q).
void apply_A(const Grid& g, const SpatialField& q, const std::vector<double>& p,
             std::vector<double>& out) {
  const double dt2 = g.dt * g.dt;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const int idx = g.index(i, j);
      out[idx] = g.is_boundary(i, j)
                     ? 0.0
                     : 2.0 * p[idx] + dt2 * (lap(g, p, i, j) - q.v[idx] * p[idx]);
    }
}

double flux_dot(const BoundaryFlux& a, const BoundaryFlux& b) {
  const Grid& g = a.grid;
  double acc = 0.0;
  for (size_t f = 0; f < a.faces.size(); ++f) {
    const FaceTrace& ta = a.faces[f];
    const FaceTrace& tb = b.faces[f];
    for (int l = 0; l < a.levels(); ++l) {
      const double wt = time_quad(g, l);
      for (int k = 0; k < ta.n_nodes; ++k)
        acc += wt * face_node_weight(g, ta.face, k) * ta.at(l, k) * tb.at(l, k);
    }
  }
  return acc;
}

double flux_norm(const BoundaryFlux& a) { return std::sqrt(flux_dot(a, a)); }

void flux_axpy(double alpha, const BoundaryFlux& x, BoundaryFlux& y) {
  for (size_t f = 0; f < x.faces.size(); ++f)
    for (size_t m = 0; m < x.faces[f].v.size(); ++m) y.faces[f].v[m] += alpha * x.faces[f].v[m];
}

BoundaryFlux flux_sub(const BoundaryFlux& a, const BoundaryFlux& b) {
  BoundaryFlux out = a;
  for (size_t f = 0; f < a.faces.size(); ++f)
    for (size_t m = 0; m < a.faces[f].v.size(); ++m) out.faces[f].v[m] -= b.faces[f].v[m];
  return out;
}

double x_dot(const Grid& g, const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const int idx = g.index(i, j);
      acc += g.quad_weight(i, j) * a[idx] * b[idx];
    }
  return acc;
}

// Pseudorandom sine series vanishing on the boundary, coefficients damped
// by 1/k^decay.
SpatialField random_series(const Grid& g, uint64_t seed, uint64_t stream, double decay) {
  CounterRng rng(seed, stream);
  uint64_t c = 0;
  const double a0 = g.domain.lo[0], b0 = g.domain.hi[0];
  if (g.domain.dim == 1) {
    std::array<double, 6> ak{};
    for (int k = 0; k < 6; ++k) ak[k] = rng.normal(c++) / std::pow(k + 1.0, decay);
    return SpatialField::sample(g, [&](Point x) {
      const double xi = (x.x - a0) / (b0 - a0);
      double acc = 0.0;
      for (int k = 0; k < 6; ++k) acc += ak[k] * std::sin((k + 1) * M_PI * xi);
      return acc;
    });
  }
  const double a1 = g.domain.lo[1], b1 = g.domain.hi[1];
  std::array<double, 9> ak{};
  for (int k = 0; k < 9; ++k) {
    const int kx = k / 3 + 1, ky = k % 3 + 1;
    ak[k] = rng.normal(c++) / std::pow(double(kx * kx + ky * ky), 0.5 * decay);
  }
  return SpatialField::sample(g, [&](Point x) {
    const double xi = (x.x - a0) / (b0 - a0);
    const double zi = (x.y - a1) / (b1 - a1);
    double acc = 0.0;
    for (int k = 0; k < 9; ++k) {
      const int kx = k / 3 + 1, ky = k % 3 + 1;
      acc += ak[k] * std::sin(kx * M_PI * xi) * std::sin(ky * M_PI * zi);
    }
    return acc;
  });
}

}  // namespace

BoundaryFlux forward_map(const Grid& g, const SpatialField& q, const SpaceTimeField& R,
                         const SpatialField& f, const std::vector<int>& gamma0) {
  const SpaceTimeField z = solve_time_derivative(g, q, f, R);
  return normal_flux(z, gamma0);
}

SpatialField adjoint_map(const Grid& g, const SpatialField& q, const SpaceTimeField& R,
                         const BoundaryFlux& residual) {
  const int N = g.num_nodes();
  const int nt = g.nt;

  // r^m = C^T W_Y residual at level m, assembled on demand.
  auto load_r = [&](int level, std::vector<double>& r) {
    std::fill(r.begin(), r.end(), 0.0);
    const double wt = time_quad(g, level);
    for (const FaceTrace& tr : residual.faces) {
      for (int k = 0; k < tr.n_nodes; ++k) {
        const double ww = wt * face_node_weight(g, tr.face, k) * tr.at(level, k);
        if (ww == 0.0) continue;
        // flux stencil (3 z_b - 4 z_in1 + z_in2)/(2h); z_b is constrained to 0
        const int face = tr.face;
        const double h = (face == kFaceLeft || face == kFaceRight) ? g.hx : g.hy;
        int in1, in2;
        switch (face) {
          case kFaceLeft: {
            const int j = g.domain.dim == 2 ? k : 0;
            in1 = g.index(1, j);
            in2 = g.index(2, j);
            break;
          }
          case kFaceRight: {
            const int j = g.domain.dim == 2 ? k : 0;
            in1 = g.index(g.nx - 2, j);
            in2 = g.index(g.nx - 3, j);
            break;
          }
          case kFaceBottom:
            in1 = g.index(k, 1);
            in2 = g.index(k, 2);
            break;
          default:
            in1 = g.index(k, g.ny - 2);
            in2 = g.index(k, g.ny - 3);
        }
        const int i1 = in1 % g.nx, j1 = in1 / g.nx;
        const int i2 = in2 % g.nx, j2 = in2 / g.nx;
        if (!g.is_boundary(i1, j1)) r[in1] += -4.0 / (2.0 * h) * ww;
        if (!g.is_boundary(i2, j2)) r[in2] += 1.0 / (2.0 * h) * ww;
      }
    }
  };

  // Backward sweep of the transposed recursion:
  //   p^nt = r^nt, p^{nt-1} = r^{nt-1} + A p^nt,
  //   p^m = r^m + A p^{m+1} - p^{m+2}.
  std::vector<double> p_next2(N, 0.0), p_next(N, 0.0), p_cur(N, 0.0), r(N, 0.0), Ap(N, 0.0);
  std::vector<double> grad(N, 0.0);
  const double dt = g.dt;
  const double dt2 = dt * dt;

  for (int m = nt; m >= 1; --m) {
    load_r(m, r);
    if (m == nt) {
      p_cur = r;
    } else {
      apply_A(g, q, p_next, Ap);
      for (int k = 0; k < N; ++k) p_cur[k] = r[k] + Ap[k] - (m <= nt - 2 ? p_next2[k] : 0.0);
    }
    // Source-injection transpose: E_1 = dt R^0 + dt^2/2 d_t R^0,
    // E_m = dt^2 d_t R^{m-1} for m >= 2; interior nodes only.
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int idx = g.index(i, j);
        if (g.is_boundary(i, j)) continue;
        const double e = (m == 1) ? dt * R.at(0, idx) + 0.5 * dt2 * dR_at(g, R, 0, idx)
                                  : dt2 * dR_at(g, R, m - 1, idx);
        grad[idx] += e * p_cur[idx];
      }
    p_next2.swap(p_next);
    p_next.swap(p_cur);
  }

  SpatialField out = SpatialField::zeros(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const int idx = g.index(i, j);
      if (!g.is_boundary(i, j)) out.v[idx] = grad[idx] / g.quad_weight(i, j);
    }
  return out;
}

double adjoint_consistency(const Grid& g, const SpatialField& q, const SpaceTimeField& R,
                           const std::vector<int>& gamma0, uint64_t seed) {
  SpatialField f = random_series(g, seed, 77, 1.0);
  BoundaryFlux y = forward_map(g, q, R, SpatialField::zeros(g), gamma0);  // shape only
  CounterRng rng(seed, 78);
  uint64_t c = 0;
  for (FaceTrace& tr : y.faces)
    for (double& v : tr.v) v = rng.normal(c++);

  const BoundaryFlux Phif = forward_map(g, q, R, f, gamma0);
  const SpatialField Pty = adjoint_map(g, q, R, y);
  const double lhs = flux_dot(Phif, y);
  const double rhs = x_dot(g, f.v, Pty.v);
  return std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), kTiny});
}

BoundaryFlux add_noise(const BoundaryFlux& clean, double level, uint64_t seed) {
  if (level == 0.0) return clean;
  BoundaryFlux e = clean;
  CounterRng rng(seed, 99);
  uint64_t c = 0;
  for (FaceTrace& tr : e.faces)
    for (double& v : tr.v) v = rng.normal(c++);
  const double en = flux_norm(e);
  const double cn = flux_norm(clean);
  if (en == 0.0 || cn == 0.0) return clean;
  BoundaryFlux out = clean;
  flux_axpy(level * cn / en, e, out);
  return out;
}

Measurement synthesize_linear_measurement(const ObservationGeometry& geom, const Grid& g,
                                          const SpatialField& q, const SpaceTimeField& R,
                                          const SpatialField& f_true, double noise_level,
                                          uint64_t seed) {
  double r = std::numeric_limits<double>::infinity();
  for (int idx = 0; idx < g.num_nodes(); ++idx) r = std::min(r, std::abs(R.at(0, idx)));
  if (!(r > 0.0)) {
    throw std::invalid_argument("excitation must satisfy inf |R(.,0)| > 0");
  }
  Measurement m;
  m.grid = g;
  m.geom = geom;
  m.q = q;
  m.R = R;
  m.truth = f_true;
  m.noise_level = noise_level;
  m.data = add_noise(forward_map(g, q, R, f_true, geom.gamma0), noise_level, seed);
  return m;
}

ReconstructionResult reconstruct_source(const Measurement& m, const ReconstructionConfig& cfg) {
  const Grid& g = m.grid;
  const int N = g.num_nodes();
  ReconstructionResult res;
  res.estimate = SpatialField::zeros(g);
  res.rel_error = std::numeric_limits<double>::quiet_NaN();

  const SpatialField b = adjoint_map(g, m.q, m.R, m.data);
  const double bnorm = std::sqrt(x_dot(g, b.v, b.v));
  const double d_norm = flux_norm(m.data);
  res.misfit_history.push_back(d_norm);
  if (bnorm == 0.0) {
    res.converged = true;
    if (!m.truth.v.empty()) {
      const double tn = space_l2(g, m.truth.v);
      res.rel_error = tn == 0.0 ? 0.0 : 1.0;
    }
    return res;
  }

  std::vector<double> f(N, 0.0), r(b.v), p(b.v), Np(N, 0.0);
  BoundaryFlux y = m.data;  // running prediction Phi f_k
  for (FaceTrace& tr : y.faces) std::fill(tr.v.begin(), tr.v.end(), 0.0);

  const double truth_norm = m.truth.v.empty() ? 0.0 : space_l2(g, m.truth.v);
  auto record_error = [&](const std::vector<double>& fk) {
    if (m.truth.v.empty()) return;
    std::vector<double> diff(N);
    for (int k = 0; k < N; ++k) diff[k] = fk[k] - m.truth.v[k];
    res.error_history.push_back(truth_norm == 0.0 ? space_l2(g, diff)
                                                  : space_l2(g, diff) / truth_norm);
  };
  record_error(f);

  double rho = x_dot(g, r, r);
  int stagnant = 0;
  double prev_misfit = d_norm;

  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    SpatialField pf;
    pf.v = p;
    const BoundaryFlux Phip = forward_map(g, m.q, m.R, pf, m.geom.gamma0);
    const SpatialField PtPhip = adjoint_map(g, m.q, m.R, Phip);
    for (int k = 0; k < N; ++k) Np[k] = PtPhip.v[k] + cfg.reg * p[k];

    const double pNp = x_dot(g, p, Np);
    if (!(pNp > 0.0)) break;  // numerically singular direction
    const double alpha = rho / pNp;
    for (int k = 0; k < N; ++k) {
      f[k] += alpha * p[k];
      r[k] -= alpha * Np[k];
    }
    flux_axpy(alpha, Phip, y);

    const double misfit = flux_norm(flux_sub(y, m.data));
    res.misfit_history.push_back(misfit);
    record_error(f);
    stagnant = (misfit >= prev_misfit) ? stagnant + 1 : 0;
    prev_misfit = misfit;

    const double rho_new = x_dot(g, r, r);
    if (std::sqrt(rho_new) <= cfg.tol * bnorm) {
      res.converged = true;
      ++it;
      break;
    }
    if (stagnant >= 5) {
      ++it;
      break;
    }
    const double beta = rho_new / rho;
    rho = rho_new;
    for (int k = 0; k < N; ++k) p[k] = r[k] + beta * p[k];
  }

  res.iterations = it;
  res.estimate.v = std::move(f);
  if (!res.converged) {
    res.converged = res.misfit_history.back() <= 0.5 * d_norm;
  }
  if (!m.truth.v.empty()) {
    std::vector<double> diff(N);
    for (int k = 0; k < N; ++k) diff[k] = res.estimate.v[k] - m.truth.v[k];
    const double tn = space_l2(g, m.truth.v);
    res.rel_error = tn == 0.0 ? space_l2(g, diff) : space_l2(g, diff) / tn;
  }
  return res;
}

namespace {

SpaceTimeField constant_in_time(const Grid& g, const SpatialField& u) {
  SpaceTimeField out = SpaceTimeField::zeros(g, TimeSpan::ZeroToT);
  for (int l = 0; l < out.levels(); ++l)
    for (int k = 0; k < g.num_nodes(); ++k) out.at(l, k) = u.v[k];
  return out;
}

}  // namespace

PotentialMeasurement synthesize_potential_measurement(const PotentialSetup& setup,
                                                      const SpatialField& q_true,
                                                      const SpatialField& p_guess,
                                                      double noise_level, uint64_t seed) {
  const Grid& g = setup.grid;
  PotentialMeasurement m;
  m.setup = setup;
  m.p_guess = p_guess;
  m.truth_q = q_true;
  m.noise_level = noise_level;

  const SpaceTimeField g_src = SpaceTimeField::zeros(g, TimeSpan::ZeroToT);
  const SpaceTimeField h_bc = constant_in_time(g, setup.y0);
  const SpaceTimeField y = solve_dirichlet(g, q_true, g_src, h_bc, setup.y0, setup.y1);
  m.flux_observed = add_noise(normal_flux(y, setup.geom.gamma0), noise_level, seed);
  return m;
}

PotentialResult reconstruct_potential(const PotentialMeasurement& m,
                                      const ReconstructionConfig& cfg) {
  const Grid& g = m.setup.grid;
  const int N = g.num_nodes();
  PotentialResult res;
  res.q_estimate = m.p_guess;
  res.rel_error = std::numeric_limits<double>::quiet_NaN();

  const SpaceTimeField g_src = SpaceTimeField::zeros(g, TimeSpan::ZeroToT);
  const SpaceTimeField h_bc = constant_in_time(g, m.setup.y0);
  const int rounds = std::clamp(cfg.outer_iters, 1, 5);

  for (int round = 0; round < rounds; ++round) {
    const SpaceTimeField y_guess =
        solve_dirichlet(g, res.q_estimate, g_src, h_bc, m.setup.y0, m.setup.y1);
    const BoundaryFlux flux_guess = normal_flux(y_guess, m.setup.geom.gamma0);
    const BoundaryFlux data = flux_sub(m.flux_observed, flux_guess).time_derivative();

    Measurement inner;
    inner.grid = g;
    inner.geom = m.setup.geom;
    inner.q = res.q_estimate;
    inner.R = y_guess;
    inner.data = data;
    if (!m.truth_q.v.empty()) {
      inner.truth = SpatialField::zeros(g);
      for (int k = 0; k < N; ++k) inner.truth.v[k] = res.q_estimate.v[k] - m.truth_q.v[k];
    }

    const ReconstructionResult step = reconstruct_source(inner, cfg);
    res.misfit_history.insert(res.misfit_history.end(), step.misfit_history.begin(),
                              step.misfit_history.end());
    res.converged = step.converged;
    ++res.outer_iterations;

    double upd = 0.0;
    for (int k = 0; k < N; ++k) {
      res.q_estimate.v[k] -= step.estimate.v[k];
      upd = std::max(upd, std::abs(step.estimate.v[k]));
    }
    if (upd <= 1e-12 * std::max(1.0, res.q_estimate.max_abs())) {
      res.converged = true;
      break;
    }
  }

  // The loop is also deemed converged when the flux mismatch collapsed
  // relative to its starting value, even if the last inner solve stalled
  // on an already-tiny residual.
  if (!res.converged && res.misfit_history.size() >= 2) {
    const double first = res.misfit_history.front();
    const double last = res.misfit_history.back();
    if (first > 0.0 && last <= 1e-2 * first) res.converged = true;
  }

  if (!m.truth_q.v.empty()) {
    std::vector<double> diff(N);
    for (int k = 0; k < N; ++k) diff[k] = res.q_estimate.v[k] - m.truth_q.v[k];
    const double tn = space_l2(g, m.truth_q.v);
    res.rel_error = tn == 0.0 ? space_l2(g, diff) : space_l2(g, diff) / tn;
  }
  return res;
}

StabilityScanReport stability_scan(const ObservationGeometry& geom, const Grid& g,
                                   const SpatialField& q, const SpaceTimeField& R,
                                   const std::vector<int>& faces, int count, uint64_t seed) {
  if (count < 20) throw std::invalid_argument("stability scan needs an ensemble of at least 20");
  StabilityScanReport rep;
  rep.c_low = std::numeric_limits<double>::infinity();
  rep.c_high = 0.0;
  for (int i = 0; i < count; ++i) {
    SpatialField f = random_series(g, seed, 3000 + i, 1.0);
    const double fn = space_l2(g, f.v);
    if (fn == 0.0) continue;
    for (double& v : f.v) v /= fn;
    const BoundaryFlux flux = forward_map(g, q, R, f, faces);
    const double rho = flux.h1_time_norm();
    rep.ratios.push_back(rho);
    rep.c_low = std::min(rep.c_low, rho);
    rep.c_high = std::max(rep.c_high, rho);
  }
  (void)geom;
  return rep;
}

StabilityFit potential_stability_fit(const PotentialSetup& setup, const SpatialField& p_base,
                                     int count, double eps, uint64_t seed) {
  if (count < 4) throw std::invalid_argument("stability fit needs at least 4 samples");
  const Grid& g = setup.grid;
  const SpaceTimeField g_src = SpaceTimeField::zeros(g, TimeSpan::ZeroToT);
  const SpaceTimeField h_bc = constant_in_time(g, setup.y0);
  const SpaceTimeField y_base = solve_dirichlet(g, p_base, g_src, h_bc, setup.y0, setup.y1);
  const BoundaryFlux flux_base = normal_flux(y_base, setup.geom.gamma0);

  const double ex = g.domain.hi[0] - g.domain.lo[0];
  const double ey = g.domain.dim == 2 ? g.domain.hi[1] - g.domain.lo[1] : ex;
  const double ext = std::min(ex, ey);

  StabilityFit fit;
  for (int i = 0; i < count; ++i) {
    // Perturbation: a smooth bump of sup-norm exactly eps at a random
    // interior location, so each pair is (p, p + eps * bump).
    CounterRng rng(seed, 4100 + i);
    Point center{g.domain.lo[0] + rng.uniform(0, 0.25, 0.75) * ex, 0.0};
    if (g.domain.dim == 2) center.y = g.domain.lo[1] + rng.uniform(1, 0.25, 0.75) * ey;
    const double width = rng.uniform(2, 0.1, 0.25) * ext;
    SpatialField dq = SpatialField::sample(g, [&](Point x) {
      const double dx = x.x - center.x;
      const double dy = g.domain.dim == 2 ? x.y - center.y : 0.0;
      const double u = std::sqrt(dx * dx + dy * dy) / width;
      if (u >= 1.0) return 0.0;
      const double c = 1.0 - u * u;
      return c * c * c;
    });
    const double ma = dq.max_abs();
    if (ma == 0.0) continue;
    for (double& v : dq.v) v *= eps / ma;

    SpatialField q = p_base;
    for (int k = 0; k < g.num_nodes(); ++k) q.v[k] += dq.v[k];
    const SpaceTimeField y = solve_dirichlet(g, q, g_src, h_bc, setup.y0, setup.y1);
    const BoundaryFlux diff = flux_sub(normal_flux(y, setup.geom.gamma0), flux_base);
    const double ratio = space_l2(g, dq.v) / diff.h1_time_norm();
    fit.ratios.push_back(ratio);
  }

  // Lipschitz-stability constant: fit the smallest c_emp with
  // |q - p| <= c_emp * |flux difference| on the first half of the ensemble,
  // then count held-out samples that exceed it by more than 5%.
  const int half = static_cast<int>(fit.ratios.size()) / 2;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (double r : fit.ratios) {
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  fit.c_low = lo;
  fit.c_high = hi;
  fit.c_emp = 0.0;
  for (int i = 0; i < half; ++i) fit.c_emp = std::max(fit.c_emp, fit.ratios[i]);
  fit.validate_count = static_cast<int>(fit.ratios.size()) - half;
  for (size_t i = half; i < fit.ratios.size(); ++i) {
    if (fit.ratios[i] > 1.05 * fit.c_emp) ++fit.violations;
  }
  return fit;
}

RegularityReport hidden_regularity_check(const ObservationGeometry& geom, const Grid& g,
                                         const SpatialField& q, int count, uint64_t seed) {
  if (count < 4) throw std::invalid_argument("regularity check needs at least 4 samples");
  (void)geom;
  std::vector<int> all_faces(g.domain.face_count());
  for (int f = 0; f < g.domain.face_count(); ++f) all_faces[f] = f;

  RegularityReport rep;
  const SpaceTimeField zero_bc = SpaceTimeField::zeros(g, TimeSpan::ZeroToT);

  for (int i = 0; i < count; ++i) {
    SpatialField v0 = random_series(g, seed, 5000 + i, 2.0);
    SpatialField v1 = random_series(g, seed, 5200 + i, 1.0);
    SpaceTimeField g_src = SpaceTimeField::zeros(g, TimeSpan::ZeroToT);
    const bool force_free = (i % 2 == 1);
    if (!force_free) {
      const SpatialField gs = random_series(g, seed, 5400 + i, 1.5);
      CounterRng rng(seed, 5600 + i);
      const double omega = rng.uniform(0, 1.0, 4.0);
      const double phase = rng.uniform(1, 0.0, 2.0 * M_PI);
      for (int l = 0; l < g_src.levels(); ++l) {
        const double c = std::cos(omega * g_src.time(l) + phase);
        for (int k = 0; k < g.num_nodes(); ++k) g_src.at(l, k) = c * gs.v[k];
      }
    }

    const SpaceTimeField y = solve_dirichlet(g, q, g_src, zero_bc, v0, v1);
    const BoundaryFlux flux = normal_flux(y, all_faces);
    const double num = flux.l2_norm() * flux.l2_norm();
    const double gl = grad_l2(g, v0.v);
    const double l2v1 = space_l2(g, v1.v);
    const double l1g = l1t_l2x(g_src);
    const double den = gl * gl + l2v1 * l2v1 + l1g * l1g;
    if (den == 0.0) continue;
    rep.ratios.push_back(num / den);

    if (force_free) {
      auto full_energy = [&](int l) {
        double pot = 0.0;
        for (int jj = 0; jj < g.ny; ++jj)
          for (int ii = 0; ii < g.nx; ++ii) {
            const int idx = g.index(ii, jj);
            pot += g.quad_weight(ii, jj) * q.v[idx] * y.at(l, idx) * y.at(l, idx);
          }
        return energy(y, l) + pot;
      };
      const double e0 = full_energy(0);
      double drift = 0.0;
      for (int l = 0; l <= g.nt; ++l) drift = std::max(drift, std::abs(full_energy(l) - e0));
      rep.max_energy_drift = std::max(rep.max_energy_drift, e0 > 0.0 ? drift / e0 : 0.0);
    }
  }

  const int half = static_cast<int>(rep.ratios.size()) / 2;
  double hi = 0.0;
  for (int i = 0; i < half; ++i) hi = std::max(hi, rep.ratios[i]);
  rep.C_fit = hi;
  rep.validate_count = static_cast<int>(rep.ratios.size()) - half;
  for (size_t i = half; i < rep.ratios.size(); ++i) {
    if (rep.ratios[i] > 1.05 * rep.C_fit) ++rep.violations;
  }
  return rep;
}

}  // namespace carlwave
