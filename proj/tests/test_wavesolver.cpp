#include <cmath>
#include <vector>

#include "carlwave/errors.hpp"
#include "carlwave/geometry.hpp"
#include "carlwave/inversion.hpp"
#include "carlwave/wavesolver.hpp"
#include "doctest.h"

using namespace carlwave;

namespace {

constexpr double kPi = 3.14159265358979323846;

Grid interval_grid(int nx, double T = 2.5) {
  return make_grid(make_interval(0.0, 1.0), nx, 1, T, 0.9);
}

/// Separable standing wave sin(pi x) sin(pi t): exact solution of the free
/// wave equation with zero displacement and velocity pi sin(pi x).
SpaceTimeField solve_standing_wave(const Grid& g) {
  const SpatialField q = SpatialField::zeros(g);
  const SpaceTimeField zero_st = SpaceTimeField::zeros(g, TimeSpan::ZeroToT);
  const SpatialField y0 = SpatialField::zeros(g);
  const SpatialField y1 =
      SpatialField::sample(g, [](Point p) { return kPi * std::sin(kPi * p.x); });
  return solve_dirichlet(g, q, zero_st, zero_st, y0, y1);
}

SpaceTimeField standing_wave_exact(const Grid& g) {
  return SpaceTimeField::sample(g, TimeSpan::ZeroToT, [](Point p, double t) {
    return std::sin(kPi * p.x) * std::sin(kPi * t);
  });
}

/// Antiderivative of the unit bump (1-u^2)^3 on [-1,1], zero left of it.
double bump_antiderivative(double u) {
  if (u <= -1.0) return 0.0;
  if (u >= 1.0) return 32.0 / 35.0;
  const double g = u - u * u * u + 0.6 * std::pow(u, 5) - std::pow(u, 7) / 7.0;
  return g + 16.0 / 35.0;
}

}  // namespace

TEST_CASE("zero data stays identically zero") {
  const Grid g = interval_grid(51, 1.0);
  const SpatialField zf = SpatialField::zeros(g);
  const SpaceTimeField zst = SpaceTimeField::zeros(g, TimeSpan::ZeroToT);
  const SpaceTimeField v = solve_dirichlet(g, zf, zst, zst, zf, zf);
  for (double x : v.v) CHECK(x == 0.0);
}

TEST_CASE("standing wave is reproduced at second order") {
  double err[3];
  int k = 0;
  for (int nx : {101, 201, 401}) {
    const Grid g = interval_grid(nx);
    err[k++] = rel_l2_error(solve_standing_wave(g), standing_wave_exact(g));
  }
  CHECK(err[0] < 5e-3);
  const double order1 = std::log2(err[0] / err[1]);
  const double order2 = std::log2(err[1] / err[2]);
  CHECK(order1 > 1.7);
  CHECK(order1 < 2.3);
  CHECK(order2 > 1.7);
  CHECK(order2 < 2.3);
}

TEST_CASE("boundary flux of the standing wave matches the closed form") {
  const Grid g = interval_grid(201);
  const SpaceTimeField v = solve_standing_wave(g);
  const BoundaryFlux flux = normal_flux(v, {kFaceRight});
  REQUIRE(flux.faces.size() == 1);
  REQUIRE(flux.faces[0].n_nodes == 1);

  // At x = 1 the outward-normal derivative is -pi sin(pi t).
  double num = 0.0, den = 0.0;
  for (int l = 0; l < flux.levels(); ++l) {
    const double wt = (l == 0 || l == flux.levels() - 1) ? 0.5 * g.dt : g.dt;
    const double exact = -kPi * std::sin(kPi * flux.time(l));
    const double d = flux.faces[0].at(l, 0) - exact;
    num += wt * d * d;
    den += wt * exact * exact;
  }
  CHECK(std::sqrt(num / den) < 0.02);

  // L2 and H1 norms against the analytic time integrals on (0, 2.5).
  const double l2_exact = kPi * std::sqrt(1.25);
  const double h1_exact = std::sqrt(kPi * kPi * 1.25 + std::pow(kPi, 4) * 1.25);
  CHECK(flux.l2_norm() == doctest::Approx(l2_exact).epsilon(0.02));
  CHECK(flux.h1_time_norm() == doctest::Approx(h1_exact).epsilon(0.02));
  CHECK(flux.h1_time_norm() >= flux.l2_norm());

  // Time differentiation of the trace: -pi^2 cos(pi t).
  const BoundaryFlux dflux = flux.time_derivative();
  double dnum = 0.0, dden = 0.0;
  for (int l = 0; l < dflux.levels(); ++l) {
    const double wt = (l == 0 || l == dflux.levels() - 1) ? 0.5 * g.dt : g.dt;
    const double exact = -kPi * kPi * std::cos(kPi * dflux.time(l));
    const double d = dflux.faces[0].at(l, 0) - exact;
    dnum += wt * d * d;
    dden += wt * exact * exact;
  }
  CHECK(std::sqrt(dnum / dden) < 5e-3);
}

TEST_CASE("flux extraction is linear and vanishes on the zero field") {
  const Grid g = interval_grid(101, 1.0);
  const SpaceTimeField zero = SpaceTimeField::zeros(g, TimeSpan::ZeroToT);
  const BoundaryFlux zf = normal_flux(zero, {kFaceLeft, kFaceRight});
  CHECK(zf.l2_norm() == doctest::Approx(0.0));

  const SpaceTimeField a = SpaceTimeField::sample(g, TimeSpan::ZeroToT, [](Point p, double t) {
    return std::sin(kPi * p.x) * (1.0 + t);
  });
  const SpaceTimeField b = SpaceTimeField::sample(g, TimeSpan::ZeroToT, [](Point p, double t) {
    return std::sin(2.0 * kPi * p.x) * std::cos(t);
  });
  SpaceTimeField sum = a;
  for (size_t i = 0; i < sum.v.size(); ++i) sum.v[i] += b.v[i];

  const BoundaryFlux fa = normal_flux(a, {kFaceRight});
  const BoundaryFlux fb = normal_flux(b, {kFaceRight});
  const BoundaryFlux fs = normal_flux(sum, {kFaceRight});
  for (int l = 0; l < fs.levels(); ++l) {
    CHECK(fs.faces[0].at(l, 0) ==
          doctest::Approx(fa.faces[0].at(l, 0) + fb.faces[0].at(l, 0)).epsilon(1e-12));
  }
}

TEST_CASE("source solves are linear in the spatial factor") {
  const Grid g = interval_grid(101);
  const SpatialField q = SpatialField::sample(g, [](Point p) { return 0.5 + p.x; });
  const SpaceTimeField R =
      SpaceTimeField::sample(g, TimeSpan::ZeroToT, [](Point, double t) { return std::cos(t); });

  const SpatialField zero = SpatialField::zeros(g);
  const SpaceTimeField u0 = solve_source(g, q, zero, R);
  for (double x : u0.v) CHECK(x == 0.0);

  const SpatialField f1 =
      SpatialField::sample(g, [](Point p) { return std::sin(kPi * p.x); });
  const SpatialField f2 =
      SpatialField::sample(g, [](Point p) { return p.x * (1.0 - p.x); });
  SpatialField fsum = f1;
  for (size_t i = 0; i < fsum.v.size(); ++i) fsum.v[i] += f2.v[i];

  const SpaceTimeField u1 = solve_source(g, q, f1, R);
  const SpaceTimeField u2 = solve_source(g, q, f2, R);
  const SpaceTimeField us = solve_source(g, q, fsum, R);
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < us.v.size(); ++i) {
    const double d = us.v[i] - (u1.v[i] + u2.v[i]);
    num += d * d;
    den += us.v[i] * us.v[i];
  }
  CHECK(std::sqrt(num) <= 1e-10 * std::sqrt(den));

  SpatialField f3 = f1;
  for (double& x : f3.v) x *= 2.0;
  const SpaceTimeField u3 = solve_source(g, q, f3, R);
  double hnum = 0.0;
  for (size_t i = 0; i < u3.v.size(); ++i) {
    const double d = u3.v[i] - 2.0 * u1.v[i];
    hnum += d * d;
  }
  CHECK(std::sqrt(hnum) <= 1e-12 * spacetime_l2(u1));
}

TEST_CASE("velocity system reproduces the spreading-wave closed form") {
  const Grid g = interval_grid(201);
  const SpatialField q = SpatialField::zeros(g);
  const SpaceTimeField one =
      SpaceTimeField::sample(g, TimeSpan::ZeroToT, [](Point, double) { return 1.0; });
  const SpatialField f = SpatialField::sample(g, [](Point p) {
    const double u = (p.x - 0.5) / 0.1;
    return std::abs(u) < 1.0 ? std::pow(1.0 - u * u, 3) : 0.0;
  });

  // With a time-constant excitation the system is the free wave with initial
  // velocity f: before any reflection, z(x,t) = (F(x+t) - F(x-t)) / 2 with F
  // the antiderivative of f.
  const SpaceTimeField z = solve_time_derivative(g, q, f, one);
  const int level = static_cast<int>(std::lround(0.3 / g.dt));
  const double t = z.time(level);
  REQUIRE(t < 0.35);  // the bump support reaches the boundary only at t = 0.4
  double num = 0.0, den = 0.0;
  for (int k = 0; k < g.num_nodes(); ++k) {
    const double x = g.node(k).x;
    const double exact = 0.05 * (bump_antiderivative((x + t - 0.5) / 0.1) -
                                 bump_antiderivative((x - t - 0.5) / 0.1));
    const double d = z.at(level, k) - exact;
    num += g.node_weight(k) * d * d;
    den += g.node_weight(k) * exact * exact;
  }
  CHECK(std::sqrt(num / den) < 0.01);
}

TEST_CASE("velocity system tracks the time derivative of the source solve") {
  const Grid g = interval_grid(201);
  const SpatialField q = SpatialField::sample(g, [](Point p) { return 1.0 + 0.3 * p.x; });
  const SpaceTimeField R = SpaceTimeField::sample(
      g, TimeSpan::ZeroToT, [](Point, double t) { return std::cos(2.0 * t); });
  const SpatialField f =
      SpatialField::sample(g, [](Point p) { return std::sin(kPi * p.x); });

  const SpaceTimeField u = solve_source(g, q, f, R);
  const SpaceTimeField z = solve_time_derivative(g, q, f, R);

  double num = 0.0, den = 0.0;
  for (int l = 1; l < u.levels() - 1; ++l) {
    for (int k = 0; k < g.num_nodes(); ++k) {
      const double du = (u.at(l + 1, k) - u.at(l - 1, k)) / (2.0 * g.dt);
      const double d = z.at(l, k) - du;
      num += g.node_weight(k) * g.dt * d * d;
      den += g.node_weight(k) * g.dt * z.at(l, k) * z.at(l, k);
    }
  }
  CHECK(std::sqrt(num / den) <= 0.05);
}

TEST_CASE("leapfrog energy is nearly conserved on the free wave") {
  const Grid g = interval_grid(201);
  const SpaceTimeField v = solve_standing_wave(g);
  const double e0 = energy(v, 0);
  CHECK(e0 == doctest::Approx(kPi * kPi / 2.0).epsilon(0.02));
  double worst = 0.0;
  for (int l = 0; l < v.levels(); ++l) {
    worst = std::max(worst, std::abs(energy(v, l) - e0) / e0);
  }
  CHECK(worst <= 0.02);

  const SpaceTimeField zero = SpaceTimeField::zeros(g, TimeSpan::ZeroToT);
  CHECK(energy(zero, 5) == doctest::Approx(0.0));
}

TEST_CASE("bounded potentials keep the energy under the exponential envelope") {
  const Grid g = interval_grid(101);
  const SpatialField q = SpatialField::sample(g, [](Point p) { return std::sin(5.0 * p.x); });
  const double m = 1.0;
  const SpatialField y0 =
      SpatialField::sample(g, [](Point p) { return 2.0 + 0.5 * std::cos(kPi * p.x); });
  const SpatialField y1 = SpatialField::zeros(g);
  const SpaceTimeField zero_src = SpaceTimeField::zeros(g, TimeSpan::ZeroToT);
  const SpaceTimeField h_bc = SpaceTimeField::sample(
      g, TimeSpan::ZeroToT, [](Point p, double) { return 2.0 + 0.5 * std::cos(kPi * p.x); });

  const SpaceTimeField y = solve_dirichlet(g, q, zero_src, h_bc, y0, y1);
  const double e0 = energy(y, 0);
  const double cap = 2.0 * std::exp(2.0 * m * 2.5) * (e0 + 1e-12);
  for (int l = 0; l < y.levels(); ++l) CHECK(energy(y, l) <= cap);
}

TEST_CASE("even extension mirrors levels around t = 0") {
  const Grid g = interval_grid(51, 1.0);
  const SpaceTimeField v = SpaceTimeField::sample(
      g, TimeSpan::ZeroToT, [](Point p, double t) { return (1.0 + p.x) * t * t + t; });
  const SpaceTimeField e = even_extension(v);

  CHECK(e.span == TimeSpan::SymmetricT);
  CHECK(e.levels() == 2 * g.nt + 1);
  for (int k = 0; k <= g.nt; ++k)
    for (int n = 0; n < g.num_nodes(); n += 7) {
      CHECK(e.at(g.nt - k, n) == e.at(g.nt + k, n));
      CHECK(e.at(g.nt + k, n) == v.at(k, n));
    }

  // Central time difference at t = 0 vanishes by symmetry.
  for (int n = 0; n < g.num_nodes(); ++n) {
    CHECK(e.at(g.nt + 1, n) - e.at(g.nt - 1, n) == 0.0);
  }

  const double ratio = spacetime_l2(e) / spacetime_l2(v);
  CHECK(ratio == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(even_extension(e), std::invalid_argument);
}

TEST_CASE("boundary data must agree with the initial displacement") {
  const Grid g = interval_grid(51, 1.0);
  const SpatialField q = SpatialField::zeros(g);
  const SpaceTimeField zero_st = SpaceTimeField::zeros(g, TimeSpan::ZeroToT);
  const SpatialField y0 = SpatialField::sample(g, [](Point) { return 1.0; });
  const SpatialField y1 = SpatialField::zeros(g);
  CHECK_THROWS_AS(solve_dirichlet(g, q, zero_st, zero_st, y0, y1), std::invalid_argument);
}

TEST_CASE("runaway solves are detected instead of returning garbage") {
  const Grid g = interval_grid(101);
  const SpatialField q = SpatialField::sample(g, [](Point) { return -1e8; });
  const SpaceTimeField zero_st = SpaceTimeField::zeros(g, TimeSpan::ZeroToT);
  const SpatialField y0 = SpatialField::zeros(g);
  const SpatialField y1 =
      SpatialField::sample(g, [](Point p) { return std::sin(kPi * p.x); });
  CHECK_THROWS_AS(solve_dirichlet(g, q, zero_st, zero_st, y0, y1), NumericalError);
}

TEST_CASE("disturbances respect the discrete light cone") {
  const Grid g = interval_grid(201);
  const SpatialField q = SpatialField::zeros(g);
  const SpaceTimeField zero_st = SpaceTimeField::zeros(g, TimeSpan::ZeroToT);
  const SpatialField y0 = SpatialField::sample(g, [](Point p) {
    const double u = (p.x - 0.5) / 0.1;
    return std::abs(u) < 1.0 ? std::pow(1.0 - u * u, 3) : 0.0;
  });
  const SpatialField y1 = SpatialField::zeros(g);
  const SpaceTimeField v = solve_dirichlet(g, q, zero_st, zero_st, y0, y1);

  // The probe sits 0.3 away from the support edge; scheme information moves
  // one node per step, i.e. at speed hx/dt >= 1.
  const int probe = 20;  // x = 0.1
  const double d = 0.3;
  const double safe = 0.9 * d - 2.0 * g.hx;
  bool arrived = false;
  for (int l = 0; l < v.levels(); ++l) {
    if (v.time(l) <= safe) {
      CHECK(std::abs(v.at(l, probe)) <= 1e-12);
    }
    if (v.time(l) > 0.45 && std::abs(v.at(l, probe)) > 1e-6) arrived = true;
  }
  CHECK(arrived);  // the wave does reach the probe later on
}

TEST_CASE("flux-versus-data constant validates on held-out samples") {
  const Grid g = interval_grid(101);
  const ObservationGeometry geom =
      make_observation_geometry(make_interval(0.0, 1.0), {-1.0, 0.0}, 2.5);
  const SpatialField q = SpatialField::sample(g, [](Point p) { return 1.0 + 0.2 * p.x; });
  const RegularityReport rep = hidden_regularity_check(geom, g, q, 16, 1);
  CHECK(rep.C_fit > 0.0);
  CHECK(std::isfinite(rep.C_fit));
  CHECK(rep.validate_count == 8);
  CHECK(rep.violations <= static_cast<int>(0.05 * rep.validate_count));
  CHECK(rep.max_energy_drift <= 0.02);
  CHECK(rep.ratios.size() == 16);
}

TEST_CASE("face bookkeeping on both dimensions") {
  const Grid g1 = interval_grid(101, 1.0);
  CHECK(face_node_count(g1, kFaceLeft) == 1);
  CHECK(face_node_count(g1, kFaceRight) == 1);
  CHECK(face_node_index(g1, kFaceLeft, 0) == 0);
  CHECK(face_node_index(g1, kFaceRight, 0) == g1.nx - 1);
  CHECK(face_node_weight(g1, kFaceRight, 0) == doctest::Approx(1.0));

  const Grid g2 = make_grid(make_rectangle(0.0, 1.0, 0.0, 2.0), 5, 9, 1.0, 0.9);
  CHECK(face_node_count(g2, kFaceLeft) == 9);
  CHECK(face_node_count(g2, kFaceBottom) == 5);
  double len = 0.0;
  for (int k = 0; k < 9; ++k) {
    len += face_node_weight(g2, kFaceLeft, k);
    CHECK(g2.node(face_node_index(g2, kFaceLeft, k)).x == doctest::Approx(0.0));
  }
  CHECK(len == doctest::Approx(2.0));  // side length
  double blen = 0.0;
  for (int k = 0; k < 5; ++k) blen += face_node_weight(g2, kFaceBottom, k);
  CHECK(blen == doctest::Approx(1.0));
}

TEST_CASE("separable source bookkeeping") {
  const Grid g = interval_grid(51, 1.0);
  const SpaceTimeField R =
      SpaceTimeField::sample(g, TimeSpan::ZeroToT, [](Point, double t) { return std::cos(t); });
  const SpatialField f = SpatialField::sample(g, [](Point p) { return p.x; });
  const SourceSeparable s = make_source(f, R);
  CHECK(s.r == doctest::Approx(1.0));  // R(., 0) = 1
  CHECK(s.K > 0.0);
  CHECK(std::isfinite(s.K));

  const PotentialField pf = PotentialField::from_values(
      SpatialField::sample(g, [](Point p) { return p.x - 0.75; }));
  CHECK(pf.m == doctest::Approx(0.75));
}

TEST_CASE("space-time utility norms") {
  const Grid g = interval_grid(51);
  const SpaceTimeField one =
      SpaceTimeField::sample(g, TimeSpan::ZeroToT, [](Point, double) { return 1.0; });
  CHECK(l1t_l2x(one) == doctest::Approx(2.5).epsilon(1e-12));

  const std::vector<double> lin = SpatialField::sample(g, [](Point p) { return p.x; }).v;
  CHECK(grad_l2(g, lin) == doctest::Approx(1.0).epsilon(1e-10));
}
