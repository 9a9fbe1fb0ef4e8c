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

ObservationGeometry interval_geom() {
  return make_observation_geometry(make_interval(0.0, 1.0), {-1.0, 0.0}, 2.5);
}

Grid interval_grid(int nx) {
  return make_grid(make_interval(0.0, 1.0), nx, 1, 2.5, 0.9);
}

SpatialField unit_bump(const Grid& g, double center, double width, double amp) {
  return SpatialField::sample(g, [=](Point p) {
    const double u = (p.x - center) / width;
    return std::abs(u) < 1.0 ? amp * std::pow(1.0 - u * u, 3) : 0.0;
  });
}

SpaceTimeField unit_excitation(const Grid& g) {
  return SpaceTimeField::sample(g, TimeSpan::ZeroToT, [](Point, double) { return 1.0; });
}

double rel_spatial_error(const Grid& g, const SpatialField& a, const SpatialField& b) {
  double num = 0.0, den = 0.0;
  for (int k = 0; k < g.num_nodes(); ++k) {
    const double d = a.v[k] - b.v[k];
    num += g.node_weight(k) * d * d;
    den += g.node_weight(k) * b.v[k] * b.v[k];
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("forward and adjoint maps are exact transposes") {
  const ObservationGeometry geom = interval_geom();
  const Grid g = interval_grid(101);
  const SpatialField q = SpatialField::sample(g, [](Point p) { return 1.0 + 0.2 * p.x; });
  const SpaceTimeField R = unit_excitation(g);
  for (uint64_t seed : {1ull, 17ull}) {
    CHECK(adjoint_consistency(g, q, R, geom.gamma0, seed) <= 1e-8);
  }
}

TEST_CASE("forward map is linear and homogeneous") {
  const ObservationGeometry geom = interval_geom();
  const Grid g = interval_grid(101);
  const SpatialField q = SpatialField::sample(g, [](Point) { return 1.0; });
  const SpaceTimeField R = unit_excitation(g);

  const SpatialField f1 = unit_bump(g, 0.4, 0.15, 1.0);
  const SpatialField f2 = unit_bump(g, 0.65, 0.2, 0.7);
  SpatialField fsum = f1;
  for (size_t i = 0; i < fsum.v.size(); ++i) fsum.v[i] += f2.v[i];
  SpatialField f3 = f1;
  for (double& x : f3.v) x *= 3.0;

  const BoundaryFlux b1 = forward_map(g, q, R, f1, geom.gamma0);
  const BoundaryFlux b2 = forward_map(g, q, R, f2, geom.gamma0);
  const BoundaryFlux bsum = forward_map(g, q, R, fsum, geom.gamma0);
  const BoundaryFlux b3 = forward_map(g, q, R, f3, geom.gamma0);

  const double scale = b1.l2_norm();
  REQUIRE(scale > 0.0);
  for (size_t f = 0; f < bsum.faces.size(); ++f) {
    for (size_t i = 0; i < bsum.faces[f].v.size(); ++i) {
      CHECK(std::abs(bsum.faces[f].v[i] - (b1.faces[f].v[i] + b2.faces[f].v[i])) <=
            1e-12 * scale);
      CHECK(std::abs(b3.faces[f].v[i] - 3.0 * b1.faces[f].v[i]) <= 1e-12 * scale);
    }
  }

  CHECK(b3.h1_time_norm() == doctest::Approx(3.0 * b1.h1_time_norm()).epsilon(1e-12));
}

TEST_CASE("zero data reconstructs the zero source") {
  const ObservationGeometry geom = interval_geom();
  const Grid g = interval_grid(101);
  const SpatialField q = SpatialField::sample(g, [](Point) { return 1.0; });
  const SpaceTimeField R = unit_excitation(g);
  const Measurement m = synthesize_linear_measurement(geom, g, q, R, SpatialField::zeros(g),
                                                      0.0, 1);
  CHECK(m.data.l2_norm() == 0.0);
  ReconstructionConfig cfg;
  const ReconstructionResult res = reconstruct_source(m, cfg);
  CHECK(res.converged);
  for (double x : res.estimate.v) CHECK(x == 0.0);
}

TEST_CASE("synthesis is homogeneous in the source and keeps the truth") {
  const ObservationGeometry geom = interval_geom();
  const Grid g = interval_grid(101);
  const SpatialField q = SpatialField::sample(g, [](Point) { return 1.0; });
  const SpaceTimeField R = unit_excitation(g);
  const SpatialField f = unit_bump(g, 0.5, 0.1, 1.0);
  SpatialField f2 = f;
  for (double& x : f2.v) x *= 2.0;

  const Measurement m1 = synthesize_linear_measurement(geom, g, q, R, f, 0.0, 1);
  const Measurement m2 = synthesize_linear_measurement(geom, g, q, R, f2, 0.0, 1);
  CHECK(m1.truth.v == f.v);
  const double scale = m1.data.l2_norm();
  REQUIRE(scale > 0.0);
  for (size_t fc = 0; fc < m1.data.faces.size(); ++fc)
    for (size_t i = 0; i < m1.data.faces[fc].v.size(); ++i) {
      CHECK(std::abs(m2.data.faces[fc].v[i] - 2.0 * m1.data.faces[fc].v[i]) <= 1e-12 * scale);
    }

  // The excitation must keep |R(.,0)| bounded away from zero.
  const SpaceTimeField bad = SpaceTimeField::sample(
      g, TimeSpan::ZeroToT, [](Point, double t) { return std::sin(t); });
  CHECK_THROWS_AS(synthesize_linear_measurement(geom, g, q, bad, f, 0.0, 1),
                  std::invalid_argument);
}

TEST_CASE("a bump source is recovered from clean boundary flux") {
  const ObservationGeometry geom = interval_geom();
  const Grid g = interval_grid(101);
  const SpatialField q = SpatialField::sample(g, [](Point p) { return 1.0 + 0.2 * p.x; });
  const SpaceTimeField R = unit_excitation(g);
  const SpatialField f = unit_bump(g, 0.5, 0.1, 1.0);

  const Measurement m = synthesize_linear_measurement(geom, g, q, R, f, 0.0, 1);
  ReconstructionConfig cfg;
  cfg.reg = 1e-8;
  cfg.max_iters = 200;
  cfg.tol = 1e-10;
  const ReconstructionResult res = reconstruct_source(m, cfg);
  CHECK(res.converged);
  CHECK(res.iterations <= 200);
  CHECK(res.rel_error <= 0.05);
  REQUIRE(res.misfit_history.size() >= 2);
  CHECK(res.misfit_history.back() <= 1e-3 * res.misfit_history.front());
  CHECK(res.error_history.size() == res.misfit_history.size());
}

TEST_CASE("noise injection is calibrated and shape-stable") {
  const ObservationGeometry geom = interval_geom();
  const Grid g = interval_grid(101);
  const SpatialField q = SpatialField::sample(g, [](Point) { return 1.0; });
  const SpaceTimeField R = unit_excitation(g);
  const SpatialField f = unit_bump(g, 0.5, 0.1, 1.0);
  const Measurement clean = synthesize_linear_measurement(geom, g, q, R, f, 0.0, 1);

  const BoundaryFlux same = add_noise(clean.data, 0.0, 9);
  for (size_t fc = 0; fc < same.faces.size(); ++fc)
    CHECK(same.faces[fc].v == clean.data.faces[fc].v);

  // ||noisy - clean|| = level * ||clean|| measured in the data norm.
  auto diff_norm = [&](const BoundaryFlux& a) {
    BoundaryFlux d = a;
    for (size_t fc = 0; fc < d.faces.size(); ++fc)
      for (size_t i = 0; i < d.faces[fc].v.size(); ++i)
        d.faces[fc].v[i] -= clean.data.faces[fc].v[i];
    return d.l2_norm();
  };
  const BoundaryFlux n1 = add_noise(clean.data, 0.01, 9);
  const BoundaryFlux n2 = add_noise(clean.data, 0.02, 9);
  const double base = clean.data.l2_norm();
  CHECK(diff_norm(n1) == doctest::Approx(0.01 * base).epsilon(1e-10));
  CHECK(diff_norm(n2) == doctest::Approx(0.02 * base).epsilon(1e-10));

  // Same seed, doubled level: the perturbation doubles entrywise.
  for (size_t fc = 0; fc < n1.faces.size(); ++fc)
    for (size_t i = 0; i < n1.faces[fc].v.size(); ++i) {
      const double d1 = n1.faces[fc].v[i] - clean.data.faces[fc].v[i];
      const double d2 = n2.faces[fc].v[i] - clean.data.faces[fc].v[i];
      CHECK(d2 == doctest::Approx(2.0 * d1).epsilon(1e-10));
    }
}

TEST_CASE("reconstruction error grows with the noise level") {
  const ObservationGeometry geom = interval_geom();
  const Grid g = interval_grid(101);
  const SpatialField q = SpatialField::sample(g, [](Point) { return 1.0; });
  const SpaceTimeField R = unit_excitation(g);
  const SpatialField f = unit_bump(g, 0.5, 0.1, 1.0);

  std::vector<double> errs;
  for (double level : {0.0, 0.001, 0.01, 0.05}) {
    const Measurement m = synthesize_linear_measurement(geom, g, q, R, f, level, 9);
    ReconstructionConfig cfg;
    cfg.noise_level = level;
    const ReconstructionResult res = reconstruct_source(m, cfg);
    errs.push_back(res.rel_error);
  }
  for (size_t i = 1; i < errs.size(); ++i) CHECK(errs[i] >= 0.99 * errs[i - 1]);
  CHECK(errs.back() > errs.front());
}

TEST_CASE("coefficient recovery is exact when the guess already matches") {
  const ObservationGeometry geom = interval_geom();
  const Grid g = interval_grid(101);
  PotentialSetup setup{geom, g,
                       SpatialField::sample(g, [](Point p) { return 2.0 + 0.5 * std::cos(kPi * p.x); }),
                       SpatialField::zeros(g)};
  const SpatialField q_true = SpatialField::sample(g, [](Point) { return 1.0; });
  const PotentialMeasurement m =
      synthesize_potential_measurement(setup, q_true, q_true, 0.0, 1);
  ReconstructionConfig cfg;
  cfg.outer_iters = 3;
  const PotentialResult res = reconstruct_potential(m, cfg);
  CHECK(res.converged);
  CHECK(res.rel_error <= 1e-10);
}

TEST_CASE("a small coefficient bump is recovered by linearized least squares") {
  const ObservationGeometry geom = interval_geom();
  const Grid g = interval_grid(101);
  PotentialSetup setup{geom, g,
                       SpatialField::sample(g, [](Point p) { return 2.0 + 0.5 * std::cos(kPi * p.x); }),
                       SpatialField::zeros(g)};
  const SpatialField p_guess = SpatialField::sample(g, [](Point) { return 1.0; });
  SpatialField q_true = p_guess;
  const SpatialField bump = unit_bump(g, 0.5, 0.25, 0.1);
  for (size_t i = 0; i < q_true.v.size(); ++i) q_true.v[i] += bump.v[i];

  const PotentialMeasurement m =
      synthesize_potential_measurement(setup, q_true, p_guess, 0.0, 1);

  ReconstructionConfig cfg;
  cfg.outer_iters = 1;
  const PotentialResult one = reconstruct_potential(m, cfg);
  CHECK(one.rel_error <= 0.10);
  CHECK(one.outer_iterations == 1);

  cfg.outer_iters = 4;
  const PotentialResult four = reconstruct_potential(m, cfg);
  CHECK(four.rel_error <= 1.05 * one.rel_error);
  CHECK(four.converged);

  // The estimate carries actual spatial structure, not just the background.
  CHECK(rel_spatial_error(g, one.q_estimate, q_true) <= 0.10);
}

TEST_CASE("linearization residual of the coefficient-to-state map is tiny") {
  const Grid g = interval_grid(101);
  const SpatialField y0 =
      SpatialField::sample(g, [](Point p) { return 2.0 + 0.5 * std::cos(kPi * p.x); });
  const SpatialField y1 = SpatialField::zeros(g);
  const SpaceTimeField h_bc = SpaceTimeField::sample(
      g, TimeSpan::ZeroToT, [](Point p, double) { return 2.0 + 0.5 * std::cos(kPi * p.x); });
  const SpaceTimeField zero_src = SpaceTimeField::zeros(g, TimeSpan::ZeroToT);

  const SpatialField p = SpatialField::sample(g, [](Point) { return 1.0; });
  SpatialField q = p;
  const SpatialField bump = unit_bump(g, 0.5, 0.25, 0.1);
  for (size_t i = 0; i < q.v.size(); ++i) q.v[i] += bump.v[i];

  const SpaceTimeField yp = solve_dirichlet(g, p, zero_src, h_bc, y0, y1);
  const SpaceTimeField yq = solve_dirichlet(g, q, zero_src, h_bc, y0, y1);

  // The difference u = yq - yp satisfies the discrete wave equation with
  // coefficient q and right-hand side (p - q) yp, exactly up to round-off.
  double worst = 0.0, scale = 0.0;
  const double idt2 = 1.0 / (g.dt * g.dt);
  const double ih2 = 1.0 / (g.hx * g.hx);
  for (int l = 1; l < g.nt; ++l) {
    for (int k = 1; k < g.num_nodes() - 1; ++k) {
      const double u_c = yq.at(l, k) - yp.at(l, k);
      const double u_l = yq.at(l, k - 1) - yp.at(l, k - 1);
      const double u_r = yq.at(l, k + 1) - yp.at(l, k + 1);
      const double u_m = yq.at(l - 1, k) - yp.at(l - 1, k);
      const double u_p = yq.at(l + 1, k) - yp.at(l + 1, k);
      const double lhs = (u_p - 2.0 * u_c + u_m) * idt2 - (u_r - 2.0 * u_c + u_l) * ih2 +
                         q.v[k] * u_c;
      const double rhs = (p.v[k] - q.v[k]) * yp.at(l, k);
      worst = std::max(worst, std::abs(lhs - rhs));
      scale = std::max(scale, std::abs(yp.at(l, k)));
    }
  }
  CHECK(worst <= 1e-8 * scale);
}

TEST_CASE("flux-to-source ratios stay in a bounded band across an ensemble") {
  const ObservationGeometry geom = interval_geom();
  const Grid g = interval_grid(101);
  const SpatialField q = SpatialField::sample(g, [](Point) { return 1.0; });
  const SpaceTimeField R = unit_excitation(g);

  const StabilityScanReport rep = stability_scan(geom, g, q, R, geom.gamma0, 20, 2);
  CHECK(rep.ratios.size() == 20);
  CHECK(rep.c_low > 0.0);
  CHECK(rep.c_high >= rep.c_low);
  CHECK(std::isfinite(rep.c_high));
  CHECK(rep.spread() <= 50.0);
  for (double r : rep.ratios) {
    CHECK(r >= rep.c_low);
    CHECK(r <= rep.c_high);
  }

  CHECK_THROWS_AS(stability_scan(geom, g, q, R, geom.gamma0, 19, 2), std::invalid_argument);
}

TEST_CASE("coefficient stability constant validates on held-out perturbations") {
  const ObservationGeometry geom = interval_geom();
  const Grid g = interval_grid(101);
  PotentialSetup setup{geom, g,
                       SpatialField::sample(g, [](Point p) { return 2.0 + 0.5 * std::cos(kPi * p.x); }),
                       SpatialField::zeros(g)};
  const SpatialField p_base = SpatialField::sample(g, [](Point) { return 1.0; });

  const StabilityFit fit = potential_stability_fit(setup, p_base, 10, 0.1, 5);
  CHECK(fit.c_emp > 0.0);
  CHECK(std::isfinite(fit.c_emp));
  CHECK(fit.c_low > 0.0);
  CHECK(fit.c_high >= fit.c_low);
  CHECK(fit.validate_count == 5);
  CHECK(fit.violations == 0);
  CHECK(fit.ratios.size() == 10);

  CHECK_THROWS_AS(potential_stability_fit(setup, p_base, 3, 0.1, 5), std::invalid_argument);
}
