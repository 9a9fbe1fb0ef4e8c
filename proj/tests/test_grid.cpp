#include <cmath>
#include <limits>
#include <stdexcept>

#include "carlwave/grid.hpp"
#include "doctest.h"

using namespace carlwave;

TEST_CASE("time step obeys the CFL bound and divides T exactly") {
  const Grid g = make_grid(make_interval(0.0, 1.0), 201, 1, 2.5, 0.9);
  CHECK(g.nx == 201);
  CHECK(g.ny == 1);
  CHECK(g.hx == doctest::Approx(0.005));
  CHECK(g.nt == 556);
  CHECK(g.dt == doctest::Approx(2.5 / 556.0));
  CHECK(g.dt * g.nt == doctest::Approx(2.5).epsilon(1e-14));
  const double limit = 0.9 * g.hx;
  CHECK(g.dt <= limit * (1.0 + 1e-12));
  // nt is minimal: one fewer interval would violate the bound.
  CHECK(2.5 / (g.nt - 1) > limit);
}

TEST_CASE("CFL bound carries the sqrt(dim) factor in 2D") {
  const Grid g = make_grid(make_rectangle(0.0, 1.0, 0.0, 1.0), 51, 51, 2.5, 0.9);
  CHECK(g.hx == doctest::Approx(0.02));
  CHECK(g.hy == doctest::Approx(0.02));
  const double limit = 0.9 * 0.02 / std::sqrt(2.0);
  CHECK(g.nt == 197);
  CHECK(g.dt <= limit * (1.0 + 1e-12));
  CHECK(2.5 / (g.nt - 1) > limit);
}

TEST_CASE("anisotropic grids use the smaller step") {
  const Grid g = make_grid(make_rectangle(0.0, 2.0, 0.0, 1.0), 5, 9, 1.0, 0.9);
  CHECK(g.hx == doctest::Approx(0.5));
  CHECK(g.hy == doctest::Approx(0.125));
  CHECK(g.h_min() == doctest::Approx(0.125));
  CHECK(g.dt <= 0.9 * 0.125 / std::sqrt(2.0) * (1.0 + 1e-12));
}

TEST_CASE("nodes cover the closed domain") {
  const Grid g = make_grid(make_interval(0.25, 1.75), 7, 1, 1.0, 0.9);
  CHECK(g.node(0, 0).x == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(g.node(g.nx - 1, 0).x == doctest::Approx(1.75).epsilon(1e-14));
  CHECK(g.is_boundary(0, 0));
  CHECK(g.is_boundary(g.nx - 1, 0));
  CHECK_FALSE(g.is_boundary(3, 0));

  const Grid g2 = make_grid(make_rectangle(0.0, 1.0, -1.0, 1.0), 5, 5, 1.0, 0.9);
  CHECK(g2.node(0, 0).y == doctest::Approx(-1.0));
  CHECK(g2.node(4, 4).x == doctest::Approx(1.0));
  CHECK(g2.node(4, 4).y == doctest::Approx(1.0));
  CHECK(g2.is_boundary(2, 0));
  CHECK(g2.is_boundary(0, 2));
  CHECK_FALSE(g2.is_boundary(2, 2));

  // Flat-index accessors agree with the (i, j) pair.
  const int idx = g2.index(3, 2);
  CHECK(g2.node(idx).x == doctest::Approx(g2.node(3, 2).x));
  CHECK(g2.node(idx).y == doctest::Approx(g2.node(3, 2).y));
  CHECK(g2.is_boundary(idx) == g2.is_boundary(3, 2));
}

TEST_CASE("grid construction rejects unusable inputs") {
  const Domain dom = make_interval(0.0, 1.0);
  CHECK_THROWS_AS(make_grid(dom, 3, 1, 1.0, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(make_grid(dom, 11, 1, 0.0, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(make_grid(dom, 11, 1, 1.0, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(make_grid(make_rectangle(0, 1, 0, 1), 11, 3, 1.0, 0.9), std::invalid_argument);
}

TEST_CASE("trapezoidal weights integrate exactly what they should") {
  const Grid g = make_grid(make_interval(0.0, 1.0), 11, 1, 1.0, 0.9);
  double total = 0.0, first = 0.0;
  for (int i = 0; i < g.nx; ++i) {
    total += g.quad_weight(i, 0);
    first += g.quad_weight(i, 0) * g.node(i, 0).x;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));   // measure of the domain
  CHECK(first == doctest::Approx(0.5).epsilon(1e-14));   // linear functions are exact
  CHECK(g.node_weight(g.index(3, 0)) == doctest::Approx(g.quad_weight(3, 0)));

  const Grid g2 = make_grid(make_rectangle(0.0, 2.0, 0.0, 1.0), 9, 5, 1.0, 0.9);
  double area = 0.0;
  for (int j = 0; j < g2.ny; ++j)
    for (int i = 0; i < g2.nx; ++i) area += g2.quad_weight(i, j);
  CHECK(area == doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("spatial field sampling and norms") {
  const Grid g = make_grid(make_interval(0.0, 1.0), 201, 1, 1.0, 0.9);
  const SpatialField one = SpatialField::sample(g, [](Point) { return 1.0; });
  CHECK(space_l2(g, one.v) == doctest::Approx(1.0).epsilon(1e-13));

  const SpatialField lin = SpatialField::sample(g, [](Point p) { return p.x; });
  CHECK(space_l2(g, lin.v) == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-4));
  CHECK(lin.max_abs() == doctest::Approx(1.0));

  const SpatialField z = SpatialField::zeros(g);
  CHECK(space_l2(g, z.v) == doctest::Approx(0.0));
}

TEST_CASE("space-time fields know their level layout") {
  const Grid g = make_grid(make_interval(0.0, 1.0), 11, 1, 1.0, 0.9);

  SpaceTimeField a = SpaceTimeField::zeros(g, TimeSpan::ZeroToT);
  CHECK(a.levels() == g.nt + 1);
  CHECK(a.time(0) == doctest::Approx(0.0));
  CHECK(a.time(g.nt) == doctest::Approx(1.0));

  SpaceTimeField b = SpaceTimeField::zeros(g, TimeSpan::SymmetricT);
  CHECK(b.levels() == 2 * g.nt + 1);
  CHECK(b.time(0) == doctest::Approx(-1.0));
  CHECK(b.time(g.nt) == doctest::Approx(0.0));
  CHECK(b.time(2 * g.nt) == doctest::Approx(1.0));

  // Level-major storage: at() reads the same memory level_data points to.
  SpaceTimeField s = SpaceTimeField::sample(
      g, TimeSpan::ZeroToT, [](Point p, double t) { return p.x + 10.0 * t; });
  CHECK(s.at(3, 5) == doctest::Approx(s.level_data(3)[5]));
  CHECK(s.at(3, 5) == doctest::Approx(g.node(5, 0).x + 10.0 * s.time(3)));

  CHECK(s.time_weight(0) == doctest::Approx(0.5 * g.dt));
  CHECK(s.time_weight(1) == doctest::Approx(g.dt));
  CHECK(s.time_weight(s.levels() - 1) == doctest::Approx(0.5 * g.dt));

  CHECK_FALSE(s.has_nan());
  s.at(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK(s.has_nan());
}

TEST_CASE("space-time norms") {
  const Grid g = make_grid(make_interval(0.0, 1.0), 51, 1, 2.5, 0.9);
  const SpaceTimeField one =
      SpaceTimeField::sample(g, TimeSpan::ZeroToT, [](Point, double) { return 1.0; });
  CHECK(spacetime_l2(one) == doctest::Approx(std::sqrt(2.5)).epsilon(1e-12));
  CHECK(space_l2(one, 0) == doctest::Approx(1.0).epsilon(1e-13));

  const SpaceTimeField sym =
      SpaceTimeField::sample(g, TimeSpan::SymmetricT, [](Point, double) { return 1.0; });
  CHECK(spacetime_l2(sym) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));

  SpaceTimeField scaled = one;
  for (double& v : scaled.v) v *= 1.1;
  CHECK(rel_l2_error(scaled, one) == doctest::Approx(0.1).epsilon(1e-10));
  CHECK(rel_l2_error(one, one) == doctest::Approx(0.0));
}
