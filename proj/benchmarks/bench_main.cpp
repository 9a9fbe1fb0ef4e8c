// Microbenchmarks for the hot paths: the leapfrog solve, the weighted-ledger
// evaluation behind the threshold scans, and one normal-equation step of the
// reconstruction.

#include <benchmark/benchmark.h>

#include <cmath>

#include "carlwave/conjugate.hpp"
#include "carlwave/geometry.hpp"
#include "carlwave/inversion.hpp"
#include "carlwave/wavesolver.hpp"
#include "carlwave/weights.hpp"

using namespace carlwave;

namespace {

constexpr double kPi = 3.14159265358979323846;

ObservationGeometry lab_geom() {
  return make_observation_geometry(make_interval(0.0, 1.0), {-1.0, 0.0}, 2.5);
}

Grid lab_grid(int nx) { return make_grid(make_interval(0.0, 1.0), nx, 1, 2.5, 0.9); }

void BM_DirichletSolve(benchmark::State& state) {
  const Grid g = lab_grid(static_cast<int>(state.range(0)));
  const SpatialField q = SpatialField::sample(g, [](Point p) { return 1.0 + 0.2 * p.x; });
  const SpaceTimeField zero_st = SpaceTimeField::zeros(g, TimeSpan::ZeroToT);
  const SpatialField y0 = SpatialField::zeros(g);
  const SpatialField y1 =
      SpatialField::sample(g, [](Point p) { return kPi * std::sin(kPi * p.x); });
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_dirichlet(g, q, zero_st, zero_st, y0, y1));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(g.nt) * g.num_nodes());
}
BENCHMARK(BM_DirichletSolve)->Arg(101)->Arg(201);

void BM_LedgerEvaluation(benchmark::State& state) {
  const ObservationGeometry geom = lab_geom();
  const Grid g = lab_grid(static_cast<int>(state.range(0)));
  const CarlemanParams p = choose_params(geom, 0.2, 16.0);
  const SpaceTimeField v = make_test_suite(geom, g, p.eta, 1, 42)[0];
  const PotentialField q =
      PotentialField::from_values(SpatialField::sample(g, [](Point) { return 1.0; }));
  for (auto _ : state) {
    benchmark::DoNotOptimize(carleman_ledger(v, q, p, geom));
  }
}
BENCHMARK(BM_LedgerEvaluation)->Arg(101)->Arg(201);

void BM_BundleConstruction(benchmark::State& state) {
  const ObservationGeometry geom = lab_geom();
  const Grid g = lab_grid(static_cast<int>(state.range(0)));
  const CarlemanParams p = choose_params(geom, 0.1, 1.0);
  const SpaceTimeField v = make_test_suite(geom, g, p.eta, 1, 42)[0];
  for (auto _ : state) {
    benchmark::DoNotOptimize(make_conjugated_bundle(v, p));
  }
}
BENCHMARK(BM_BundleConstruction)->Arg(101);

void BM_NormalEquationStep(benchmark::State& state) {
  const ObservationGeometry geom = lab_geom();
  const Grid g = lab_grid(static_cast<int>(state.range(0)));
  const SpatialField q = SpatialField::sample(g, [](Point) { return 1.0; });
  const SpaceTimeField R =
      SpaceTimeField::sample(g, TimeSpan::ZeroToT, [](Point, double) { return 1.0; });
  const SpatialField f = SpatialField::sample(g, [](Point p) {
    const double u = (p.x - 0.5) / 0.1;
    return std::abs(u) < 1.0 ? std::pow(1.0 - u * u, 3) : 0.0;
  });
  for (auto _ : state) {
    const BoundaryFlux flux = forward_map(g, q, R, f, geom.gamma0);
    benchmark::DoNotOptimize(adjoint_map(g, q, R, flux));
  }
}
BENCHMARK(BM_NormalEquationStep)->Arg(101)->Arg(201);

}  // namespace

BENCHMARK_MAIN();
