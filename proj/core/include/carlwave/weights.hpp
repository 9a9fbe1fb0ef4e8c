#pragma once

#include <string>
#include <utility>

#include "carlwave/geometry.hpp"

namespace carlwave {

/// Parameters of the exponential space-time weight
///   psi(x,t) = |x-x0|^2 - beta t^2 + C0,   phi = exp(lambda psi).
/// beta lies in (0,1) with beta T^2 > sup |x-x0|^2, alpha sits strictly
/// inside (2 beta / (beta+n), 2 / (beta+n)), C0 shifts psi to be >= 1 on the
/// whole slab, and eta is the width of the temporal band in which the cutoff
/// decays to zero.
struct CarlemanParams {
  Point x0;
  int n = 1;          // space dimension
  double T = 0.0;
  double beta = 0.0;
  double alpha = 0.0;
  double C0 = 0.0;
  double lambda = 0.0;
  double s = 0.0;
  double eta = 0.0;
};

double psi(const CarlemanParams& p, const Point& x, double t);
double phi(const CarlemanParams& p, const Point& x, double t);

/// Largest exponent lambda*psi accepted before exp(lambda*psi) is deemed
/// unusable in double precision.
inline constexpr double kWeightExponentLimit = 690.0;

/// Midpoint of (sup|x-x0|^2 / T^2, 1): valid whenever T exceeds the minimal
/// observation time.
double choose_beta(const Domain& dom, const Point& x0, double T);

/// Open admissibility interval for alpha.
std::pair<double, double> alpha_range(double beta, int n);

/// Midpoint of the alpha interval, (1+beta)/(beta+n).
double choose_alpha(double beta, int n);

/// C0 = 1 + beta T^2 - min |x-x0|^2, making min psi = 1 on Omega x [-T,T].
double choose_C0(const Domain& dom, const Point& x0, double beta, double T);

/// Half of T - sqrt(sup|x-x0|^2 / beta): within |t| in [T-eta, T] the weight
/// satisfies psi <= C0, so the cutoff band only sees small weights.
double choose_eta(const Domain& dom, const Point& x0, double beta, double T);

/// Full parameter set for a geometry: beta, alpha, C0, eta from the rules
/// above, lambda and s as given.
CarlemanParams choose_params(const ObservationGeometry& geom, double lambda, double s);

/// C^2 temporal cutoff: identically 1 on [-T+eta, T-eta], quintic smoothstep
/// decay to 0 at |t| = T with vanishing first and second derivatives at both
/// ends of the band.
struct Cutoff {
  double T = 0.0;
  double eta = 0.0;

  double value(double t) const;
  double deriv(double t) const;
  double second(double t) const;
};

/// Pseudoconvexity indicator evaluated with X = beta^2 t^2 - |x-x0|^2:
///   F = 32 lambda X^2 - 8 (alpha (beta+n) + 2 beta) X + 16 (1-beta) |x-x0|^2.
/// Positivity of F on the slab is what the zeroth-order lower bound needs.
double F_lambda(const CarlemanParams& p, const Point& x, double t);

/// Threshold lambda* = A^2 / (2 c*) with A = alpha (beta+n) + 2 beta and
/// c* = 16 (1-beta) min |x-x0|^2; for lambda > lambda* the quadratic
/// 32 lambda X^2 - 8 A X + c* is positive for every real X.
double lambda_threshold(const Domain& dom, const CarlemanParams& p);

struct WeightReport {
  bool beta_ok = false;
  bool alpha_ok = false;
  double psi_min = 0.0;        // over the scan grid
  bool psi_min_ok = false;     // psi_min >= 1 - tol
  bool band_ok = false;        // psi <= C0 on |t| in [T-eta, T]
  double F_min = 0.0;          // over the scan grid at the stored lambda
  std::string describe() const;
};

/// Scans psi, the cutoff band, and F over an n_scan-per-axis space-time grid.
WeightReport validate_params(const Domain& dom, const CarlemanParams& p, int n_scan = 201);

}  // namespace carlwave
