#include "carlwave/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "carlwave/errors.hpp"

namespace carlwave {

namespace {

double sup_dist2(const Domain& dom, const Point& x0) {
  double v = min_observation_time(dom, x0);
  return v * v;
}

double min_dist2(const Domain& dom, const Point& x0) {
  double v = distance_to_domain(dom, x0);
  return v * v;
}

// Quintic smoothstep: S(0)=0, S(1)=1, S'=S''=0 at both ends.
double smoothstep5(double u) { return u * u * u * (10.0 + u * (-15.0 + 6.0 * u)); }
double smoothstep5_d(double u) { return 30.0 * u * u * (1.0 + u * (-2.0 + u)); }
double smoothstep5_dd(double u) { return 60.0 * u * (1.0 + u * (-3.0 + 2.0 * u)); }

}  // namespace

double psi(const CarlemanParams& p, const Point& x, double t) {
  const double dx = x.x - p.x0.x;
  const double dy = (p.n == 2) ? x.y - p.x0.y : 0.0;
  return dx * dx + dy * dy - p.beta * t * t + p.C0;
}

double phi(const CarlemanParams& p, const Point& x, double t) {
  const double e = p.lambda * psi(p, x, t);
  if (e > kWeightExponentLimit) {
    throw NumericalError("s,lambda too large for double-precision ledger");
  }
  return std::exp(e);
}

double choose_beta(const Domain& dom, const Point& x0, double T) {
  if (T <= 0.0) throw std::invalid_argument("time horizon must be positive");
  const double ratio = sup_dist2(dom, x0) / (T * T);
  if (ratio >= 1.0) {
    throw std::invalid_argument("time horizon too short: T must exceed sup |x-x0|");
  }
  return 0.5 * (ratio + 1.0);
}

std::pair<double, double> alpha_range(double beta, int n) {
  return {2.0 * beta / (beta + n), 2.0 / (beta + n)};
}

double choose_alpha(double beta, int n) { return (1.0 + beta) / (beta + n); }

double choose_C0(const Domain& dom, const Point& x0, double beta, double T) {
  return 1.0 + beta * T * T - min_dist2(dom, x0);
}

double choose_eta(const Domain& dom, const Point& x0, double beta, double T) {
  const double reach = std::sqrt(sup_dist2(dom, x0) / beta);
  const double slack = T - reach;
  if (slack <= 0.0) throw std::invalid_argument("no admissible cutoff band: beta T^2 <= sup |x-x0|^2");
  return 0.5 * slack;
}

CarlemanParams choose_params(const ObservationGeometry& geom, double lambda, double s) {
  CarlemanParams p;
  p.x0 = geom.x0;
  p.n = geom.domain.dim;
  p.T = geom.T;
  p.beta = choose_beta(geom.domain, geom.x0, geom.T);
  p.alpha = choose_alpha(p.beta, p.n);
  p.C0 = choose_C0(geom.domain, geom.x0, p.beta, geom.T);
  p.eta = choose_eta(geom.domain, geom.x0, p.beta, geom.T);
  p.lambda = lambda;
  p.s = s;
  return p;
}

double Cutoff::value(double t) const {
  const double a = std::abs(t);
  if (a >= T) return 0.0;
  if (a <= T - eta) return 1.0;
  return smoothstep5((T - a) / eta);
}

double Cutoff::deriv(double t) const {
  const double a = std::abs(t);
  if (a >= T || a <= T - eta) return 0.0;
  const double sign = (t >= 0.0) ? 1.0 : -1.0;
  return -sign * smoothstep5_d((T - a) / eta) / eta;
}

double Cutoff::second(double t) const {
  const double a = std::abs(t);
  if (a >= T || a <= T - eta) return 0.0;
  return smoothstep5_dd((T - a) / eta) / (eta * eta);
}

double F_lambda(const CarlemanParams& p, const Point& x, double t) {
  const double dx = x.x - p.x0.x;
  const double dy = (p.n == 2) ? x.y - p.x0.y : 0.0;
  const double d2 = dx * dx + dy * dy;
  const double X = p.beta * p.beta * t * t - d2;
  const double A = p.alpha * (p.beta + p.n) + 2.0 * p.beta;
  return 32.0 * p.lambda * X * X - 8.0 * A * X + 16.0 * (1.0 - p.beta) * d2;
}

double lambda_threshold(const Domain& dom, const CarlemanParams& p) {
  const double A = p.alpha * (p.beta + p.n) + 2.0 * p.beta;
  const double cstar = 16.0 * (1.0 - p.beta) * min_dist2(dom, p.x0);
  if (cstar <= 0.0) throw std::invalid_argument("focusing point must be strictly outside the closure");
  return A * A / (2.0 * cstar);
}

std::string WeightReport::describe() const {
  std::ostringstream os;
  os << "beta_ok=" << beta_ok << " alpha_ok=" << alpha_ok << " psi_min=" << psi_min
     << " band_ok=" << band_ok << " F_min=" << F_min;
  return os.str();
}

WeightReport validate_params(const Domain& dom, const CarlemanParams& p, int n_scan) {
  WeightReport r;
  r.beta_ok = p.beta > 0.0 && p.beta < 1.0 && p.beta * p.T * p.T > sup_dist2(dom, p.x0);
  const auto [alo, ahi] = alpha_range(p.beta, p.n);
  r.alpha_ok = p.alpha > alo && p.alpha < ahi;

  const double tol = 1e-12;
  double psi_min = std::numeric_limits<double>::infinity();
  double F_min = std::numeric_limits<double>::infinity();
  bool band_ok = true;
  const int nt = n_scan;
  for (int it = 0; it < nt; ++it) {
    const double t = -p.T + 2.0 * p.T * it / (nt - 1);
    for (int i = 0; i < n_scan; ++i) {
      const double x = dom.lo[0] + (dom.hi[0] - dom.lo[0]) * i / (n_scan - 1);
      const int jmax = (dom.dim == 2) ? n_scan : 1;
      for (int j = 0; j < jmax; ++j) {
        Point pt{x, 0.0};
        if (dom.dim == 2) pt.y = dom.lo[1] + (dom.hi[1] - dom.lo[1]) * j / (n_scan - 1);
        const double ps = psi(p, pt, t);
        psi_min = std::min(psi_min, ps);
        F_min = std::min(F_min, F_lambda(p, pt, t));
        if (std::abs(t) >= p.T - p.eta && ps > p.C0 + tol) band_ok = false;
      }
    }
  }
  r.psi_min = psi_min;
  r.psi_min_ok = psi_min >= 1.0 - 1e-12;
  r.band_ok = band_ok;
  r.F_min = F_min;
  return r;
}

}  // namespace carlwave
