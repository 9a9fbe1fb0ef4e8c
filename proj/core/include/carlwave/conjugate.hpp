#pragma once

#include <array>
#include <string>
#include <vector>

#include "carlwave/wavesolver.hpp"
#include "carlwave/weights.hpp"

namespace carlwave {

/// All integrands carrying exp(2 s phi) are multiplied by
/// exp(-2 s phi_max); ratios and inequalities between weighted quantities
/// are unchanged and doubles never overflow. The bundle stores the shifted
/// weight exp(s (phi - phi_max)) <= 1 and the plain phi values.
///
/// Given v on the symmetric slab with w = e^{s phi} v, the conjugated free
/// wave operator splits as P w = P1 w + P2 w + R w with
///   P1 w = d_tt w - Lap w + s^2 l^2 phi^2 w (|d_t psi|^2 - |grad psi|^2)
///   P2 w = (a-1) s l phi w (d_tt psi - Lap psi)
///          - s l^2 phi w (|d_t psi|^2 - |grad psi|^2)
///          - 2 s l phi (d_t w d_t psi - grad w . grad psi)
///   R w  = -a s l phi w (d_tt psi - Lap psi).
/// Pw is also computed the other way, as e^{s phi} applied to the
/// differenced free operator of v; the mismatch between the two routes is
/// the discrete commutation error and decays like h^2.
struct ConjugatedBundle {
  Grid grid;
  CarlemanParams params;
  double scale_exponent = 0.0;  // s * phi_max, subtracted inside the exponential

  SpaceTimeField v;
  SpaceTimeField w;    // scaled: v * exp(s(phi - phi_max))
  SpaceTimeField P1w;
  SpaceTimeField P2w;
  SpaceTimeField Rw;
  SpaceTimeField Pw;   // conjugation route: exp(s(phi-phi_max)) * (d_tt - Lap) v

  // Cached discrete derivatives and weights shared by the identity checks.
  SpaceTimeField phi_v;    // phi(x,t)
  SpaceTimeField weight;   // exp(s(phi - phi_max))
  SpaceTimeField wt, wx, wy, wtt, lapw;
  SpaceTimeField vt, vx, vy, lapv, vtt;
};

/// Builds every field of the bundle from v (which must live on [-T,T],
/// vanish on the spatial boundary and at |t| = T).
ConjugatedBundle make_conjugated_bundle(const SpaceTimeField& v, const CarlemanParams& params);

/// Convenience single-operator applications (each builds the bundle).
SpaceTimeField apply_P1(const SpaceTimeField& v, const CarlemanParams& params);
SpaceTimeField apply_P2(const SpaceTimeField& v, const CarlemanParams& params);
SpaceTimeField apply_R(const SpaceTimeField& v, const CarlemanParams& params);

/// Relative L2 size of P1 w + P2 w + R w - Pw, i.e. the gap between the
/// closed-form expansion and the differenced conjugation. Decays like h^2.
double decomposition_residual(const ConjugatedBundle& b);

struct ConjugationCheck {
  double rel_residual = 0.0;
};
ConjugationCheck conjugation_identity_check(const SpaceTimeField& v, const CarlemanParams& params);

/// Cross-multiplied quadratic identity: given the P1, P2 fields,
///   int |P1w|^2 + int |P2w|^2 + 2 int P1w P2w = int |P1w + P2w|^2
/// where the right side plays the role of |Pw - Rw|^2 with Pw taken from the
/// closed-form expansion. Pure algebra, so the relative gap is round-off.
struct QuadraticCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double rel_gap = 0.0;
};
QuadraticCheck quadratic_identity_check(const ConjugatedBundle& b);

/// One integration-by-parts identity for the cross term
/// int (i-th P1 term)(k-th P2 term), i,k in {1,2,3}. The left side is the
/// direct product quadrature; the right side is the integrated-by-parts
/// closed form (boundary contribution included for i=2, k=3). Index pair
/// (3,2) needs no integration by parts and matches to round-off.
struct IbpGap {
  int i = 0, k = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double rel_gap = 0.0;
};
IbpGap ibp_identity_check(const ConjugatedBundle& b, int i, int k);
std::array<IbpGap, 9> ibp_identity_all(const ConjugatedBundle& b);

/// Weighted energy ledger of the estimate: every term is multiplied by
/// exp(-2 s phi_max) (see scale_exponent).
struct CarlemanLedger {
  double s = 0.0;
  double lambda = 0.0;
  double scale_exponent = 0.0;  // 2 s phi_max
  double lhs_gradient = 0.0;    // s l int e^{2s phi} (|v_t|^2 + |grad v|^2)
  double lhs_zero_order = 0.0;  // s^3 l^3 int e^{2s phi} |v|^2
  double lhs_P1 = 0.0;          // int |P1 w|^2
  double lhs_P2 = 0.0;          // int |P2 w|^2
  double rhs_residual = 0.0;    // int e^{2s phi} |d_tt v - Lap v + q v|^2
  double rhs_boundary = 0.0;    // s l int_{Gamma0} phi e^{2s phi} |dnu v|^2

  double lhs_total() const { return lhs_gradient + lhs_zero_order + lhs_P1 + lhs_P2; }
  double rhs_total() const { return rhs_residual + rhs_boundary; }
  double ratio() const;
};

CarlemanLedger carleman_ledger(const SpaceTimeField& v, const PotentialField& p,
                               const CarlemanParams& params, const ObservationGeometry& geom);

/// Admissible test functions: cutoff(t) * random C2 time window * random
/// low-frequency sine series in space, deterministic in (seed, index).
std::vector<SpaceTimeField> make_test_suite(const ObservationGeometry& geom, const Grid& grid,
                                            double eta, int count, uint64_t seed);

struct LedgerRow {
  double s = 0.0;
  double lambda = 0.0;
  int func = 0;
  CarlemanLedger ledger;
};

struct ThresholdReport {
  bool found = false;
  double s0 = 0.0;
  double lambda0 = 0.0;
  double M = 0.0;
  int plateau_points = 0;  // number of scanned s values >= s0
  std::vector<LedgerRow> rows;
  std::string diagnostic;
};

/// Scans the ledger ratio over (s, lambda) for the whole suite and returns
/// the smallest grid pair after which the ratio stays finite and
/// non-increasing in s (5% slack per step) for every suite member. M is the
/// largest ratio seen on the plateau.
ThresholdReport estimate_thresholds(const std::vector<SpaceTimeField>& suite,
                                    const PotentialField& p, const ObservationGeometry& geom,
                                    const std::vector<double>& s_grid,
                                    const std::vector<double>& lambda_grid, int threads = 1);

/// Weighted initial-trace inequality scan: for the time-derivative system z
/// of a source f R, with v = cutoff * even extension of z, compares
///   int e^{2s phi(.,0)} |f R(.,0)|^2
/// against (1/sqrt(s)) int e^{2s phi} |Lv|^2 + sqrt(s) int_{Gamma0} e^{2s phi}
/// |dnu v|^2 for each s in the scan. All terms carry the exp(-2 s phi_max)
/// scale.
struct Step3Row {
  double s = 0.0;
  double lhs = 0.0;
  double interior = 0.0;  // int e^{2s phi} |Lv|^2
  double boundary = 0.0;  // int_{Gamma0} e^{2s phi} |dnu v|^2
  double majorant() const;
  double ratio() const;
};

struct Step3Report {
  std::vector<Step3Row> rows;
  double M_fit = 0.0;  // max ratio over the upper half of the scan
};

Step3Report step3_inequality_check(const SpatialField& f, const SpaceTimeField& R,
                                   const PotentialField& q, const ObservationGeometry& geom,
                                   const Grid& grid, double lambda,
                                   const std::vector<double>& s_grid);

}  // namespace carlwave
