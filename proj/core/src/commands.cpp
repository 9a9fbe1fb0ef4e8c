#include "carlwave/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "carlwave/config.hpp"
#include "carlwave/conjugate.hpp"
#include "carlwave/errors.hpp"
#include "carlwave/geometry.hpp"
#include "carlwave/grid.hpp"
#include "carlwave/inversion.hpp"
#include "carlwave/io.hpp"
#include "carlwave/presets.hpp"
#include "carlwave/weights.hpp"
#include "json.hpp"

namespace carlwave {

namespace {

using nlohmann::json;

json json_num(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k = {
        "geometry.dim", "geometry.x_min", "geometry.x_max", "geometry.y_min", "geometry.y_max",
        "geometry.x0_x", "geometry.x0_y", "geometry.time",
        "discretization.nx", "discretization.ny", "discretization.cfl_fraction",
        "carleman.beta", "carleman.alpha", "carleman.eta", "carleman.lambda",
        "carleman.lambda_grid", "carleman.s_grid", "carleman.suite_size",
        "carleman.identity_tol_factor",
        "problem.excitation", "problem.excitation_omega", "problem.excitation_rate",
        "problem.flux_csv",
        "inversion.reg", "inversion.max_iters", "inversion.tol", "inversion.noise",
        "inversion.outer_iters",
        "stability.ensemble", "stability.eps", "stability.regularity_ensemble",
        "output.prefix",
    };
    for (const char* f : {"potential", "source", "y0", "y1", "p_guess"}) {
      const std::string base = std::string("problem.") + f;
      k.insert(base);
      for (const char* suffix : {"_amp", "_base", "_center_x", "_center_y", "_width"}) {
        k.insert(base + suffix);
      }
    }
    return k;
  }();
  return keys;
}

ProfileSpec read_profile(const Config& cfg, const std::string& name, const ProfileSpec& def) {
  ProfileSpec s = def;
  s.kind = cfg.get_string("problem", name, def.kind);
  s.amp = cfg.get_double("problem", name + "_amp", def.amp);
  s.base = cfg.get_double("problem", name + "_base", def.base);
  s.center.x = cfg.get_double("problem", name + "_center_x", def.center.x);
  s.center.y = cfg.get_double("problem", name + "_center_y", def.center.y);
  s.width = cfg.get_double("problem", name + "_width", def.width);
  return s;
}

/// Everything the commands share: validated geometry, grid, and the problem
/// fields named in the config.
struct Lab {
  Config cfg;
  ObservationGeometry geom;
  Grid grid;
  SpatialField q;   // zero-order coefficient (the true one for recovery runs)
  SpatialField f;   // source spatial factor
  SpaceTimeField R; // excitation
  SpatialField y0, y1;
  std::string prefix;
  std::filesystem::path out;
  RunManifest manifest;

  std::string path(const std::string& name) const { return (out / (prefix + name)).string(); }
  void record(const std::string& name) { manifest.outputs.push_back(prefix + name); }
};

Lab make_lab(const RunOptions& opt, const std::string& command) {
  if (opt.config_path.empty()) throw ConfigError("missing --config PATH");
  if (opt.threads < 1) throw ConfigError("--threads must be >= 1");
  Lab lab;
  lab.cfg = Config::load(opt.config_path);
  lab.cfg.reject_unknown(known_keys());
  const Config& cfg = lab.cfg;

  const int dim = cfg.get_int("geometry", "dim", 1);
  if (dim != 1 && dim != 2) throw ConfigError("field geometry.dim: must be 1 or 2");
  const double x_min = cfg.get_double("geometry", "x_min", 0.0);
  const double x_max = cfg.get_double("geometry", "x_max", 1.0);
  if (!(x_max > x_min)) throw ConfigError("field geometry.x_max: must exceed x_min");
  Domain dom;
  double y_min = 0.0, y_max = 1.0;
  if (dim == 1) {
    dom = make_interval(x_min, x_max);
  } else {
    y_min = cfg.get_double("geometry", "y_min", 0.0);
    y_max = cfg.get_double("geometry", "y_max", 1.0);
    if (!(y_max > y_min)) throw ConfigError("field geometry.y_max: must exceed y_min");
    dom = make_rectangle(x_min, x_max, y_min, y_max);
  }

  Point x0{cfg.get_double("geometry", "x0_x", x_min - (x_max - x_min)),
           dim == 2 ? cfg.get_double("geometry", "x0_y", y_min - (y_max - y_min)) : 0.0};

  double T;
  if (cfg.is_auto("geometry", "time")) {
    T = 1.25 * min_observation_time(dom, x0);
  } else {
    T = cfg.get_double("geometry", "time", 0.0);
  }
  lab.geom = make_observation_geometry(dom, x0, T);
  const GeometryReport geo = validate_geometry(lab.geom);
  if (!geo.ok()) throw ConfigError("field geometry: " + geo.describe());

  const int nx = cfg.get_int("discretization", "nx", 201);
  const int ny = cfg.get_int("discretization", "ny", dim == 2 ? nx : 1);
  const double cfl = cfg.get_double("discretization", "cfl_fraction", 0.9);
  lab.grid = make_grid(dom, nx, ny, T, cfl);

  lab.q = make_profile(lab.grid, read_profile(cfg, "potential", {"constant", 1.0, 1.0, {0.5, 0.5}, 0.25}));
  lab.f = make_profile(lab.grid, read_profile(cfg, "source", {"bump", 1.0, 0.0, {0.5, 0.5}, 0.1}));
  lab.y0 = make_profile(lab.grid, read_profile(cfg, "y0", {"offset_cosine", 0.5, 2.0, {0.5, 0.5}, 0.25}));
  lab.y1 = make_profile(lab.grid, read_profile(cfg, "y1", {"zero", 0.0, 0.0, {0.5, 0.5}, 0.25}));

  ExcitationSpec ex;
  ex.kind = cfg.get_string("problem", "excitation", "one");
  ex.omega = cfg.get_double("problem", "excitation_omega", 1.0);
  ex.rate = cfg.get_double("problem", "excitation_rate", 1.0);
  lab.R = make_excitation(lab.grid, ex);

  lab.prefix = cfg.get_string("output", "prefix", "");
  if (!lab.prefix.empty() && lab.prefix.back() != '_') lab.prefix += '_';
  lab.out = opt.out_dir.empty() ? "." : opt.out_dir;
  std::error_code ec;
  std::filesystem::create_directories(lab.out, ec);
  if (ec) throw ConfigError("cannot create output directory '" + lab.out.string() + "'");

  lab.manifest.command = command;
  lab.manifest.config_hash = cfg.hash_hex();
  lab.manifest.seed = opt.seed;
  lab.manifest.threads = opt.threads;
  lab.manifest.started_utc = utc_now();
  return lab;
}

/// Carleman parameters for (lambda, s) with optional config overrides of
/// beta, alpha, eta (beta overrides recompute C0 to keep min psi = 1).
CarlemanParams params_from_config(const Lab& lab, double lambda, double s) {
  CarlemanParams p = choose_params(lab.geom, lambda, s);
  const Config& cfg = lab.cfg;
  if (!cfg.is_auto("carleman", "beta")) {
    p.beta = cfg.get_double("carleman", "beta", p.beta);
    p.C0 = choose_C0(lab.geom.domain, lab.geom.x0, p.beta, lab.geom.T);
  }
  if (!cfg.is_auto("carleman", "alpha")) p.alpha = cfg.get_double("carleman", "alpha", p.alpha);
  if (!cfg.is_auto("carleman", "eta")) p.eta = cfg.get_double("carleman", "eta", p.eta);
  return p;
}

void write_effective_config(Lab& lab) {
  Config eff = lab.cfg;
  eff.set("geometry", "dim", std::to_string(lab.geom.domain.dim));
  eff.set_double("geometry", "x_min", lab.geom.domain.lo[0]);
  eff.set_double("geometry", "x_max", lab.geom.domain.hi[0]);
  if (lab.geom.domain.dim == 2) {
    eff.set_double("geometry", "y_min", lab.geom.domain.lo[1]);
    eff.set_double("geometry", "y_max", lab.geom.domain.hi[1]);
  }
  eff.set_double("geometry", "x0_x", lab.geom.x0.x);
  if (lab.geom.domain.dim == 2) eff.set_double("geometry", "x0_y", lab.geom.x0.y);
  eff.set_double("geometry", "time", lab.geom.T);
  eff.set("discretization", "nx", std::to_string(lab.grid.nx));
  if (lab.geom.domain.dim == 2) eff.set("discretization", "ny", std::to_string(lab.grid.ny));
  const CarlemanParams p = params_from_config(lab, 0.0, 0.0);
  eff.set_double("carleman", "beta", p.beta);
  eff.set_double("carleman", "alpha", p.alpha);
  eff.set_double("carleman", "eta", p.eta);

  std::ofstream out(lab.path("effective_config.cfg"), std::ios::binary);
  if (!out) throw ConfigError("cannot write effective config");
  out << eff.canonical_text();
  lab.record("effective_config.cfg");
}

void finish(Lab& lab) {
  write_effective_config(lab);
  lab.manifest.finished_utc = utc_now();
  write_manifest(lab.out.string(), lab.manifest);
}

void write_json(Lab& lab, const std::string& name, const json& j) {
  std::ofstream out(lab.path(name), std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + name + "'");
  out << j.dump(2) << "\n";
  lab.record(name);
}

SpaceTimeField constant_in_time(const Grid& g, const SpatialField& u) {
  SpaceTimeField out = SpaceTimeField::zeros(g, TimeSpan::ZeroToT);
  for (int l = 0; l < out.levels(); ++l)
    for (int k = 0; k < g.num_nodes(); ++k) out.at(l, k) = u.v[k];
  return out;
}

ReconstructionConfig inversion_config(const Lab& lab, uint64_t seed) {
  ReconstructionConfig rc;
  rc.reg = lab.cfg.get_double("inversion", "reg", 1e-8);
  rc.max_iters = lab.cfg.get_int("inversion", "max_iters", 200);
  rc.tol = lab.cfg.get_double("inversion", "tol", 1e-10);
  rc.noise_level = lab.cfg.get_double("inversion", "noise", 0.0);
  rc.outer_iters = lab.cfg.get_int("inversion", "outer_iters", 1);
  rc.seed = seed;
  if (rc.reg < 0.0) throw ConfigError("field inversion.reg: must be >= 0");
  if (rc.max_iters < 1) throw ConfigError("field inversion.max_iters: must be >= 1");
  return rc;
}

void write_history_csv(Lab& lab, const std::string& name, const std::vector<double>& misfits,
                       const std::vector<double>& errors) {
  std::vector<std::string> header = {"iter", "misfit"};
  const bool with_error = errors.size() == misfits.size();
  if (with_error) header.push_back("rel_error");
  std::vector<std::vector<double>> rows;
  rows.reserve(misfits.size());
  for (size_t i = 0; i < misfits.size(); ++i) {
    std::vector<double> row = {static_cast<double>(i), misfits[i]};
    if (with_error) row.push_back(errors[i]);
    rows.push_back(std::move(row));
  }
  write_csv(lab.path(name), header, rows);
  lab.record(name);
}

std::vector<int> complement_faces(const ObservationGeometry& geom) {
  std::vector<int> out;
  for (int f = 0; f < geom.domain.face_count(); ++f) {
    if (std::find(geom.gamma0.begin(), geom.gamma0.end(), f) == geom.gamma0.end()) {
      out.push_back(f);
    }
  }
  return out;
}

json geometry_json(const Lab& lab) {
  const GeometryReport geo = validate_geometry(lab.geom);
  json j;
  j["dim"] = lab.geom.domain.dim;
  j["time"] = lab.geom.T;
  j["x0"] = {lab.geom.x0.x, lab.geom.x0.y};
  j["observed_faces"] = lab.geom.gamma0;
  j["x0_margin"] = geo.x0_margin;
  j["time_margin"] = geo.time_margin;
  return j;
}

}  // namespace

int cmd_forward(const RunOptions& opt) {
  Lab lab = make_lab(opt, "forward");
  const Grid& g = lab.grid;

  const SpaceTimeField zero_src = SpaceTimeField::zeros(g, TimeSpan::ZeroToT);
  const SpaceTimeField h_bc = constant_in_time(g, lab.y0);
  const SpaceTimeField y = solve_dirichlet(g, lab.q, zero_src, h_bc, lab.y0, lab.y1);
  const BoundaryFlux state_flux = normal_flux(y, lab.geom.gamma0);

  const SpaceTimeField u = solve_source(g, lab.q, lab.f, lab.R);
  const SpaceTimeField z = solve_time_derivative(g, lab.q, lab.f, lab.R);
  const BoundaryFlux source_flux = normal_flux(u, lab.geom.gamma0);
  const BoundaryFlux velocity_flux = normal_flux(z, lab.geom.gamma0);

  std::vector<double> state_final(y.level_data(g.nt), y.level_data(g.nt) + g.num_nodes());
  std::vector<double> source_final(u.level_data(g.nt), u.level_data(g.nt) + g.num_nodes());
  write_field_csv(lab.path("fields.csv"), g,
                  {{"potential", &lab.q.v},
                   {"source", &lab.f.v},
                   {"y0", &lab.y0.v},
                   {"y1", &lab.y1.v},
                   {"state_final", &state_final},
                   {"source_final", &source_final}});
  lab.record("fields.csv");
  write_field_bin(lab.path("state_final.bin"), g, state_final);
  lab.record("state_final.bin");

  write_flux_csv(lab.path("state_flux.csv"), state_flux);
  lab.record("state_flux.csv");
  write_flux_bin(lab.path("state_flux.bin"), state_flux);
  lab.record("state_flux.bin");
  write_flux_csv(lab.path("source_flux.csv"), source_flux);
  lab.record("source_flux.csv");
  write_flux_csv(lab.path("velocity_flux.csv"), velocity_flux);
  lab.record("velocity_flux.csv");
  write_flux_bin(lab.path("velocity_flux.bin"), velocity_flux);
  lab.record("velocity_flux.bin");

  json j;
  j["geometry"] = geometry_json(lab);
  j["grid"] = {{"nx", g.nx}, {"ny", g.ny}, {"nt", g.nt}, {"dt", g.dt}};
  j["state_flux_l2"] = json_num(state_flux.l2_norm());
  j["source_flux_l2"] = json_num(source_flux.l2_norm());
  j["velocity_flux_l2"] = json_num(velocity_flux.l2_norm());
  write_json(lab, "forward.json", j);

  finish(lab);
  return 0;
}

int cmd_carleman_check(const RunOptions& opt) {
  Lab lab = make_lab(opt, "carleman-check");
  const Grid& g = lab.grid;
  const PotentialField pf = PotentialField::from_values(lab.q);

  const double lambda_id = lab.cfg.get_double("carleman", "lambda", 0.1);
  const std::vector<double> lambda_grid =
      lab.cfg.get_double_list("carleman", "lambda_grid", {0.15, 0.2, 0.3, 0.45});
  const std::vector<double> s_grid =
      lab.cfg.get_double_list("carleman", "s_grid", {1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0});
  const int suite_size = lab.cfg.get_int("carleman", "suite_size", 10);
  const double tol_factor = lab.cfg.get_double("carleman", "identity_tol_factor", 40.0);
  const double h_ref = std::max(g.hx, g.domain.dim == 2 ? g.hy : 0.0);
  // Calibrated bound for the operator-split residual; the integration-by-parts
  // gap carries its own fixed factor.
  const double split_tol = tol_factor * h_ref * h_ref;
  const double ibp_tol = 20.0 * h_ref * h_ref;

  std::vector<std::string> failures;

  // Weight admissibility at the identity-check parameters.
  const CarlemanParams params_id = params_from_config(lab, lambda_id, 1.0);
  const WeightReport wrep = validate_params(lab.geom.domain, params_id);
  if (!(wrep.beta_ok && wrep.alpha_ok && wrep.psi_min_ok && wrep.band_ok)) {
    failures.push_back("weight admissibility: " + wrep.describe());
  }

  // Pseudoconvexity threshold probe.
  const double lambda_star = lambda_threshold(lab.geom.domain, params_id);
  CarlemanParams above = params_id;
  above.lambda = 1.1 * lambda_star;
  CarlemanParams below = params_id;
  below.lambda = 0.5 * lambda_star;
  const WeightReport wrep_above = validate_params(lab.geom.domain, above);
  const WeightReport wrep_below = validate_params(lab.geom.domain, below);
  if (!(wrep_above.F_min > 0.0)) failures.push_back("indicator not positive above threshold");
  if (!(wrep_below.F_min < 0.0)) failures.push_back("indicator unexpectedly positive below threshold");

  // Identity checks on the first three suite members.
  const std::vector<SpaceTimeField> suite =
      make_test_suite(lab.geom, g, params_id.eta, suite_size, opt.seed);
  double max_decomp = 0.0, max_quad = 0.0, max_ibp = 0.0;
  json ibp_json = json::array();
  for (int m = 0; m < std::min<int>(3, suite.size()); ++m) {
    const ConjugatedBundle b = make_conjugated_bundle(suite[m], params_id);
    max_decomp = std::max(max_decomp, decomposition_residual(b));
    max_quad = std::max(max_quad, quadratic_identity_check(b).rel_gap);
    for (const IbpGap& gap : ibp_identity_all(b)) {
      max_ibp = std::max(max_ibp, gap.rel_gap);
      ibp_json.push_back(
          {{"func", m}, {"i", gap.i}, {"k", gap.k}, {"rel_gap", json_num(gap.rel_gap)}});
    }
  }
  if (!(max_decomp <= split_tol)) {
    failures.push_back("operator split residual " + format_double(max_decomp) + " above " +
                       format_double(split_tol));
  }
  if (!(max_ibp <= ibp_tol)) {
    failures.push_back("integration-by-parts gap " + format_double(max_ibp) + " above " +
                       format_double(ibp_tol));
  }
  if (!(max_quad <= 1e-10)) {
    failures.push_back("quadratic expansion gap " + format_double(max_quad) + " above 1e-10");
  }

  // Threshold scan over the (s, lambda) grid.
  const ThresholdReport thr =
      estimate_thresholds(suite, pf, lab.geom, s_grid, lambda_grid, opt.threads);
  std::vector<std::vector<double>> rows;
  rows.reserve(thr.rows.size());
  for (const LedgerRow& r : thr.rows) {
    rows.push_back({r.s, r.lambda, static_cast<double>(r.func), r.ledger.lhs_gradient,
                    r.ledger.lhs_zero_order, r.ledger.lhs_P1, r.ledger.lhs_P2,
                    r.ledger.rhs_residual, r.ledger.rhs_boundary, r.ledger.ratio()});
  }
  write_csv(lab.path("ledger.csv"),
            {"s", "lambda", "func", "lhs_gradient", "lhs_zero_order", "lhs_P1", "lhs_P2",
             "rhs_residual", "rhs_boundary", "ratio"},
            rows);
  lab.record("ledger.csv");
  if (!thr.found) failures.push_back("threshold scan: " + thr.diagnostic);

  // Initial-trace inequality scan.
  const Step3Report s3 = step3_inequality_check(lab.f, lab.R, pf, lab.geom, g,
                                                thr.found ? thr.lambda0 : lambda_id, s_grid);
  json s3_rows = json::array();
  for (const Step3Row& r : s3.rows) {
    s3_rows.push_back({{"s", r.s},
                       {"lhs", json_num(r.lhs)},
                       {"interior", json_num(r.interior)},
                       {"boundary", json_num(r.boundary)},
                       {"ratio", json_num(r.ratio())}});
  }

  json j;
  j["geometry"] = geometry_json(lab);
  j["weights"] = {{"beta", params_id.beta},  {"alpha", params_id.alpha},
                  {"C0", params_id.C0},      {"eta", params_id.eta},
                  {"psi_min", wrep.psi_min}, {"lambda_star", json_num(lambda_star)},
                  {"F_min_above", json_num(wrep_above.F_min)},
                  {"F_min_below", json_num(wrep_below.F_min)}};
  j["identity"] = {{"lambda", lambda_id},
                   {"split_tolerance", split_tol},
                   {"ibp_tolerance", ibp_tol},
                   {"decomposition_residual", json_num(max_decomp)},
                   {"quadratic_gap", json_num(max_quad)},
                   {"ibp_max_gap", json_num(max_ibp)},
                   {"ibp", ibp_json}};
  j["found"] = thr.found;
  j["s0_emp"] = json_num(thr.s0);
  j["lambda0_emp"] = json_num(thr.lambda0);
  j["M_emp"] = json_num(thr.M);
  j["plateau_points"] = thr.plateau_points;
  if (!thr.diagnostic.empty()) j["diagnostic"] = thr.diagnostic;
  j["initial_trace"] = {{"rows", s3_rows}, {"M_fit", json_num(s3.M_fit)}};
  write_json(lab, "thresholds.json", j);

  finish(lab);
  if (!failures.empty()) {
    std::string msg = "carleman-check failed:";
    for (const std::string& f : failures) msg += "\n  - " + f;
    throw CheckFailure(msg);
  }
  return 0;
}

int cmd_invert_source(const RunOptions& opt) {
  Lab lab = make_lab(opt, "invert-source");
  const Grid& g = lab.grid;
  const ReconstructionConfig rc = inversion_config(lab, opt.seed);

  Measurement m;
  m.grid = g;
  m.geom = lab.geom;
  m.q = lab.q;
  m.R = lab.R;
  const std::string flux_path = lab.cfg.get_string("problem", "flux_csv", "");
  if (!flux_path.empty()) {
    m.data = read_flux_csv(flux_path, g);
    std::vector<int> file_faces;
    for (const FaceTrace& tr : m.data.faces) file_faces.push_back(tr.face);
    if (file_faces != lab.geom.gamma0) {
      throw ConfigError("field problem.flux_csv: file observes different faces than the geometry");
    }
  } else {
    m = synthesize_linear_measurement(lab.geom, g, lab.q, lab.R, lab.f, rc.noise_level, opt.seed);
  }

  const double adjoint_gap = adjoint_consistency(g, lab.q, lab.R, lab.geom.gamma0, opt.seed);
  const ReconstructionResult rec = reconstruct_source(m, rc);

  std::vector<std::pair<std::string, const std::vector<double>*>> cols = {
      {"estimate", &rec.estimate.v}};
  if (!m.truth.v.empty()) cols.push_back({"truth", &m.truth.v});
  write_field_csv(lab.path("estimate.csv"), g, cols);
  lab.record("estimate.csv");
  write_field_bin(lab.path("estimate.bin"), g, rec.estimate.v);
  lab.record("estimate.bin");
  write_history_csv(lab, "history.csv", rec.misfit_history, rec.error_history);

  json j;
  j["geometry"] = geometry_json(lab);
  j["converged"] = rec.converged;
  j["iterations"] = rec.iterations;
  j["rel_error"] = json_num(rec.rel_error);
  j["misfit_initial"] = json_num(rec.misfit_history.front());
  j["misfit_final"] = json_num(rec.misfit_history.back());
  j["adjoint_gap"] = json_num(adjoint_gap);
  j["noise"] = m.noise_level;
  j["reg"] = rc.reg;
  write_json(lab, "inversion.json", j);

  finish(lab);
  return 0;
}

int cmd_invert_potential(const RunOptions& opt) {
  Lab lab = make_lab(opt, "invert-potential");
  const Grid& g = lab.grid;
  const ReconstructionConfig rc = inversion_config(lab, opt.seed);

  double y0_min = std::numeric_limits<double>::infinity();
  for (double v : lab.y0.v) y0_min = std::min(y0_min, std::abs(v));
  if (!(y0_min > 0.0)) {
    throw ConfigError("field problem.y0: initial state must be bounded away from zero");
  }

  PotentialSetup setup{lab.geom, g, lab.y0, lab.y1};
  const SpatialField p_guess =
      make_profile(g, read_profile(lab.cfg, "p_guess", {"constant", 1.0, 1.0, {0.5, 0.5}, 0.25}));

  PotentialMeasurement m;
  const std::string flux_path = lab.cfg.get_string("problem", "flux_csv", "");
  if (!flux_path.empty()) {
    m.setup = setup;
    m.p_guess = p_guess;
    m.flux_observed = read_flux_csv(flux_path, g);
    std::vector<int> file_faces;
    for (const FaceTrace& tr : m.flux_observed.faces) file_faces.push_back(tr.face);
    if (file_faces != lab.geom.gamma0) {
      throw ConfigError("field problem.flux_csv: file observes different faces than the geometry");
    }
  } else {
    m = synthesize_potential_measurement(setup, lab.q, p_guess, rc.noise_level, opt.seed);
  }

  const PotentialResult rec = reconstruct_potential(m, rc);

  std::vector<std::pair<std::string, const std::vector<double>*>> cols = {
      {"estimate", &rec.q_estimate.v}};
  if (!m.truth_q.v.empty()) cols.push_back({"truth", &m.truth_q.v});
  write_field_csv(lab.path("estimate.csv"), g, cols);
  lab.record("estimate.csv");
  write_field_bin(lab.path("estimate.bin"), g, rec.q_estimate.v);
  lab.record("estimate.bin");
  write_history_csv(lab, "history.csv", rec.misfit_history, {});

  json j;
  j["geometry"] = geometry_json(lab);
  j["converged"] = rec.converged;
  j["outer_iterations"] = rec.outer_iterations;
  j["rel_error"] = json_num(rec.rel_error);
  j["noise"] = m.noise_level;
  j["reg"] = rc.reg;
  write_json(lab, "inversion.json", j);

  finish(lab);
  return 0;
}

int cmd_stability_scan(const RunOptions& opt) {
  Lab lab = make_lab(opt, "stability-scan");
  const Grid& g = lab.grid;
  const int ensemble = lab.cfg.get_int("stability", "ensemble", 24);
  const double eps = lab.cfg.get_double("stability", "eps", 0.1);
  const int reg_ensemble = lab.cfg.get_int("stability", "regularity_ensemble", 24);
  if (ensemble < 20) throw ConfigError("field stability.ensemble: must be >= 20");

  const StabilityScanReport observed =
      stability_scan(lab.geom, g, lab.q, lab.R, lab.geom.gamma0, ensemble, opt.seed);
  const std::vector<int> control_faces = complement_faces(lab.geom);
  StabilityScanReport control;
  const bool has_control = !control_faces.empty();
  if (has_control) {
    control = stability_scan(lab.geom, g, lab.q, lab.R, control_faces, ensemble, opt.seed);
  }

  PotentialSetup setup{lab.geom, g, lab.y0, lab.y1};
  const StabilityFit fit = potential_stability_fit(setup, lab.q, ensemble, eps, opt.seed);
  const RegularityReport reg = hidden_regularity_check(lab.geom, g, lab.q, reg_ensemble, opt.seed);

  std::vector<std::vector<double>> rows;
  for (size_t i = 0; i < observed.ratios.size(); ++i)
    rows.push_back({static_cast<double>(i), 0.0, observed.ratios[i]});
  for (size_t i = 0; i < control.ratios.size(); ++i)
    rows.push_back({static_cast<double>(i), 1.0, control.ratios[i]});
  write_csv(lab.path("stability.csv"), {"sample", "group", "ratio"}, rows);
  lab.record("stability.csv");

  rows.clear();
  for (size_t i = 0; i < fit.ratios.size(); ++i)
    rows.push_back({static_cast<double>(i), fit.ratios[i]});
  write_csv(lab.path("potential_ratios.csv"), {"sample", "ratio"}, rows);
  lab.record("potential_ratios.csv");

  rows.clear();
  for (size_t i = 0; i < reg.ratios.size(); ++i)
    rows.push_back({static_cast<double>(i), reg.ratios[i]});
  write_csv(lab.path("regularity.csv"), {"sample", "ratio"}, rows);
  lab.record("regularity.csv");

  json j;
  j["geometry"] = geometry_json(lab);
  j["observed"] = {{"c_low", json_num(observed.c_low)},
                   {"c_high", json_num(observed.c_high)},
                   {"spread", json_num(observed.spread())}};
  if (has_control) {
    j["control"] = {{"faces", control_faces},
                    {"c_low", json_num(control.c_low)},
                    {"c_high", json_num(control.c_high)},
                    {"spread", json_num(control.spread())}};
  }
  j["potential_fit"] = {{"c_emp", json_num(fit.c_emp)},
                        {"c_low", json_num(fit.c_low)},
                        {"c_high", json_num(fit.c_high)},
                        {"validate_count", fit.validate_count},
                        {"violations", fit.violations},
                        {"eps", eps}};
  j["regularity"] = {{"C_fit", json_num(reg.C_fit)},
                     {"validate_count", reg.validate_count},
                     {"violations", reg.violations},
                     {"max_energy_drift", json_num(reg.max_energy_drift)}};
  write_json(lab, "stability.json", j);

  finish(lab);
  if (!(observed.c_low > 0.0) || !std::isfinite(observed.c_high)) {
    throw CheckFailure("stability scan produced a degenerate ratio range");
  }
  return 0;
}

}  // namespace carlwave
