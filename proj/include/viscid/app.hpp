#ifndef VISCID_APP_HPP
#define VISCID_APP_HPP

// Command pipelines behind the viscid command-line tool. Every command reads a
// resolved RunConfig, writes its artifacts to <output.dir>/<config hash>/ and
// returns an exit status: 0 all checks pass, 1 usage or configuration error,
// 2 a check failed, 3 an invariant failed during a run.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "viscid/analysis.hpp"
#include "viscid/config.hpp"
#include "viscid/report.hpp"

namespace viscid::app {

enum Exit : int { kOk = 0, kUsage = 1, kCheckFailed = 2, kInvariant = 3 };

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"solve", "hj",     "decay",  "pcond", "sweep",
                                          "inviscid", "unique", "oracle", "claims"};
  return c;
}

class Output {
 public:
  explicit Output(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& content) {
    write_file(dir_ / name, content);
    files_.push_back(name);
  }

  const std::filesystem::path& dir() const { return dir_; }
  const std::vector<std::string>& files() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

struct Outcome {
  std::vector<std::pair<std::string, std::string>> verdicts;

  void add(const EstimateCheck& c) { verdicts.emplace_back(c.name, c.verdict()); }
  void add(const std::vector<EstimateCheck>& cs) {
    for (const auto& c : cs) add(c);
  }
  void add(const std::string& name, bool pass) { verdicts.emplace_back(name, pass ? "pass" : "fail"); }
  void add_na(const std::string& name) { verdicts.emplace_back(name, "n/a"); }

  bool pass() const {
    for (const auto& v : verdicts) {
      if (v.second == "fail") return false;
    }
    return true;
  }
};

inline std::string indexed(const std::string& stem, std::size_t k, const std::string& ext = ".csv") {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu", k);
  return stem + "_" + buf + ext;
}

struct Setup {
  FluxSpec flux;
  MeasureData mu;
  SolverConfig solver;
  double h;
  MollifierShape shape;
  Tolerances tol;
  unsigned jobs;

  GridFunction u0() const { return mollify(mu, h, solver.grid, shape); }
  DecayContext context(std::optional<double> nash_C = std::nullopt) const {
    auto ctx = make_context(flux, mu.mass(), solver.eps, nash_C);
    ctx.tol = tol;
    return ctx;
  }
};

inline Setup make_setup(const RunConfig& c) {
  auto flux = build_flux(c);
  auto mu = build_measure(c);
  auto solver = build_solver_config(c, flux, mu);
  return Setup{flux, mu, solver, c.number("init.mollify_h"), build_shape(c), build_tolerances(c), build_jobs(c)};
}

/// Snapshot times log-spaced on [decay.t_first, t_end].
inline std::vector<double> dense_times(const RunConfig& c, double t_end) {
  long count = c.integer("decay.snaps");
  if (count < 2) throw ConfigError("decay.snaps must be >= 2");
  return log_times(c.number("decay.t_first"), t_end, static_cast<std::size_t>(count));
}

inline std::pair<double, double> theory_exponents(const FluxSpec& flux) {
  if (flux.is_zero()) return {-0.5, -0.25};
  if (auto p = flux.exponent()) return {-1.0 / *p, -0.5 / *p};
  return {NAN, NAN};
}

inline std::vector<PlotSeries> snapshot_series(const std::vector<std::string>& files,
                                               const std::vector<GridFunction>& snaps) {
  std::vector<PlotSeries> s;
  for (std::size_t k = 0; k < files.size(); ++k) s.push_back({files[k], "t = " + fmt6(*snaps[k].time)});
  return s;
}

// ---------------------------------------------------------------------------
// Commands

inline Outcome cmd_solve(const RunConfig& c, Output& out) {
  auto s = make_setup(c);
  auto traj = run(s.solver, s.flux, s.u0(), s.mu.id());
  std::vector<std::string> files;
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    files.push_back(indexed("u", k));
    out.write(files.back(), snapshot_csv(traj.snapshots[k]));
  }
  auto checks = check_structural(traj, s.tol);
  out.write("run.json", dump(Json{{"provenance", to_json(traj.provenance)},
                                  {"diagnostics", to_json(traj.diagnostics)},
                                  {"checks", to_json(checks)}}));
  out.write("checks.md", md_checks(checks));
  out.write("solve.gp", plot_script("solve.png", "solution snapshots", "x", "u",
                                    snapshot_series(files, traj.snapshots)));
  Outcome o;
  o.add(checks);
  return o;
}

inline Outcome cmd_hj(const RunConfig& c, Output& out) {
  auto s = make_setup(c);
  auto u0 = s.u0();
  auto hj = run_hj(s.solver, s.flux, primitive(u0), s.mu.id());
  auto fv = run_fv(s.solver, s.flux, u0, s.mu.id());
  std::vector<std::string> files;
  for (std::size_t k = 0; k < hj.snapshots.size(); ++k) {
    files.push_back(indexed("v", k));
    out.write(files.back(), snapshot_csv(hj.snapshots[k]));
  }
  std::vector<EstimateCheck> checks{check_hj_gradient(hj, s.context()), check_hj_matches_fv(hj, fv)};
  out.write("hj.json", dump(Json{{"provenance", to_json(hj.provenance)},
                                 {"diagnostics", to_json(hj.diagnostics)},
                                 {"checks", to_json(checks)}}));
  out.write("hj.md", md_checks(checks));
  out.write("hj.gp", plot_script("hj.png", "primitive snapshots", "x", "v", snapshot_series(files, hj.snapshots)));
  Outcome o;
  o.add(checks);
  return o;
}

inline Outcome cmd_decay(const RunConfig& c, Output& out) {
  auto s = make_setup(c);
  s.solver.snapshot_times = dense_times(c, s.solver.t_end);
  s.solver.validate();
  auto traj = run(s.solver, s.flux, s.u0(), s.mu.id());
  auto nash = nash_reference_corpus();
  auto ctx = s.context(nash.C_hat);

  std::vector<EstimateCheck> checks;
  for (auto k : {DecayKind::carlen_loss, DecayKind::feireisl, DecayKind::pcond_linf, DecayKind::l2_powerlaw,
                 DecayKind::nash_lp}) {
    checks.push_back(check_decay_bounds(traj, k, ctx));
  }
  Outcome o;
  o.add(checks);

  auto times = traj.times();
  std::vector<double> linf, l2;
  for (const auto& g : traj.snapshots) {
    linf.push_back(norm(g, kInf));
    l2.push_back(norm(g, 2.0));
  }
  out.write("norm_linf.csv", series_csv(times, linf));
  out.write("norm_l2.csv", series_csv(times, l2));

  auto [e_inf, e_2] = theory_exponents(s.flux);
  const double band = c.number("decay.exponent_band");
  std::vector<DecayFit> fits;
  Json jfits = Json::array();
  try {
    Window w = default_window(traj, s.h, s.solver.eps);
    fits.push_back(fit_decay(traj, kInf, w, std::isnan(e_inf) ? std::nullopt : std::optional<double>(e_inf)));
    fits.push_back(fit_decay(traj, 2.0, w, std::isnan(e_2) ? std::nullopt : std::optional<double>(e_2)));
    for (const auto& f : fits) {
      jfits.push_back(to_json(f));
      std::string name = std::isinf(f.norm_p) ? "exponent_linf" : "exponent_l2";
      if (f.theoretical_exponent) {
        o.add(name, std::abs(f.exponent - *f.theoretical_exponent) <= band);
      } else {
        o.add_na(name);
      }
    }
  } catch (const PreconditionError& e) {
    std::cerr << "decay fit skipped: " << e.what() << "\n";
    o.add_na("exponent_linf");
    o.add_na("exponent_l2");
  }

  out.write("decay.json", dump(Json{{"provenance", to_json(traj.provenance)},
                                    {"nash", to_json(nash)},
                                    {"certified_a", ctx.a ? Json(*ctx.a) : Json()},
                                    {"exponent_band", band},
                                    {"fits", jfits},
                                    {"checks", to_json(checks)}}));
  out.write("decay.md", md_checks(checks) + "\n" + md_fits(fits, band));
  out.write("decay.gp", plot_script("decay.png", "norm decay", "t", "norm",
                                    {{"norm_linf.csv", "sup norm"}, {"norm_l2.csv", "L2 norm"}}, true, true));
  return o;
}

inline Outcome cmd_pcond(const RunConfig& c, Output& out) {
  auto flux = build_flux(c);
  double p = require_exponent(flux);
  double a = c.has("pcond.a") ? c.number("pcond.a") : 0.5 * (p - 1.0);
  std::optional<double> gamma;
  if (c.has("pcond.gamma")) gamma = c.number("pcond.gamma");
  auto r = c.list("pcond.r_range"), e = c.list("pcond.eta_range");
  if (r.size() != 2 || e.size() != 2) throw ConfigError("pcond ranges are [lo, hi]");
  auto cert = certify_p_condition(flux, a, {r[0], r[1]}, {e[0], e[1]}, gamma);
  std::vector<double> eta, d;
  for (auto [x, y] : cert.slack.deficits) {
    eta.push_back(x);
    d.push_back(y);
  }
  out.write("deficit.csv", csv_columns({"eta", "deficit"}, {eta, d}));
  out.write("pcond.json", dump(to_json(cert)));
  out.write("pcond.md", md_pcond(cert));
  out.write("pcond.gp",
            plot_script("pcond.png", "p-condition deficit", "eta", "deficit", {{"deficit.csv", "deficit"}}, true));
  Outcome o;
  o.add("p_condition", cert.pass());
  return o;
}

inline Outcome cmd_sweep(const RunConfig& c, Output& out) {
  auto s = make_setup(c);
  SweepSpec spec;
  spec.base = s.solver;
  spec.base.t_start = 0.0;
  spec.base.t_end = c.number("sweep.t_end");
  long snaps = c.integer("sweep.snaps");
  if (snaps < 2) throw ConfigError("sweep.snaps must be >= 2");
  spec.base.snapshot_times = log_times(c.number("decay.t_first"), spec.base.t_end, static_cast<std::size_t>(snaps));
  spec.flux = s.flux;
  spec.initial = s.mu;
  spec.h = c.number("sweep.h");
  spec.eps_list = c.list("sweep.eps_list");
  spec.dx_factor = c.number("sweep.dx_factor");
  spec.slope_band = c.number("sweep.slope_band");
  spec.jobs = s.jobs;
  auto rep = eps_sweep(spec);

  Outcome o;
  o.add("eps_bounded", rep.bounded());
  o.add("eps_flat", rep.flat());
  std::vector<PlotSeries> series;
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const auto& row = rep.rows[i];
    std::vector<double> t, ratio;
    for (const auto& d : row.pcond.details) {
      t.push_back(d.t);
      ratio.push_back(d.ratio);
    }
    std::string name = indexed("pcond_ratio", i);
    out.write(name, series_csv(t, ratio));
    series.push_back({name, "eps = " + fmt6(row.eps)});
  }
  // Exponent recovery at the smallest viscosity.
  auto [e_inf, e_2] = theory_exponents(s.flux);
  const double band = c.number("decay.exponent_band");
  std::size_t smallest = 0;
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    if (rep.rows[i].eps < rep.rows[smallest].eps) smallest = i;
  }
  const auto& low = rep.rows[smallest];
  if (low.linf_fit && low.l2_fit && !std::isnan(e_inf)) {
    o.add("exponent_linf", std::abs(low.linf_fit->exponent - e_inf) <= band);
    o.add("exponent_l2", std::abs(low.l2_fit->exponent - e_2) <= band);
  } else {
    o.add_na("exponent_linf");
    o.add_na("exponent_l2");
  }
  out.write("sweep.json", dump(to_json(rep)));
  out.write("sweep.md", md_sweep(rep));
  out.write("sweep.gp", plot_script("sweep.png", "sup-norm ratio to the p-condition bound", "t", "ratio", series,
                                    true, false));
  return o;
}

inline Outcome cmd_inviscid(const RunConfig& c, Output& out) {
  auto s = make_setup(c);
  auto q = s.flux.exponent();
  if (!q || !std::holds_alternative<PowerLaw>(s.flux.kind())) throw ConfigError("inviscid needs a power-law flux");
  if (s.mu.atoms.size() != 1 || s.mu.density || s.mu.atoms[0].x != 0.0) {
    throw ConfigError("inviscid needs a single point mass at the origin");
  }
  auto rep = inviscid_limit(s.mu.mass(), *q, c.list("inviscid.eps_list"), c.number("inviscid.t"),
                            c.number("inviscid.h"), s.solver, s.jobs);
  std::vector<double> eps, err;
  for (const auto& r : rep.rows) {
    eps.push_back(r.eps);
    err.push_back(r.l1_error);
  }
  out.write("l1_error.csv", csv_columns({"eps", "l1_error"}, {eps, err}));
  out.write("inviscid.json", dump(to_json(rep)));
  out.write("inviscid.md", md_inviscid(rep));
  out.write("inviscid.gp", plot_script("inviscid.png", "distance to the inviscid source solution", "eps", "L1 error",
                                       {{"l1_error.csv", "L1 error"}}, true, true));
  Outcome o;
  o.add("l1_monotone", rep.monotone());
  o.add("l1_final", !rep.rows.empty() && rep.rows.back().l1_error <= rep.final_target);
  o.add("sup_ratio", rep.sup_ratio <= 1.0 + rep.tol);
  return o;
}

inline Outcome cmd_unique(const RunConfig& c, Output& out) {
  auto s = make_setup(c);
  auto h_list = c.list("unique.h_list");
  if (h_list.empty()) throw ConfigError("unique.h_list is empty");
  const double t = c.number("unique.t");
  SolverConfig cfg = s.solver;
  cfg.t_start = 0.0;
  cfg.t_end = t;
  cfg.snapshot_times = log_times(std::min(c.number("decay.t_first"), 0.5 * t), t, 16);
  Grid g = auto_grid(s.flux, s.mu, cfg.eps, t, h_list.front(), h_list.back() / 4);
  long n = c.integer("unique.n");
  if (n > 0) g = Grid(g.x_lo, g.x_hi, static_cast<std::size_t>(n));
  cfg.grid = g;
  auto rep = uniqueness_probe(s.mu, h_list, cfg, s.flux, s.jobs);
  std::vector<double> h, d;
  for (std::size_t i = 0; i + 1 < h_list.size(); ++i) {
    for (const auto& p : rep.pairs) {
      if (p.h_i == h_list[i] && p.h_j == h_list[i + 1]) {
        h.push_back(p.h_i);
        d.push_back(p.distance);
        break;
      }
    }
  }
  out.write("distance.csv", csv_columns({"h", "distance"}, {h, d}));
  out.write("unique.json", dump(to_json(rep)));
  out.write("unique.md", md_uniqueness(rep));
  out.write("unique.gp", plot_script("unique.png", "distance between consecutive mollifications", "h",
                                     "sup |U_h - U_h'|", {{"distance.csv", "distance"}}, true, true));
  Outcome o;
  o.add("order", rep.converges());
  o.add("shape", rep.shape_comparable());
  o.add("uniform_sup", rep.uniform_sup());
  return o;
}

inline Outcome cmd_oracle(const RunConfig& c, Output& out) {
  auto s = make_setup(c);
  if (s.mu.atoms.size() != 1 || s.mu.density) throw ConfigError("oracles need a single point mass");
  const double M = s.mu.atoms[0].mass, x0 = s.mu.atoms[0].x, eps = s.solver.eps;
  std::string kind = c.string("oracle.kind");
  if (kind == "auto") {
    if (s.flux.is_zero()) {
      kind = "heat";
    } else if (std::holds_alternative<PowerLaw>(s.flux.kind()) && *s.flux.exponent() == 2.0) {
      kind = "burgers";
    } else {
      throw ConfigError("no closed-form oracle for flux " + s.flux.id());
    }
  }
  const Grid& g = s.solver.grid;
  std::vector<std::string> files;
  std::vector<GridFunction> snaps;
  for (double t : s.solver.snapshot_times) {
    std::vector<double> v(g.n);
    for (std::size_t j = 0; j < g.n; ++j) {
      double a = g.node(j) - x0, b = g.node(j + 1) - x0;
      if (kind == "heat") {
        v[j] = oracle_heat_cell(M, eps, a, b, t) / g.dx();
      } else if (kind == "burgers") {
        v[j] = oracle_burgers_viscous(M, eps, 0.5 * (a + b), t);
      } else if (kind == "nwave") {
        double q = s.flux.exponent().value_or(2.0);
        v[j] = oracle_nwave_cell(M, q, a, b, t) / g.dx();
      } else {
        throw ConfigError("oracle.kind must be auto, heat, burgers or nwave");
      }
    }
    snaps.emplace_back(g, std::move(v), t);
    files.push_back(indexed("oracle", files.size()));
    out.write(files.back(), snapshot_csv(snaps.back()));
  }
  out.write("oracle.json", dump(Json{{"kind", kind}, {"M", M}, {"x0", x0}, {"eps", eps}, {"grid", to_json(g)},
                                     {"times", s.solver.snapshot_times}}));
  out.write("oracle.gp", plot_script("oracle.png", kind + " oracle", "x", "u", snapshot_series(files, snaps)));
  return {};
}

/// One row per implemented estimate on a dense-snapshot run of the configured
/// flux and data.
inline std::vector<ClaimRow> claims_matrix(const RunConfig& c, std::vector<EstimateCheck>* checks_out = nullptr) {
  auto s = make_setup(c);
  s.solver.t_start = 0.0;
  s.solver.snapshot_times = dense_times(c, s.solver.t_end);
  const double M = s.mu.mass(), eps = s.solver.eps;
  // The pair (u0, 2 u0) needs room for the faster front of the doubled data.
  if (!c.has("grid.lo")) {
    if (auto q = s.flux.exponent()) {
      const Grid& g = s.solver.grid;
      double extra = nwave_front(2 * M, *q, s.solver.t_end) - nwave_front(M, *q, s.solver.t_end);
      auto cells = static_cast<std::size_t>(std::ceil(extra / g.dx()));
      s.solver.grid = Grid(g.x_lo, g.x_hi + cells * g.dx(), g.n + cells);
    }
  }
  s.solver.validate();
  auto u0 = s.u0();
  std::vector<double> twice(u0.values);
  for (double& v : twice) v *= 2.0;
  SolverConfig fv_cfg = s.solver;
  fv_cfg.scheme = Scheme::fv;
  auto pair = run_fv_ensemble(fv_cfg, s.flux, {u0, GridFunction(u0.grid, twice, 0.0)});
  Trajectory main = s.solver.scheme == Scheme::fv ? pair[0] : run(s.solver, s.flux, u0, s.mu.id());

  auto nash = nash_reference_corpus();
  auto ctx = s.context(nash.C_hat);
  std::map<std::string, EstimateCheck> by_name;
  for (auto& ch : check_structural(main, s.tol)) by_name[ch.name] = ch;
  for (auto& ch : check_structural(pair[0], pair[1], s.tol)) {
    if (ch.name == "l1_contraction" || ch.name == "order") by_name[ch.name] = ch;
  }
  by_name["spacetime"] = check_spacetime(main, eps, s.tol.estimate);
  for (auto k : {DecayKind::carlen_loss, DecayKind::feireisl, DecayKind::pcond_linf, DecayKind::l2_powerlaw,
                 DecayKind::nash_lp}) {
    by_name[to_string(k)] = check_decay_bounds(main, k, ctx);
  }
  auto hj = run_hj(fv_cfg, s.flux, primitive(u0), s.mu.id());
  by_name["hj_gradient"] = check_hj_gradient(hj, ctx);

  auto verdict = [](const EstimateCheck& ch) { return ch.verdict(); };
  auto measured = [](const EstimateCheck& ch) {
    return ch.applicable ? "max ratio " + fmt6(ch.lhs_max_ratio) : ch.note;
  };
  std::vector<ClaimRow> rows;
  auto add = [&](const std::string& id, const std::string& statement) {
    const auto& ch = by_name.at(id);
    rows.push_back({id, statement, verdict(ch), measured(ch)});
    if (checks_out) checks_out->push_back(ch);
  };
  add("mass", "int u(t) dx is conserved");
  add("max_min", "min u0 <= u(t) <= max u0");
  add("lp_monotone_2", "||u(t)||_2 is nonincreasing");
  add("lp_monotone_4", "||u(t)||_4 is nonincreasing");
  add("l1_contraction", "||u(t) - v(t)||_1 is nonincreasing");
  add("order", "u0 <= v0 implies u(t) <= v(t)");
  add("spacetime", "2 eps int int |u_x|^2 <= ||u(t_first)||_2^2");
  add("nash_lp", "||u(t)||_q <= (C q/eps)^{(q-1)/(2q)} ||u0||_1 t^{-(q-1)/(2q)}, q = 2, 4");
  add("carlen_loss", "||u(t)||_inf <= (4 pi eps t)^{-1/2} ||u0||_1");
  add("feireisl", "||u(t)||_inf <= C(eps) M t^{-1/2} (constant recorded)");
  add("pcond_linf", "||u(t)||_inf <= M^{1/p} (a t)^{-1/p}");
  add("l2_powerlaw", "||u(t)||_2 <= M^{(p+1)/(2p)} (a t)^{-1/(2p)}");
  add("hj_gradient", "max v_x(t) <= M^{1/p} (a t)^{-1/p} for the primitive v");

  auto [e_inf, e_2] = theory_exponents(s.flux);
  const double band = c.number("decay.exponent_band");
  try {
    Window w = default_window(main, s.h, eps);
    for (auto [p, e, id] : {std::tuple{kInf, e_inf, "exponent_linf"}, std::tuple{2.0, e_2, "exponent_l2"}}) {
      auto fit = fit_decay(main, p, w);
      std::string v = std::isnan(e) ? "n/a" : (std::abs(fit.exponent - e) <= band ? "pass" : "fail");
      rows.push_back({id, std::string("fitted decay exponent of ||u(t)||_") + (std::isinf(p) ? "inf" : "2") +
                              " within " + fmt6(band) + " of " + fmt6(e),
                      v, "exponent " + fmt6(fit.exponent)});
    }
  } catch (const PreconditionError& e) {
    rows.push_back({"exponent_linf", "fitted sup-norm decay exponent", "n/a", e.what()});
    rows.push_back({"exponent_l2", "fitted L2 decay exponent", "n/a", e.what()});
  }
  if (auto p = s.flux.exponent()) {
    auto cert = certify_p_condition(s.flux, 0.5 * (*p - 1.0));
    rows.push_back({"pcond_certification", "p-condition holds with a = (p-1)/2", cert.pass() ? "pass" : "fail",
                    "min margin " + fmt6(cert.report.min_margin)});
  } else {
    rows.push_back({"pcond_certification", "p-condition holds with a = (p-1)/2", "n/a", "flux has no exponent"});
  }
  return rows;
}

inline Outcome cmd_claims(const RunConfig& c, Output& out) {
  std::vector<EstimateCheck> checks;
  auto rows = claims_matrix(c, &checks);
  out.write("claims.json", dump(Json{{"claims", to_json(rows)}, {"checks", to_json(checks)}}));
  out.write("claims.md", md_claims(rows));
  Outcome o;
  for (const auto& r : rows) o.verdicts.emplace_back(r.id, r.verdict);
  return o;
}

inline Outcome dispatch(const std::string& command, const RunConfig& c, Output& out) {
  if (command == "solve") return cmd_solve(c, out);
  if (command == "hj") return cmd_hj(c, out);
  if (command == "decay") return cmd_decay(c, out);
  if (command == "pcond") return cmd_pcond(c, out);
  if (command == "sweep") return cmd_sweep(c, out);
  if (command == "inviscid") return cmd_inviscid(c, out);
  if (command == "unique") return cmd_unique(c, out);
  if (command == "oracle") return cmd_oracle(c, out);
  if (command == "claims") return cmd_claims(c, out);
  throw ConfigError("unknown command " + command);
}

// ---------------------------------------------------------------------------
// Argument handling

struct Flags {
  std::optional<std::string> config, out, scheme, flux, init, snap, shape, variant;
  std::optional<double> eps, tend, h, a, gamma;
  std::optional<long> grid, jobs;
  bool strict = false;
  std::vector<std::string> sets;
};

inline void add_flags(CLI::App& sub, Flags& f) {
  sub.add_option("--config", f.config, "TOML-style configuration file")->check(CLI::ExistingFile);
  sub.add_option("--out", f.out, "output root (default: out)");
  sub.add_option("--eps", f.eps, "viscosity");
  sub.add_option("--scheme", f.scheme, "fv or duhamel");
  sub.add_option("--variant", f.variant, "finite-volume variant");
  sub.add_option("--grid", f.grid, "number of cells");
  sub.add_option("--tend", f.tend, "final time");
  sub.add_option("--snap", f.snap, "comma-separated snapshot times");
  sub.add_flag("--strict", f.strict, "treat boundary leakage as an error");
  sub.add_option("--flux", f.flux, "power:p | polysum:mu@p,... | zero | table:path");
  sub.add_option("--init", f.init, "dirac:M@x[+...] | box:lo:hi:value | csv:path");
  sub.add_option("--mollify", f.h, "mollifier half-width");
  sub.add_option("--shape", f.shape, "mollifier shape: bump, hat or cosine");
  sub.add_option("--a", f.a, "p-condition constant");
  sub.add_option("--gamma", f.gamma, "p-condition slack exponent");
  sub.add_option("--jobs", f.jobs, "worker threads (0: all cores)");
  sub.add_option("--set", f.sets, "key=value override, repeatable");
}

inline RunConfig resolve(const std::string& command, const Flags& f) {
  RunConfig c = resolved_config(f.config);
  for (const auto& kv : f.sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value");
    c.set(kv.substr(0, eq), kv.substr(eq + 1), "--set");
  }
  if (f.flux) apply_flux_flag(c, *f.flux);
  if (f.init) apply_init_flag(c, *f.init);
  if (f.eps) c.set_number("solver.eps", *f.eps);
  if (f.scheme) c.set_string("solver.scheme", *f.scheme);
  if (f.variant) c.set_string("solver.variant", *f.variant);
  if (f.grid) c.set_number("grid.n", static_cast<double>(*f.grid));
  if (f.h) c.set_number("init.mollify_h", *f.h);
  if (f.shape) c.set_string("init.shape", *f.shape);
  if (f.a) c.set_number("pcond.a", *f.a);
  if (f.gamma) c.set_number("pcond.gamma", *f.gamma);
  if (f.jobs) c.set_number("jobs", static_cast<double>(*f.jobs));
  if (f.out) c.set_string("output.dir", *f.out);
  if (f.strict) c.set("solver.strict", "true");
  if (f.tend) c.set_number("solver.t_end", *f.tend);
  if (f.snap) {
    auto t = parse_time_list(*f.snap);
    std::string list = "[";
    for (std::size_t i = 0; i < t.size(); ++i) list += (i ? "," : "") + format_number(t[i]);
    c.set("solver.snap", list + "]");
    if (!f.tend && !t.empty()) c.set_number("solver.t_end", t.back());
  } else if (f.tend) {
    c.set("solver.snap", "[" + format_number(*f.tend) + "]");
  }
  c.set_string("command", command);
  return c;
}

inline void dump_invariant(const Output& out, const Json& j, std::ostream& err) {
  try {
    write_file(out.dir() / "diagnostic.json", dump(j));
  } catch (const IoError&) {
  }
  err << "invariant failure: " << j.value("message", "") << "\n";
}

/// Full command-line entry point; argv[0] is the program name.
inline int run_command(const std::vector<std::string>& args, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  CLI::App app{"Viscous scalar conservation laws with measure data: solvers, decay checks and reports"};
  app.require_subcommand(1);
  Flags f;
  std::map<std::string, CLI::App*> subs;
  const std::map<std::string, std::string> help{
      {"solve", "run a solver and write snapshots"},
      {"hj", "run the Hamilton-Jacobi solver on the primitive"},
      {"decay", "fit decay exponents and check decay bounds"},
      {"pcond", "certify the p-condition of the flux"},
      {"sweep", "check eps-independence of the decay bounds"},
      {"inviscid", "vanishing-viscosity limit against the N-wave"},
      {"unique", "compare solutions from different mollifications"},
      {"oracle", "write closed-form reference solutions"},
      {"claims", "tabulate every implemented estimate with its verdict"}};
  for (const auto& name : commands()) {
    subs[name] = app.add_subcommand(name, help.at(name));
    add_flags(*subs[name], f);
  }
  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  std::string command;
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) command = name;
  }

  RunConfig cfg;
  try {
    cfg = resolve(command, f);
  } catch (const std::exception& e) {
    err << "configuration error: " << e.what() << "\n";
    return kUsage;
  }
  Output output(std::filesystem::path(cfg.string("output.dir")) / cfg.hash());
  try {
    Outcome o = dispatch(command, cfg, output);
    RunManifest m;
    m.config_hash = cfg.hash();
    m.command = command;
    m.inputs = cfg.entries();
    m.inputs.erase("output.dir");
    m.inputs.erase("jobs");
    m.outputs = output.files();
    m.verdicts = o.verdicts;
    output.write("manifest.json", dump(to_json(m)));
    out << output.dir().string() << "\n";
    for (const auto& [name, v] : o.verdicts) out << "  " << name << ": " << v << "\n";
    return o.pass() ? kOk : kCheckFailed;
  } catch (const InstabilityError& e) {
    dump_invariant(output,
                   Json{{"error", "instability"}, {"message", e.what()}, {"time", e.time()}, {"step", e.step()},
                        {"cell", e.cell()}, {"config", cfg.canonical()}},
                   err);
    return kInvariant;
  } catch (const BlockSizeError& e) {
    dump_invariant(output, Json{{"error", "block_size"}, {"message", e.what()}, {"config", cfg.canonical()}}, err);
    return kInvariant;
  } catch (const DomainTooSmallError& e) {
    dump_invariant(output, Json{{"error", "domain_too_small"}, {"message", e.what()}, {"config", cfg.canonical()}},
                   err);
    return kInvariant;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {  // ConfigError, PreconditionError
    err << "configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::domain_error& e) {
    err << "configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::logic_error& e) {  // UnsupportedError
    err << "configuration error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace viscid::app

#endif  // VISCID_APP_HPP
