#ifndef VISCID_SOLVER_HPP
#define VISCID_SOLVER_HPP

// Time integrators for u_t + f(u)_x = eps u_xx on a padded interval with
// homogeneous Dirichlet data, and for the primitive v_t + f(v_x) = eps v_xx.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "viscid/error.hpp"
#include "viscid/flux.hpp"
#include "viscid/grid.hpp"
#include "viscid/kernel.hpp"

namespace viscid {

enum class Scheme { fv, duhamel };

/// Finite-volume flavours. `central_limited` is the default: the mean of f
/// between the two states plus, at each interface, the smallest viscosity that keeps the explicit update
/// monotone. The Engquist-Osher variants are first order.
enum class FvVariant { central_limited, eo_explicit, eo_implicit };

inline std::string to_string(Scheme s) { return s == Scheme::fv ? "fv" : "duhamel"; }

inline std::string to_string(FvVariant v) {
  switch (v) {
    case FvVariant::central_limited: return "central_limited";
    case FvVariant::eo_explicit: return "eo_explicit";
    case FvVariant::eo_implicit: return "eo_implicit";
  }
  return "?";
}

struct SolverConfig {
  double eps = 0.1;
  Scheme scheme = Scheme::fv;
  Grid grid{-10.0, 10.0, 1000};
  double t_start = 0.0;
  double t_end = 1.0;
  std::vector<double> snapshot_times{1.0};
  double cfl = 0.9;
  double picard_tol = 1e-10;
  int picard_max_iter = 60;

  FvVariant fv_variant = FvVariant::central_limited;
  bool strict = false;
  double leak_tol = 1e-8;     ///< allowed boundary leakage relative to the initial mass
  double neg_tol = 1e-12;     ///< allowed undershoot relative to max |u0|
  int duhamel_substeps = 4;   ///< sub-nodes per Picard block
  double block_scale = 1.0;   ///< multiplies the contraction-window block length
  std::optional<double> fixed_dt;     ///< optional cap on dt
  std::optional<double> fixed_speed;  ///< frozen wave-speed bound A

  void validate() const {
    grid.validate();
    if (!(eps > 0.0) || !std::isfinite(eps)) throw ConfigError("eps must be positive");
    if (!(t_end > t_start) || t_start < 0.0) throw ConfigError("need 0 <= t_start < t_end");
    if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("cfl must lie in (0, 1]");
    if (snapshot_times.empty()) throw ConfigError("at least one snapshot time is required");
    for (std::size_t i = 0; i < snapshot_times.size(); ++i) {
      double s = snapshot_times[i];
      if (!(s > t_start) || s > t_end) throw ConfigError("snapshot times must lie in (t_start, t_end]");
      if (i > 0 && !(s > snapshot_times[i - 1])) throw ConfigError("snapshot times must be strictly increasing");
    }
    if (!(picard_tol > 0.0) || picard_max_iter < 1) throw ConfigError("bad Picard settings");
    if (duhamel_substeps < 1) throw ConfigError("duhamel_substeps must be >= 1");
    if (!(block_scale > 0.0)) throw ConfigError("block_scale must be positive");
  }
};

struct Diagnostics {
  std::size_t steps = 0;
  std::vector<double> dt_history;
  double leaked = 0.0;                ///< net mass that left through the boundaries
  std::vector<double> leaked_at;      ///< `leaked` at each snapshot
  double min_value = 0.0;             ///< most negative value seen in the state
  std::vector<int> picard_iterations; ///< per Duhamel block
  std::vector<double> picard_residuals;
  std::vector<double> block_lengths;
  std::vector<std::string> warnings;
};

struct Provenance {
  SolverConfig config;
  std::string scheme;  ///< "fv/central_limited", "duhamel", "hj/..."
  std::string flux_id;
  std::string init_id;
};

struct Trajectory {
  GridFunction initial;
  std::vector<GridFunction> snapshots;
  Provenance provenance;
  Diagnostics diagnostics;

  std::vector<double> times() const {
    std::vector<double> t;
    for (const auto& s : snapshots) t.push_back(*s.time);
    return t;
  }
};

namespace detail {

inline double max_value(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, x);
  return m;
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Thomas algorithm for (1 + 2 lam) x_j - lam (x_{j-1} + x_{j+1}) = rhs_j with
// zero Dirichlet neighbours; rhs is overwritten by the solution.
inline void solve_heat_tridiagonal(std::vector<double>& rhs, std::size_t lo, std::size_t hi, double lam,
                                   std::vector<double>& scratch) {
  const std::size_t m = hi - lo;
  if (m == 0) return;
  scratch.resize(m);
  const double diag = 1.0 + 2.0 * lam;
  double denom = diag;
  scratch[0] = -lam / denom;
  rhs[lo] /= denom;
  for (std::size_t i = 1; i < m; ++i) {
    denom = diag + lam * scratch[i - 1];
    scratch[i] = -lam / denom;
    rhs[lo + i] = (rhs[lo + i] + lam * rhs[lo + i - 1]) / denom;
  }
  for (std::size_t i = m - 1; i-- > 0;) rhs[lo + i] -= scratch[i] * rhs[lo + i + 1];
}

/// Shared conservative update used by both the cell (FV) and node (HJ) solvers.
class FvCore {
 public:
  FvCore(const FluxEvaluator& f, FvVariant variant, double eps, double dx, double cfl,
         std::optional<double> fixed_speed)
      : f_(f), variant_(variant), eps_(eps), dx_(dx), cfl_(cfl), fixed_speed_(fixed_speed) {}

  double speed(double umax) const {
    double a = f_.max_speed(umax);
    if (fixed_speed_) {
      if (a > *fixed_speed_ * (1.0 + 1e-12)) {
        throw InstabilityError("state left the frozen wave-speed bound", 0.0, 0, 0);
      }
      return *fixed_speed_;
    }
    return a;
  }

  /// Sets the step operator from w, a pointwise upper bound on every state the
  /// step will be applied to (ghosts are zero), and returns the stable dt.
  /// central_limited adds viscosity max(0, a_i - 2 eps/dx)/2 at interface i,
  /// a_i the wave-speed bound over its two cells; the EO variants use one
  /// global bound.
  double prepare(const std::vector<double>& w) {
    const std::size_t m = w.size();
    const double k = eps_ / dx_;
    double wmax = 0.0;
    for (double x : w) wmax = std::max(wmax, x);
    const double A = speed(wmax);
    switch (variant_) {
      case FvVariant::central_limited: {
        c_.resize(m + 1);
        for (std::size_t i = 0; i <= m; ++i) {
          double wl = i == 0 ? 0.0 : w[i - 1], wr = i == m ? 0.0 : w[i];
          c_[i] = std::max(k, 0.5 * speed(std::max(wl, wr)));
        }
        double worst = 0.0;
        for (std::size_t i = 0; i < m; ++i) worst = std::max(worst, c_[i] + c_[i + 1]);
        return cfl_ * dx_ / std::max(worst, 2.0 * k);
      }
      case FvVariant::eo_explicit: return cfl_ / (A / dx_ + 2.0 * k / dx_);
      case FvVariant::eo_implicit: return cfl_ * dx_ / std::max(A, k);
    }
    return 0.0;
  }

  /// Interface fluxes F[i] between states s[i-1] and s[i], i = 0..m, with
  /// ghost states gl (left of s[0]) and gr (right of s[m-1]). Explicit
  /// variants include the diffusive flux; eo_implicit returns convection only.
  /// Requires a preceding prepare() on the same number of cells.
  void interface_fluxes(const std::vector<double>& s, double gl, double gr, std::vector<double>& F) {
    const std::size_t m = s.size();
    F.resize(m + 1);
    fv_.resize(m + 2);
    fv_[0] = f_.value(gl);
    for (std::size_t i = 0; i < m; ++i) fv_[i + 1] = f_.value(s[i]);
    fv_[m + 1] = f_.value(gr);
    auto state = [&](std::size_t i) { return i == 0 ? gl : (i == m + 1 ? gr : s[i - 1]); };
    const double k = eps_ / dx_;
    if (variant_ == FvVariant::central_limited) {
      // Mean of f over [ul, ur] by two-point Gauss-Legendre: exact for cubics,
      // so the convective part neither creates nor destroys u^2 at leading order.
      constexpr double g = 0.21132486540518711775;  // (1 - 1/sqrt 3) / 2
      for (std::size_t i = 0; i <= m; ++i) {
        double ul = state(i), ur = state(i + 1), d = ur - ul;
        double mean = ul == ur ? fv_[i] : 0.5 * (f_.value(ul + g * d) + f_.value(ur - g * d));
        F[i] = mean - c_[i] * d;
      }
      return;
    }
    const bool split = !f_.nondecreasing();
    for (std::size_t i = 0; i <= m; ++i) {
      double ul = state(i), ur = state(i + 1);
      double c = split ? f_.positive_part(ul) + f_.negative_part(ur) : fv_[i];
      F[i] = variant_ == FvVariant::eo_explicit ? c - k * (ur - ul) : c;
    }
  }

  FvVariant variant() const { return variant_; }
  double eps() const { return eps_; }
  double dx() const { return dx_; }

 private:
  const FluxEvaluator& f_;
  FvVariant variant_;
  double eps_, dx_, cfl_;
  std::optional<double> fixed_speed_;
  std::vector<double> fv_, c_;
};

inline void check_state(const std::vector<double>& u, double floor, double t, std::size_t step,
                        Diagnostics& diag) {
  for (std::size_t j = 0; j < u.size(); ++j) {
    if (!(u[j] >= floor)) {
      std::ostringstream os;
      os << "solution became " << (std::isnan(u[j]) ? "NaN" : "negative") << " (u=" << u[j] << ") at t=" << t
         << ", step " << step << ", cell " << j;
      throw InstabilityError(os.str(), t, step, j);
    }
    diag.min_value = std::min(diag.min_value, u[j]);
  }
}

inline void finish_leakage(const SolverConfig& cfg, double M0, const std::vector<double>& u, double u0max,
                           Diagnostics& diag) {
  if (M0 > 0.0 && std::abs(diag.leaked) > cfg.leak_tol * M0) {
    std::ostringstream os;
    os << "boundary leakage " << diag.leaked << " exceeds " << cfg.leak_tol << " of the mass; widen the domain";
    if (cfg.strict) throw DomainTooSmallError(os.str());
    diag.warnings.push_back(os.str());
  }
  if (!u.empty() && std::max(std::abs(u.front()), std::abs(u.back())) > 1e-12 * u0max) {
    diag.warnings.push_back("boundary values exceed 1e-12 of max|u0|");
  }
}

}  // namespace detail

namespace detail {

/// Advances every member with one shared operator: interface viscosities and
/// the time step of each step come from the pointwise max over all members.
inline std::vector<Trajectory> run_fv_lockstep(const SolverConfig& cfg, const FluxSpec& flux,
                                               const std::vector<GridFunction>& u0s,
                                               const std::vector<std::string>& ids) {
  cfg.validate();
  for (const auto& u0 : u0s) {
    if (!(u0.grid == cfg.grid) || u0.layout != GridFunction::Layout::cells) {
      throw ConfigError("initial data does not live on the configured grid");
    }
  }
  FluxEvaluator fe(flux);
  const std::size_t n = cfg.grid.n;
  const double dx = cfg.grid.dx();
  FvCore core(fe, cfg.fv_variant, cfg.eps, dx, cfg.cfl, cfg.fixed_speed);

  const std::size_t members = u0s.size();
  std::vector<Trajectory> trajs(members);
  std::vector<std::vector<double>> u(members);
  std::vector<double> u0max(members), M0(members), floor(members);
  for (std::size_t m = 0; m < members; ++m) {
    auto& tr = trajs[m];
    tr.initial = u0s[m];
    tr.initial.time = cfg.t_start;
    tr.provenance = {cfg, "fv/" + to_string(cfg.fv_variant), flux.id(), m < ids.size() ? ids[m] : std::string{}};
    u[m] = u0s[m].values;
    u0max[m] = max_abs(u[m]);
    M0[m] = mass(u0s[m]);
    floor[m] = -cfg.neg_tol * u0max[m];
    check_state(u[m], floor[m], cfg.t_start, 0, tr.diagnostics);
  }

  std::vector<double> F, scratch, w, half_leak(members);
  std::vector<std::vector<double>> stage(members);
  double t = cfg.t_start;
  std::size_t next = 0, steps = 0;
  while (next < cfg.snapshot_times.size()) {
    const double target = cfg.snapshot_times[next];
    w.assign(u.front().begin(), u.front().end());
    for (std::size_t m = 1; m < members; ++m) {
      for (std::size_t j = 0; j < n; ++j) w[j] = std::max(w[j], u[m][j]);
    }
    double dt = core.prepare(w);
    if (cfg.fixed_dt) dt = std::min(dt, *cfg.fixed_dt);
    bool hit = false;
    if (t + dt >= target * (1.0 - 1e-14)) {
      dt = target - t;
      hit = true;
    }
    const double t_new = hit ? target : t + dt;
    ++steps;
    const double r = dt / dx;
    if (cfg.fv_variant == FvVariant::eo_implicit) {
      for (std::size_t m = 0; m < members; ++m) {
        auto& v = u[m];
        auto& diag = trajs[m].diagnostics;
        core.interface_fluxes(v, 0.0, 0.0, F);
        for (std::size_t j = 0; j < n; ++j) v[j] -= r * (F[j + 1] - F[j]);
        diag.leaked += dt * (F[n] - F[0]);
        const double lam = cfg.eps * dt / (dx * dx);
        solve_heat_tridiagonal(v, 0, n, lam, scratch);
        diag.leaked += dt * cfg.eps / dx * (v[0] + v[n - 1]);
      }
    } else {
      // Heun: u <- (u + E(E(u))) / 2 with E a forward-Euler step. Each stage
      // uses one operator for all members; the maximum principle keeps the
      // second stage within the first stage's dt bound.
      for (std::size_t m = 0; m < members; ++m) {
        core.interface_fluxes(u[m], 0.0, 0.0, F);
        stage[m].resize(n);
        for (std::size_t j = 0; j < n; ++j) stage[m][j] = u[m][j] - r * (F[j + 1] - F[j]);
        half_leak[m] = F[n] - F[0];
      }
      w.assign(stage.front().begin(), stage.front().end());
      for (std::size_t m = 1; m < members; ++m) {
        for (std::size_t j = 0; j < n; ++j) w[j] = std::max(w[j], stage[m][j]);
      }
      core.prepare(w);
      for (std::size_t m = 0; m < members; ++m) {
        auto& v = u[m];
        const auto& y = stage[m];
        core.interface_fluxes(y, 0.0, 0.0, F);
        for (std::size_t j = 0; j < n; ++j) v[j] = 0.5 * (v[j] + y[j] - r * (F[j + 1] - F[j]));
        trajs[m].diagnostics.leaked += 0.5 * dt * (half_leak[m] + F[n] - F[0]);
      }
    }
    for (std::size_t m = 0; m < members; ++m) {
      auto& v = u[m];
      auto& diag = trajs[m].diagnostics;
      diag.steps = steps;
      diag.dt_history.push_back(dt);
      check_state(v, floor[m], t_new, steps, diag);
      if (hit) {
        trajs[m].snapshots.emplace_back(cfg.grid, v, t_new);
        diag.leaked_at.push_back(diag.leaked);
      }
    }
    t = t_new;
    if (hit) ++next;
  }
  for (std::size_t m = 0; m < members; ++m) finish_leakage(cfg, M0[m], u[m], u0max[m], trajs[m].diagnostics);
  return trajs;
}

}  // namespace detail

/// Conservative monotone finite-volume solver on cell averages.
inline Trajectory run_fv(const SolverConfig& cfg, const FluxSpec& flux, const GridFunction& u0,
                         std::string init_id = {}) {
  return std::move(detail::run_fv_lockstep(cfg, flux, {u0}, {std::move(init_id)}).front());
}

/// Viscous Hamilton-Jacobi solver on node values. Slopes (v_{j+1} - v_j)/dx
/// evolve exactly as the FV cell averages, so d/dx v reproduces run_fv away
/// from the two boundary cells. Boundary values are held fixed.
inline Trajectory run_hj(const SolverConfig& cfg, const FluxSpec& flux, const GridFunction& phi0,
                         std::string init_id = {}) {
  cfg.validate();
  if (!(phi0.grid == cfg.grid) || phi0.layout != GridFunction::Layout::nodes) {
    throw ConfigError("HJ data must be node values on the configured grid");
  }
  FluxEvaluator fe(flux);
  const std::size_t n = cfg.grid.n;
  const double dx = cfg.grid.dx();
  detail::FvCore core(fe, cfg.fv_variant, cfg.eps, dx, cfg.cfl, cfg.fixed_speed);

  std::vector<double> v = phi0.values;
  double vscale = detail::max_abs(v);
  for (std::size_t j = 0; j < n; ++j) {
    if (v[j + 1] < v[j] - 1e-14 * std::max(1.0, vscale)) {
      throw PreconditionError("HJ data must be nondecreasing (primitive of nonnegative data)");
    }
  }

  Trajectory traj;
  traj.initial = phi0;
  traj.initial.time = cfg.t_start;
  traj.provenance = {cfg, "hj/" + to_string(cfg.fv_variant), flux.id(), std::move(init_id)};
  Diagnostics& diag = traj.diagnostics;

  std::vector<double> s(n), F, scratch, interior, stage;
  double t = cfg.t_start;
  std::size_t next = 0;
  while (next < cfg.snapshot_times.size()) {
    const double target = cfg.snapshot_times[next];
    for (std::size_t j = 0; j < n; ++j) s[j] = (v[j + 1] - v[j]) / dx;
    double dt = core.prepare(s);
    if (cfg.fixed_dt) dt = std::min(dt, *cfg.fixed_dt);
    bool hit = false;
    if (t + dt >= target * (1.0 - 1e-14)) {
      dt = target - t;
      hit = true;
    }
    core.interface_fluxes(s, 0.0, 0.0, F);
    // F[j] sits between s[j-1] and s[j], i.e. at node j.
    if (cfg.fv_variant != FvVariant::eo_implicit) {
      // Same Heun stages as run_fv.
      stage = v;
      for (std::size_t j = 1; j < n; ++j) stage[j] -= dt * F[j];
      for (std::size_t j = 0; j < n; ++j) s[j] = (stage[j + 1] - stage[j]) / dx;
      core.prepare(s);
      core.interface_fluxes(s, 0.0, 0.0, F);
      for (std::size_t j = 1; j < n; ++j) v[j] = 0.5 * (v[j] + stage[j] - dt * F[j]);
    } else {
      for (std::size_t j = 1; j < n; ++j) v[j] -= dt * F[j];
      const double lam = cfg.eps * dt / (dx * dx);
      interior.assign(v.begin() + 1, v.end() - 1);
      interior.front() += lam * v.front();
      interior.back() += lam * v.back();
      detail::solve_heat_tridiagonal(interior, 0, interior.size(), lam, scratch);
      std::copy(interior.begin(), interior.end(), v.begin() + 1);
    }
    t = hit ? target : t + dt;
    ++diag.steps;
    diag.dt_history.push_back(dt);
    for (double x : v) {
      if (!std::isfinite(x)) throw InstabilityError("HJ solution became non-finite", t, diag.steps, 0);
    }
    if (hit) {
      traj.snapshots.emplace_back(cfg.grid, v, t, GridFunction::Layout::nodes);
      diag.leaked_at.push_back(0.0);
      ++next;
    }
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Duhamel fixed point. Space is discretized by the lattice operators
// L = eps D+D- and the central difference D0; the exact semigroup S(t) = exp(tL)
// acts through its Fourier multiplier on a zero-padded lattice, so splitting a
// run into many short blocks adds no smoothing of its own. On a block
// [t_m, t_m + D] with sub-nodes t_k = t_m + k d,
//   u_k = S(k d) u_m - sum_{j<=k} W_{k-j} D0 F_j,   W_i = int_{i d}^{(i+1) d} S(s) ds,
//   F_j = (f(u_{j-1}) + f(u_j)) / 2,
// iterated to a fixed point. Block lengths are quantized to powers of 2^{1/4}
// so their multipliers can be reused.

namespace detail {

struct BlockMultipliers {
  std::vector<std::vector<double>> heat;  // S(k d), k = 1..K
  std::vector<Spectrum> flux;             // -W_i D0, i = 0..K-1
};

inline std::size_t padded_length(std::size_t n) {
  std::size_t len = 1;
  while (len < 2 * n) len <<= 1;
  return len;
}

class LatticeDuhamel {
 public:
  LatticeDuhamel(double eps, std::size_t n, double dx, int K) : fft_(padded_length(n)), n_(n), K_(K) {
    const double N = static_cast<double>(fft_.size());
    lambda_.resize(fft_.bins());
    d0_.resize(fft_.bins());
    for (std::size_t m = 0; m < fft_.bins(); ++m) {
      const double xi = 2.0 * M_PI * static_cast<double>(m) / N;
      const double s = std::sin(0.5 * xi);
      lambda_[m] = 4.0 * eps * s * s / (dx * dx);
      d0_[m] = std::sin(xi) / dx;
    }
  }

  const BlockMultipliers& get(double length) {
    auto it = cache_.find(length);
    if (it != cache_.end()) return it->second;
    if (cache_.size() >= 6) cache_.erase(cache_.begin());
    const double d = length / K_;
    BlockMultipliers bm;
    bm.heat.assign(K_, std::vector<double>(lambda_.size()));
    bm.flux.assign(K_, Spectrum(lambda_.size()));
    for (std::size_t m = 0; m < lambda_.size(); ++m) {
      const double lam = lambda_[m];
      const double one = lam > 0.0 ? -std::expm1(-lam * d) / lam : d;
      for (int k = 0; k < K_; ++k) {
        bm.heat[k][m] = std::exp(-lam * d * (k + 1));
        const double w = std::exp(-lam * d * k) * one;
        bm.flux[k][m] = std::complex<double>(0.0, -w * d0_[m]);
      }
    }
    return cache_.emplace(length, std::move(bm)).first->second;
  }

  /// out[k-1] = S(k d) u for k = 1..K.
  void heat_part(const BlockMultipliers& bm, const std::vector<double>& u, std::vector<std::vector<double>>& out) {
    out.resize(K_);
    Spectrum uh = fft_.forward(u.data(), u.size());
    Spectrum tmp(uh.size());
    for (int k = 0; k < K_; ++k) {
      for (std::size_t i = 0; i < uh.size(); ++i) tmp[i] = uh[i] * bm.heat[k][i];
      out[k].resize(n_);
      fft_.inverse(tmp, out[k]);
    }
  }

  /// out[k-1] = sum_{j=1..k} (-W_{k-j} D0) F[j-1].
  void flux_part(const BlockMultipliers& bm, const std::vector<std::vector<double>>& F,
                 std::vector<std::vector<double>>& out) {
    out.resize(K_);
    std::vector<Spectrum> Fh(K_);
    for (int j = 0; j < K_; ++j) Fh[j] = fft_.forward(F[j].data(), F[j].size());
    Spectrum acc(Fh[0].size());
    for (int k = 1; k <= K_; ++k) {
      std::fill(acc.begin(), acc.end(), std::complex<double>(0.0, 0.0));
      for (int j = 1; j <= k; ++j) {
        const Spectrum& w = bm.flux[k - j];
        const Spectrum& fj = Fh[j - 1];
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w[i] * fj[i];
      }
      out[k - 1].resize(n_);
      fft_.inverse(acc, out[k - 1]);
    }
  }

 private:
  RealFFT fft_;
  std::size_t n_;
  int K_;
  std::vector<double> lambda_;
  std::vector<double> d0_;
  std::map<double, BlockMultipliers> cache_;
};

inline double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace detail

/// Duhamel-representation solver with Picard iteration on contraction windows.
/// With f = 0 each snapshot is one heat-kernel convolution of the previous one.
inline Trajectory run_duhamel(const SolverConfig& cfg, const FluxSpec& flux, const GridFunction& u0,
                              std::string init_id = {}) {
  cfg.validate();
  if (!(u0.grid == cfg.grid) || u0.layout != GridFunction::Layout::cells) {
    throw ConfigError("initial data does not live on the configured grid");
  }
  FluxEvaluator fe(flux);
  const std::size_t n = cfg.grid.n;
  const double dx = cfg.grid.dx();
  const double M0 = mass(u0);
  const int K = cfg.duhamel_substeps;

  Trajectory traj;
  traj.initial = u0;
  traj.initial.time = cfg.t_start;
  traj.provenance = {cfg, "duhamel", flux.id(), std::move(init_id)};
  Diagnostics& diag = traj.diagnostics;

  std::vector<double> u = u0.values;
  const double u0max = detail::max_abs(u);
  const double floor = -cfg.neg_tol * u0max;
  detail::check_state(u, floor, cfg.t_start, 0, diag);

  auto record = [&](double t) {
    diag.leaked = M0 - dx * detail::sum(u);
    traj.snapshots.emplace_back(cfg.grid, u, t);
    diag.leaked_at.push_back(diag.leaked);
  };

  double t = cfg.t_start;
  if (flux.is_zero()) {
    ConvolutionEngine engine(n);
    for (double target : cfg.snapshot_times) {
      u = engine.apply(heat_stencil(cfg.eps, target - t, dx, n), u);
      diag.dt_history.push_back(target - t);
      t = target;
      ++diag.steps;
      diag.picard_iterations.push_back(1);
      diag.picard_residuals.push_back(0.0);
      detail::check_state(u, floor, t, diag.steps, diag);
      record(t);
    }
    detail::finish_leakage(cfg, M0, u, u0max, diag);
    return traj;
  }

  if (fe.max_speed(u0max) * dx > 2.0 * cfg.eps) {
    diag.warnings.push_back("cell Peclet number above 1; central differencing may oscillate");
  }

  detail::LatticeDuhamel blocks(cfg.eps, n, dx, K);
  std::vector<std::vector<double>> heat, conv, iter(K), prev(K), F(K), fvals(K + 1);
  std::size_t next = 0;
  while (next < cfg.snapshot_times.size()) {
    const double target = cfg.snapshot_times[next];
    // Lipschitz constant of the Duhamel map on a block of length D is
    // C1 * int_0^D ||dG/dx(s)||_1 ds = 2 C1 sqrt(D / (pi eps)); keep it below 1/2.
    const double c1 = fe.max_speed(detail::max_value(u));
    double length = std::numeric_limits<double>::infinity();
    if (c1 > 0.0) {
      double dmax = cfg.block_scale * M_PI * cfg.eps / (16.0 * c1 * c1);
      length = std::exp2(std::floor(4.0 * std::log2(dmax)) / 4.0);
    }
    bool hit = false;
    if (t + length >= target * (1.0 - 1e-14)) {
      length = target - t;
      hit = true;
    }
    const auto& bm = blocks.get(length);
    blocks.heat_part(bm, u, heat);

    fvals[0].resize(n);
    for (std::size_t i = 0; i < n; ++i) fvals[0][i] = fe.value(u[i]);
    for (int k = 0; k < K; ++k) iter[k] = u;

    const double scale = std::max(detail::max_abs(u), std::numeric_limits<double>::min());
    double resid = std::numeric_limits<double>::infinity();
    double last = resid;
    int grew = 0;
    int it = 0;
    while (true) {
      ++it;
      for (int k = 1; k <= K; ++k) {
        fvals[k].resize(n);
        for (std::size_t i = 0; i < n; ++i) fvals[k][i] = fe.value(iter[k - 1][i]);
      }
      for (int j = 0; j < K; ++j) {
        F[j].resize(n);
        for (std::size_t i = 0; i < n; ++i) F[j][i] = 0.5 * (fvals[j][i] + fvals[j + 1][i]);
      }
      blocks.flux_part(bm, F, conv);
      resid = 0.0;
      for (int k = 0; k < K; ++k) {
        prev[k].swap(iter[k]);
        iter[k].resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          iter[k][i] = heat[k][i] + conv[k][i];
          resid = std::max(resid, std::abs(iter[k][i] - prev[k][i]));
        }
      }
      resid /= scale;
      if (!std::isfinite(resid)) {
        throw BlockSizeError("Picard iteration produced non-finite values; reduce the block length");
      }
      if (resid < cfg.picard_tol) break;
      grew = resid > last ? grew + 1 : 0;
      last = resid;
      if (grew >= 3 || it >= cfg.picard_max_iter) {
        std::ostringstream os;
        os << "Picard iteration did not contract on block [" << t << ", " << t + length << "] (residual "
           << resid << " after " << it << " iterations); reduce the block length";
        throw BlockSizeError(os.str());
      }
    }
    u = iter[K - 1];
    t = hit ? target : t + length;
    ++diag.steps;
    diag.dt_history.push_back(length);
    diag.block_lengths.push_back(length);
    diag.picard_iterations.push_back(it);
    diag.picard_residuals.push_back(resid);
    detail::check_state(u, floor, t, diag.steps, diag);
    if (hit) {
      record(t);
      ++next;
    }
  }
  detail::finish_leakage(cfg, M0, u, u0max, diag);
  return traj;
}

inline Trajectory run(const SolverConfig& cfg, const FluxSpec& flux, const GridFunction& u0,
                      std::string init_id = {}) {
  return cfg.scheme == Scheme::fv ? run_fv(cfg, flux, u0, std::move(init_id))
                                  : run_duhamel(cfg, flux, u0, std::move(init_id));
}

/// FV runs of several initial data under one shared operator (common interface
/// viscosities and time step at every step), so pairwise comparisons see the same
/// monotone map.
inline std::vector<Trajectory> run_fv_ensemble(const SolverConfig& cfg, const FluxSpec& flux,
                                               const std::vector<GridFunction>& u0s) {
  return detail::run_fv_lockstep(cfg, flux, u0s, {});
}

}  // namespace viscid

#endif  // VISCID_SOLVER_HPP
