#ifndef VISCID_CONFIG_HPP
#define VISCID_CONFIG_HPP

// Run configuration: a flat TOML-style key/value file.
//
//   # comment
//   [solver]
//   eps = 0.01
//   snap = [0.1, 0.5, 1]
//   [init]
//   atoms = [[0, 1], [2, 0.5]]     # [x, M] pairs
//
// Values are numbers, quoted strings, booleans or (nested) numeric arrays.
// Every value is stored in canonical text form, so the digest of the resolved
// configuration does not depend on spacing, key order or number spelling.

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "viscid/analysis.hpp"
#include "viscid/flux.hpp"
#include "viscid/initial_data.hpp"
#include "viscid/solver.hpp"

namespace viscid {

inline std::string format_number(double v) {
  if (!std::isfinite(v)) throw ConfigError("configuration numbers must be finite");
  if (v == 0.0) return "0";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

namespace detail {

class ValueParser {
 public:
  ValueParser(std::string_view text, std::string where) : s_(text), where_(std::move(where)) {}

  std::string canonical() {
    std::string out = value();
    skip_space();
    if (i_ != s_.size()) fail("trailing characters");
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(where_ + ": " + what + " in '" + std::string(s_) + "'");
  }

  void skip_space() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }

  std::string value() {
    skip_space();
    if (i_ >= s_.size()) fail("missing value");
    char c = s_[i_];
    if (c == '[') return array();
    if (c == '"') return quoted();
    return bare();
  }

  std::string array() {
    ++i_;
    std::string out = "[";
    skip_space();
    if (i_ < s_.size() && s_[i_] == ']') {
      ++i_;
      return "[]";
    }
    for (;;) {
      std::string v = value();
      if (v.front() == '"') fail("arrays hold numbers only");
      out += v;
      skip_space();
      if (i_ >= s_.size()) fail("unterminated array");
      if (s_[i_] == ',') {
        ++i_;
        skip_space();
        if (i_ < s_.size() && s_[i_] == ']') {  // trailing comma
          ++i_;
          break;
        }
        out += ',';
        continue;
      }
      if (s_[i_] == ']') {
        ++i_;
        break;
      }
      fail("expected ',' or ']'");
    }
    return out + "]";
  }

  std::string quoted() {
    std::size_t end = s_.find('"', i_ + 1);
    if (end == std::string_view::npos) fail("unterminated string");
    std::string body(s_.substr(i_ + 1, end - i_ - 1));
    i_ = end + 1;
    return '"' + body + '"';
  }

  std::string bare() {
    std::size_t start = i_;
    while (i_ < s_.size() && s_[i_] != ',' && s_[i_] != ']' && !std::isspace(static_cast<unsigned char>(s_[i_]))) {
      ++i_;
    }
    std::string tok(s_.substr(start, i_ - start));
    if (tok == "true" || tok == "false") return tok;
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec == std::errc() && res.ptr == tok.data() + tok.size()) return format_number(v);
    // Bare words are accepted as strings (scheme = fv).
    for (char ch : tok) {
      if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.' || ch == '/' ||
            ch == ':' || ch == '@')) {
        fail("bad token '" + tok + "'");
      }
    }
    return '"' + tok + '"';
  }

  std::string_view s_;
  std::string where_;
  std::size_t i_ = 0;
};

/// Parses a canonical numeric array into nested vectors; depth 1 or 2.
inline std::vector<std::vector<double>> parse_table(const std::string& text, const std::string& key) {
  std::vector<std::vector<double>> rows;
  if (text.size() < 2 || text.front() != '[') throw ConfigError(key + ": expected an array");
  std::string body = text.substr(1, text.size() - 2);
  auto numbers = [&](const std::string& s) {
    std::vector<double> v;
    std::size_t pos = 0;
    while (pos < s.size()) {
      std::size_t end = s.find(',', pos);
      if (end == std::string::npos) end = s.size();
      double x = 0.0;
      auto res = std::from_chars(s.data() + pos, s.data() + end, x);
      if (res.ec != std::errc() || res.ptr != s.data() + end) throw ConfigError(key + ": expected numbers");
      v.push_back(x);
      pos = end + 1;
    }
    return v;
  };
  if (body.empty()) return rows;
  if (body.front() != '[') {
    rows.push_back(numbers(body));
    return rows;
  }
  std::size_t pos = 0;
  while (pos < body.size()) {
    if (body[pos] != '[') throw ConfigError(key + ": mixed array nesting");
    std::size_t end = body.find(']', pos);
    if (end == std::string::npos) throw ConfigError(key + ": unterminated row");
    rows.push_back(numbers(body.substr(pos + 1, end - pos - 1)));
    pos = end + 1;
    if (pos < body.size() && body[pos] == ',') ++pos;
  }
  return rows;
}

}  // namespace detail

/// Resolved run configuration. Keys not listed in known_keys() are rejected.
class RunConfig {
 public:
  /// Every key with a default; optional keys without a default follow.
  static RunConfig defaults() {
    RunConfig c;
    const std::pair<const char*, const char*> d[] = {
        {"flux.kind", "power"},
        {"flux.p", "2"},
        {"init.atoms", "[[0,1]]"},
        {"init.mollify_h", "0.01"},
        {"init.shape", "bump"},
        {"solver.eps", "0.1"},
        {"solver.scheme", "fv"},
        {"solver.variant", "central_limited"},
        {"solver.t_start", "0"},
        {"solver.t_end", "1"},
        {"solver.snap", "[1]"},
        {"solver.cfl", "0.9"},
        {"solver.strict", "false"},
        {"solver.picard_tol", "1e-10"},
        {"solver.picard_max_iter", "60"},
        {"solver.block_scale", "1"},
        {"grid.n", "0"},
        {"decay.t_first", "0.01"},
        {"decay.snaps", "32"},
        {"decay.exponent_band", "0.05"},
        {"pcond.r_range", "[1e-6,1e3]"},
        {"pcond.eta_range", "[1e-4,1e-1]"},
        {"sweep.eps_list", "[0.1,0.01,0.001]"},
        {"sweep.h", "0.005"},
        {"sweep.dx_factor", "0.25"},
        {"sweep.t_end", "2"},
        {"sweep.snaps", "32"},
        {"sweep.slope_band", "0.1"},
        {"inviscid.eps_list", "[0.1,0.03,0.01,0.003,0.001]"},
        {"inviscid.t", "1"},
        {"inviscid.h", "0.005"},
        {"unique.h_list", "[0.2,0.1,0.05,0.025]"},
        {"unique.t", "0.5"},
        {"unique.n", "2000"},
        {"oracle.kind", "auto"},
        {"check.structural_tol", "1e-10"},
        {"check.estimate_tol", "0.05"},
        {"jobs", "0"},
        {"output.dir", "out"},
    };
    for (auto [k, v] : d) c.put(k, v, "defaults");
    return c;
  }

  static const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = [] {
      std::set<std::string> k;
      for (const auto& [key, v] : defaults().values_) k.insert(key);
      for (const char* opt : {"flux.terms", "flux.table", "init.density", "init.density_csv", "grid.lo", "grid.hi",
                              "pcond.a", "pcond.gamma", "command"}) {
        k.insert(opt);
      }
      return k;
    }();
    return keys;
  }

  /// Keys that never influence numeric output and are left out of the digest.
  static bool hashed(const std::string& key) { return key != "jobs" && key != "output.dir"; }

  static RunConfig parse(std::istream& in, const std::string& source = "config") {
    RunConfig c;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string where = source + ":" + std::to_string(lineno);
      auto hash = std::string::npos;
      bool in_str = false;
      for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_str = !in_str;
        if (line[i] == '#' && !in_str) {
          hash = i;
          break;
        }
      }
      if (hash != std::string::npos) line.erase(hash);
      auto text = trim(line);
      if (text.empty()) continue;
      if (text.front() == '[' && text.find('=') == std::string::npos) {
        if (text.back() != ']') throw ConfigError(where + ": bad section header");
        section = trim(text.substr(1, text.size() - 2));
        continue;
      }
      auto eq = text.find('=');
      if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
      std::string key = trim(text.substr(0, eq));
      if (!section.empty()) key = section + "." + key;
      c.set(key, text.substr(eq + 1), where);
    }
    return c;
  }

  static RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open configuration file " + path);
    return parse(in, path);
  }

  void set(const std::string& key, const std::string& raw, const std::string& where = "override") {
    if (!known_keys().count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    put(key, raw, where);
  }

  void set_number(const std::string& key, double v) { set(key, format_number(v)); }
  void set_string(const std::string& key, const std::string& v) { set(key, '"' + v + '"'); }

  void erase(const std::string& key) { values_.erase(key); }

  /// Entries of `other` override ours.
  void merge(const RunConfig& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  const std::string& raw(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing configuration key '" + key + "'");
    return it->second;
  }

  double number(const std::string& key) const {
    const auto& r = raw(key);
    double v = 0.0;
    auto res = std::from_chars(r.data(), r.data() + r.size(), v);
    if (res.ec != std::errc() || res.ptr != r.data() + r.size()) throw ConfigError(key + ": expected a number");
    return v;
  }

  long integer(const std::string& key) const {
    double v = number(key);
    if (v != std::floor(v)) throw ConfigError(key + ": expected an integer");
    return static_cast<long>(v);
  }

  bool boolean(const std::string& key) const {
    const auto& r = raw(key);
    if (r == "true") return true;
    if (r == "false") return false;
    throw ConfigError(key + ": expected true or false");
  }

  std::string string(const std::string& key) const {
    const auto& r = raw(key);
    if (r.size() < 2 || r.front() != '"') throw ConfigError(key + ": expected a string");
    return r.substr(1, r.size() - 2);
  }

  std::vector<double> list(const std::string& key) const {
    auto rows = detail::parse_table(raw(key), key);
    if (rows.size() != 1 && !rows.empty()) throw ConfigError(key + ": expected a flat array");
    return rows.empty() ? std::vector<double>{} : rows[0];
  }

  std::vector<std::vector<double>> table(const std::string& key) const {
    const auto& r = raw(key);
    if (r.size() > 2 && r[1] != '[') throw ConfigError(key + ": expected an array of rows");
    return detail::parse_table(r, key);
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

  /// "key = value" lines in key order, hashed keys only.
  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) {
      if (hashed(k)) out += k + " = " + v + "\n";
    }
    return out;
  }

  std::string hash() const { return sha256_hex(canonical()); }

 private:
  static std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

  void put(const std::string& key, const std::string& raw, const std::string& where) {
    values_[key] = detail::ValueParser(raw, where + " [" + key + "]").canonical();
  }

  std::map<std::string, std::string> values_;
};

inline RunConfig resolved_config(const std::optional<std::string>& path = std::nullopt) {
  RunConfig c = RunConfig::defaults();
  if (path) c.merge(RunConfig::load(*path));
  return c;
}

// ---------------------------------------------------------------------------
// Short flag forms: --flux power:2 | polysum:1@2,0.5@3 | zero | table:path
//                   --init dirac:1@0+dirac:0.5@2 | box:lo:hi:value | csv:path

inline void apply_flux_flag(RunConfig& c, const std::string& spec) {
  auto colon = spec.find(':');
  std::string kind = spec.substr(0, colon);
  std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
  for (const char* k : {"flux.p", "flux.terms", "flux.table"}) c.erase(k);
  if (kind == "zero") {
    c.set_string("flux.kind", "zero");
  } else if (kind == "power") {
    c.set_string("flux.kind", "power");
    c.set("flux.p", rest);
  } else if (kind == "polysum") {
    std::string terms = "[";
    std::stringstream ss(rest);
    std::string item;
    bool first = true;
    while (std::getline(ss, item, ',')) {
      auto at = item.find('@');
      if (at == std::string::npos) throw ConfigError("polysum terms are mu@p");
      terms += std::string(first ? "" : ",") + "[" + item.substr(0, at) + "," + item.substr(at + 1) + "]";
      first = false;
    }
    c.set_string("flux.kind", "polysum");
    c.set("flux.terms", terms + "]");
  } else if (kind == "table") {
    c.set_string("flux.kind", "table");
    c.set_string("flux.table", rest);
  } else {
    throw ConfigError("unknown flux '" + spec + "'");
  }
}

inline void apply_init_flag(RunConfig& c, const std::string& spec) {
  std::string atoms;
  c.erase("init.density");
  c.erase("init.density_csv");
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, '+')) {
    if (item.rfind("dirac:", 0) == 0) {
      auto body = item.substr(6);
      auto at = body.find('@');
      std::string M = body.substr(0, at), x = at == std::string::npos ? "0" : body.substr(at + 1);
      atoms += std::string(atoms.empty() ? "" : ",") + "[" + x + "," + M + "]";
    } else if (item.rfind("box:", 0) == 0) {
      std::vector<std::string> f;
      std::stringstream bs(item.substr(4));
      for (std::string t; std::getline(bs, t, ':');) f.push_back(t);
      if (f.size() != 3) throw ConfigError("box density is box:lo:hi:value");
      c.set("init.density", "[[" + f[0] + "," + f[2] + "],[" + f[1] + "," + f[2] + "]]");
    } else if (item.rfind("csv:", 0) == 0) {
      c.set_string("init.density_csv", item.substr(4));
    } else {
      throw ConfigError("unknown initial data '" + item + "'");
    }
  }
  c.set("init.atoms", "[" + atoms + "]");
}

inline std::vector<double> parse_time_list(const std::string& s) {
  std::vector<double> t;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    auto a = item.find_first_not_of(" \t"), b = item.find_last_not_of(" \t");
    const char* lo = a == std::string::npos ? item.data() : item.data() + a;
    const char* hi = a == std::string::npos ? item.data() : item.data() + b + 1;
    double v = 0.0;
    auto res = std::from_chars(lo, hi, v);
    if (res.ec != std::errc() || res.ptr != hi || lo == hi) throw ConfigError("bad time '" + item + "'");
    t.push_back(v);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Builders

inline FluxSpec load_flux_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open flux table " + path);
  std::vector<double> r, f;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double a, b;
    if (!(ls >> a >> b)) continue;
    r.push_back(a);
    f.push_back(b);
  }
  return FluxSpec::tabulated(std::move(r), std::move(f));
}

inline FluxSpec build_flux(const RunConfig& c) {
  std::string kind = c.string("flux.kind");
  if (kind == "zero") return FluxSpec::zero();
  if (kind == "power") return FluxSpec::power_law(c.number("flux.p"));
  if (kind == "polysum") {
    std::vector<PolyTerm> terms;
    for (const auto& row : c.table("flux.terms")) {
      if (row.size() != 2) throw ConfigError("flux.terms rows are [mu, p]");
      terms.push_back({row[0], row[1]});
    }
    if (terms.empty()) throw ConfigError("flux.terms is empty");
    return FluxSpec::poly_sum(std::move(terms));
  }
  if (kind == "table") return load_flux_table(c.string("flux.table"));
  throw ConfigError("flux.kind must be power, polysum, table or zero");
}

inline MeasureData build_measure(const RunConfig& c) {
  MeasureData mu;
  for (const auto& row : c.table("init.atoms")) {
    if (row.size() != 2) throw ConfigError("init.atoms rows are [x, M]");
    mu = mu + dirac(row[1], row[0]);
  }
  if (c.has("init.density")) {
    std::vector<double> x, u;
    for (const auto& row : c.table("init.density")) {
      if (row.size() != 2) throw ConfigError("init.density rows are [x, u]");
      x.push_back(row[0]);
      u.push_back(row[1]);
    }
    mu.density = PiecewisePolynomial::linear(x, u);
  } else if (c.has("init.density_csv")) {
    mu.density = load_density_csv(c.string("init.density_csv"));
  }
  mu.validate();
  return mu;
}

inline MollifierShape build_shape(const RunConfig& c) {
  std::string s = c.string("init.shape");
  if (s == "bump") return MollifierShape::bump;
  if (s == "hat") return MollifierShape::hat;
  if (s == "cosine") return MollifierShape::cosine;
  throw ConfigError("init.shape must be bump, hat or cosine");
}

inline Tolerances build_tolerances(const RunConfig& c) {
  return {c.number("check.structural_tol"), c.number("check.estimate_tol")};
}

inline unsigned build_jobs(const RunConfig& c) {
  long j = c.integer("jobs");
  if (j < 0) throw ConfigError("jobs must be >= 0");
  if (const char* env = std::getenv("VISCID_JOBS"); env && std::atoi(env) > 0) return default_jobs();
  return j == 0 ? default_jobs() : static_cast<unsigned>(j);
}

/// Solver settings; the grid is explicit when grid.lo/grid.hi are set and
/// otherwise sized around the data (auto_grid) for the configured t_end.
inline SolverConfig build_solver_config(const RunConfig& c, const FluxSpec& flux, const MeasureData& mu) {
  SolverConfig s;
  s.eps = c.number("solver.eps");
  std::string scheme = c.string("solver.scheme");
  if (scheme == "fv") {
    s.scheme = Scheme::fv;
  } else if (scheme == "duhamel") {
    s.scheme = Scheme::duhamel;
  } else {
    throw ConfigError("solver.scheme must be fv or duhamel");
  }
  std::string variant = c.string("solver.variant");
  if (variant == "central_limited") {
    s.fv_variant = FvVariant::central_limited;
  } else if (variant == "eo_explicit") {
    s.fv_variant = FvVariant::eo_explicit;
  } else if (variant == "eo_implicit") {
    s.fv_variant = FvVariant::eo_implicit;
  } else {
    throw ConfigError("solver.variant must be central_limited, eo_explicit or eo_implicit");
  }
  s.t_start = c.number("solver.t_start");
  s.t_end = c.number("solver.t_end");
  s.snapshot_times = c.list("solver.snap");
  s.cfl = c.number("solver.cfl");
  s.strict = c.boolean("solver.strict");
  s.picard_tol = c.number("solver.picard_tol");
  s.picard_max_iter = static_cast<int>(c.integer("solver.picard_max_iter"));
  s.block_scale = c.number("solver.block_scale");
  long n = c.integer("grid.n");
  if (n < 0) throw ConfigError("grid.n must be >= 0");
  if (c.has("grid.lo") != c.has("grid.hi")) throw ConfigError("grid.lo and grid.hi go together");
  if (c.has("grid.lo")) {
    s.grid = Grid(c.number("grid.lo"), c.number("grid.hi"), n > 0 ? static_cast<std::size_t>(n) : 1000);
  } else {
    double h = c.number("init.mollify_h");
    Grid g = auto_grid(flux, mu, s.eps, s.t_end, h, std::min(0.25 * s.eps, 0.25 * h));
    s.grid = n > 0 ? Grid(g.x_lo, g.x_hi, static_cast<std::size_t>(n)) : g;
  }
  s.validate();
  return s;
}

}  // namespace viscid

#endif  // VISCID_CONFIG_HPP
