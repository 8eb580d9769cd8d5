#ifndef VISCID_REPORT_HPP
#define VISCID_REPORT_HPP

// Persistence of runs and reports: CSV snapshots and series, JSON reports and
// manifests, Markdown tables and gnuplot scripts.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "viscid/analysis.hpp"
#include "viscid/flux.hpp"

namespace viscid {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "1.0.0";

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out.flush()) throw IoError("write failed for " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// %.17g: enough digits for every double to read back exactly.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string csv_columns(const std::vector<std::string>& header, const std::vector<std::vector<double>>& cols) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += '\n';
  const std::size_t rows = cols.empty() ? 0 : cols[0].size();
  for (const auto& c : cols) {
    if (c.size() != rows) throw PreconditionError("CSV columns differ in length");
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + fmt17(cols[i][r]);
    out += '\n';
  }
  return out;
}

/// `x,u` rows at cell centres (or nodes for node-layout functions).
inline std::string snapshot_csv(const GridFunction& g) {
  std::vector<double> x(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) x[j] = g.x(j);
  return csv_columns({"x", "u"}, {x, g.values});
}

/// `t,norm` rows.
inline std::string series_csv(const std::vector<double>& t, const std::vector<double>& y) {
  return csv_columns({"t", "norm"}, {t, y});
}

/// Columns of a CSV file with one header row.
inline std::vector<std::vector<double>> read_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<std::vector<double>> cols;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      cols.resize(std::count(line.begin(), line.end(), ',') + 1);
      header = false;
      continue;
    }
    std::stringstream ls(line);
    std::size_t i = 0;
    for (std::string cell; std::getline(ls, cell, ','); ++i) {
      if (i >= cols.size()) throw IoError("ragged CSV row in " + path.string());
      cols[i].push_back(std::stod(cell));
    }
    if (i != cols.size()) throw IoError("ragged CSV row in " + path.string());
  }
  return cols;
}

/// Reload a snapshot written by snapshot_csv onto its grid.
inline GridFunction load_snapshot_csv(const std::filesystem::path& path, const Grid& grid,
                                      GridFunction::Layout layout = GridFunction::Layout::cells) {
  auto cols = read_csv(path);
  if (cols.size() != 2) throw IoError(path.string() + " is not an x,u file");
  return GridFunction(grid, cols[1], std::nullopt, layout);
}

// ---------------------------------------------------------------------------
// JSON

inline Json to_json(const Grid& g) { return Json{{"x_lo", g.x_lo}, {"x_hi", g.x_hi}, {"n", g.n}, {"dx", g.dx()}}; }

inline Json to_json(const EstimateCheck& c, bool with_details = true) {
  Json j{{"name", c.name},
         {"verdict", c.verdict()},
         {"applicable", c.applicable},
         {"lhs_max_ratio", c.lhs_max_ratio},
         {"tol", c.tol},
         {"note", c.note}};
  if (with_details) {
    Json rows = Json::array();
    for (const auto& r : c.details) {
      rows.push_back({{"t", r.t}, {"measured", r.measured}, {"bound", r.bound}, {"ratio", r.ratio}});
    }
    j["details"] = std::move(rows);
  }
  return j;
}

inline Json to_json(const std::vector<EstimateCheck>& checks, bool with_details = true) {
  Json a = Json::array();
  for (const auto& c : checks) a.push_back(to_json(c, with_details));
  return a;
}

inline Json to_json(const DecayFit& f) {
  Json j{{"norm_p", std::isinf(f.norm_p) ? Json("inf") : Json(f.norm_p)},
         {"window", {f.window.t_min, f.window.t_max}},
         {"points", f.points},
         {"exponent", f.exponent},
         {"constant", f.constant},
         {"r2", f.r2}};
  j["theoretical_exponent"] = f.theoretical_exponent ? Json(*f.theoretical_exponent) : Json();
  j["theoretical_constant_bound"] = f.theoretical_constant_bound ? Json(*f.theoretical_constant_bound) : Json();
  return j;
}

inline Json to_json(const HjResidual& r) {
  return Json{{"residual", r.residual}, {"scale", r.scale}, {"ratio", r.ratio}, {"x", r.x}, {"t", r.t},
              {"within", r.within()}};
}

inline Json to_json(const Diagnostics& d) {
  Json j{{"steps", d.steps}, {"leaked", d.leaked}, {"min_value", d.min_value}};
  if (!d.dt_history.empty()) {
    auto [lo, hi] = std::minmax_element(d.dt_history.begin(), d.dt_history.end());
    j["dt_min"] = *lo;
    j["dt_max"] = *hi;
  }
  if (!d.picard_iterations.empty()) {
    j["picard_blocks"] = d.picard_iterations.size();
    j["picard_max_iterations"] = *std::max_element(d.picard_iterations.begin(), d.picard_iterations.end());
    j["picard_max_residual"] = *std::max_element(d.picard_residuals.begin(), d.picard_residuals.end());
  }
  j["leaked_at"] = d.leaked_at;
  j["warnings"] = d.warnings;
  return j;
}

inline Json to_json(const Provenance& p) {
  return Json{{"scheme", p.scheme},
              {"flux", p.flux_id},
              {"init", p.init_id},
              {"eps", p.config.eps},
              {"grid", to_json(p.config.grid)},
              {"t_start", p.config.t_start},
              {"t_end", p.config.t_end},
              {"snapshot_times", p.config.snapshot_times},
              {"cfl", p.config.cfl}};
}

inline Json to_json(const PCondCertification& c) {
  Json deficits = Json::array();
  for (auto [eta, d] : c.slack.deficits) deficits.push_back({eta, d});
  return Json{{"pass", c.pass()},
              {"p", c.params.p},
              {"a", c.params.a},
              {"b", c.params.b},
              {"gamma", c.params.gamma},
              {"gamma_fit", std::isfinite(c.slack.gamma_fit) ? Json(c.slack.gamma_fit) : Json()},
              {"slack_vanishes", c.slack.vanishing},
              {"r_range", {c.params.r_range.lo, c.params.r_range.hi}},
              {"eta_range", {c.params.eta_range.lo, c.params.eta_range.hi}},
              {"min_margin", c.report.min_margin},
              {"min_margin_r", c.report.min_margin_r},
              {"min_margin_eta", c.report.min_margin_eta},
              {"best_a_b0", c.report.best_a_b0},
              {"points", c.report.points},
              {"deficits", deficits}};
}

inline Json to_json(const SweepReport& s) {
  Json rows = Json::array();
  for (const auto& r : s.rows) {
    Json j{{"eps", r.eps},
           {"grid", to_json(r.grid)},
           {"pcond_linf", to_json(r.pcond, false)},
           {"l2_powerlaw", to_json(r.l2, false)},
           {"carlen_loss", to_json(r.carlen, false)},
           {"feireisl", to_json(r.feireisl, false)}};
    j["linf_fit"] = r.linf_fit ? to_json(*r.linf_fit) : Json();
    j["l2_fit"] = r.l2_fit ? to_json(*r.l2_fit) : Json();
    rows.push_back(std::move(j));
  }
  return Json{{"pass", s.pass()},
              {"bounded", s.bounded()},
              {"flat", s.flat()},
              {"slope_pcond", s.slope_pcond},
              {"slope_l2", s.slope_l2},
              {"slope_band", s.slope_band},
              {"rows", rows}};
}

inline Json to_json(const InviscidReport& r) {
  Json rows = Json::array();
  for (const auto& x : r.rows) {
    rows.push_back({{"eps", x.eps}, {"n", x.n}, {"l1_error", x.l1_error}, {"cauchy", x.cauchy}, {"sup", x.sup}});
  }
  return Json{{"pass", r.pass()},     {"monotone", r.monotone()}, {"M", r.M},
              {"q", r.q},             {"t", r.t},                 {"sup_bound", r.sup_bound},
              {"sup_ratio", r.sup_ratio}, {"final_target", r.final_target}, {"tol", r.tol},
              {"rows", rows}};
}

inline Json to_json(const UniquenessReport& r) {
  Json pairs = Json::array();
  for (const auto& p : r.pairs) pairs.push_back({{"h_i", p.h_i}, {"h_j", p.h_j}, {"distance", p.distance}});
  return Json{{"pass", r.pass()},
              {"converges", r.converges()},
              {"shape_comparable", r.shape_comparable()},
              {"uniform_sup", r.uniform_sup()},
              {"h_list", r.h_list},
              {"order", r.order},
              {"min_order", r.min_order},
              {"shape_h", r.shape_h},
              {"shape_distance", r.shape_distance},
              {"shape_reference", r.shape_reference},
              {"sup_constants", r.sup_constants},
              {"sup_bound", r.sup_bound},
              {"pairs", pairs}};
}

inline Json to_json(const NashEstimate& n) {
  return Json{{"C_hat", n.C_hat}, {"ratios", n.ratios}, {"notes", n.notes}, {"empirical", true}};
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Markdown

inline std::string md_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::string out = "|";
  for (const auto& h : header) out += " " + h + " |";
  out += "\n|";
  for (std::size_t i = 0; i < header.size(); ++i) out += "---|";
  out += "\n";
  for (const auto& r : rows) {
    out += "|";
    for (const auto& c : r) out += " " + c + " |";
    out += "\n";
  }
  return out;
}

inline std::string md_checks(const std::vector<EstimateCheck>& checks) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& c : checks) {
    rows.push_back({c.name, c.verdict(), c.applicable ? fmt6(c.lhs_max_ratio) : "-", fmt6(c.tol), c.note});
  }
  return md_table({"check", "verdict", "max ratio", "tol", "note"}, rows);
}

inline std::string md_fits(const std::vector<DecayFit>& fits, double band) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& f : fits) {
    std::string theory = f.theoretical_exponent ? fmt6(*f.theoretical_exponent) : "-";
    std::string verdict = "-";
    if (f.theoretical_exponent) {
      verdict = std::abs(f.exponent - *f.theoretical_exponent) <= band ? "pass" : "fail";
    }
    rows.push_back({std::isinf(f.norm_p) ? "inf" : fmt6(f.norm_p), fmt6(f.exponent), theory, fmt6(f.constant),
                    fmt6(f.r2), fmt6(f.window.t_min) + " .. " + fmt6(f.window.t_max), std::to_string(f.points),
                    verdict});
  }
  return md_table({"norm", "exponent", "theory", "constant", "r2", "window", "points", "verdict"}, rows);
}

inline std::string md_sweep(const SweepReport& s) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : s.rows) {
    rows.push_back({fmt6(r.eps), std::to_string(r.grid.n), fmt6(r.pcond.lhs_max_ratio), fmt6(r.l2.lhs_max_ratio),
                    r.carlen.applicable ? fmt6(r.carlen.lhs_max_ratio) : "n/a", r.feireisl.note,
                    r.linf_fit ? fmt6(r.linf_fit->exponent) : "-", r.l2_fit ? fmt6(r.l2_fit->exponent) : "-"});
  }
  return md_table({"eps", "cells", "pcond_linf ratio", "l2_powerlaw ratio", "carlen_loss ratio", "feireisl",
                   "sup exponent", "L2 exponent"},
                  rows) +
         "\nslope of the pcond_linf ratio against ln eps: " + fmt6(s.slope_pcond) +
         "\nslope of the l2_powerlaw ratio against ln eps: " + fmt6(s.slope_l2) + " (band " + fmt6(s.slope_band) +
         ")\n\nverdict: " + (s.pass() ? "pass" : "fail") + "\n";
}

inline std::string md_inviscid(const InviscidReport& r) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& x : r.rows) {
    rows.push_back({fmt6(x.eps), std::to_string(x.n), fmt6(x.l1_error), fmt6(x.cauchy), fmt6(x.sup)});
  }
  return md_table({"eps", "cells", "L1 error", "L1 to previous", "sup"}, rows) + "\nsup ratio at the smallest eps: " +
         fmt6(r.sup_ratio) + "\nverdict: " + (r.pass() ? "pass" : "fail") + "\n";
}

inline std::string md_uniqueness(const UniquenessReport& r) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& p : r.pairs) rows.push_back({fmt6(p.h_i), fmt6(p.h_j), fmt6(p.distance)});
  return md_table({"h_i", "h_j", "sup |U_i - U_j|"}, rows) + "\nfitted order: " + fmt6(r.order) +
         "\nbump vs hat at h = " + fmt6(r.shape_h) + ": " + fmt6(r.shape_distance) + " (reference " +
         fmt6(r.shape_reference) + ")\nverdict: " + (r.pass() ? "pass" : "fail") + "\n";
}

inline std::string md_pcond(const PCondCertification& c) {
  return md_table({"p", "a", "b", "gamma", "min margin", "best a (b = 0)", "verdict"},
                  {{fmt6(c.params.p), fmt6(c.params.a), fmt6(c.params.b), fmt6(c.params.gamma),
                    fmt6(c.report.min_margin), fmt6(c.report.best_a_b0), c.pass() ? "pass" : "fail"}});
}

// ---------------------------------------------------------------------------
// gnuplot

struct PlotSeries {
  std::string file;  ///< CSV path relative to the script
  std::string title;
  std::string columns = "1:2";
};

inline std::string plot_script(const std::string& output_png, const std::string& title, const std::string& xlabel,
                               const std::string& ylabel, const std::vector<PlotSeries>& series, bool logx = false,
                               bool logy = false) {
  std::string s = "set terminal pngcairo size 900,600\n";
  s += "set output '" + output_png + "'\n";
  s += "set datafile separator ','\n";
  s += "set key autotitle columnhead\n";
  s += "set title '" + title + "'\n";
  s += "set xlabel '" + xlabel + "'\nset ylabel '" + ylabel + "'\n";
  if (logx) s += "set logscale x\n";
  if (logy) s += "set logscale y\n";
  s += "plot ";
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (i) s += ", \\\n     ";
    s += "'" + series[i].file + "' using " + series[i].columns + " with lines title '" + series[i].title + "'";
  }
  return s + "\n";
}

// ---------------------------------------------------------------------------
// Manifest and claims matrix

struct RunManifest {
  std::string config_hash;
  std::string command;
  std::map<std::string, std::string> inputs;  ///< resolved configuration
  std::vector<std::string> outputs;
  std::vector<std::pair<std::string, std::string>> verdicts;  ///< (check, verdict)
  std::string tool_version = kToolVersion;
};

inline Json to_json(const RunManifest& m) {
  Json inputs = Json::object();
  for (const auto& [k, v] : m.inputs) inputs[k] = Json::parse(v);  // canonical values are JSON literals
  Json verdicts = Json::array();
  for (const auto& [k, v] : m.verdicts) verdicts.push_back({{"check", k}, {"verdict", v}});
  return Json{{"config_hash", m.config_hash}, {"command", m.command},  {"inputs", inputs},
              {"outputs", m.outputs},         {"verdicts", verdicts}, {"tool_version", m.tool_version}};
}

struct ClaimRow {
  std::string id;
  std::string statement;
  std::string verdict;
  std::string measured;
};

inline Json to_json(const std::vector<ClaimRow>& rows) {
  Json a = Json::array();
  for (const auto& r : rows) {
    a.push_back({{"id", r.id}, {"statement", r.statement}, {"verdict", r.verdict}, {"measured", r.measured}});
  }
  return a;
}

inline std::string md_claims(const std::vector<ClaimRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) cells.push_back({r.id, r.statement, r.verdict, r.measured});
  return md_table({"estimate", "statement", "verdict", "measured"}, cells);
}

}  // namespace viscid

#endif  // VISCID_REPORT_HPP
