#pragma once

// Scenario runner behind the lindblad_lab command-line tool: JSON config
// ingestion, pipeline execution, CSV trajectories and comparison reports.
//
// Exit codes: 0 success, 2 config/parse failure, 3 pipeline precondition
// failure, 4 tolerance breach.

#include "lindblad_lab/exact.hpp"
#include "lindblad_lab/redfield.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace lindblad_lab::cli {

using json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kParseError = 2, kPreconditionError = 3, kToleranceBreach = 4 };

class CliError : public std::runtime_error {
 public:
  CliError(ExitCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  ExitCode code() const { return code_; }

 private:
  ExitCode code_;
};

[[noreturn]] inline void parse_fail(const std::string& where, const std::string& msg) {
  throw CliError(kParseError, where + ": " + msg);
}

[[noreturn]] inline void precondition_fail(const std::string& pipeline, const std::string& msg) {
  throw CliError(kPreconditionError, "pipeline '" + pipeline + "': " + msg);
}

// ---------------------------------------------------------------------------
// JSON helpers

inline const json& field(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object()) parse_fail(where, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) parse_fail(where + "/" + key, "missing required field");
  return *it;
}

inline double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) parse_fail(where, "expected a number, got " + std::string(v.type_name()));
  const double x = v.get<double>();
  if (!std::isfinite(x)) parse_fail(where, "non-finite number");
  return x;
}

inline int as_int(const json& v, const std::string& where) {
  if (!v.is_number_integer()) parse_fail(where, "expected an integer, got " + std::string(v.type_name()));
  return v.get<int>();
}

// Complex numbers are [re, im]; a bare number is read as real.
inline complex as_complex(const json& v, const std::string& where) {
  if (v.is_number()) return {as_number(v, where), 0.0};
  if (!v.is_array() || v.size() != 2) parse_fail(where, "expected a complex number [re, im]");
  return {as_number(v[0], where + "/0"), as_number(v[1], where + "/1")};
}

inline json complex_to_json(complex z) { return json::array({z.real(), z.imag()}); }

// Row-major nested arrays.
inline Operator as_matrix(const json& v, const std::string& where, Eigen::Index expected_dim = -1) {
  if (!v.is_array() || v.empty()) parse_fail(where, "expected a non-empty array of rows");
  const auto n = static_cast<Eigen::Index>(v.size());
  Operator m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const json& row = v[static_cast<std::size_t>(i)];
    const std::string rw = where + "/" + std::to_string(i);
    if (!row.is_array()) parse_fail(rw, "expected a row array");
    if (static_cast<Eigen::Index>(row.size()) != n)
      parse_fail(rw, "matrix is not square (" + std::to_string(n) + " rows, row has " + std::to_string(row.size()) +
                         " entries)");
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = as_complex(row[static_cast<std::size_t>(j)], rw + "/" + std::to_string(j));
  }
  if (expected_dim > 0 && n != expected_dim)
    parse_fail(where, "dimension " + std::to_string(n) + " does not match system dim " + std::to_string(expected_dim));
  return m;
}

inline json matrix_to_json(const Operator& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(complex_to_json(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

template <class T>
void set_default(json& obj, const std::string& key, const T& value) {
  if (!obj.contains(key)) obj[key] = value;
}

// `--override a.b.0.c=value`: the value is parsed as JSON when possible,
// otherwise stored as a string.
inline void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) parse_fail("--override", "expected key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &cfg;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string& p = parts[i];
    if (p.empty()) parse_fail("--override", "empty path segment in '" + key + "'");
    const bool last = i + 1 == parts.size();
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(p);
      } catch (...) {
        parse_fail("--override", "'" + p + "' is not an array index in '" + key + "'");
      }
      if (idx >= node->size()) parse_fail("--override", "index " + p + " out of range in '" + key + "'");
      node = &(*node)[idx];
    } else {
      if (!node->is_object()) {
        if (!node->is_null()) parse_fail("--override", "cannot descend into non-object at '" + p + "'");
        *node = json::object();
      }
      node = &(*node)[p];
    }
    if (last) *node = value;
  }
}

inline int line_of_offset(const std::string& text, std::size_t offset) {
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(std::min(offset, text.size())), '\n'));
}

inline json load_config_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw CliError(kParseError, source + ":" + std::to_string(line_of_offset(text, e.byte)) + ": " + e.what());
  }
}

inline json load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw CliError(kParseError, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return load_config_text(ss.str(), path);
}

// ---------------------------------------------------------------------------
// Scenario

struct FitSpec {
  Eigen::Index row = 0, col = 0;
  double t_lo = 0.0, t_hi = 0.0;
};

struct Scenario {
  json resolved;  // config with every default filled in

  SystemSpec sys;
  std::optional<SpectralDensity> density;
  MarkovOptions rate_opt;
  std::optional<BathSpec> bath;
  std::optional<Operator> rho0;
  TimeGrid grid;
  std::vector<std::string> pipelines;
  Tolerances tol;
  std::string prefix = "scenario";

  std::optional<std::vector<LindbladTerm>> lindblad_terms;  // explicit override
  bool include_shift = true;
  PropagationMethod lindblad_method = PropagationMethod::rk4;
  std::string coeff_source = "discrete";
  std::optional<FitSpec> fit;
};

inline const std::vector<std::string>& known_pipelines() {
  static const std::vector<std::string> k{"exact", "single_excitation", "coeff_eq", "lindblad"};
  return k;
}

inline SpectralDensity parse_spectral_density(json& sd, const std::string& where, const std::filesystem::path& base_dir) {
  if (!sd.is_object()) parse_fail(where, "expected an object");
  const json& kind_v = field(sd, "kind", where);
  if (!kind_v.is_string()) parse_fail(where + "/kind", "expected a string");
  const std::string kind = kind_v.get<std::string>();
  try {
    if (kind == "lorentzian") {
      set_default(sd, "center", 0.0);
      return SpectralDensity::lorentzian(as_number(field(sd, "j0", where), where + "/j0"),
                                         as_number(field(sd, "gamma_w", where), where + "/gamma_w"),
                                         as_number(sd["center"], where + "/center"));
    }
    if (kind == "table") {
      if (sd.contains("path")) {
        if (!sd["path"].is_string()) parse_fail(where + "/path", "expected a string");
        std::filesystem::path p = sd["path"].get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        const SpectralDensity t = load_spectral_table(p.string());
        json pts = json::array();
        for (std::size_t i = 0; i < t.table_data().omega.size(); ++i)
          pts.push_back(json::array({t.table_data().omega[i], t.table_data().value[i]}));
        sd.erase("path");
        sd["points"] = pts;
        return t;
      }
      const json& pts = field(sd, "points", where);
      if (!pts.is_array()) parse_fail(where + "/points", "expected an array of [omega, J] pairs");
      std::vector<double> w, v;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const std::string pw = where + "/points/" + std::to_string(i);
        if (!pts[i].is_array() || pts[i].size() != 2) parse_fail(pw, "expected [omega, J]");
        w.push_back(as_number(pts[i][0], pw + "/0"));
        v.push_back(as_number(pts[i][1], pw + "/1"));
      }
      return SpectralDensity::table(std::move(w), std::move(v));
    }
  } catch (const InvalidInput& e) {
    parse_fail(where, e.what());
  }
  parse_fail(where + "/kind", "unknown spectral density kind '" + kind + "' (expected lorentzian or table)");
}

/// Validate `cfg`, fill defaults in place, and build the typed scenario.
inline Scenario parse_scenario(json cfg, const std::filesystem::path& base_dir = ".") {
  if (!cfg.is_object()) parse_fail("/", "config must be a JSON object");
  Scenario sc;

  // system
  json& sys = cfg["system"];
  if (!sys.is_object()) parse_fail("/system", "missing or not an object");
  const int dim = as_int(field(sys, "dim", "/system"), "/system/dim");
  if (dim < 1) parse_fail("/system/dim", "must be >= 1");
  sc.sys.h_s = as_matrix(field(sys, "h_s", "/system"), "/system/h_s", dim);
  sc.sys.s_op = as_matrix(field(sys, "s_op", "/system"), "/system/s_op", dim);
  set_default(sys, "hbar", 1.0);
  set_default(sys, "alpha", 1.0);
  sc.sys.hbar = as_number(sys["hbar"], "/system/hbar");
  sc.sys.alpha = as_number(sys["alpha"], "/system/alpha");
  try {
    sc.sys.validate();
  } catch (const InvalidInput& e) {
    parse_fail("/system", e.what());
  }

  // tolerances
  json& tol = cfg["tolerances"];
  if (tol.is_null()) tol = json::object();
  set_default(tol, "herm", 1e-9);
  set_default(tol, "trace", 1e-9);
  set_default(tol, "psd", 1e-7);
  sc.tol = {as_number(tol["herm"], "/tolerances/herm"), as_number(tol["trace"], "/tolerances/trace"),
            as_number(tol["psd"], "/tolerances/psd")};

  // rho0
  if (cfg.contains("rho0")) {
    Operator r = as_matrix(cfg["rho0"], "/rho0", dim);
    try {
      sc.rho0 = DensityMatrix(r, sc.tol).op();
    } catch (const InvalidInput& e) {
      parse_fail("/rho0", e.what());
    }
  }

  // grid
  json& grid = cfg["grid"];
  if (!grid.is_object()) parse_fail("/grid", "missing or not an object");
  const double t_max = as_number(field(grid, "t_max", "/grid"), "/grid/t_max");
  const int steps = as_int(field(grid, "steps", "/grid"), "/grid/steps");
  if (t_max <= 0) parse_fail("/grid/t_max", "must be positive");
  if (steps < 1) parse_fail("/grid/steps", "must be >= 1");
  sc.grid = TimeGrid::uniform(t_max, static_cast<std::size_t>(steps));

  // bath
  json& bath = cfg["bath"];
  if (bath.is_null()) bath = json::object();
  if (!bath.is_object()) parse_fail("/bath", "expected an object");
  set_default(bath, "n_max", 1);
  const int n_max = as_int(bath["n_max"], "/bath/n_max");
  if (n_max < 1) parse_fail("/bath/n_max", "must be >= 1");
  if (bath.contains("spectral_density"))
    sc.density = parse_spectral_density(bath["spectral_density"], "/bath/spectral_density", base_dir);
  if (bath.contains("modes")) {
    const json& modes = bath["modes"];
    if (!modes.is_array()) parse_fail("/bath/modes", "expected an array");
    BathSpec b;
    b.n_max = n_max;
    for (std::size_t k = 0; k < modes.size(); ++k) {
      const std::string w = "/bath/modes/" + std::to_string(k);
      b.modes.push_back({as_number(field(modes[k], "omega", w), w + "/omega"), as_complex(field(modes[k], "g", w), w + "/g")});
    }
    sc.bath = b;
  } else if (bath.contains("discretization")) {
    if (!sc.density) parse_fail("/bath/discretization", "requires /bath/spectral_density");
    const json& d = bath["discretization"];
    const std::string w = "/bath/discretization";
    const int m = as_int(field(d, "modes", w), w + "/modes");
    const double lo = as_number(field(d, "omega_lo", w), w + "/omega_lo");
    const double hi = as_number(field(d, "omega_hi", w), w + "/omega_hi");
    try {
      sc.bath = discretize(*sc.density, m, lo, hi, n_max);
    } catch (const InvalidInput& e) {
      parse_fail(w, e.what());
    }
  }

  // Markov-rate quadrature settings
  json& rates = cfg["rates"];
  if (rates.is_null()) rates = json::object();
  set_default(rates, "pv_exclusion", 0.5);
  set_default(rates, "pv_levels", 6);
  set_default(rates, "half_line_gamma", false);
  sc.rate_opt.pv_exclusion = as_number(rates["pv_exclusion"], "/rates/pv_exclusion");
  sc.rate_opt.pv_levels = as_int(rates["pv_levels"], "/rates/pv_levels");
  if (!rates["half_line_gamma"].is_boolean()) parse_fail("/rates/half_line_gamma", "expected a boolean");
  sc.rate_opt.half_line_gamma = rates["half_line_gamma"].get<bool>();
  if (sc.rate_opt.pv_exclusion <= 0) parse_fail("/rates/pv_exclusion", "must be positive");
  if (sc.rate_opt.pv_levels < 2) parse_fail("/rates/pv_levels", "must be >= 2");

  // pipelines
  if (!cfg.contains("pipelines")) parse_fail("/pipelines", "missing required field");
  const json& pl = cfg["pipelines"];
  if (!pl.is_array()) parse_fail("/pipelines", "expected an array of pipeline names");
  for (std::size_t i = 0; i < pl.size(); ++i) {
    if (!pl[i].is_string()) parse_fail("/pipelines/" + std::to_string(i), "expected a string");
    const std::string name = pl[i].get<std::string>();
    const auto& k = known_pipelines();
    if (std::find(k.begin(), k.end(), name) == k.end())
      parse_fail("/pipelines/" + std::to_string(i), "unknown pipeline '" + name + "'");
    sc.pipelines.push_back(name);
  }

  // lindblad
  json& lb = cfg["lindblad"];
  if (lb.is_null()) lb = json::object();
  set_default(lb, "method", "rk4");
  set_default(lb, "include_shift", true);
  if (!lb["method"].is_string()) parse_fail("/lindblad/method", "expected a string");
  const std::string method = lb["method"].get<std::string>();
  if (method == "rk4")
    sc.lindblad_method = PropagationMethod::rk4;
  else if (method == "expm")
    sc.lindblad_method = PropagationMethod::expm;
  else
    parse_fail("/lindblad/method", "expected rk4 or expm, got '" + method + "'");
  if (!lb["include_shift"].is_boolean()) parse_fail("/lindblad/include_shift", "expected a boolean");
  sc.include_shift = lb["include_shift"].get<bool>();
  if (lb.contains("terms")) {
    const json& terms = lb["terms"];
    if (!terms.is_array()) parse_fail("/lindblad/terms", "expected an array");
    std::vector<LindbladTerm> out;
    for (std::size_t j = 0; j < terms.size(); ++j) {
      const std::string w = "/lindblad/terms/" + std::to_string(j);
      LindbladTerm t;
      t.op = as_matrix(field(terms[j], "op", w), w + "/op", dim);
      t.rate = as_number(field(terms[j], "gamma", w), w + "/gamma");
      if (t.rate < 0) parse_fail(w + "/gamma", "must be >= 0");
      if (terms[j].contains("epsilon")) t.shift = as_number(terms[j]["epsilon"], w + "/epsilon");
      out.push_back(std::move(t));
    }
    sc.lindblad_terms = std::move(out);
  }

  // coefficient equation
  json& ce = cfg["coeff_eq"];
  if (ce.is_null()) ce = json::object();
  set_default(ce, "f_source", "discrete");
  if (!ce["f_source"].is_string()) parse_fail("/coeff_eq/f_source", "expected a string");
  sc.coeff_source = ce["f_source"].get<std::string>();
  if (sc.coeff_source != "discrete" && sc.coeff_source != "markov")
    parse_fail("/coeff_eq/f_source", "expected discrete or markov");

  // fit
  if (cfg.contains("fit") && !cfg["fit"].is_null()) {
    const json& f = cfg["fit"];
    FitSpec fs;
    const json& entry = field(f, "entry", "/fit");
    if (!entry.is_array() || entry.size() != 2) parse_fail("/fit/entry", "expected [row, col]");
    fs.row = as_int(entry[0], "/fit/entry/0");
    fs.col = as_int(entry[1], "/fit/entry/1");
    if (fs.row < 0 || fs.row >= dim || fs.col < 0 || fs.col >= dim) parse_fail("/fit/entry", "index out of range");
    const json& win = field(f, "window", "/fit");
    if (!win.is_array() || win.size() != 2) parse_fail("/fit/window", "expected [t_lo, t_hi]");
    fs.t_lo = as_number(win[0], "/fit/window/0");
    fs.t_hi = as_number(win[1], "/fit/window/1");
    if (!(fs.t_lo < fs.t_hi)) parse_fail("/fit/window", "t_lo must be < t_hi");
    sc.fit = fs;
  }

  // output
  json& out = cfg["output"];
  if (out.is_null()) out = json::object();
  set_default(out, "prefix", "scenario");
  if (!out["prefix"].is_string() || out["prefix"].get<std::string>().empty())
    parse_fail("/output/prefix", "expected a non-empty string");
  sc.prefix = out["prefix"].get<std::string>();

  sc.resolved = std::move(cfg);
  return sc;
}

// ---------------------------------------------------------------------------
// Pipelines

struct DecayFit {
  double rate = 0.0;       // -slope of ln(observable)
  double intercept = 0.0;
  double residual_rms = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares of ln(y) against t over [t_lo, t_hi].
inline std::optional<DecayFit> fit_log_linear(const std::vector<double>& t, const std::vector<double>& y, double t_lo,
                                              double t_hi) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_lo || t[i] > t_hi) continue;
    if (!(y[i] > 0.0)) return std::nullopt;
    xs.push_back(t[i]);
    ys.push_back(std::log(y[i]));
  }
  if (xs.size() < 2) return std::nullopt;
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) return std::nullopt;
  DecayFit f;
  const double slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - slope * sx) / n;
  f.rate = -slope;
  double ss = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (f.intercept + slope * xs[i]);
    ss += r * r;
  }
  f.residual_rms = std::sqrt(ss / n);
  f.points = xs.size();
  return f;
}

struct PipelineRun {
  std::string name;  // unique label (duplicates get a #n suffix)
  std::string kind;
  Trajectory trajectory;
  CptpReport report;
  std::optional<std::size_t> failed_node;
  json extra = json::object();
};

struct ScenarioResult {
  std::vector<PipelineRun> runs;
  std::optional<MarkovRates> rates;
  json report;
};

inline bool is_projector_on_excited(const Operator& rho) {
  return rho.rows() == 2 && std::abs(rho(0, 0) - 1.0) <= 1e-12 && max_abs(rho - projector(pauli::excited())) <= 1e-12;
}

inline void check_preconditions(const Scenario& sc) {
  for (const std::string& p : sc.pipelines) {
    if (!sc.rho0) precondition_fail(p, "rho0 is required");
    if (p == "exact") {
      if (!sc.bath) precondition_fail(p, "needs a bath (explicit modes or a discretized spectral density)");
      const double dim = static_cast<double>(sc.sys.dim()) * std::pow(sc.bath->n_max + 1.0, sc.bath->modes.size());
      if (dim > static_cast<double>(kMaxDenseDim))
        precondition_fail(p, "composite dimension " + std::to_string(static_cast<long long>(dim)) + " exceeds " +
                                 std::to_string(kMaxDenseDim));
    } else if (p == "single_excitation") {
      if (!sc.bath) precondition_fail(p, "needs a bath (explicit modes or a discretized spectral density)");
      if (sc.sys.dim() != 2 || max_abs(sc.sys.s_op - pauli::minus()) > 1e-12)
        precondition_fail(p, "requires s_op = sigma_minus = [[0,0],[1,0]]");
      if (std::abs(sc.sys.h_s(0, 1)) > 1e-12 || std::abs(sc.sys.h_s(1, 0)) > 1e-12)
        precondition_fail(p, "requires h_s diagonal in the {|e>,|g>} basis");
      if (!is_projector_on_excited(*sc.rho0)) precondition_fail(p, "requires rho0 = |e><e|");
    } else if (p == "coeff_eq") {
      const double defect = sc.sys.commutation_defect();
      if (defect > 1e-10)
        precondition_fail(p, "requires [s_op, h_s] = 0 (max entry of the commutator is " + std::to_string(defect) + ")");
      if (sc.coeff_source == "discrete" && !sc.bath)
        precondition_fail(p, "f_source 'discrete' needs a bath (explicit modes or a discretized spectral density)");
      if (sc.coeff_source == "markov" && !sc.density)
        precondition_fail(p, "f_source 'markov' needs /bath/spectral_density");
    } else if (p == "lindblad") {
      if (!sc.lindblad_terms && !sc.density) {
        const bool decoupled = !sc.bath || sc.bath->coupling_weight() == 0.0 || sc.sys.alpha == 0.0 ||
                               max_abs(sc.sys.s_op) == 0.0;
        if (!decoupled)
          precondition_fail(p, "needs /lindblad/terms or a spectral density to derive gamma from");
      }
    }
  }
  if (sc.density) {
    const double lo = sc.density->domain_lo(), hi = sc.density->domain_hi();
    if (lo > 0.0 || hi < 0.0) precondition_fail("rates", "spectral density domain does not cover omega = 0");
  }
}

inline std::vector<LindbladTerm> lindblad_terms_for(const Scenario& sc, const std::optional<MarkovRates>& rates) {
  if (sc.lindblad_terms) return *sc.lindblad_terms;
  std::vector<LindbladTerm> terms;
  if (rates) {
    const double a2 = sc.sys.alpha * sc.sys.alpha;
    terms.push_back({sc.sys.s_op, a2 * rates->gamma, sc.include_shift ? a2 * rates->epsilon : 0.0});
  }
  return terms;
}

inline json cptp_to_json(const CptpReport& r) {
  json j;
  j["max_trace_err"] = r.max_trace_err;
  j["max_herm_err"] = r.max_herm_err;
  j["min_eig"] = r.min_eig;
  j["breach_node"] = r.breach_node ? json(*r.breach_node) : json(nullptr);
  return j;
}

inline json rates_to_json(const MarkovRates& r) {
  json j;
  j["gamma"] = r.gamma;
  j["epsilon"] = r.epsilon;
  j["domain"] = json::array({std::isfinite(r.domain_lo) ? json(r.domain_lo) : json("-inf"),
                             std::isfinite(r.domain_hi) ? json(r.domain_hi) : json("inf")});
  j["pv_exclusions"] = r.pv.exclusions;
  j["pv_truncated"] = r.pv.truncated;
  j["pv_richardson"] = r.pv.richardson;
  return j;
}

inline ScenarioResult execute(const Scenario& sc) {
  check_preconditions(sc);
  ScenarioResult res;
  if (sc.density) {
    try {
      res.rates = markov_rates(*sc.density, sc.rate_opt);
    } catch (const InvalidInput& e) {
      precondition_fail("rates", e.what());
    }
  }

  std::map<std::string, int> seen;
  for (const std::string& p : sc.pipelines) {
    PipelineRun run;
    run.kind = p;
    const int n = ++seen[p];
    run.name = n == 1 ? p : p + "#" + std::to_string(n);
    try {
      if (p == "exact") {
        const CompositeModel model = build_composite(sc.sys, *sc.bath);
        const Operator rho_sb = kron(*sc.rho0, projector(sc.bath->space().vacuum()));
        const Trajectory full = evolve_exact(model, rho_sb, sc.grid);
        run.trajectory = reduced_trajectory(full, model.dims);
        run.report = cptp_report(run.trajectory, sc.tol);
        run.failed_node = run.report.breach_node;
        run.extra["composite_dim"] = model.dims.total();
      } else if (p == "single_excitation") {
        const SingleExcitationResult se = evolve_single_excitation(sc.sys, *sc.bath, sc.grid);
        run.trajectory = se.rho_s;
        run.report = cptp_report(run.trajectory, sc.tol);
        run.failed_node = run.report.breach_node;
        run.extra["max_norm_err"] = se.max_norm_err;
        run.extra["modes"] = sc.bath->modes.size();
      } else if (p == "coeff_eq") {
        const CoefficientSource src =
            sc.coeff_source == "markov"
                ? CoefficientSource::markov(res.rates->gamma, sc.include_shift ? res.rates->epsilon : 0.0)
                : CoefficientSource::discrete(*sc.bath, sc.grid.t_max());
        CoeffEqOptions opt;
        opt.tol = sc.tol;
        const CoeffEqResult ce = integrate_coeff_eq(sc.sys, src, *sc.rho0, sc.grid, opt);
        run.trajectory = ce.trajectory;
        run.report = ce.report;
        run.failed_node = ce.failed_node;
        run.extra["dt"] = ce.dt;
        run.extra["f_source"] = sc.coeff_source;
        run.extra["negativity_flagged"] = ce.negativity_flagged;
        // Finite-t F from the discrete bath against its Markov limit.
        if (sc.bath && res.rates) {
          const complex f_inf(0.5 * res.rates->gamma, 0.5 * res.rates->epsilon);
          double gap_max = 0.0;
          for (double t : sc.grid.times()) gap_max = std::max(gap_max, std::abs(f_discrete(*sc.bath, t) - f_inf));
          run.extra["f_markov_gap_max"] = gap_max;
          run.extra["f_markov_gap_at_t_max"] = std::abs(f_discrete(*sc.bath, sc.grid.t_max()) - f_inf);
        }
      } else if (p == "lindblad") {
        LindbladModel model{sc.sys.h_s, lindblad_terms_for(sc, res.rates), sc.sys.hbar};
        PropagateOptions opt;
        opt.method = sc.lindblad_method;
        opt.tol = sc.tol;
        const PropagateResult pr = propagate(model, *sc.rho0, sc.grid, opt);
        run.trajectory = pr.trajectory;
        run.report = pr.report;
        run.failed_node = pr.report.breach_node;
        run.extra["method"] = sc.lindblad_method == PropagationMethod::rk4 ? "rk4" : "expm";
        run.extra["dt"] = pr.dt;
        json terms = json::array();
        for (const auto& t : model.terms)
          terms.push_back({{"op", matrix_to_json(t.op)}, {"gamma", t.rate}, {"epsilon", t.shift}});
        run.extra["terms"] = terms;
      }
    } catch (const InvalidInput& e) {
      precondition_fail(run.name, e.what());
    }
    res.runs.push_back(std::move(run));
  }

  // report
  json rep;
  rep["config"] = sc.resolved;
  rep["markov_rates"] = res.rates ? rates_to_json(*res.rates) : json(nullptr);
  json pipes = json::object();
  for (const auto& r : res.runs) {
    json j;
    j["kind"] = r.kind;
    j["csv"] = sc.prefix + "_" + r.name + ".csv";
    j["cptp"] = cptp_to_json(r.report);
    j["failed_node"] = r.failed_node ? json(*r.failed_node) : json(nullptr);
    for (auto it = r.extra.begin(); it != r.extra.end(); ++it) j[it.key()] = it.value();
    if (sc.fit) {
      std::vector<double> y;
      for (const auto& s : r.trajectory.states) y.push_back(std::abs(s(sc.fit->row, sc.fit->col)));
      const auto f = fit_log_linear(r.trajectory.times, y, sc.fit->t_lo, sc.fit->t_hi);
      if (f)
        j["fit"] = {{"rate", f->rate}, {"intercept", f->intercept}, {"residual_rms", f->residual_rms}, {"points", f->points}};
      else
        j["fit"] = {{"error", "observable not strictly positive or fewer than 2 points in window"}};
    }
    pipes[r.name] = j;
  }
  rep["pipelines"] = pipes;
  json dist = json::array();
  for (std::size_t a = 0; a < res.runs.size(); ++a)
    for (std::size_t b = a + 1; b < res.runs.size(); ++b) {
      const auto d = trace_distances(res.runs[a].trajectory, res.runs[b].trajectory);
      json j;
      j["a"] = res.runs[a].name;
      j["b"] = res.runs[b].name;
      j["max"] = d.empty() ? 0.0 : *std::max_element(d.begin(), d.end());
      j["per_node"] = d;
      dist.push_back(j);
    }
  rep["distances"] = dist;
  res.report = std::move(rep);
  return res;
}

// ---------------------------------------------------------------------------
// Output

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x == 0.0 ? 0.0 : x);  // no "-0"
  return buf;
}

/// Header row; t, then re/im of rho[i,j] in row-major order, then diagnostics.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  const Eigen::Index d = traj.dim();
  out << "t";
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) out << ",re_" << i << "_" << j << ",im_" << i << "_" << j;
  out << ",trace_err,herm_err,eig_min\n";
  for (std::size_t n = 0; n < traj.size(); ++n) {
    out << format_double(traj.times[n]);
    const Operator& r = traj.states[n];
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) out << ',' << format_double(r(i, j).real()) << ',' << format_double(r(i, j).imag());
    const auto& dg = traj.diagnostics[n];
    out << ',' << format_double(dg.trace_err) << ',' << format_double(dg.herm_err) << ',' << format_double(dg.eig_min)
        << '\n';
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CliError(kPreconditionError, "cannot write '" + path.string() + "'");
  f << text;
}

struct CommandOptions {
  std::string out_dir = ".";
  std::vector<std::string> overrides;
  std::ostream* log = &std::cout;
  std::ostream* err = &std::cerr;
};

inline Scenario load_scenario(const std::string& config_path, const CommandOptions& opt) {
  json cfg = load_config_file(config_path);
  for (const auto& o : opt.overrides) apply_override(cfg, o);
  return parse_scenario(std::move(cfg), std::filesystem::path(config_path).parent_path());
}

inline int breach_exit(const ScenarioResult& res, std::ostream& err) {
  for (const auto& r : res.runs)
    if (r.failed_node) {
      err << "tolerance breach: pipeline '" << r.name << "' at node " << *r.failed_node << " (t = "
          << format_double(r.trajectory.times[*r.failed_node]) << ")\n";
      return kToleranceBreach;
    }
  return kOk;
}

template <class Body>
int guarded(const CommandOptions& opt, Body&& body) {
  try {
    return body();
  } catch (const CliError& e) {
    *opt.err << "error: " << e.what() << "\n";
    return e.code();
  }
}

/// `run <config>`: one CSV per pipeline plus <prefix>_report.json.
inline int command_run(const std::string& config_path, const CommandOptions& opt = {}) {
  return guarded(opt, [&] {
    const Scenario sc = load_scenario(config_path, opt);
    const ScenarioResult res = execute(sc);
    std::filesystem::create_directories(opt.out_dir);
    for (const auto& r : res.runs) {
      std::ostringstream ss;
      write_trajectory_csv(ss, r.trajectory);
      write_text(std::filesystem::path(opt.out_dir) / (sc.prefix + "_" + r.name + ".csv"), ss.str());
    }
    write_text(std::filesystem::path(opt.out_dir) / (sc.prefix + "_report.json"), res.report.dump(2) + "\n");
    for (const auto& r : res.runs)
      *opt.log << r.name << ": max|tr-1| " << r.report.max_trace_err << ", max herm " << r.report.max_herm_err
               << ", min eig " << r.report.min_eig << "\n";
    return breach_exit(res, *opt.err);
  });
}

/// `compare <config>`: pairwise distances and fits in <prefix>_comparison.json.
inline int command_compare(const std::string& config_path, const CommandOptions& opt = {}) {
  return guarded(opt, [&] {
    const Scenario sc = load_scenario(config_path, opt);
    if (sc.pipelines.size() < 2) precondition_fail("compare", "needs at least two pipelines");
    const ScenarioResult res = execute(sc);
    std::filesystem::create_directories(opt.out_dir);
    write_text(std::filesystem::path(opt.out_dir) / (sc.prefix + "_comparison.json"), res.report.dump(2) + "\n");
    for (const auto& d : res.report["distances"])
      *opt.log << d["a"].get<std::string>() << " vs " << d["b"].get<std::string>()
               << ": max trace distance " << format_double(d["max"].get<double>()) << "\n";
    for (const auto& [name, p] : res.report["pipelines"].items())
      if (p.contains("fit") && p["fit"].contains("rate"))
        *opt.log << name << ": fitted decay rate " << format_double(p["fit"]["rate"].get<double>()) << "\n";
    return breach_exit(res, *opt.err);
  });
}

/// `rates <config>`: gamma and epsilon for the configured spectral density.
inline int command_rates(const std::string& config_path, const CommandOptions& opt = {}) {
  return guarded(opt, [&] {
    json cfg = load_config_file(config_path);
    for (const auto& o : opt.overrides) apply_override(cfg, o);
    const auto base = std::filesystem::path(config_path).parent_path();
    json sd;
    std::string where;
    if (cfg.contains("spectral_density")) {
      sd = cfg["spectral_density"];
      where = "/spectral_density";
    } else if (cfg.contains("bath") && cfg["bath"].contains("spectral_density")) {
      sd = cfg["bath"]["spectral_density"];
      where = "/bath/spectral_density";
    } else {
      parse_fail("/", "no spectral_density found (top level or under /bath)");
    }
    const SpectralDensity j = parse_spectral_density(sd, where, base);
    MarkovOptions mo;
    if (cfg.contains("rates")) {
      const json& r = cfg["rates"];
      if (r.contains("pv_exclusion")) mo.pv_exclusion = as_number(r["pv_exclusion"], "/rates/pv_exclusion");
      if (r.contains("pv_levels")) mo.pv_levels = as_int(r["pv_levels"], "/rates/pv_levels");
      if (r.contains("half_line_gamma")) mo.half_line_gamma = r["half_line_gamma"].get<bool>();
    }
    if (j.domain_lo() > 0.0 || j.domain_hi() < 0.0)
      precondition_fail("rates", "spectral density domain does not cover omega = 0");
    MarkovRates r;
    try {
      r = markov_rates(j, mo);
    } catch (const InvalidInput& e) {
      precondition_fail("rates", e.what());
    }
    std::ostream& o = *opt.log;
    o << "gamma " << format_double(r.gamma) << "\n";
    o << "epsilon " << format_double(r.epsilon) << "\n";
    o << "domain " << format_double(r.domain_lo) << " " << format_double(r.domain_hi) << "\n";
    for (std::size_t i = 0; i < r.pv.exclusions.size(); ++i)
      o << "pv_exclusion " << format_double(r.pv.exclusions[i]) << " truncated_integral "
        << format_double(r.pv.truncated[i]) << "\n";
    return static_cast<int>(kOk);
  });
}

}  // namespace lindblad_lab::cli
