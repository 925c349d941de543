#pragma once
/// @file config.hpp
/// @brief Run configuration: a sectioned key = value text file, validated
/// against the preconditions of every module before any computation.

#include "tvpd/constitutive.hpp"
#include "tvpd/contdep.hpp"
#include "tvpd/coupled_step.hpp"
#include "tvpd/fractional.hpp"
#include "tvpd/mesh.hpp"
#include "tvpd/problem.hpp"
#include "tvpd/stepper.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/crc.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvpd {

/// Configuration error with the offending line (0 when not tied to a line).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& file, int line, const std::string& msg)
      : std::runtime_error(file + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + msg),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Parsed key = value entries, addressed as "section.key".
class ConfigFile {
 public:
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool used = false;
  };

  static ConfigFile parse(const std::string& text, const std::string& name = "<config>") {
    ConfigFile f;
    f.name_ = name;
    f.text_ = text;
    std::istringstream in(text);
    std::string raw, section;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      std::string s = raw.substr(0, raw.find_first_of("#;"));
      boost::algorithm::trim(s);
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']' || s.size() < 3) throw ConfigError(name, line, "malformed section header '" + s + "'");
        section = boost::algorithm::trim_copy(s.substr(1, s.size() - 2));
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError(name, line, "expected 'key = value', got '" + s + "'");
      if (section.empty()) throw ConfigError(name, line, "key outside of any section");
      std::string key = boost::algorithm::trim_copy(s.substr(0, eq));
      std::string val = boost::algorithm::trim_copy(s.substr(eq + 1));
      if (key.empty()) throw ConfigError(name, line, "empty key");
      const std::string full = section + "." + key;
      if (f.entries_.count(full)) throw ConfigError(name, line, "duplicate key '" + full + "'");
      f.entries_[full] = {val, line};
    }
    return f;
  }

  static ConfigFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, 0, "cannot open configuration file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  const std::string& name() const { return name_; }
  const std::string& text() const { return text_; }
  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  const Entry* find(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }
  int line_of(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(name_, line_of(key), key + ": " + msg);
  }

  std::vector<double> numbers(const std::string& key) const {
    const Entry* e = find(key);
    std::vector<double> out;
    if (!e) return out;
    std::vector<std::string> parts;
    boost::algorithm::split(parts, e->value, boost::algorithm::is_any_of(", \t"), boost::algorithm::token_compress_on);
    for (const auto& p : parts) {
      if (p.empty()) continue;
      try {
        std::size_t pos = 0;
        const double v = std::stod(p, &pos);
        if (pos != p.size() || !std::isfinite(v)) throw std::invalid_argument(p);
        out.push_back(v);
      } catch (const std::exception&) {
        fail(key, "'" + p + "' is not a finite number");
      }
    }
    return out;
  }

  double number(const std::string& key, double def) const {
    if (!has(key)) return def;
    const auto v = numbers(key);
    if (v.size() != 1) fail(key, "expected a single number");
    return v[0];
  }

  int integer(const std::string& key, int def) const {
    const double v = number(key, def);
    if (v != std::floor(v) || std::abs(v) > 1e9) fail(key, "expected an integer");
    return static_cast<int>(v);
  }

  bool boolean(const std::string& key, bool def) const {
    const Entry* e = find(key);
    if (!e) return def;
    const std::string v = boost::algorithm::to_lower_copy(e->value);
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    fail(key, "expected true or false");
  }

  std::string string(const std::string& key, const std::string& def) const {
    const Entry* e = find(key);
    return e ? e->value : def;
  }

  std::vector<std::string> list(const std::string& key) const {
    const Entry* e = find(key);
    std::vector<std::string> out;
    if (!e) return out;
    boost::algorithm::split(out, e->value, boost::algorithm::is_any_of(", \t"), boost::algorithm::token_compress_on);
    out.erase(std::remove(out.begin(), out.end(), std::string()), out.end());
    return out;
  }

  std::map<std::string, int> lines() const {
    std::map<std::string, int> out;
    for (const auto& [k, e] : entries_) out[k] = e.line;
    return out;
  }

  /// Reports the first key that was never read.
  void check_all_used() const {
    const Entry* first = nullptr;
    std::string name;
    for (const auto& [k, e] : entries_)
      if (!e.used && (!first || e.line < first->line)) {
        first = &e;
        name = k;
      }
    if (first) throw ConfigError(name_, first->line, "unknown key '" + name + "'");
  }

 private:
  std::string name_, text_;
  std::map<std::string, Entry> entries_;
};

/// Parses "constant c", "ramp a b" (a + b t) or "table t0:v0 t1:v1 ...".
inline TimeProfile parse_profile(const ConfigFile& f, const std::string& key, TimeProfile def) {
  const auto* e = f.find(key);
  if (!e) return def;
  std::vector<std::string> w;
  boost::algorithm::split(w, e->value, boost::algorithm::is_any_of(" \t"), boost::algorithm::token_compress_on);
  auto num = [&](const std::string& s) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      f.fail(key, "'" + s + "' is not a finite number");
    }
  };
  if (w.empty()) f.fail(key, "empty profile");
  if (w[0] == "constant" && w.size() == 2) return TimeProfile::constant(num(w[1]));
  if (w[0] == "ramp" && w.size() == 3) return TimeProfile::ramp(num(w[1]), num(w[2]));
  if (w[0] == "table" && w.size() >= 3) {
    std::vector<double> ts, vs;
    for (std::size_t i = 1; i < w.size(); ++i) {
      const auto c = w[i].find(':');
      if (c == std::string::npos) f.fail(key, "table samples must read t:v");
      ts.push_back(num(w[i].substr(0, c)));
      vs.push_back(num(w[i].substr(c + 1)));
    }
    try {
      return TimeProfile::table(ts, vs);
    } catch (const std::exception& ex) {
      f.fail(key, ex.what());
    }
  }
  f.fail(key, "expected 'constant c', 'ramp a b' or 'table t:v ...'");
}

/// Typed run configuration. Vector data is stored with the configured
/// dimension's number of components.
struct RunConfig {
  std::string source = "<config>";
  std::string text;
  std::map<std::string, int> lines;  ///< line of every key in the source
  int dim = 2;
  double T = 1.0;
  double tau = 0.125;
  std::vector<double> tau_list;
  std::string audits = "all";
  unsigned long long seed = 1;

  std::vector<double> origin, extent;
  std::vector<int> cells;
  std::vector<Side> dirichlet;

  MaterialModel model;
  SolverSettings solver;

  std::vector<double> body_force;
  TimeProfile body_profile = TimeProfile::constant(1.0);
  std::map<Side, std::vector<double>> traction;
  TimeProfile traction_profile = TimeProfile::constant(1.0);
  double heat_source = 0.0;
  TimeProfile heat_profile = TimeProfile::constant(1.0);
  std::map<Side, double> flux;
  TimeProfile flux_profile = TimeProfile::constant(1.0);
  std::vector<double> w_offset, w_gradient;
  TimeProfile w_profile = TimeProfile::constant(1.0);

  std::optional<std::vector<double>> u0_offset, u0_gradient;
  std::vector<double> v0_offset, v0_gradient;
  double z0 = 1.0;
  double z0_notch = 0.0;
  double theta0 = 1.0;
  double theta0_bump = 0.0;

  bool prescribed = false;
  double theta_bump = 0.0;
  double theta_offset = 1.0;
  TimeProfile theta_profile = TimeProfile::constant(1.0);

  std::vector<Perturbation> contdep_dirs = standard_perturbations();
  std::vector<double> contdep_eps{1e-2, 1e-3, 1e-4};

  /// CRC-32 of the configuration text and the effective overrides.
  std::string hash() const {
    boost::crc_32_type crc;
    char buf[64];
    std::snprintf(buf, sizeof buf, "|tau=%.17g", tau);
    const std::string s = text + buf;
    crc.process_bytes(s.data(), s.size());
    std::snprintf(buf, sizeof buf, "%08x", crc.checksum());
    return buf;
  }
};

namespace detail {

inline std::vector<double> sized(const ConfigFile& f, const std::string& key, std::size_t n,
                                 const std::vector<double>& def) {
  if (!f.has(key)) return def;
  auto v = f.numbers(key);
  if (v.size() != n) f.fail(key, "expected " + std::to_string(n) + " values");
  return v;
}

inline void positive(const ConfigFile& f, const std::string& key, double v) {
  if (!(v > 0.0)) f.fail(key, "must be positive");
}

inline void nonnegative(const ConfigFile& f, const std::string& key, double v) {
  if (!(v >= 0.0)) f.fail(key, "must be nonnegative");
}

}  // namespace detail

/// Reads and validates a configuration; every error carries its line.
inline RunConfig parse_config(const ConfigFile& f) {
  using detail::nonnegative;
  using detail::positive;
  using detail::sized;
  RunConfig c;
  c.source = f.name();
  c.text = f.text();
  c.lines = f.lines();

  c.dim = f.integer("run.dimension", 2);
  if (c.dim != 1 && c.dim != 2) f.fail("run.dimension", "must be 1 or 2");
  const std::size_t d = static_cast<std::size_t>(c.dim);
  c.T = f.number("run.T", 1.0);
  positive(f, "run.T", c.T);
  c.tau = f.number("run.tau", 0.125);
  positive(f, "run.tau", c.tau);
  try {
    step_count(c.T, c.tau);
  } catch (const std::exception& e) {
    f.fail("run.tau", e.what());
  }
  c.tau_list = f.numbers("run.tau_list");
  for (double t : c.tau_list) {
    try {
      step_count(c.T, t);
    } catch (const std::exception& e) {
      f.fail("run.tau_list", e.what());
    }
  }
  c.audits = f.string("run.audits", "all");
  try {
    AuditOptions::parse(c.audits);
  } catch (const std::exception& e) {
    f.fail("run.audits", e.what());
  }
  const int seed = f.integer("run.seed", 1);
  if (seed < 0) f.fail("run.seed", "must be nonnegative");
  c.seed = static_cast<unsigned long long>(seed);

  c.origin = sized(f, "mesh.origin", d, std::vector<double>(d, 0.0));
  c.extent = sized(f, "mesh.extent", d, std::vector<double>(d, 1.0));
  for (double e : c.extent) positive(f, "mesh.extent", e);
  const auto cells = sized(f, "mesh.cells", d, std::vector<double>(d, 4.0));
  for (double v : cells) {
    if (v < 1 || v != std::floor(v) || v > 4096) f.fail("mesh.cells", "must be positive integers");
    c.cells.push_back(static_cast<int>(v));
  }
  const auto sides = f.has("mesh.dirichlet") ? f.list("mesh.dirichlet") : std::vector<std::string>{"left"};
  if (sides.empty()) f.fail("mesh.dirichlet", "Dirichlet boundary part is empty");
  for (const auto& s : sides) {
    try {
      const Side sd = parse_side(s);
      if (c.dim == 1 && (sd == Side::Bottom || sd == Side::Top))
        f.fail("mesh.dirichlet", "side '" + s + "' does not exist in one dimension");
      c.dirichlet.push_back(sd);
    } catch (const std::invalid_argument& e) {
      f.fail("mesh.dirichlet", e.what());
    }
  }

  auto& m = c.model;
  m.C0.lambda = f.number("material.C_lambda", m.C0.lambda);
  m.C0.mu = f.number("material.C_mu", m.C0.mu);
  m.D0.lambda = f.number("material.D_lambda", m.D0.lambda);
  m.D0.mu = f.number("material.D_mu", m.D0.mu);
  if (!(m.C0.min_eigenvalue(c.dim) > 0.0)) f.fail("material.C_mu", "elasticity tensor must be positive definite");
  if (!(m.D0.min_eigenvalue(c.dim) > 0.0)) f.fail("material.D_mu", "viscosity tensor must be positive definite");
  m.delta_C = f.number("material.delta_C", m.delta_C);
  positive(f, "material.delta_C", m.delta_C);
  m.delta_D = f.number("material.delta_D", m.delta_D);
  positive(f, "material.delta_D", m.delta_D);
  if (f.has("material.expansion")) {
    const auto v = f.numbers("material.expansion");
    if (v.size() == 1) {
      m.expansion = v[0] * Eigen::Matrix2d::Identity();
    } else if (v.size() == 4) {
      m.expansion << v[0], v[1], v[2], v[3];
      if (std::abs(v[1] - v[2]) > 0.0) f.fail("material.expansion", "expansion matrix must be symmetric");
    } else {
      f.fail("material.expansion", "expected 1 or 4 values");
    }
  }
  m.w0 = f.number("material.w0", m.w0);
  positive(f, "material.w0", m.w0);
  m.q = f.number("material.q", m.q);
  if (m.q > 0.0 && m.q < 2.0 * c.dim + 1.0) f.fail("material.q", "singularity exponent must be at least 2d + 1");
  m.w1 = f.number("material.w1", m.w1);
  nonnegative(f, "material.w1", m.w1);
  m.lambda_W = f.number("material.lambda_W", m.lambda_W);
  nonnegative(f, "material.lambda_W", m.lambda_W);
  m.c_r = f.number("material.c_r", m.c_r);
  m.C_R = f.number("material.C_R", m.C_R);
  if (!(m.c_r > 0.0) || !(m.C_R > m.c_r)) f.fail("material.C_R", "yield radii must satisfy 0 < c_r < C_R");
  m.constant_yield = f.boolean("material.constant_yield", m.constant_yield);
  m.sigma_y_const = f.number("material.sigma_y", m.sigma_y_const);
  positive(f, "material.sigma_y", m.sigma_y_const);
  m.kappa_c0 = f.number("material.kappa_c0", m.kappa_c0);
  positive(f, "material.kappa_c0", m.kappa_c0);
  m.kappa_mu = f.number("material.kappa_mu", m.kappa_mu);
  if (!(m.kappa_mu > 1.0)) f.fail("material.kappa_mu", "conductivity exponent must exceed 1");
  m.rho = f.number("material.rho", m.rho);
  positive(f, "material.rho", m.rho);
  m.nu = f.number("material.nu", m.nu);
  nonnegative(f, "material.nu", m.nu);
  m.gamma = f.number("material.gamma", m.gamma);
  if (!(m.gamma > 4.0)) f.fail("material.gamma", "regularization exponent must exceed 4");
  m.gamma_terms = f.boolean("material.gamma_terms", m.gamma_terms);
  m.s = f.number("material.s", c.dim == 1 ? 0.75 : 1.25);
  if (!(m.s > 0.5 * c.dim && m.s < 1.5)) f.fail("material.s", "fractional exponent must lie in (d/2, 3/2)");

  auto& sv = c.solver;
  sv.mechanics_tol = f.number("solver.mechanics_tol", sv.mechanics_tol);
  positive(f, "solver.mechanics_tol", sv.mechanics_tol);
  sv.heat_tol = f.number("solver.heat_tol", sv.heat_tol);
  positive(f, "solver.heat_tol", sv.heat_tol);
  sv.fixed_point_tol = f.number("solver.fixed_point_tol", sv.fixed_point_tol);
  positive(f, "solver.fixed_point_tol", sv.fixed_point_tol);
  sv.mechanics_max_iter = f.integer("solver.mechanics_max_iter", sv.mechanics_max_iter);
  sv.heat_max_iter = f.integer("solver.heat_max_iter", sv.heat_max_iter);
  sv.fixed_point_max_iter = f.integer("solver.fixed_point_max_iter", sv.fixed_point_max_iter);
  for (const char* k : {"solver.mechanics_max_iter", "solver.heat_max_iter", "solver.fixed_point_max_iter"})
    if (f.has(k) && f.integer(k, 1) < 1) f.fail(k, "must be at least 1");
  sv.initial_M = f.number("solver.initial_M", sv.initial_M);
  positive(f, "solver.initial_M", sv.initial_M);

  c.body_force = sized(f, "loads.body_force", d, std::vector<double>(d, 0.0));
  c.body_profile = parse_profile(f, "loads.body_profile", c.body_profile);
  for (const char* sn : {"left", "right", "bottom", "top"}) {
    const Side sd = parse_side(sn);
    const std::string tk = std::string("loads.traction_") + sn;
    const std::string fk = std::string("loads.flux_") + sn;
    if ((f.has(tk) || f.has(fk)) && c.dim == 1 && (sd == Side::Bottom || sd == Side::Top))
      f.fail(f.has(tk) ? tk : fk, "side does not exist in one dimension");
    if (f.has(tk)) c.traction[sd] = sized(f, tk, d, {});
    if (f.has(fk)) c.flux[sd] = f.number(fk, 0.0);
  }
  c.traction_profile = parse_profile(f, "loads.traction_profile", c.traction_profile);
  c.heat_source = f.number("loads.heat_source", 0.0);
  nonnegative(f, "loads.heat_source", c.heat_source);
  c.heat_profile = parse_profile(f, "loads.heat_profile", c.heat_profile);
  for (const auto& [sd, g] : c.flux)
    if (g < 0.0) f.fail(std::string("loads.flux_") + side_name(sd), "boundary heat flux must be nonnegative");
  c.flux_profile = parse_profile(f, "loads.flux_profile", c.flux_profile);
  c.w_offset = sized(f, "loads.w_offset", d, std::vector<double>(d, 0.0));
  c.w_gradient = sized(f, "loads.w_gradient", d * d, std::vector<double>(d * d, 0.0));
  c.w_profile = parse_profile(f, "loads.w_profile", c.w_profile);
  // Nonnegativity of the heat sources over the horizon.
  for (const auto& [key, p] : {std::pair<std::string, const TimeProfile*>{"loads.heat_profile", &c.heat_profile},
                              {"loads.flux_profile", &c.flux_profile}}) {
    for (int i = 0; i <= 64; ++i)
      if (p->value(c.T * i / 64.0) < 0.0) f.fail(key, "heat source profile must be nonnegative");
  }

  if (f.has("initial.u0_offset")) c.u0_offset = sized(f, "initial.u0_offset", d, {});
  if (f.has("initial.u0_gradient")) c.u0_gradient = sized(f, "initial.u0_gradient", d * d, {});
  c.v0_offset = sized(f, "initial.v0_offset", d, std::vector<double>(d, 0.0));
  c.v0_gradient = sized(f, "initial.v0_gradient", d * d, std::vector<double>(d * d, 0.0));
  c.z0 = f.number("initial.z0", 1.0);
  if (!(c.z0 > 0.0 && c.z0 <= 1.0)) f.fail("initial.z0", "initial damage must lie in (0, 1]");
  c.z0_notch = f.number("initial.z0_notch", 0.0);
  if (!(c.z0_notch >= 0.0 && c.z0_notch < c.z0)) f.fail("initial.z0_notch", "notch depth must lie in [0, z0)");
  c.theta0 = f.number("initial.theta0", 1.0);
  positive(f, "initial.theta0", c.theta0);
  c.theta0_bump = f.number("initial.theta0_bump", 0.0);
  if (!(c.theta0 + std::min(0.0, c.theta0_bump) > 0.0))
    f.fail("initial.theta0_bump", "initial temperature must stay positive");

  c.prescribed = f.boolean("temperature.prescribed", false);
  c.theta_bump = f.number("temperature.bump", 0.0);
  c.theta_offset = f.number("temperature.offset", 1.0);
  c.theta_profile = parse_profile(f, "temperature.profile", c.theta_profile);
  if (c.prescribed) {
    for (int i = 0; i <= 64; ++i) {
      const double pv = c.theta_profile.value(c.T * i / 64.0);
      if (!(c.theta_offset + std::min(0.0, pv * c.theta_bump) > 0.0))
        f.fail("temperature.offset", "prescribed temperature must stay positive");
    }
  }

  if (f.has("contdep.directions")) {
    c.contdep_dirs.clear();
    for (const auto& s : f.list("contdep.directions")) {
      try {
        c.contdep_dirs.push_back(parse_perturbation(s));
      } catch (const std::exception& e) {
        f.fail("contdep.directions", e.what());
      }
    }
  }
  if (f.has("contdep.eps")) {
    c.contdep_eps = f.numbers("contdep.eps");
    for (double e : c.contdep_eps) positive(f, "contdep.eps", e);
  }

  f.check_all_used();
  return c;
}

inline RunConfig load_config(const std::string& path) { return parse_config(ConfigFile::load(path)); }

template <int D>
DomainSpec<D> domain_spec(const RunConfig& c) {
  DomainSpec<D> s;
  for (int k = 0; k < D; ++k) {
    s.origin(k) = c.origin[k];
    s.extent(k) = c.extent[k];
    s.cells[k] = c.cells[k];
  }
  s.dirichlet = c.dirichlet;
  return s;
}

template <int D>
Vec<D> to_vec(const std::vector<double>& v) {
  Vec<D> r;
  for (int k = 0; k < D; ++k) r(k) = v[k];
  return r;
}

template <int D>
Mat<D> to_mat(const std::vector<double>& v) {
  Mat<D> r;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) r(i, j) = v[D * i + j];
  return r;
}

/// Builds the discrete problem of a configuration.
template <int D>
ProblemData<D> build_problem(const RunConfig& c) {
  if (c.dim != D) throw std::invalid_argument("configuration dimension mismatch");
  ProblemData<D> pb;
  pb.mesh = build_mesh(domain_spec<D>(c));
  const auto& m = pb.mesh;
  pb.T = c.T;
  pb.body_force = to_vec<D>(c.body_force);
  pb.body_profile = c.body_profile;
  pb.traction.assign(m.facets.size(), Vec<D>::Zero());
  pb.heat_flux.assign(m.facets.size(), 0.0);
  for (std::size_t f = 0; f < m.facets.size(); ++f) {
    const auto it = c.traction.find(m.facets[f].side);
    if (it != c.traction.end() && m.facets[f].tag == BoundaryTag::Neumann) pb.traction[f] = to_vec<D>(it->second);
    const auto jt = c.flux.find(m.facets[f].side);
    if (jt != c.flux.end()) pb.heat_flux[f] = jt->second;
  }
  pb.traction_profile = c.traction_profile;
  pb.heat_source = c.heat_source;
  pb.heat_profile = c.heat_profile;
  pb.flux_profile = c.flux_profile;
  pb.w_offset = to_vec<D>(c.w_offset);
  pb.w_gradient = to_mat<D>(c.w_gradient);
  pb.w_profile = c.w_profile;

  const int nv = m.num_vertices();
  if (c.u0_offset || c.u0_gradient) {
    const Vec<D> off = c.u0_offset ? to_vec<D>(*c.u0_offset) : Vec<D>::Zero();
    const Mat<D> grd = c.u0_gradient ? to_mat<D>(*c.u0_gradient) : Mat<D>::Zero();
    pb.u0.resize(m.num_dofs());
    for (int i = 0; i < nv; ++i) {
      const Vec<D> v = off + grd * m.vertices[i];
      for (int k = 0; k < D; ++k) pb.u0(D * i + k) = v(k);
    }
    const Eigen::VectorXd w0 = pb.dirichlet_field(pb.w_profile.value(0.0));
    for (int i = 0; i < nv; ++i)
      if (m.dirichlet_vertex[i])
        for (int k = 0; k < D; ++k)
          if (std::abs(pb.u0(D * i + k) - w0(D * i + k)) > 1e-12 * (1.0 + std::abs(w0(D * i + k)))) {
            const std::string key = c.u0_offset ? "initial.u0_offset" : "initial.u0_gradient";
            const auto it = c.lines.find(key);
            throw ConfigError(c.source, it == c.lines.end() ? 0 : it->second,
                              key + ": initial displacement does not match the Dirichlet datum");
          }
  } else {
    pb.u0 = pb.dirichlet_field(pb.w_profile.value(0.0));
  }
  pb.v0.resize(m.num_dofs());
  const Vec<D> voff = to_vec<D>(c.v0_offset);
  const Mat<D> vgrd = to_mat<D>(c.v0_gradient);
  for (int i = 0; i < nv; ++i) {
    const Vec<D> v = voff + vgrd * m.vertices[i];
    for (int k = 0; k < D; ++k) pb.v0(D * i + k) = v(k);
  }
  const Eigen::VectorXd bump = interior_bump(m);
  pb.z0 = (Eigen::VectorXd::Constant(nv, c.z0) - c.z0_notch * bump).eval();
  pb.theta0 = (Eigen::VectorXd::Constant(nv, c.theta0) + c.theta0_bump * bump).eval();
  pb.p0.assign(m.num_elements(), DevMat<D>());

  pb.prescribed_temperature = c.prescribed;
  pb.theta_shape = c.theta_bump * bump;
  pb.theta_profile = c.theta_profile;
  pb.theta_offset = c.theta_offset;
  if (c.prescribed) pb.theta0 = pb.prescribed_theta(pb.theta_profile.value(0.0));
  return pb;
}

}  // namespace tvpd
