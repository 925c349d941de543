#pragma once
/// @file io.hpp
/// @brief Trajectory persistence (lossless CSV plus manifest) and report
/// writers.

#include "tvpd/audit.hpp"
#include "tvpd/config.hpp"
#include "tvpd/contdep.hpp"
#include "tvpd/state.hpp"
#include "tvpd/stepper.hpp"

#include <boost/algorithm/string.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvpd {

/// Shortest text that reads back to the same double.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    // stod rejects "inf"/"nan" spellings from some printf implementations.
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
    throw std::runtime_error(where + ": cannot parse '" + s + "'");
  }
}

/// Minimal CSV table with a header row and numeric cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw std::runtime_error("missing CSV column '" + name + "'");
  }

  static CsvTable read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
    boost::algorithm::split(t.header, line, boost::algorithm::is_any_of(","));
    int ln = 1;
    while (std::getline(in, line)) {
      ++ln;
      if (line.empty()) continue;
      std::vector<std::string> cells;
      boost::algorithm::split(cells, line, boost::algorithm::is_any_of(","));
      if (cells.size() != t.header.size())
        throw std::runtime_error(path.string() + ":" + std::to_string(ln) + ": wrong number of columns");
      std::vector<double> row;
      for (const auto& c : cells) row.push_back(parse_double(c, path.string() + ":" + std::to_string(ln)));
      t.rows.push_back(std::move(row));
    }
    return t;
  }
};

template <int D>
std::vector<std::pair<int, int>> matrix_slots() {
  if constexpr (D == 1)
    return {{0, 0}};
  else
    return {{0, 0}, {0, 1}, {1, 1}};
}

inline const char* axis(int i) { return i == 0 ? "x" : "y"; }

template <int D>
std::string slot_name(const std::string& base, int i, int j) {
  return base + "_" + axis(i) + axis(j);
}

template <class M, int D>
void put_matrix(std::ostream& os, const M& a) {
  for (auto [i, j] : matrix_slots<D>()) os << ',' << fmt17(a.m(i, j));
}

template <class M, int D>
M get_matrix(const CsvTable& t, const std::vector<double>& row, const std::string& base) {
  M a;
  for (auto [i, j] : matrix_slots<D>()) {
    a.m(i, j) = row[t.column(slot_name<D>(base, i, j))];
    a.m(j, i) = a.m(i, j);
  }
  return a;
}

/// Writes the nodal, elemental and per-step files of a run into `dir`.
template <int D>
void write_trajectory(const std::filesystem::path& dir, const Mesh<D>& m, const RunOutput<D>& out) {
  std::filesystem::create_directories(dir);
  const auto& traj = out.traj;
  {
    std::ofstream os(dir / "fields_nodes.csv");
    os << "step,t,vertex";
    for (int k = 0; k < D; ++k) os << ',' << axis(k);
    for (int k = 0; k < D; ++k) os << ",u_" << axis(k);
    for (int k = 0; k < D; ++k) os << ",u_prev_" << axis(k);
    os << ",z,theta,omega,fixed_nodal,expansion_coeff\n";
    for (int s = 0; s <= traj.steps(); ++s) {
      const auto& st = traj.states[s];
      for (int i = 0; i < m.num_vertices(); ++i) {
        os << s << ',' << fmt17(traj.time(s)) << ',' << i;
        for (int k = 0; k < D; ++k) os << ',' << fmt17(m.vertices[i](k));
        for (int k = 0; k < D; ++k) os << ',' << fmt17(st.u(D * i + k));
        for (int k = 0; k < D; ++k) os << ',' << fmt17(st.u_prev_step(D * i + k));
        os << ',' << fmt17(st.z(i)) << ',' << fmt17(st.theta(i)) << ',' << fmt17(st.omega(i));
        if (s > 0 && s - 1 < static_cast<int>(out.dissipation.size()))
          os << ',' << fmt17(out.dissipation[s - 1].fixed_nodal(i)) << ','
             << fmt17(out.dissipation[s - 1].expansion_coeff(i));
        else
          os << ",0,0";
        os << '\n';
      }
    }
  }
  {
    std::ofstream os(dir / "fields_elements.csv");
    os << "step,element";
    for (const char* b : {"e", "p", "zeta", "sigma"})
      for (auto [i, j] : matrix_slots<D>()) os << ',' << slot_name<D>(b, i, j);
    os << '\n';
    for (int s = 0; s <= traj.steps(); ++s) {
      const auto& st = traj.states[s];
      for (int e = 0; e < m.num_elements(); ++e) {
        os << s << ',' << e;
        put_matrix<SymMat<D>, D>(os, st.e[e]);
        put_matrix<DevMat<D>, D>(os, st.p[e]);
        put_matrix<DevMat<D>, D>(os, st.zeta[e]);
        put_matrix<SymMat<D>, D>(os, st.sigma[e]);
        os << '\n';
      }
    }
  }
  {
    std::ofstream os(dir / "fields_steps.csv");
    os << "step,t,damage_iterations,damage_residual,fixed_point_iterations,mechanics_iterations,"
          "heat_iterations,momentum_residual,heat_residual,truncation_level,yielded_elements,"
          "viscous,damage_rate,damage_rate_sq,damage_nonlocal,plastic,plastic_rate_sq,damage_coupling,"
          "expansion_coupling\n";
    for (int s = 1; s <= traj.steps(); ++s) {
      const auto& st = traj.stats[s - 1];
      const auto& d = out.dissipation[s - 1];
      os << s << ',' << fmt17(traj.time(s)) << ',' << st.damage_iterations << ',' << fmt17(st.damage_residual)
         << ',' << st.fixed_point_iterations << ',' << st.mechanics_iterations << ',' << st.heat_iterations << ','
         << fmt17(st.momentum_residual) << ',' << fmt17(st.heat_residual) << ',' << fmt17(st.truncation_level)
         << ',' << st.yielded_elements;
      for (double v : {d.viscous, d.damage_rate, d.damage_rate_sq, d.damage_nonlocal, d.plastic,
                       d.plastic_rate_sq, d.damage_coupling, d.expansion_coupling})
        os << ',' << fmt17(v);
      os << '\n';
    }
  }
}

/// Manifest plus a verbatim copy of the configuration.
inline void write_manifest(const std::filesystem::path& dir, const RunConfig& cfg,
                           const std::map<std::string, std::string>& extra) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "config.ini");
    os << cfg.text;
  }
  std::ofstream os(dir / "manifest.txt");
  os << "config_source = " << cfg.source << '\n';
  os << "config_hash = " << cfg.hash() << '\n';
  os << "dimension = " << cfg.dim << '\n';
  os << "T = " << fmt17(cfg.T) << '\n';
  os << "tau = " << fmt17(cfg.tau) << '\n';
  os << "seed = " << cfg.seed << '\n';
  for (const auto& [k, v] : extra) os << k << " = " << v << '\n';
}

inline std::map<std::string, std::string> read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.txt");
  if (!in) throw std::runtime_error("cannot open " + (dir / "manifest.txt").string());
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

/// Stored run: configuration, trajectory and dissipation.
template <int D>
struct LoadedRun {
  RunConfig cfg;
  ProblemData<D> pb;
  RunOutput<D> out;
};

/// Reads a run directory written by write_manifest() and write_trajectory().
template <int D>
LoadedRun<D> read_run(const std::filesystem::path& dir) {
  LoadedRun<D> r;
  const auto man = read_manifest(dir);
  std::ifstream in(dir / "config.ini");
  if (!in) throw std::runtime_error("cannot open " + (dir / "config.ini").string());
  std::stringstream ss;
  ss << in.rdbuf();
  r.cfg = parse_config(ConfigFile::parse(ss.str(), (dir / "config.ini").string()));
  r.cfg.tau = parse_double(man.at("tau"), "manifest tau");
  r.pb = build_problem<D>(r.cfg);
  const auto& m = r.pb.mesh;
  const int nv = m.num_vertices(), ne = m.num_elements();
  auto& traj = r.out.traj;
  traj.tau = r.cfg.tau;
  traj.complete = man.count("complete") && man.at("complete") == "true";
  if (man.count("failure")) traj.failure = man.at("failure");

  const auto nodes = CsvTable::read(dir / "fields_nodes.csv");
  const auto elems = CsvTable::read(dir / "fields_elements.csv");
  const auto steps = CsvTable::read(dir / "fields_steps.csv");
  if (nodes.rows.size() % nv != 0) throw std::runtime_error("fields_nodes.csv: row count does not match the mesh");
  const int ns = static_cast<int>(nodes.rows.size()) / nv;
  if (static_cast<int>(elems.rows.size()) != ns * ne)
    throw std::runtime_error("fields_elements.csv: row count does not match the mesh");
  if (static_cast<int>(steps.rows.size()) != ns - 1)
    throw std::runtime_error("fields_steps.csv: row count does not match the trajectory");
  for (int s = 0; s < ns; ++s) {
    FieldState<D> st;
    st.u.resize(m.num_dofs());
    st.u_prev_step.resize(m.num_dofs());
    st.z.resize(nv);
    st.theta.resize(nv);
    st.omega.resize(nv);
    StepDissipation d;
    d.fixed_nodal.resize(nv);
    d.expansion_coeff.resize(nv);
    for (int i = 0; i < nv; ++i) {
      const auto& row = nodes.rows[s * nv + i];
      if (static_cast<int>(row[nodes.column("step")]) != s || static_cast<int>(row[nodes.column("vertex")]) != i)
        throw std::runtime_error("fields_nodes.csv: rows out of order");
      for (int k = 0; k < D; ++k) {
        st.u(D * i + k) = row[nodes.column(std::string("u_") + axis(k))];
        st.u_prev_step(D * i + k) = row[nodes.column(std::string("u_prev_") + axis(k))];
      }
      st.z(i) = row[nodes.column("z")];
      st.theta(i) = row[nodes.column("theta")];
      st.omega(i) = row[nodes.column("omega")];
      d.fixed_nodal(i) = row[nodes.column("fixed_nodal")];
      d.expansion_coeff(i) = row[nodes.column("expansion_coeff")];
    }
    for (int e = 0; e < ne; ++e) {
      const auto& row = elems.rows[s * ne + e];
      st.e.push_back(get_matrix<SymMat<D>, D>(elems, row, "e"));
      st.p.push_back(get_matrix<DevMat<D>, D>(elems, row, "p"));
      st.zeta.push_back(get_matrix<DevMat<D>, D>(elems, row, "zeta"));
      st.sigma.push_back(get_matrix<SymMat<D>, D>(elems, row, "sigma"));
    }
    traj.states.push_back(std::move(st));
    if (s == 0) continue;
    const auto& row = steps.rows[s - 1];
    auto col = [&](const char* n) { return row[steps.column(n)]; };
    StepStats stt;
    stt.damage_iterations = static_cast<int>(col("damage_iterations"));
    stt.damage_residual = col("damage_residual");
    stt.fixed_point_iterations = static_cast<int>(col("fixed_point_iterations"));
    stt.mechanics_iterations = static_cast<int>(col("mechanics_iterations"));
    stt.heat_iterations = static_cast<int>(col("heat_iterations"));
    stt.momentum_residual = col("momentum_residual");
    stt.heat_residual = col("heat_residual");
    stt.truncation_level = col("truncation_level");
    stt.yielded_elements = static_cast<int>(col("yielded_elements"));
    traj.stats.push_back(stt);
    d.viscous = col("viscous");
    d.damage_rate = col("damage_rate");
    d.damage_rate_sq = col("damage_rate_sq");
    d.damage_nonlocal = col("damage_nonlocal");
    d.plastic = col("plastic");
    d.plastic_rate_sq = col("plastic_rate_sq");
    d.damage_coupling = col("damage_coupling");
    d.expansion_coupling = col("expansion_coupling");
    r.out.dissipation.push_back(std::move(d));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Report writers

inline void write_audit_report(const std::filesystem::path& path, const AuditReport& rep) {
  std::ofstream os(path);
  for (const auto& sec : rep.sections) {
    os << '[' << sec.name << "]\n";
    for (const auto& [k, v] : sec.items) os << k << " = " << v << '\n';
    os << '\n';
  }
}

inline void write_margins(const std::filesystem::path& path, const std::vector<MarginRow>& rows) {
  std::ofstream os(path);
  os << "audit,s,t,margin\n";
  for (const auto& r : rows) os << r.audit << ',' << r.s << ',' << r.t << ',' << fmt17(r.margin) << '\n';
}

inline void write_apriori_table(const std::filesystem::path& path, const std::vector<double>& taus,
                                const std::vector<AprioriRow>& rows) {
  std::ofstream os(path);
  os << "norm";
  for (double t : taus) os << ",tau=" << fmt17(t);
  os << ",max,growth,flagged,baseline,bounded,decreasing\n";
  for (const auto& r : rows) {
    os << r.name;
    for (double v : r.values) os << ',' << fmt17(v);
    os << ',' << fmt17(r.max) << ',' << fmt17(r.growth) << ',' << (r.flagged ? "true" : "false") << ',' << (std::isnan(r.baseline) ? "" : fmt17(r.baseline))
       << ',' << (r.bounded ? "true" : "false") << ',' << (r.decreasing ? "true" : "false") << '\n';
  }
}

inline void write_contdep(const std::filesystem::path& path, const std::vector<ContdepRow>& rows) {
  std::ofstream os(path);
  os << "direction,eps,lhs,rhs,ratio,P\n";
  for (const auto& r : rows)
    os << r.direction << ',' << fmt17(r.eps) << ',' << fmt17(r.lhs) << ',' << fmt17(r.rhs) << ','
       << fmt17(r.ratio) << ',' << fmt17(r.P) << '\n';
}

}  // namespace tvpd
