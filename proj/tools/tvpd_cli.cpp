// Command-line driver: simulate, audit, sweep-tau, contdep, validate-material.

#include "tvpd/tvpd.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace tvpd;

namespace {

enum Exit { kOk = 0, kAuditFailed = 1, kConfigError = 2, kSolverFailed = 3, kIoError = 4 };

struct Options {
  std::string config;
  std::string out = "out";
  double tau = 0.0;
  std::string audits;
  long long seed = -1;
  std::vector<std::string> directions;
  std::vector<double> eps;
};

RunConfig load(const Options& o) {
  RunConfig c = load_config(o.config);
  if (o.tau > 0.0) {
    try {
      step_count(c.T, o.tau);
    } catch (const std::exception& e) {
      throw ConfigError("--tau", 0, e.what());
    }
    c.tau = o.tau;
  }
  if (!o.audits.empty()) {
    try {
      AuditOptions::parse(o.audits);
    } catch (const std::exception& e) {
      throw ConfigError("--audits", 0, e.what());
    }
    c.audits = o.audits;
  }
  if (o.seed >= 0) c.seed = static_cast<unsigned long long>(o.seed);
  return c;
}

void print_checks(const AuditReport& rep) {
  for (const auto& c : rep.checks)
    std::printf("%-24s %s  value=%.6g tol=%.3g\n", c.name.c_str(), c.pass ? "PASS" : "FAIL", c.value, c.tolerance);
}

template <int D>
int audit_and_write(const fs::path& dir, const ProblemData<D>& pb, const RunConfig& cfg, const RunOutput<D>& out) {
  const FractionalForm form = assemble_as(pb.mesh, cfg.model.s);
  const auto rep = audit_trajectory(pb, cfg.model, form, out.traj, out.dissipation, AuditOptions::parse(cfg.audits));
  write_audit_report(dir / "audit_report.txt", rep);
  write_margins(dir / "margins.csv", rep.margins);
  print_checks(rep);
  return rep.all_pass() ? kOk : kAuditFailed;
}

std::map<std::string, std::string> run_summary(bool complete, const std::string& failure, int steps) {
  std::map<std::string, std::string> m{{"complete", complete ? "true" : "false"}, {"steps", std::to_string(steps)}};
  if (!failure.empty()) m["failure"] = failure;
  return m;
}

template <int D>
int simulate(const RunConfig& cfg, const fs::path& dir) {
  const auto pb = build_problem<D>(cfg);
  const FractionalForm form = assemble_as(pb.mesh, cfg.model.s);
  const auto out = run(pb, cfg.model, form, cfg.tau, cfg.solver);
  write_manifest(dir, cfg, run_summary(out.traj.complete, out.traj.failure, out.traj.steps()));
  write_trajectory(dir, pb.mesh, out);
  if (!out.traj.complete) {
    std::fprintf(stderr, "solver failure: %s (partial trajectory written to %s)\n", out.traj.failure.c_str(),
                 dir.string().c_str());
    return kSolverFailed;
  }
  std::printf("simulated %d steps, tau = %.6g, written to %s\n", out.traj.steps(), cfg.tau, dir.string().c_str());
  if (cfg.audits == "none") return kOk;
  return audit_and_write(dir, pb, cfg, out);
}

template <int D>
int audit_dir(const fs::path& dir, const std::string& audits) {
  auto r = read_run<D>(dir);
  if (!audits.empty()) r.cfg.audits = audits;
  return audit_and_write(dir, r.pb, r.cfg, r.out);
}

template <int D>
int sweep(const RunConfig& cfg, const fs::path& dir) {
  const auto pb = build_problem<D>(cfg);
  const FractionalForm form = assemble_as(pb.mesh, cfg.model.s);
  std::vector<double> taus = cfg.tau_list;
  if (taus.empty()) taus = {cfg.tau, cfg.tau / 2, cfg.tau / 4};
  const auto res = sweep_tau(pb, cfg.model, form, taus, cfg.solver);
  fs::create_directories(dir);
  int status = kOk;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    RunConfig c = cfg;
    c.tau = taus[i];
    const fs::path sub = dir / ("tau_" + std::to_string(i));
    const auto& o = res.runs[i];
    write_manifest(sub, c, run_summary(o.traj.complete, o.traj.failure, o.traj.steps()));
    write_trajectory(sub, pb.mesh, o);
    if (!o.traj.complete) {
      std::fprintf(stderr, "tau = %.6g: solver failure: %s\n", taus[i], o.traj.failure.c_str());
      status = kSolverFailed;
    }
  }
  write_apriori_table(dir / "apriori_table.csv", taus, res.table);
  {
    std::ofstream os(dir / "self_convergence.csv");
    os << "tau_coarse,tau_fine,difference,ratio\n";
    for (std::size_t i = 0; i < res.differences.size(); ++i)
      os << fmt17(taus[i]) << ',' << fmt17(taus[i + 1]) << ',' << fmt17(res.differences[i]) << ','
         << (i == 0 ? std::string() : fmt17(res.ratios[i - 1])) << '\n';
  }
  write_manifest(dir, cfg, {{"runs", std::to_string(taus.size())}});
  for (const auto& r : res.table)
    std::printf("%-24s max=%-12.6g growth=%.4f%s%s\n", r.name.c_str(), r.max, r.growth, r.flagged ? "  FLAGGED" : "",
                is_weighted_norm(r.name) ? (r.decreasing ? "  decreasing" : "  NOT decreasing") : "");
  for (std::size_t i = 0; i < res.differences.size(); ++i) std::printf("difference %zu: %.6e\n", i, res.differences[i]);
  return status;
}

template <int D>
int contdep(const RunConfig& cfg, const Options& o, const fs::path& dir) {
  auto pb = build_problem<D>(cfg);
  prepare_contdep_problem(pb, cfg.model);
  const FractionalForm form = assemble_as(pb.mesh, cfg.model.s);
  std::vector<Perturbation> dirs = cfg.contdep_dirs;
  if (!o.directions.empty()) {
    dirs.clear();
    for (const auto& d : o.directions) dirs.push_back(parse_perturbation(d));
  }
  const std::vector<double> eps = o.eps.empty() ? cfg.contdep_eps : o.eps;
  std::vector<ContdepRow> rows;
  try {
    rows = contdep_battery(pb, cfg.model, form, cfg.tau, dirs, eps, cfg.solver);
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return kSolverFailed;
  }
  fs::create_directories(dir);
  write_contdep(dir / "contdep.csv", rows);
  write_manifest(dir, cfg, {{"rows", std::to_string(rows.size())}});
  for (const auto& r : rows)
    std::printf("%-6s eps=%-8.1e lhs=%.6e rhs=%.6e ratio=%.6f P=%.4f\n", r.direction.c_str(), r.eps, r.lhs, r.rhs,
                r.ratio, r.P);
  return kOk;
}

template <int D>
int validate(const RunConfig& cfg) {
  int status = kOk;
  for (const auto& c : validate_material<D>(cfg.model)) {
    std::printf("%-32s %s  %.6g%s%s\n", c.name.c_str(), c.pass ? "PASS" : "FAIL", c.value,
                c.note.empty() ? "" : "  ", c.note.c_str());
    if (!c.pass) status = kAuditFailed;
  }
  return status;
}

template <class F>
int by_dimension(int dim, F&& f) {
  return dim == 1 ? f(std::integral_constant<int, 1>{}) : f(std::integral_constant<int, 2>{});
}

int dimension_of_run(const fs::path& dir) {
  const auto man = read_manifest(dir);
  const auto it = man.find("dimension");
  if (it == man.end()) throw std::runtime_error("manifest lacks the dimension");
  return std::stoi(it->second);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thermoviscoplastic damage solver with runtime audits"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* s, bool need_config) {
    auto* c = s->add_option("--config", o.config, "Run configuration file");
    if (need_config) c->required()->check(CLI::ExistingFile);
    s->add_option("--out", o.out, "Output directory");
    s->add_option("--tau", o.tau, "Time step override")->check(CLI::PositiveNumber);
    s->add_option("--audits", o.audits, "Comma-separated audits: total,mechanical,entropy,positivity,dissipation");
    s->add_option("--seed", o.seed, "Seed recorded in the manifest")->check(CLI::NonNegativeNumber);
  };
  auto* sim = app.add_subcommand("simulate", "Run a trajectory and write fields, manifest and audits");
  add_common(sim, true);
  auto* aud = app.add_subcommand("audit", "Audit a stored trajectory directory (given by --out)");
  add_common(aud, false);
  auto* swp = app.add_subcommand("sweep-tau", "Run the step-size family and write the norm table");
  add_common(swp, true);
  auto* cdp = app.add_subcommand("contdep", "Continuous dependence on the data");
  add_common(cdp, true);
  cdp->add_option("--direction", o.directions, "Perturbed datum: u0, v0, z0, F, w, Theta, f, p0");
  cdp->add_option("--eps", o.eps, "Perturbation magnitudes");
  auto* val = app.add_subcommand("validate-material", "Check the structural hypotheses of the material");
  add_common(val, true);

  CLI11_PARSE(app, argc, argv);
  const fs::path out = o.out;
  try {
    if (aud->parsed()) {
      if (!fs::exists(out / "manifest.txt")) {
        std::fprintf(stderr, "%s is not a run directory\n", out.string().c_str());
        return kIoError;
      }
      return by_dimension(dimension_of_run(out), [&](auto d) { return audit_dir<decltype(d)::value>(out, o.audits); });
    }
    const RunConfig cfg = load(o);
    if (sim->parsed()) return by_dimension(cfg.dim, [&](auto d) { return simulate<decltype(d)::value>(cfg, out); });
    if (swp->parsed()) return by_dimension(cfg.dim, [&](auto d) { return sweep<decltype(d)::value>(cfg, out); });
    if (cdp->parsed()) return by_dimension(cfg.dim, [&](auto d) { return contdep<decltype(d)::value>(cfg, o, out); });
    if (val->parsed()) return by_dimension(cfg.dim, [&](auto d) { return validate<decltype(d)::value>(cfg); });
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIoError;
  }
  return kOk;
}
