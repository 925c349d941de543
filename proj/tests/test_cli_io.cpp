#include "oracles.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace tvpd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(testing::TempDir()) / ("tvpd_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Runs the command-line tool; returns its exit status, stderr in `err`.
int cli(const std::string& args, std::string* err = nullptr) {
  const fs::path log = fs::path(testing::TempDir()) / "tvpd_cli_stderr.txt";
  const std::string cmd = std::string(TVPD_CLI) + " " + args + " > /dev/null 2> " + log.string();
  const int st = std::system(cmd.c_str());
  if (err) *err = slurp(log);
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

int error_line(const std::string& text) {
  try {
    parse_config(ConfigFile::parse(text, "t.ini"));
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST(Config, ErrorsCarryTheirLine) {
  EXPECT_EQ(error_line("[run]\ndimension = 2\nT = -1\n"), 3);
  EXPECT_EQ(error_line("[run]\n\n[mesh]\ncells = 4\n"), 4);
  EXPECT_EQ(error_line("[run]\nT = 1\n[material]\nbogus_key = 3\n"), 4);
  EXPECT_EQ(error_line("dimension = 2\n"), 1);
  EXPECT_EQ(error_line("[run]\nT = 1\nT = 2\n"), 3);
  EXPECT_EQ(error_line("[run\n"), 1);
  EXPECT_EQ(error_line("[run]\nT = abc\n"), 2);
  EXPECT_EQ(error_line("[run]\nT = 1\ntau = 0.125\n[loads]\nw_profile = ramp 0\n"), 5);
  EXPECT_EQ(error_line("[run]\nT = 1\n[contdep]\ndirections = u0, nope\n"), 4);
}

TEST(Config, MessageNamesFileAndLine) {
  try {
    parse_config(ConfigFile::parse("[run]\n# comment\nT = 0\n", "x.ini"));
    FAIL() << "expected an error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("x.ini:3"), std::string::npos) << e.what();
  }
}

TEST(Config, ProfilesParse) {
  const auto c = parse_config(ConfigFile::parse(
      "[run]\nT = 1\n[loads]\nbody_force = 1, 0\nbody_profile = table 0:0 0.5:2 1:1\nw_profile = ramp 0.5 -1\n"
      "traction_profile = constant 3\n",
      "p.ini"));
  EXPECT_DOUBLE_EQ(c.body_profile.value(0.25), 1.0);
  EXPECT_DOUBLE_EQ(c.body_profile.value(0.75), 1.5);
  EXPECT_DOUBLE_EQ(c.w_profile.value(0.5), 0.0);
  EXPECT_DOUBLE_EQ(c.traction_profile.value(0.9), 3.0);
}

TEST(Config, ShippedConfigsLoadAndHashIsStable) {
  for (const char* name : {"quiescent.ini", "loaded_tension.ini", "tensile_cooling.ini", "shear_heating.ini",
                           "notched_damage.ini", "bar_1d.ini", "contdep.ini"}) {
    const auto a = load_config(oracle::config_path(name));
    const auto b = load_config(oracle::config_path(name));
    EXPECT_EQ(a.hash(), b.hash()) << name;
    EXPECT_EQ(a.hash().size(), 8u);
    auto c = a;
    c.tau = 0.5 * a.tau;
    EXPECT_NE(c.hash(), a.hash()) << name;
  }
}

TEST(Io, TrajectoryRoundTripPreservesAudits) {
  const RunConfig cfg = load_config(oracle::config_path("loaded_tension.ini"));
  const auto pb = build_problem<2>(cfg);
  const auto form = assemble_as(pb.mesh, cfg.model.s);
  const auto out = run(pb, cfg.model, form, cfg.tau, cfg.solver);
  ASSERT_TRUE(out.traj.complete);
  const fs::path dir = scratch("roundtrip");
  write_manifest(dir, cfg, {{"complete", "true"}});
  write_trajectory(dir, pb.mesh, out);
  const auto r = read_run<2>(dir);
  ASSERT_EQ(r.out.traj.states.size(), out.traj.states.size());
  EXPECT_TRUE(trajectories_identical(r.out.traj, out.traj));
  ASSERT_EQ(r.out.dissipation.size(), out.dissipation.size());
  for (std::size_t k = 0; k < out.dissipation.size(); ++k)
    EXPECT_EQ(r.out.dissipation[k].bundle(), out.dissipation[k].bundle());
  const auto a = audit_trajectory(pb, cfg.model, form, out.traj, out.dissipation);
  const auto b = audit_trajectory(r.pb, r.cfg.model, form, r.out.traj, r.out.dissipation);
  ASSERT_EQ(a.margins.size(), b.margins.size());
  for (std::size_t i = 0; i < a.margins.size(); ++i) EXPECT_EQ(a.margins[i].margin, b.margins[i].margin);
  EXPECT_TRUE(b.all_pass());
}

TEST(Io, CsvReaderRejectsRaggedRows) {
  const fs::path dir = scratch("ragged");
  {
    std::ofstream os(dir / "t.csv");
    os << "a,b\n1,2\n3\n";
  }
  EXPECT_THROW(CsvTable::read(dir / "t.csv"), std::runtime_error);
}

TEST(Cli, SimulateAndAuditQuiescent) {
  const fs::path dir = scratch("cli_sim");
  EXPECT_EQ(cli("simulate --config " + oracle::config_path("quiescent.ini") + " --out " + dir.string()), 0);
  for (const char* f : {"manifest.txt", "config.ini", "fields_nodes.csv", "fields_elements.csv", "fields_steps.csv",
                        "audit_report.txt", "margins.csv"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  const std::string first = slurp(dir / "fields_nodes.csv");
  EXPECT_EQ(cli("audit --out " + dir.string()), 0);
  const fs::path again = scratch("cli_sim2");
  EXPECT_EQ(cli("simulate --config " + oracle::config_path("quiescent.ini") + " --out " + again.string()), 0);
  EXPECT_EQ(slurp(again / "fields_nodes.csv"), first);
  EXPECT_EQ(slurp(again / "margins.csv"), slurp(dir / "margins.csv"));
}

TEST(Cli, BadConfigExitsWithLocation) {
  const fs::path dir = scratch("cli_bad");
  {
    std::ofstream os(dir / "bad.ini");
    os << "[run]\ndimension = 2\n\n[material]\nnu = -1\n";
  }
  std::string err;
  EXPECT_EQ(cli("simulate --config " + (dir / "bad.ini").string() + " --out " + (dir / "o").string(), &err), 2);
  EXPECT_NE(err.find("bad.ini:5"), std::string::npos) << err;
  EXPECT_EQ(cli("simulate --config " + oracle::config_path("quiescent.ini") + " --tau 0.3 --out " + dir.string()), 2);
  EXPECT_EQ(cli("audit --out " + (dir / "missing").string()), 4);
}

TEST(Cli, ValidateMaterialPasses) {
  EXPECT_EQ(cli("validate-material --config " + oracle::config_path("loaded_tension.ini")), 0);
}
