#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace tvpd;

namespace {

/// One-element bar on [0, 1] clamped on the left, at rest, undamaged.
ProblemData<1> single_element(double T) {
  DomainSpec<1> s;
  s.cells = {1};
  s.extent(0) = 1.0;
  s.dirichlet = {Side::Left};
  ProblemData<1> pb;
  pb.mesh = build_mesh(s);
  pb.T = T;
  const int n = pb.mesh.num_vertices();
  pb.u0 = Eigen::VectorXd::Zero(n);
  pb.v0 = Eigen::VectorXd::Zero(n);
  pb.z0 = Eigen::VectorXd::Ones(n);
  pb.theta0 = Eigen::VectorXd::Ones(n);
  pb.p0.assign(pb.mesh.num_elements(), DevMat<1>());
  pb.traction.assign(pb.mesh.facets.size(), Vec<1>::Zero());
  pb.heat_flux.assign(pb.mesh.facets.size(), 0.0);
  return pb;
}

ProblemData<2> quiescent_problem() {
  const RunConfig c = load_config(oracle::config_path("quiescent.ini"));
  return build_problem<2>(c);
}

}  // namespace

TEST(LocalMeans, ConstantProfile) {
  for (double v : local_means(TimeProfile::constant(2.5), 0.1, 7)) EXPECT_EQ(v, 2.5);
}

TEST(LocalMeans, LinearProfileOnTwoSteps) {
  const auto m = local_means(TimeProfile::ramp(0.0, 1.0), 0.5, 2);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_DOUBLE_EQ(m[0], 0.25);
  EXPECT_DOUBLE_EQ(m[1], 0.75);
}

TEST(LocalMeans, TableProfileMatchesFineTrapezoid) {
  const auto p = TimeProfile::table({0.0, 0.3, 0.35, 1.0}, {1.0, -2.0, 4.0, 0.5});
  const double tau = 0.125;
  const auto m = local_means(p, tau, 8);
  for (int k = 1; k <= 8; ++k) {
    const int n = 20000;
    const double t0 = (k - 1) * tau, h = tau / n;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += 0.5 * h * (p.value(t0 + i * h) + p.value(t0 + (i + 1) * h));
    EXPECT_NEAR(m[k - 1], sum / tau, 1e-6) << "k = " << k;
  }
  EXPECT_THROW(TimeProfile::table({0.0, 0.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST(StepCount, RequiresIntegerRatio) {
  EXPECT_EQ(step_count(1.0, 0.125), 8);
  EXPECT_EQ(step_count(0.5, 1.0 / 16), 8);
  EXPECT_THROW(step_count(1.0, 0.3), std::invalid_argument);
  EXPECT_THROW(step_count(1.0, 0.0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Damage step against a scalar prox oracle. With one vertex block decoupled
// (a single-vertex system) the functional is scalar.

namespace {

DamageProblem scalar_damage_problem(const MaterialModel& m, double z1, double theta, double tau, double ew) {
  DamageProblem p;
  p.mass = Eigen::VectorXd::Ones(1);
  p.A = Eigen::MatrixXd::Zero(1, 1);
  p.tau = tau;
  p.nu = m.nu;
  p.dim = 2;
  p.elements = {{0}};
  p.elastic_weight = {ew};
  p.z_prev = Eigen::VectorXd::Constant(1, z1);
  p.theta_prev = Eigen::VectorXd::Constant(1, theta);
  p.model = &m;
  return p;
}

}  // namespace

TEST(DamageStep, ScalarCasesMatchProxOracle) {
  MaterialModel m;
  m.lambda_W = 0.3;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int moved = 0, held = 0;
  for (int i = 0; i < 100; ++i) {
    const double z1 = 0.05 + 0.95 * u(rng), theta = 2.0 * u(rng), tau = 0.01 + 0.3 * u(rng);
    const double ew = 10.0 * u(rng);  // |E| C0 e:e
    const auto p = scalar_damage_problem(m, z1, theta, tau, ew);
    const auto r = solve_damage_problem(p);
    const oracle::ScalarDamage s{z1, tau, theta, m.w0, m.q_for(2), m.w1, m.lambda_W, m.delta_C, ew};
    const double eta = oracle::damage_prox(s);
    EXPECT_NEAR(r.z(0), z1 + eta, 1e-8) << "case " << i;
    EXPECT_LE(r.z(0), z1);
    EXPECT_GT(r.z(0), 0.0);
    (eta < 0.0 ? moved : held)++;
  }
  EXPECT_GT(moved, 10);
  EXPECT_GT(held, 10);
}

TEST(DamageStep, LargeHealingDriveKeepsDamageExactly) {
  const MaterialModel m;
  const auto p = scalar_damage_problem(m, 0.6, 50.0, 0.1, 0.0);
  const auto r = solve_damage_problem(p);
  EXPECT_EQ(r.z(0), 0.6);
  EXPECT_EQ(r.active, 1);
}

TEST(DamageStep, ObjectiveDecreasesOnAMesh) {
  DomainSpec<2> s;
  s.cells = {3, 3};
  s.extent = Vec<2>(1.0, 1.0);
  s.dirichlet = {Side::Left};
  const auto mesh = build_mesh(s);
  const auto form = assemble_as(mesh, 1.25);
  MaterialModel m;
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd z(mesh.num_vertices()), th(mesh.num_vertices());
  for (int i = 0; i < z.size(); ++i) {
    z(i) = 0.5 + 0.5 * u(rng);
    th(i) = 0.5 + u(rng);
  }
  std::vector<SymMat<2>> e(mesh.num_elements());
  for (auto& x : e) x = SymMat<2>::diag(2.0 * u(rng), -u(rng));
  const auto p = make_damage_problem(mesh, form, m, z, e, th, 0.05);
  const auto r = solve_damage_problem(p);
  EXPECT_LE(r.objective, damage_objective(p, z));
  EXPECT_LE(r.residual, 1e-12 * (1.0 + th.maxCoeff() + 1.0 / 0.05));
  EXPECT_TRUE((r.z.array() <= z.array()).all());
  EXPECT_GT(r.z.minCoeff(), 0.0);
  // First-order optimality: free vertices have zero gradient, bound
  // vertices a gradient pushing against the bound.
  const Eigen::VectorXd g = damage_gradient(p, r.z);
  for (int i = 0; i < z.size(); ++i) {
    if (r.z(i) < z(i))
      EXPECT_NEAR(g(i) / p.mass(i), 0.0, 1e-8);
    else
      EXPECT_LE(g(i) / p.mass(i), 1e-8);
  }
}

TEST(DamageStep, RejectsNonPositiveDamage) {
  const MaterialModel m;
  auto p = scalar_damage_problem(m, 0.5, 1.0, 0.1, 0.0);
  p.z_prev(0) = 0.0;
  EXPECT_THROW(solve_damage_problem(p), std::domain_error);
}

// ---------------------------------------------------------------------------
// Whole runs

TEST(Run, QuiescentBodyStaysAtRest) {
  const auto pb = quiescent_problem();
  const MaterialModel m;
  const auto form = assemble_as(pb.mesh, m.s);
  const auto out = run(pb, m, form, 0.125);
  ASSERT_TRUE(out.traj.complete) << out.traj.failure;
  ASSERT_EQ(out.traj.steps(), 8);
  const auto& s0 = out.traj.states.front();
  for (const auto& s : out.traj.states) {
    EXPECT_EQ(s.u, s0.u);
    EXPECT_EQ(s.z, s0.z);
    EXPECT_EQ(s.theta, s0.theta);
    for (std::size_t e = 0; e < s.p.size(); ++e) EXPECT_EQ(to_coords(s.p[e]), to_coords(s0.p[e]));
  }
}

TEST(Run, PureHeatingRaisesTemperatureLinearly) {
  auto pb = single_element(1.0);
  pb.heat_source = 0.7;
  MaterialModel m;
  const auto form = assemble_as(pb.mesh, 0.75);
  const double tau = 0.125;
  const auto out = run(pb, m, form, tau);
  ASSERT_TRUE(out.traj.complete) << out.traj.failure;
  for (int k = 0; k <= out.traj.steps(); ++k) {
    const auto& s = out.traj.states[k];
    for (int i = 0; i < s.theta.size(); ++i) EXPECT_NEAR(s.theta(i), 1.0 + k * tau * 0.7, 1e-12);
    EXPECT_EQ(s.z, pb.z0);
    EXPECT_LE(s.u.cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Run, SingleElementMatchesFineStepOracle) {
  auto pb = single_element(1.0);
  const double a = 0.2, f = 1.0;
  pb.w_offset = Vec<1>(-a);
  pb.w_profile = TimeProfile::ramp(0.0, 1.0);
  for (std::size_t k = 0; k < pb.mesh.facets.size(); ++k)
    if (pb.mesh.facets[k].side == Side::Right) pb.traction[k] = Vec<1>(f);
  MaterialModel m;
  m.rho = 0.01;
  m.gamma_terms = false;
  const auto form = assemble_as(pb.mesh, 0.75);
  const double tau = 1.0 / 64;
  const auto out = run(pb, m, form, tau);
  ASSERT_TRUE(out.traj.complete) << out.traj.failure;
  const auto& last = out.traj.states.back();
  EXPECT_EQ(last.z, pb.z0);
  const double C = g_C(m, 1.0) * m.C0.spherical_modulus(1);
  const double Dv = g_D(m, 1.0) * m.D0.spherical_modulus(1);
  const oracle::BarOracle bar{m.rho, Dv, C, a, f, 1.0};
  const double ref = bar.strain_at(1.0, tau / 100.0);
  EXPECT_NEAR(last.e[0].m(0, 0), ref, 1e-3 * std::abs(ref));
  EXPECT_NEAR(ref, f / C, 1e-3 * f / C);
}

TEST(Run, RejectsInvalidInitialData) {
  auto pb = single_element(1.0);
  const MaterialModel m;
  const auto form = assemble_as(pb.mesh, 0.75);
  pb.z0(1) = 1.2;
  EXPECT_THROW(run(pb, m, form, 0.125), std::invalid_argument);
  pb.z0(1) = 1.0;
  pb.theta0(0) = -0.1;
  EXPECT_THROW(run(pb, m, form, 0.125), std::invalid_argument);
  pb.theta0(0) = 1.0;
  EXPECT_THROW(run(pb, m, form, 0.3), std::invalid_argument);
}

TEST(Run, DissipationIsRecomputedBitwise) {
  const RunConfig c = load_config(oracle::config_path("bar_1d.ini"));
  const auto pb = build_problem<1>(c);
  const auto form = assemble_as(pb.mesh, c.model.s);
  const auto out = run(pb, c.model, form, 0.125);
  ASSERT_TRUE(out.traj.complete) << out.traj.failure;
  const auto again = recompute_dissipation(pb.mesh, c.model, form, out.traj);
  ASSERT_EQ(again.size(), out.dissipation.size());
  for (std::size_t k = 0; k < again.size(); ++k) EXPECT_EQ(again[k].bundle(), out.dissipation[k].bundle());
}

TEST(Run, SelfConvergenceOnTheBar) {
  const RunConfig c = load_config(oracle::config_path("bar_1d.ini"));
  const auto pb = build_problem<1>(c);
  const auto form = assemble_as(pb.mesh, c.model.s);
  const auto res = sweep_tau(pb, c.model, form, {0.125, 0.0625, 0.03125}, c.solver);
  ASSERT_EQ(res.differences.size(), 2u);
  EXPECT_LT(res.differences[1], res.differences[0]);
  EXPECT_LE(res.ratios[0], 0.75);
}
