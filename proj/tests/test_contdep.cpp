#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace tvpd;

namespace {

struct Setup {
  RunConfig cfg;
  ProblemData<2> pb;
  FractionalForm form;
};

/// The continuous-dependence configuration on a coarser mesh and horizon.
Setup small_setup() {
  Setup s;
  s.cfg = load_config(oracle::config_path("contdep.ini"));
  s.cfg.cells = {2, 2};
  s.cfg.T = 0.25;
  s.pb = build_problem<2>(s.cfg);
  prepare_contdep_problem(s.pb, s.cfg.model);
  s.form = assemble_as(s.pb.mesh, s.cfg.model.s);
  return s;
}

}  // namespace

TEST(Contdep, IdenticalPairHasZeroDifference) {
  const auto s = small_setup();
  const double tau = s.cfg.tau;
  const auto a = run(s.pb, s.cfg.model, s.form, tau, s.cfg.solver);
  const auto b = run(s.pb, s.cfg.model, s.form, tau, s.cfg.solver);
  ASSERT_TRUE(a.traj.complete) << a.traj.failure;
  EXPECT_TRUE(trajectories_identical(a.traj, b.traj));
  const auto row = run_pair(s.pb, s.pb, s.cfg.model, s.form, tau, "none", 0.0, s.cfg.solver);
  EXPECT_EQ(row.lhs, 0.0);
  EXPECT_EQ(row.rhs, 0.0);
  EXPECT_EQ(row.ratio, 0.0);
  EXPECT_GT(row.P, 0.0);
}

TEST(Contdep, PerturbedPairDiffers) {
  const auto s = small_setup();
  const auto a = run(s.pb, s.cfg.model, s.form, s.cfg.tau, s.cfg.solver);
  const auto b = run(perturb(s.pb, Perturbation::InitialVelocity, 1e-3), s.cfg.model, s.form, s.cfg.tau, s.cfg.solver);
  EXPECT_FALSE(trajectories_identical(a.traj, b.traj));
}

TEST(Contdep, RatioStableAcrossMagnitudes) {
  const auto s = small_setup();
  const auto rows = contdep_battery(s.pb, s.cfg.model, s.form, s.cfg.tau,
                                    {Perturbation::InitialVelocity, Perturbation::Temperature}, {1e-2, 1e-3});
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    EXPECT_GT(r.lhs, 0.0) << r.direction;
    EXPECT_GT(r.rhs, 0.0) << r.direction;
  }
  EXPECT_LT(ratio_spread(rows, "v0"), 2.0);
  EXPECT_LT(ratio_spread(rows, "Theta"), 2.0);
}

TEST(Contdep, VelocityRatioStableUnderStepHalving) {
  const auto s = small_setup();
  const auto pert = perturb(s.pb, Perturbation::InitialVelocity, 1e-3);
  const auto r1 = run_pair(s.pb, pert, s.cfg.model, s.form, s.cfg.tau, "v0", 1e-3, s.cfg.solver);
  const auto r2 = run_pair(s.pb, pert, s.cfg.model, s.form, 0.5 * s.cfg.tau, "v0", 1e-3, s.cfg.solver);
  EXPECT_LT(std::max(r1.ratio, r2.ratio) / std::min(r1.ratio, r2.ratio), 2.0);
}

TEST(Contdep, PerturbationsTouchOnlyTheirDatum) {
  const auto s = small_setup();
  const auto u = perturb(s.pb, Perturbation::InitialDisplacement, 0.1);
  EXPECT_GT((u.u0 - s.pb.u0).norm(), 0.0);
  EXPECT_EQ(u.v0, s.pb.v0);
  EXPECT_EQ(u.z0, s.pb.z0);
  const auto z = perturb(s.pb, Perturbation::InitialDamage, 0.1);
  EXPECT_TRUE((z.z0.array() <= s.pb.z0.array()).all());
  // The bump vanishes on the boundary.
  const auto& m = s.pb.mesh;
  for (int i = 0; i < m.num_vertices(); ++i)
    for (Side side : {Side::Left, Side::Right, Side::Bottom, Side::Top})
      if (detail::on_side(m.spec, m.vertices[i], side)) {
        EXPECT_EQ(z.z0(i), s.pb.z0(i));
      }
  const auto th = perturb(s.pb, Perturbation::Temperature, 0.1);
  EXPECT_NEAR((th.theta0 - s.pb.theta0).maxCoeff(), 0.1, 1e-12);
  const auto p = perturb(s.pb, Perturbation::InitialPlastic, 0.1);
  double shear = 0.0;
  for (const auto& a : p.p0) shear = std::max(shear, std::abs(a.m(0, 1)));
  EXPECT_GT(shear, 0.0);
  EXPECT_NEAR(p.p0[0].m.trace(), 0.0, 1e-15);
  EXPECT_THROW(parse_perturbation("bogus"), std::invalid_argument);
  EXPECT_EQ(parse_perturbation("Theta"), Perturbation::Temperature);
}

TEST(Contdep, RejectsDataOutsideTheRegime) {
  auto s = small_setup();
  MaterialModel m = s.cfg.model;
  m.nu = 0.0;
  EXPECT_THROW(prepare_contdep_problem(s.pb, m), std::invalid_argument);
  m = s.cfg.model;
  m.constant_yield = false;
  EXPECT_THROW(prepare_contdep_problem(s.pb, m), std::invalid_argument);
  auto free_theta = s.pb;
  free_theta.prescribed_temperature = false;
  EXPECT_THROW(prepare_contdep_problem(free_theta, s.cfg.model), std::invalid_argument);
  EXPECT_NO_THROW(prepare_contdep_problem(s.pb, s.cfg.model));
}

TEST(ContdepNorms, DualNormOfGramImageEqualsH1Norm) {
  const auto s = small_setup();
  const ContdepNorms<2> n(s.pb.mesh, s.form);
  Eigen::VectorXd u = vector_bump(s.pb.mesh);
  const Eigen::VectorXd l = n.h1 * u;
  // u vanishes on the Dirichlet dofs, so the dual norm of its Riesz image is its own norm.
  EXPECT_NEAR(n.dual_sq(l), n.h1_sq(u), 1e-12 * n.h1_sq(u));
}
