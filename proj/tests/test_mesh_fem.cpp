#include "tvpd/mesh.hpp"
#include "tvpd/state.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace tvpd;

namespace {

DomainSpec<1> interval(int n, std::vector<Side> dir = {Side::Left}) {
  DomainSpec<1> s;
  s.cells = {n};
  s.dirichlet = std::move(dir);
  return s;
}

DomainSpec<2> square(int nx, int ny, std::vector<Side> dir = {Side::Left}) {
  DomainSpec<2> s;
  s.cells = {nx, ny};
  s.dirichlet = std::move(dir);
  return s;
}

template <int D>
Eigen::VectorXd affine_field(const Mesh<D>& m, const Vec<D>& b, const Mat<D>& g) {
  Eigen::VectorXd u(m.num_dofs());
  for (int i = 0; i < m.num_vertices(); ++i) {
    const Vec<D> v = b + g * m.vertices[i];
    for (int k = 0; k < D; ++k) u(D * i + k) = v(k);
  }
  return u;
}

}  // namespace

TEST(BuildMesh, UnitIntervalFourCells) {
  const auto m = build_mesh(interval(4));
  EXPECT_EQ(m.num_vertices(), 5);
  EXPECT_EQ(m.num_elements(), 4);
  EXPECT_NEAR(m.total_measure, 1.0, 1e-15);
  EXPECT_EQ(m.dirichlet_vertex[0], 1);
  EXPECT_EQ(m.dirichlet_vertex[4], 0);
}

TEST(BuildMesh, UnitSquareTwoByTwo) {
  const auto m = build_mesh(square(2, 2));
  EXPECT_EQ(m.num_vertices(), 9);
  EXPECT_EQ(m.num_elements(), 8);
  EXPECT_NEAR(m.total_measure, 1.0, 1e-15);
  for (double a : m.measure) EXPECT_NEAR(a, 0.125, 1e-15);
}

TEST(BuildMesh, RejectsEmptyDirichletPart) {
  EXPECT_THROW(build_mesh(square(1, 1, {})), std::invalid_argument);
}

TEST(BuildMesh, RejectsBadExtentsAndCounts) {
  auto s = square(2, 2);
  s.extent(0) = 0.0;
  EXPECT_THROW(build_mesh(s), std::invalid_argument);
  auto t = square(2, 2);
  t.cells[1] = 0;
  EXPECT_THROW(build_mesh(t), std::invalid_argument);
  EXPECT_THROW(build_mesh(interval(2, {Side::Top})), std::invalid_argument);
}

TEST(BuildMesh, FacetsTaggedOnceAndMeasuresSum) {
  auto s = square(3, 2, {Side::Left, Side::Top});
  s.extent = Vec<2>(2.0, 0.5);
  s.origin = Vec<2>(-1.0, 3.0);
  const auto m = build_mesh(s);
  double sum = 0.0;
  for (double a : m.measure) {
    EXPECT_GT(a, 0.0);
    sum += a;
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
  double dir = 0.0, neu = 0.0;
  for (const auto& f : m.facets) (f.tag == BoundaryTag::Dirichlet ? dir : neu) += f.measure;
  EXPECT_NEAR(dir, 0.5 + 2.0, 1e-12);
  EXPECT_NEAR(neu, 0.5 + 2.0, 1e-12);
}

TEST(PartitionOfUnity, BarycentricGradientsSumToZeroAndLumpedWeightsSum) {
  for (int n : {1, 3, 8}) {
    const auto m = build_mesh(square(n, n + 1));
    for (int e = 0; e < m.num_elements(); ++e)
      EXPECT_LE(m.grad[e].rowwise().sum().norm(), 1e-12 * m.grad[e].norm());
    EXPECT_NEAR(m.lumped.sum(), m.total_measure, 1e-14);
    // Constant nodal field: interpolant is exactly one everywhere.
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(m.num_vertices());
    for (int e = 0; e < m.num_elements(); ++e) {
      EXPECT_NEAR(m.element_mean(one, e), 1.0, 1e-14);
      EXPECT_LE(element_gradient(m, e, one).norm(), 1e-12);
    }
  }
}

TEST(PartitionOfUnity, BasisSumsToOneAtQuadraturePoints) {
  const auto m = build_mesh(square(4, 3));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int e = 0; e < m.num_elements(); ++e) {
    for (int q = 0; q < 5; ++q) {
      double a = u(rng), b = u(rng);
      if (a + b > 1.0) {
        a = 1.0 - a;
        b = 1.0 - b;
      }
      const auto& el = m.elements[e];
      const Vec<2> x = m.vertices[el[0]] + a * (m.vertices[el[1]] - m.vertices[el[0]]) +
                       b * (m.vertices[el[2]] - m.vertices[el[0]]);
      // Basis values from the barycentric gradients: lambda_l(x) = 1/3 + grad_l.(x - c).
      double sum = 0.0;
      for (int l = 0; l < 3; ++l) sum += 1.0 / 3.0 + m.grad[e].col(l).dot(x - m.barycenter(e));
      EXPECT_NEAR(sum, 1.0, 1e-14);
    }
  }
}

TEST(Strain, ZeroField) {
  const auto m = build_mesh(square(2, 2));
  for (const auto& e : strain(m, Eigen::VectorXd::Zero(m.num_dofs()))) EXPECT_EQ(e.norm(), 0.0);
}

TEST(Strain, UniaxialAffineField) {
  const auto m = build_mesh(square(2, 2));
  Mat<2> g;
  g << 1.0, 0.0, 0.0, 0.0;
  for (const auto& e : strain(m, affine_field<2>(m, Vec<2>::Zero(), g)))
    EXPECT_NEAR((e.m - SymMat<2>::diag(1.0, 0.0).m).norm(), 0.0, 1e-14);
}

TEST(Strain, RigidRotationHasNoStrain) {
  const auto m = build_mesh(square(3, 3));
  Mat<2> g;
  g << 0.0, -1.0, 1.0, 0.0;
  for (const auto& e : strain(m, affine_field<2>(m, Vec<2>(0.3, -0.2), g))) EXPECT_LE(e.norm(), 1e-14);
}

TEST(Strain, AffineFieldsGiveExactSymmetricGradient) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto m = build_mesh(square(4, 3));
  for (int t = 0; t < 20; ++t) {
    Mat<2> g;
    g << n(rng), n(rng), n(rng), n(rng);
    const SymMat<2> expect(g);
    for (const auto& e : strain(m, affine_field<2>(m, Vec<2>(n(rng), n(rng)), g)))
      EXPECT_NEAR((e.m - expect.m).norm(), 0.0, 1e-12 * (1.0 + g.norm()));
  }
  const auto m1 = build_mesh(interval(5));
  Mat<1> g1;
  g1 << 2.5;
  for (const auto& e : strain(m1, affine_field<1>(m1, Vec<1>(1.0), g1))) EXPECT_NEAR(e.m(0, 0), 2.5, 1e-13);
}

TEST(Strain, OperatorMatchesDirectEvaluation) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto m = build_mesh(square(2, 3));
  Eigen::VectorXd u(m.num_dofs());
  for (int i = 0; i < u.size(); ++i) u(i) = n(rng);
  for (int e = 0; e < m.num_elements(); ++e) {
    Eigen::Matrix<double, 6, 1> loc;
    for (int a = 0; a < 3; ++a)
      for (int c = 0; c < 2; ++c) loc(2 * a + c) = u(2 * m.elements[e][a] + c);
    const SymVec<2> via = strain_operator(m, e) * loc;
    EXPECT_NEAR((via - to_coords(element_strain(m, e, u))).norm(), 0.0, 1e-12);
  }
}

TEST(MassAndLoad, ZeroLoad) {
  const auto m = build_mesh(square(2, 2));
  const auto ml = assemble_mass_and_load(m, 1.0, Vec<2>(Vec<2>::Zero()), std::vector<Vec<2>>(m.facets.size(), Vec<2>::Zero()));
  EXPECT_EQ(ml.load.norm(), 0.0);
}

TEST(MassAndLoad, OneCellIntervalTotalMass) {
  const auto m = build_mesh(interval(1));
  const auto ml = assemble_mass_and_load(m, 1.0, Vec<1>(Vec<1>::Zero()), std::vector<Vec<1>>(2, Vec<1>::Zero()));
  EXPECT_NEAR(ml.mass.sum(), 1.0, 1e-15);
  EXPECT_NEAR(ml.mass.rowwise().sum()(0), 0.5, 1e-15);
  EXPECT_NEAR(ml.mass(0, 0), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(ml.mass(0, 1), 1.0 / 6.0, 1e-15);
}

TEST(MassAndLoad, MassIsSymmetricPositiveDefinite) {
  const auto m = build_mesh(square(3, 4));
  const Eigen::MatrixXd mm = mass_matrix(m);
  EXPECT_EQ((mm - mm.transpose()).norm(), 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mm);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  EXPECT_NEAR(mm.sum(), m.total_measure, 1e-14);
}

TEST(MassAndLoad, ConstantBodyForceOnFreeNodesOfTwoByTwo) {
  // Free nodes are the six vertices off the left edge; their basis integrals
  // are 1 - 3/12 = 3/4 by hand (the left-edge vertices each touch two of the
  // eight triangles of area 1/8).
  const auto m = build_mesh(square(2, 2));
  const auto ml = assemble_mass_and_load(m, 1.0, Vec<2>(1.0, 0.0), std::vector<Vec<2>>(m.facets.size(), Vec<2>::Zero()));
  double pairing = 0.0;
  for (int i = 0; i < m.num_vertices(); ++i)
    if (!m.dirichlet_vertex[i]) pairing += ml.load(2 * i);
  EXPECT_NEAR(pairing, 0.75, 1e-15);
}

TEST(MassAndLoad, TractionActsOnNeumannFacetsOnly) {
  const auto m = build_mesh(square(2, 2));
  std::vector<Vec<2>> t(m.facets.size(), Vec<2>::Zero());
  for (std::size_t f = 0; f < m.facets.size(); ++f)
    if (m.facets[f].side == Side::Right || m.facets[f].side == Side::Left) t[f] = Vec<2>(2.0, 0.0);
  const auto l = assemble_load(m, Vec<2>(Vec<2>::Zero()), t);
  // Only the right edge (length 1) is Neumann among the two.
  EXPECT_NEAR(l.sum(), 2.0, 1e-14);
}

TEST(ByParts, DiscreteSummationByPartsHolds) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int K : {1, 5, 40}) {
    std::vector<Eigen::VectorXd> v, h;
    for (int k = 0; k <= K; ++k) {
      v.push_back(Eigen::VectorXd::NullaryExpr(7, [&] { return n(rng); }));
      h.push_back(Eigen::VectorXd::NullaryExpr(7, [&] { return n(rng); }));
    }
    const auto [lhs, rhs] = by_parts_sides(v, h, 1.0 / K);
    EXPECT_NEAR(lhs, rhs, 1e-12 * (1.0 + std::abs(lhs)) * K);
  }
}

TEST(Interpolants, CoincideAtNodeTimes) {
  DiscreteTrajectory<1> tr;
  tr.tau = 0.25;
  for (int k = 0; k <= 4; ++k) {
    FieldState<1> s;
    s.z = Eigen::VectorXd::Constant(3, 1.0 - 0.1 * k);
    tr.states.push_back(s);
  }
  auto get = [](const FieldState<1>& s) { return s.z; };
  for (int k = 0; k <= 4; ++k) {
    const double t = k * 0.25;
    EXPECT_EQ(tr.piecewise_constant_right(t, get), tr.states[k].z);
    EXPECT_EQ(tr.piecewise_constant_left(t, get), tr.states[k].z);
    EXPECT_NEAR((tr.piecewise_linear(t, get) - tr.states[k].z).norm(), 0.0, 1e-15);
  }
  EXPECT_EQ(tr.piecewise_constant_right(0.3, get), tr.states[2].z);
  EXPECT_EQ(tr.piecewise_constant_left(0.3, get), tr.states[1].z);
  EXPECT_NEAR(tr.piecewise_linear(0.375, get)(0), 0.85, 1e-15);
}
