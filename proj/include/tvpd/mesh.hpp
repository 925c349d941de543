#pragma once
/// @file mesh.hpp
/// @brief Structured simplicial meshes of an interval or a rectangle and the
/// P1 / elementwise-constant finite element plumbing built on them.

#include "tvpd/tensors.hpp"

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvpd {

enum class Side { Left, Right, Bottom, Top };
enum class BoundaryTag { Dirichlet, Neumann };

inline const char* side_name(Side s) {
  switch (s) {
    case Side::Left: return "left";
    case Side::Right: return "right";
    case Side::Bottom: return "bottom";
    case Side::Top: return "top";
  }
  return "?";
}

inline Side parse_side(const std::string& s) {
  if (s == "left") return Side::Left;
  if (s == "right") return Side::Right;
  if (s == "bottom") return Side::Bottom;
  if (s == "top") return Side::Top;
  throw std::invalid_argument("unknown boundary side '" + s + "'");
}

/// Extents, subdivision counts and the boundary tagging rule. Sides listed
/// in `dirichlet` are tagged Dirichlet, all other boundary facets Neumann.
template <int D>
struct DomainSpec {
  Vec<D> origin = Vec<D>::Zero();
  Vec<D> extent = Vec<D>::Ones();
  std::array<int, D> cells{};
  std::vector<Side> dirichlet;
};

template <int D>
struct Facet {
  std::array<int, D> v{};
  double measure = 0.0;
  Vec<D> midpoint = Vec<D>::Zero();
  Side side = Side::Left;
  BoundaryTag tag = BoundaryTag::Neumann;
};

/// Conforming simplicial mesh. Intervals are split into segments, rectangle
/// cells into two right triangles with alternating diagonals.
template <int D>
struct Mesh {
  static constexpr int kNodes = D + 1;
  using Element = std::array<int, kNodes>;
  using GradMatrix = Eigen::Matrix<double, D, kNodes>;

  DomainSpec<D> spec;
  std::vector<Vec<D>> vertices;
  std::vector<Element> elements;
  std::vector<double> measure;
  /// Columns hold the gradients of the barycentric coordinates.
  std::vector<GradMatrix> grad;
  std::vector<Facet<D>> facets;
  std::vector<char> dirichlet_vertex;
  /// Integral of each nodal basis function.
  Eigen::VectorXd lumped;
  double total_measure = 0.0;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_elements() const { return static_cast<int>(elements.size()); }
  int num_dofs() const { return D * num_vertices(); }

  Vec<D> barycenter(int e) const {
    Vec<D> c = Vec<D>::Zero();
    for (int i : elements[e]) c += vertices[i];
    return c / kNodes;
  }

  /// Mean of a nodal scalar over the vertices of element e (its value at
  /// the barycenter).
  double element_mean(const Eigen::VectorXd& f, int e) const {
    double s = 0.0;
    for (int i : elements[e]) s += f(i);
    return s / kNodes;
  }

  /// Element stiffness matrix of the P1 Laplacian, |E| G^T G.
  Eigen::Matrix<double, kNodes, kNodes> stiffness(int e) const {
    return measure[e] * grad[e].transpose() * grad[e];
  }
};

namespace detail {

template <int D>
bool on_side(const DomainSpec<D>& s, const Vec<D>& x, Side side) {
  const double tol = 1e-12 * (1.0 + s.extent.maxCoeff());
  switch (side) {
    case Side::Left: return std::abs(x(0) - s.origin(0)) < tol;
    case Side::Right: return std::abs(x(0) - s.origin(0) - s.extent(0)) < tol;
    case Side::Bottom:
      if constexpr (D == 2) return std::abs(x(1) - s.origin(1)) < tol;
      return false;
    case Side::Top:
      if constexpr (D == 2) return std::abs(x(1) - s.origin(1) - s.extent(1)) < tol;
      return false;
  }
  return false;
}

template <int D>
void finish_geometry(Mesh<D>& m) {
  const int ne = m.num_elements();
  m.measure.resize(ne);
  m.grad.resize(ne);
  m.lumped = Eigen::VectorXd::Zero(m.num_vertices());
  m.total_measure = 0.0;
  for (int e = 0; e < ne; ++e) {
    const auto& el = m.elements[e];
    Mat<D> jac;
    for (int k = 0; k < D; ++k) jac.col(k) = m.vertices[el[k + 1]] - m.vertices[el[0]];
    const double det = jac.determinant();
    if (!(det > 0.0)) throw std::logic_error("mesh element with non-positive orientation");
    m.measure[e] = (D == 1) ? det : 0.5 * det;
    // Barycentric gradients: rows of jac^{-1} for nodes 1..D, node 0 closes the sum.
    const Mat<D> inv = jac.inverse();
    typename Mesh<D>::GradMatrix g;
    for (int k = 0; k < D; ++k) g.col(k + 1) = inv.row(k).transpose();
    g.col(0) = -inv.colwise().sum().transpose();
    m.grad[e] = g;
    for (int i : el) m.lumped(i) += m.measure[e] / (D + 1);
    m.total_measure += m.measure[e];
  }
}

}  // namespace detail

/// Builds the structured mesh. Throws std::invalid_argument on non-positive
/// extents, zero subdivisions or an empty Dirichlet part.
template <int D>
Mesh<D> build_mesh(const DomainSpec<D>& spec) {
  for (int k = 0; k < D; ++k) {
    if (!(spec.extent(k) > 0.0)) throw std::invalid_argument("domain extent must be positive");
    if (spec.cells[k] < 1) throw std::invalid_argument("subdivision count must be at least 1");
  }
  for (Side s : spec.dirichlet) {
    if (D == 1 && (s == Side::Bottom || s == Side::Top))
      throw std::invalid_argument("side 'bottom'/'top' does not exist for d = 1");
  }
  if (spec.dirichlet.empty()) throw std::invalid_argument("Dirichlet boundary part is empty");

  Mesh<D> m;
  m.spec = spec;
  if constexpr (D == 1) {
    const int n = spec.cells[0];
    const double h = spec.extent(0) / n;
    for (int i = 0; i <= n; ++i) m.vertices.push_back(Vec<1>(spec.origin(0) + i * h));
    for (int i = 0; i < n; ++i) m.elements.push_back({i, i + 1});
    m.facets.push_back({{0}, 1.0, m.vertices.front(), Side::Left, BoundaryTag::Neumann});
    m.facets.push_back({{n}, 1.0, m.vertices.back(), Side::Right, BoundaryTag::Neumann});
  } else {
    const int nx = spec.cells[0], ny = spec.cells[1];
    const double hx = spec.extent(0) / nx, hy = spec.extent(1) / ny;
    auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i)
        m.vertices.push_back(Vec<2>(spec.origin(0) + i * hx, spec.origin(1) + j * hy));
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
        if ((i + j) % 2 == 0) {
          m.elements.push_back({a, b, c});
          m.elements.push_back({a, c, d});
        } else {
          m.elements.push_back({a, b, d});
          m.elements.push_back({b, c, d});
        }
      }
    }
    auto add = [&](int p, int q, Side s) {
      Facet<2> f;
      f.v = {p, q};
      f.measure = (m.vertices[q] - m.vertices[p]).norm();
      f.midpoint = 0.5 * (m.vertices[p] + m.vertices[q]);
      f.side = s;
      m.facets.push_back(f);
    };
    for (int i = 0; i < nx; ++i) add(id(i, 0), id(i + 1, 0), Side::Bottom);
    for (int j = 0; j < ny; ++j) add(id(nx, j), id(nx, j + 1), Side::Right);
    for (int i = 0; i < nx; ++i) add(id(i + 1, ny), id(i, ny), Side::Top);
    for (int j = 0; j < ny; ++j) add(id(0, j + 1), id(0, j), Side::Left);
  }
  detail::finish_geometry(m);

  m.dirichlet_vertex.assign(m.num_vertices(), 0);
  for (auto& f : m.facets) {
    for (Side s : spec.dirichlet) {
      if (f.side == s) f.tag = BoundaryTag::Dirichlet;
    }
    if (f.tag == BoundaryTag::Dirichlet)
      for (int v : f.v) m.dirichlet_vertex[v] = 1;
  }
  return m;
}

/// Symmetric gradient of the P1 interpolant on element e. `u` is interleaved
/// (vertex-major, d components per vertex).
template <int D>
SymMat<D> element_strain(const Mesh<D>& m, int e, const Eigen::VectorXd& u) {
  Mat<D> g = Mat<D>::Zero();
  const auto& el = m.elements[e];
  for (int a = 0; a < D + 1; ++a)
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) g(i, j) += u(D * el[a] + i) * m.grad[e](j, a);
  return SymMat<D>(g);
}

template <int D>
std::vector<SymMat<D>> strain(const Mesh<D>& m, const Eigen::VectorXd& u) {
  if (u.size() != m.num_dofs()) throw std::invalid_argument("strain: field size mismatch");
  std::vector<SymMat<D>> out(m.num_elements());
  for (int e = 0; e < m.num_elements(); ++e) out[e] = element_strain(m, e, u);
  return out;
}

/// Gradient of a nodal scalar on element e.
template <int D>
Vec<D> element_gradient(const Mesh<D>& m, int e, const Eigen::VectorXd& f) {
  Vec<D> g = Vec<D>::Zero();
  const auto& el = m.elements[e];
  for (int a = 0; a < D + 1; ++a) g += f(el[a]) * m.grad[e].col(a);
  return g;
}

/// Matrix B_e mapping the element's local displacement dofs (d per vertex,
/// vertex-major) to orthonormal strain coordinates.
template <int D>
Eigen::Matrix<double, kSym<D>, D*(D + 1)> strain_operator(const Mesh<D>& m, int e) {
  Eigen::Matrix<double, kSym<D>, D*(D + 1)> b;
  for (int a = 0; a < D + 1; ++a) {
    for (int i = 0; i < D; ++i) {
      Mat<D> g = Mat<D>::Zero();
      g.row(i) = m.grad[e].col(a).transpose();
      b.col(D * a + i) = to_coords(SymMat<D>(g));
    }
  }
  return b;
}

/// Consistent P1 mass matrix for scalar fields (unit density).
template <int D>
Eigen::MatrixXd mass_matrix(const Mesh<D>& m) {
  const int n = m.num_vertices();
  Eigen::MatrixXd mm = Eigen::MatrixXd::Zero(n, n);
  for (int e = 0; e < m.num_elements(); ++e) {
    const double c = m.measure[e] / ((D + 1) * (D + 2));
    for (int a : m.elements[e])
      for (int b : m.elements[e]) mm(a, b) += (a == b ? 2.0 : 1.0) * c;
  }
  return mm;
}

/// Scalar stiffness matrix with elementwise weights.
template <int D>
Eigen::MatrixXd stiffness_matrix(const Mesh<D>& m, const std::vector<double>& weight) {
  const int n = m.num_vertices();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  for (int e = 0; e < m.num_elements(); ++e) {
    const auto ke = m.stiffness(e);
    const auto& el = m.elements[e];
    for (int a = 0; a < D + 1; ++a)
      for (int b = 0; b < D + 1; ++b) k(el[a], el[b]) += weight[e] * ke(a, b);
  }
  return k;
}

/// Applies a scalar matrix componentwise to an interleaved vector field.
template <int D>
Eigen::VectorXd apply_componentwise(const Eigen::MatrixXd& a, const Eigen::VectorXd& u) {
  const int n = static_cast<int>(a.rows());
  Eigen::VectorXd out(u.size());
  for (int c = 0; c < D; ++c) {
    Eigen::VectorXd uc(n);
    for (int i = 0; i < n; ++i) uc(i) = u(D * i + c);
    const Eigen::VectorXd r = a * uc;
    for (int i = 0; i < n; ++i) out(D * i + c) = r(i);
  }
  return out;
}

/// Load functional <L, v> = int F.v + int_{Gamma_Neu} f.v on interleaved dofs.
/// F is constant; `traction` gives the value on each Neumann facet.
template <int D>
Eigen::VectorXd assemble_load(const Mesh<D>& m, const Vec<D>& body_force,
                              const std::vector<Vec<D>>& traction) {
  Eigen::VectorXd l = Eigen::VectorXd::Zero(m.num_dofs());
  for (int e = 0; e < m.num_elements(); ++e)
    for (int a : m.elements[e])
      for (int c = 0; c < D; ++c) l(D * a + c) += body_force(c) * m.measure[e] / (D + 1);
  for (std::size_t f = 0; f < m.facets.size(); ++f) {
    const auto& fc = m.facets[f];
    if (fc.tag != BoundaryTag::Neumann) continue;
    for (int v : fc.v)
      for (int c = 0; c < D; ++c) l(D * v + c) += traction[f](c) * fc.measure / D;
  }
  return l;
}

/// Mass matrix (scaled by density) together with the load functional.
struct MassAndLoad {
  Eigen::MatrixXd mass;
  Eigen::VectorXd load;
};

template <int D>
MassAndLoad assemble_mass_and_load(const Mesh<D>& m, double rho, const Vec<D>& body_force,
                                   const std::vector<Vec<D>>& traction) {
  return {rho * mass_matrix(m), assemble_load(m, body_force, traction)};
}

/// Nodal distribution of a boundary scalar flux g, constant per facet,
/// integrated with the midpoint rule over all boundary facets.
template <int D>
Eigen::VectorXd assemble_boundary_flux(const Mesh<D>& m, const std::vector<double>& g) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m.num_vertices());
  for (std::size_t f = 0; f < m.facets.size(); ++f)
    for (int v : m.facets[f].v) b(v) += g[f] * m.facets[f].measure / D;
  return b;
}

}  // namespace tvpd
