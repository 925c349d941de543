#pragma once
/// @file fractional.hpp
/// @brief The nonlocal form a_s(z1, z2) on P1 fields and its dense matrix.
///
/// For P1 fields the gradients are elementwise constant, so
///   a_s(z1, z2) = sum_{E != E'} (g1_E - g1_E').(g2_E - g2_E') K(E, E'),
///   K(E, E') = int_E int_E' |x - y|^{-alpha},  alpha = d + 2(s - 1).
/// Separated pairs use tensorized Gauss quadrature with adaptive
/// subdivision. Pairs sharing a vertex c are reduced with the homogeneity
/// identity for the degree -alpha kernel about (c, c):
///   (n - alpha) K(A, B) = sum_F h_F K(F),
/// F running over the facets of A x B that do not contain (c, c), h_F the
/// distance from c to the facet. The recursion ends in separated pairs.

#include "tvpd/mesh.hpp"

#include <boost/math/special_functions/legendre.hpp>

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvpd {

namespace frac {

using P2 = Eigen::Vector2d;

/// Point, segment or triangle embedded in the plane.
struct Simplex {
  int dim = 0;
  std::array<P2, 3> v{};

  int num_vertices() const { return dim + 1; }

  P2 centroid() const {
    P2 c = P2::Zero();
    for (int i = 0; i <= dim; ++i) c += v[i];
    return c / (dim + 1);
  }

  double radius() const {
    const P2 c = centroid();
    double r = 0.0;
    for (int i = 0; i <= dim; ++i) r = std::max(r, (v[i] - c).norm());
    return r;
  }

  double measure() const {
    if (dim == 0) return 1.0;
    if (dim == 1) return (v[1] - v[0]).norm();
    const P2 a = v[1] - v[0], b = v[2] - v[0];
    return 0.5 * std::abs(a(0) * b(1) - a(1) * b(0));
  }

  /// Facet opposite to vertex i.
  Simplex facet(int i) const {
    Simplex f;
    f.dim = dim - 1;
    int k = 0;
    for (int j = 0; j <= dim; ++j)
      if (j != i) f.v[k++] = v[j];
    return f;
  }

  /// Outward unit normal of facet i inside the affine hull.
  P2 facet_normal(int i) const {
    const Simplex f = facet(i);
    P2 n = f.v[0] - v[i];
    if (f.dim == 1) {
      const P2 t = (f.v[1] - f.v[0]).normalized();
      n -= n.dot(t) * t;
    }
    return n.normalized();
  }

  std::vector<Simplex> children() const {
    std::vector<Simplex> out;
    if (dim == 1) {
      const P2 m = 0.5 * (v[0] + v[1]);
      out.push_back({1, {v[0], m, P2::Zero()}});
      out.push_back({1, {m, v[1], P2::Zero()}});
    } else if (dim == 2) {
      const P2 m01 = 0.5 * (v[0] + v[1]), m12 = 0.5 * (v[1] + v[2]), m02 = 0.5 * (v[0] + v[2]);
      out.push_back({2, {v[0], m01, m02}});
      out.push_back({2, {m01, v[1], m12}});
      out.push_back({2, {m02, m12, v[2]}});
      out.push_back({2, {m12, m02, m01}});
    } else {
      out.push_back(*this);
    }
    return out;
  }
};

struct Rule1D {
  std::vector<double> x, w;  // on [0, 1]
};

inline Rule1D gauss_rule(unsigned n) {
  Rule1D r;
  const std::vector<double> zeros = boost::math::legendre_p_zeros<double>(static_cast<int>(n));
  for (double z : zeros) {
    const double dp = boost::math::legendre_p_prime(static_cast<int>(n), z);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    if (z == 0.0) {
      r.x.push_back(0.5);
      r.w.push_back(0.5 * w);
    } else {
      r.x.push_back(0.5 * (1.0 - z));
      r.w.push_back(0.5 * w);
      r.x.push_back(0.5 * (1.0 + z));
      r.w.push_back(0.5 * w);
    }
  }
  return r;
}

struct PointRule {
  std::vector<P2> x;
  std::vector<double> w;
};

/// Tensor Gauss rule on a simplex; triangles use the collapsed map.
inline PointRule simplex_rule(const Simplex& s, const Rule1D& g) {
  PointRule r;
  if (s.dim == 0) {
    r.x.push_back(s.v[0]);
    r.w.push_back(1.0);
  } else if (s.dim == 1) {
    const double len = s.measure();
    for (std::size_t i = 0; i < g.x.size(); ++i) {
      r.x.push_back(s.v[0] + g.x[i] * (s.v[1] - s.v[0]));
      r.w.push_back(len * g.w[i]);
    }
  } else {
    const double area2 = 2.0 * s.measure();
    for (std::size_t i = 0; i < g.x.size(); ++i)
      for (std::size_t j = 0; j < g.x.size(); ++j) {
        const double u = g.x[i], t = g.x[j];
        r.x.push_back(s.v[0] + u * (s.v[1] - s.v[0]) + u * t * (s.v[2] - s.v[1]));
        r.w.push_back(area2 * u * g.w[i] * g.w[j]);
      }
  }
  return r;
}

/// Kernel integral int_A int_B |x - y|^{-alpha} over simplices.
class KernelIntegrator {
 public:
  explicit KernelIntegrator(double alpha) : alpha_(alpha), near_(gauss_rule(7)), far_(gauss_rule(3)) {}

  double alpha() const { return alpha_; }

  double operator()(const Simplex& a, const Simplex& b) const {
    P2 c;
    if (shared_vertex(a, b, c)) return touching(a, b, c);
    return separated(a, b, 0);
  }

 private:
  static constexpr double kNearRatio = 1.0;
  static constexpr double kFarRatio = 8.0;
  static constexpr int kMaxDepth = 14;

  static double scale(const Simplex& a, const Simplex& b) {
    double s = 0.0;
    for (int i = 0; i <= a.dim; ++i) s = std::max(s, a.v[i].cwiseAbs().maxCoeff());
    for (int i = 0; i <= b.dim; ++i) s = std::max(s, b.v[i].cwiseAbs().maxCoeff());
    return 1.0 + s;
  }

  static bool shared_vertex(const Simplex& a, const Simplex& b, P2& c) {
    const double tol = 1e-12 * scale(a, b);
    for (int i = 0; i <= a.dim; ++i)
      for (int j = 0; j <= b.dim; ++j)
        if ((a.v[i] - b.v[j]).norm() <= tol) {
          c = a.v[i];
          return true;
        }
    return false;
  }

  static bool contains_vertex(const Simplex& s, const P2& c, double tol) {
    for (int i = 0; i <= s.dim; ++i)
      if ((s.v[i] - c).norm() <= tol) return true;
    return false;
  }

  double touching(const Simplex& a, const Simplex& b, const P2& c) const {
    const int n = a.dim + b.dim;
    const double denom = n - alpha_;
    if (!(denom > 0.0))
      throw std::domain_error("kernel integral diverges for touching simplices at this exponent");
    const double tol = 1e-12 * scale(a, b);
    double sum = 0.0;
    for (int i = 0; a.dim > 0 && i <= a.dim; ++i) {
      const Simplex f = a.facet(i);
      if (contains_vertex(f, c, tol)) continue;
      const double h = (f.v[0] - c).dot(a.facet_normal(i));
      sum += h * (*this)(f, b);
    }
    for (int i = 0; b.dim > 0 && i <= b.dim; ++i) {
      const Simplex f = b.facet(i);
      if (contains_vertex(f, c, tol)) continue;
      const double h = (f.v[0] - c).dot(b.facet_normal(i));
      sum += h * (*this)(a, f);
    }
    return sum / denom;
  }

  double separated(const Simplex& a, const Simplex& b, int depth) const {
    const double ra = a.radius(), rb = b.radius();
    const double size = 2.0 * std::max(ra, rb);
    const double gap = (a.centroid() - b.centroid()).norm() - ra - rb;
    if (size == 0.0) return std::pow((a.v[0] - b.v[0]).norm(), -alpha_);
    if (gap >= kFarRatio * size) return gauss(a, b, far_);
    if (gap >= kNearRatio * size || depth >= kMaxDepth) return gauss(a, b, near_);
    double sum = 0.0;
    if (ra >= rb) {
      for (const auto& ch : a.children()) sum += separated(ch, b, depth + 1);
    } else {
      for (const auto& ch : b.children()) sum += separated(a, ch, depth + 1);
    }
    return sum;
  }

  double gauss(const Simplex& a, const Simplex& b, const Rule1D& g) const {
    const PointRule ra = simplex_rule(a, g), rb = simplex_rule(b, g);
    double sum = 0.0;
    for (std::size_t i = 0; i < ra.x.size(); ++i) {
      double inner = 0.0;
      for (std::size_t j = 0; j < rb.x.size(); ++j)
        inner += rb.w[j] * std::pow((ra.x[i] - rb.x[j]).squaredNorm(), -0.5 * alpha_);
      sum += ra.w[i] * inner;
    }
    return sum;
  }

  double alpha_;
  Rule1D near_, far_;
};

template <int D>
Simplex element_simplex(const Mesh<D>& m, int e) {
  Simplex s;
  s.dim = D;
  for (int a = 0; a <= D; ++a) {
    P2 p = P2::Zero();
    for (int k = 0; k < D; ++k) p(k) = m.vertices[m.elements[e][a]](k);
    s.v[a] = p;
  }
  return s;
}

}  // namespace frac

/// Dense matrix of a_s over the nodal damage degrees of freedom.
struct FractionalForm {
  double s = 0.0;
  double alpha = 0.0;
  Eigen::MatrixXd matrix;

  int size() const { return static_cast<int>(matrix.rows()); }

  double operator()(const Eigen::VectorXd& z1, const Eigen::VectorXd& z2) const {
    return z1.dot(matrix * z2);
  }
};

/// Admissible exponents: s in (d/2, 3/2). P1 fields have infinite a_s
/// energy for s >= 3/2, because touching-pair weights diverge there.
template <int D>
bool fractional_exponent_ok(double s) {
  return s > 0.5 * D && s < 1.5;
}

/// Kernel weight K(E, E') for two elements of the mesh.
template <int D>
double kernel_weight(const Mesh<D>& m, int e1, int e2, double s) {
  const frac::KernelIntegrator k(D + 2.0 * (s - 1.0));
  return k(frac::element_simplex(m, e1), frac::element_simplex(m, e2));
}

template <int D>
FractionalForm assemble_as(const Mesh<D>& m, double s) {
  if (!fractional_exponent_ok<D>(s))
    throw std::invalid_argument("fractional exponent s = " + std::to_string(s) +
                                " outside (d/2, 3/2)");
  FractionalForm form;
  form.s = s;
  form.alpha = D + 2.0 * (s - 1.0);
  const int nv = m.num_vertices();
  const int ne = m.num_elements();
  form.matrix = Eigen::MatrixXd::Zero(nv, nv);
  const frac::KernelIntegrator kernel(form.alpha);

  std::vector<frac::Simplex> simplex(ne);
  for (int e = 0; e < ne; ++e) simplex[e] = frac::element_simplex(m, e);

  // Structured meshes repeat pair geometries under translation.
  std::map<std::vector<long long>, double> cache;
  const double q = 1e-9 * (1.0 + m.spec.extent.maxCoeff());
  auto key_of = [&](int e1, int e2) {
    std::vector<long long> key;
    const frac::P2 o = simplex[e1].v[0];
    for (const auto* sp : {&simplex[e1], &simplex[e2]})
      for (int a = 0; a <= D; ++a)
        for (int k = 0; k < 2; ++k) key.push_back(std::llround((sp->v[a](k) - o(k)) / q));
    return key;
  };

  for (int e1 = 0; e1 < ne; ++e1) {
    for (int e2 = e1 + 1; e2 < ne; ++e2) {
      const auto key = key_of(e1, e2);
      auto it = cache.find(key);
      double kw;
      if (it != cache.end()) {
        kw = it->second;
      } else {
        kw = kernel(simplex[e1], simplex[e2]);
        cache.emplace(key, kw);
      }
      // Both orderings (E, E') and (E', E) enter the double integral.
      const double w = 2.0 * kw;
      // Difference operator g_E1 - g_E2 on the union of the vertices.
      std::array<int, 2 * (D + 1)> idx{};
      Eigen::Matrix<double, D, 2 * (D + 1)> c = Eigen::Matrix<double, D, 2 * (D + 1)>::Zero();
      int n = 0;
      auto add = [&](int v, const Vec<D>& g) {
        for (int k = 0; k < n; ++k)
          if (idx[k] == v) {
            c.col(k) += g;
            return;
          }
        idx[n] = v;
        c.col(n) = g;
        ++n;
      };
      for (int a = 0; a <= D; ++a) add(m.elements[e1][a], m.grad[e1].col(a));
      for (int a = 0; a <= D; ++a) add(m.elements[e2][a], -m.grad[e2].col(a));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) form.matrix(idx[i], idx[j]) += w * c.col(i).dot(c.col(j));
    }
  }
  form.matrix = 0.5 * (form.matrix + form.matrix.transpose()).eval();
  return form;
}

/// Matrix-vector product <A_s z, .>.
inline Eigen::VectorXd apply_As(const FractionalForm& form, const Eigen::VectorXd& z) {
  if (z.size() != form.size()) throw std::invalid_argument("apply_As: size mismatch");
  return form.matrix * z;
}

inline void write_matrix_csv(const FractionalForm& form, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.precision(17);
  for (int i = 0; i < form.size(); ++i) {
    for (int j = 0; j < form.size(); ++j) out << (j ? "," : "") << form.matrix(i, j);
    out << '\n';
  }
}

}  // namespace tvpd
