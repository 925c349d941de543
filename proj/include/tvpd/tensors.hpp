#pragma once
/// @file tensors.hpp
/// @brief Symmetric and deviatoric matrices in dimension 1 or 2, plus
/// isotropic fourth-order actions.

#include <Eigen/Dense>

#include <cmath>

namespace tvpd {

template <int D>
using Mat = Eigen::Matrix<double, D, D>;

template <int D>
using Vec = Eigen::Matrix<double, D, 1>;

/// Number of independent components of a symmetric d x d matrix.
template <int D>
inline constexpr int kSym = D * (D + 1) / 2;

/// Number of independent components of a trace-free symmetric matrix.
template <int D>
inline constexpr int kDev = kSym<D> - 1;

template <int D>
using SymVec = Eigen::Matrix<double, kSym<D>, 1>;

template <int D>
using DevVec = Eigen::Matrix<double, kDev<D>, 1>;

/// Symmetric d x d matrix stored densely.
template <int D>
struct SymMat {
  static_assert(D == 1 || D == 2, "only d = 1 and d = 2 are supported");

  Mat<D> m = Mat<D>::Zero();

  SymMat() = default;
  /// Symmetrizes the argument.
  explicit SymMat(const Mat<D>& a) : m(0.5 * (a + a.transpose())) {}

  static SymMat identity() { return SymMat(Mat<D>::Identity()); }
  static SymMat diag(double a, double b = 0.0) {
    SymMat s;
    s.m(0, 0) = a;
    if constexpr (D == 2) s.m(1, 1) = b;
    return s;
  }

  double operator()(int i, int j) const { return m(i, j); }
  double trace() const { return m.trace(); }
  double norm() const { return m.norm(); }

  SymMat& operator+=(const SymMat& o) { m += o.m; return *this; }
  SymMat& operator-=(const SymMat& o) { m -= o.m; return *this; }
  SymMat& operator*=(double a) { m *= a; return *this; }
};

/// Symmetric trace-free d x d matrix. Construct through deviatoric_part().
template <int D>
struct DevMat {
  Mat<D> m = Mat<D>::Zero();

  double operator()(int i, int j) const { return m(i, j); }
  double norm() const { return m.norm(); }
  SymMat<D> sym() const { SymMat<D> s; s.m = m; return s; }

  DevMat& operator+=(const DevMat& o) { m += o.m; return *this; }
  DevMat& operator-=(const DevMat& o) { m -= o.m; return *this; }
  DevMat& operator*=(double a) { m *= a; return *this; }
};

template <int D> SymMat<D> operator+(SymMat<D> a, const SymMat<D>& b) { return a += b; }
template <int D> SymMat<D> operator-(SymMat<D> a, const SymMat<D>& b) { return a -= b; }
template <int D> SymMat<D> operator*(double s, SymMat<D> a) { return a *= s; }
template <int D> DevMat<D> operator+(DevMat<D> a, const DevMat<D>& b) { return a += b; }
template <int D> DevMat<D> operator-(DevMat<D> a, const DevMat<D>& b) { return a -= b; }
template <int D> DevMat<D> operator*(double s, DevMat<D> a) { return a *= s; }

/// A - (tr A / d) I. The diagonal of the result is adjusted so that its
/// trace is exactly zero in floating point.
template <int D>
DevMat<D> deviatoric_part(const SymMat<D>& a) {
  DevMat<D> r;
  r.m = a.m - (a.trace() / D) * Mat<D>::Identity();
  if constexpr (D == 1) {
    r.m(0, 0) = 0.0;
  } else {
    const double half = 0.5 * (r.m(0, 0) - r.m(1, 1));
    r.m(0, 0) = half;
    r.m(1, 1) = -half;
  }
  return r;
}

/// Frobenius product sum_ij A_ij B_ij.
template <int D>
double frobenius(const SymMat<D>& a, const SymMat<D>& b) {
  return (a.m.array() * b.m.array()).sum();
}

template <int D>
double frobenius(const DevMat<D>& a, const DevMat<D>& b) {
  return (a.m.array() * b.m.array()).sum();
}

template <int D>
double frobenius(const SymMat<D>& a, const DevMat<D>& b) {
  return (a.m.array() * b.m.array()).sum();
}

// Orthonormal coordinates with respect to the Frobenius product. The
// deviatoric components come first, the spherical one last:
//   d = 2: ((a11 - a22)/sqrt2, sqrt2 a12, (a11 + a22)/sqrt2)
//   d = 1: (a11)

template <int D>
SymVec<D> to_coords(const SymMat<D>& a) {
  SymVec<D> c;
  if constexpr (D == 1) {
    c(0) = a.m(0, 0);
  } else {
    c(0) = (a.m(0, 0) - a.m(1, 1)) * M_SQRT1_2;
    c(1) = a.m(0, 1) * M_SQRT2;
    c(2) = (a.m(0, 0) + a.m(1, 1)) * M_SQRT1_2;
  }
  return c;
}

template <int D>
SymMat<D> sym_from_coords(const SymVec<D>& c) {
  SymMat<D> a;
  if constexpr (D == 1) {
    a.m(0, 0) = c(0);
  } else {
    a.m(0, 0) = (c(2) + c(0)) * M_SQRT1_2;
    a.m(1, 1) = (c(2) - c(0)) * M_SQRT1_2;
    a.m(0, 1) = a.m(1, 0) = c(1) * M_SQRT1_2;
  }
  return a;
}

template <int D>
DevVec<D> to_coords(const DevMat<D>& a) {
  DevVec<D> c;
  if constexpr (D == 2) {
    c(0) = (a.m(0, 0) - a.m(1, 1)) * M_SQRT1_2;
    c(1) = a.m(0, 1) * M_SQRT2;
  }
  return c;
}

template <int D>
DevMat<D> dev_from_coords(const DevVec<D>& c) {
  DevMat<D> a;
  if constexpr (D == 2) {
    a.m(0, 0) = c(0) * M_SQRT1_2;
    a.m(1, 1) = -a.m(0, 0);
    a.m(0, 1) = a.m(1, 0) = c(1) * M_SQRT1_2;
  }
  return a;
}

/// Embeds deviatoric coordinates into symmetric coordinates.
template <int D>
SymVec<D> embed(const DevVec<D>& c) {
  SymVec<D> r = SymVec<D>::Zero();
  r.template head<kDev<D>>() = c;
  return r;
}

/// Isotropic fourth-order tensor A -> 2 mu A + lambda tr(A) I.
struct Isotropic {
  double lambda = 0.0;
  double mu = 0.0;

  template <int D>
  SymMat<D> apply(const SymMat<D>& a) const {
    SymMat<D> r;
    r.m = 2.0 * mu * a.m + lambda * a.trace() * Mat<D>::Identity();
    return r;
  }

  /// Eigenvalue on trace-free matrices.
  double deviatoric_modulus() const { return 2.0 * mu; }
  /// Eigenvalue on multiples of the identity.
  double spherical_modulus(int d) const { return 2.0 * mu + d * lambda; }
  double min_eigenvalue(int d) const {
    return d == 1 ? spherical_modulus(1) : std::min(deviatoric_modulus(), spherical_modulus(d));
  }
  double max_eigenvalue(int d) const {
    return d == 1 ? spherical_modulus(1) : std::max(deviatoric_modulus(), spherical_modulus(d));
  }

  /// Matrix of the action in orthonormal coordinates.
  template <int D>
  Eigen::Matrix<double, kSym<D>, kSym<D>> coords_matrix() const {
    Eigen::Matrix<double, kSym<D>, kSym<D>> c =
        Eigen::Matrix<double, kSym<D>, kSym<D>>::Zero();
    for (int i = 0; i < kDev<D>; ++i) c(i, i) = deviatoric_modulus();
    c(kSym<D> - 1, kSym<D> - 1) = spherical_modulus(D);
    return c;
  }
};

}  // namespace tvpd
