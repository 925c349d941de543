#pragma once
/// @file constitutive.hpp
/// @brief Material laws: damage-modulated elasticity and viscosity, thermal
/// expansion, damage potential, yield radius and return map, conductivity.

#include "tvpd/tensors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvpd {

/// Homogeneous isotropic material. The x-dependence allowed by the model is
/// not used.
struct MaterialModel {
  Isotropic C0{1.0, 1.0};
  Isotropic D0{0.1, 0.1};
  double delta_C = 0.1;
  double delta_D = 0.1;
  /// Thermal expansion matrix; the leading d x d block is used.
  Eigen::Matrix2d expansion = Eigen::Matrix2d::Zero();

  double w0 = 1e-4;
  double q = 0.0;  ///< <= 0 selects the default 2d + 1
  double w1 = 1.0;
  double lambda_W = 0.0;

  double c_r = 0.5;
  double C_R = 2.0;
  bool constant_yield = false;
  double sigma_y_const = 1.0;

  double kappa_c0 = 1.0;
  double kappa_mu = 1.5;

  double rho = 1.0;
  double nu = 0.1;
  double gamma = 4.5;
  bool gamma_terms = true;
  double s = 1.25;

  double q_for(int d) const { return q > 0.0 ? q : 2.0 * d + 1.0; }
};

// Damage modulation g(z) = delta + z^2.
inline double g_C(const MaterialModel& m, double z) { return m.delta_C + z * z; }
inline double dg_C(const MaterialModel&, double z) { return 2.0 * z; }
inline double d2g_C(const MaterialModel&, double) { return 2.0; }
inline double g_D(const MaterialModel& m, double z) { return m.delta_D + z * z; }

template <int D>
SymMat<D> elasticity_apply(const MaterialModel& m, double z, const SymMat<D>& a) {
  return g_C(m, z) * m.C0.apply(a);
}

template <int D>
SymMat<D> viscosity_apply(const MaterialModel& m, double z, const SymMat<D>& a) {
  return g_D(m, z) * m.D0.apply(a);
}

template <int D>
SymMat<D> expansion_matrix(const MaterialModel& m) {
  return SymMat<D>(Mat<D>(m.expansion.topLeftCorner<D, D>()));
}

struct DamagePotential {
  double W, dW, beta, dbeta, d2beta, lambda_W;
};

/// W(z) = beta(z) - (lambda_W / 2) z^2 with beta(z) = w0 z^-q + w1 (1 - z)^2.
inline DamagePotential damage_potential(const MaterialModel& m, int d, double z) {
  if (!(z > 0.0)) throw std::domain_error("damage potential evaluated at z <= 0");
  const double q = m.q_for(d);
  const double zq = std::pow(z, -q);
  DamagePotential p;
  p.beta = m.w0 * zq + m.w1 * (1.0 - z) * (1.0 - z);
  p.dbeta = -q * m.w0 * zq / z - 2.0 * m.w1 * (1.0 - z);
  p.d2beta = q * (q + 1.0) * m.w0 * zq / (z * z) + 2.0 * m.w1;
  p.lambda_W = m.lambda_W;
  p.W = p.beta - 0.5 * m.lambda_W * z * z;
  p.dW = p.dbeta - m.lambda_W * z;
  return p;
}

/// sigma_y(z, theta) = c_r + (C_R - c_r) clamp(z, 0, 1) / (1 + theta), or a
/// constant when the yield set is state independent.
inline double yield_radius(const MaterialModel& m, double z, double theta) {
  if (m.constant_yield) return m.sigma_y_const;
  const double zc = std::clamp(z, 0.0, 1.0);
  return m.c_r + (m.C_R - m.c_r) * zc / (1.0 + std::max(theta, 0.0));
}

inline double truncate(double theta, double M) { return std::clamp(theta, -M, M); }

inline double kappa(const MaterialModel& m, double theta) {
  return m.kappa_c0 * (1.0 + std::pow(std::abs(theta), m.kappa_mu));
}

inline double kappa_M(const MaterialModel& m, double theta, double M) {
  return kappa(m, truncate(theta, M));
}

/// Derivative of kappa_M with respect to theta.
inline double dkappa_M(const MaterialModel& m, double theta, double M) {
  if (std::abs(theta) >= M) return 0.0;
  const double a = std::abs(theta);
  if (a == 0.0) return 0.0;
  return m.kappa_c0 * m.kappa_mu * std::pow(a, m.kappa_mu - 1.0) * (theta > 0 ? 1.0 : -1.0);
}

// ---------------------------------------------------------------------------
// Return map

/// Value, gradient and Hessian of x -> |x|^gamma / gamma.
template <int N>
struct PowerTerm {
  using V = Eigen::Matrix<double, N, 1>;
  using M = Eigen::Matrix<double, N, N>;
  static double value(const V& x, double g) { return std::pow(x.norm(), g) / g; }
  static V grad(const V& x, double g) {
    const double r = x.norm();
    return r == 0.0 ? V(V::Zero()) : V(std::pow(r, g - 2.0) * x);
  }
  static M hess(const V& x, double g) {
    const double r = x.norm();
    if (r == 0.0) return M::Zero();
    return std::pow(r, g - 2.0) * M::Identity() + (g - 2.0) * std::pow(r, g - 4.0) * x * x.transpose();
  }
};

template <int N>
struct SmoothEval {
  double value = 0.0;
  Eigen::Matrix<double, N, 1> grad;
  Eigen::Matrix<double, N, N> hess;
};

template <int N>
struct BallProxResult {
  Eigen::Matrix<double, N, 1> q;
  /// Selection in radius * subdifferential of |.| at q - center.
  Eigen::Matrix<double, N, 1> zeta;
  bool yielded = false;
  int iterations = 0;
};

/// Minimizes h(q) + radius |q - center| for a smooth strongly convex h,
/// given as a callable returning SmoothEval<N>. zeta = -grad h(q) in the
/// elastic case and radius * (q - center) / |q - center| otherwise.
template <int N, class Smooth>
BallProxResult<N> solve_ball_prox(const Smooth& h, const Eigen::Matrix<double, N, 1>& center,
                                  double radius, int max_iter = 100) {
  using V = Eigen::Matrix<double, N, 1>;
  using M = Eigen::Matrix<double, N, N>;
  BallProxResult<N> res;
  res.q = center;
  if constexpr (N == 0) {
    res.zeta = V();
    return res;
  } else {
    const SmoothEval<N> h0 = h(center);
    const double g0 = h0.grad.norm();
    if (g0 <= radius) {
      res.zeta = -h0.grad;
      return res;
    }
    res.yielded = true;
    auto objective = [&](const V& x) { return h(x).value + radius * (x - center).norm(); };

    // Start from the minimizer of the quadratic model along -grad h.
    const V dir = -h0.grad / g0;
    const double curv = std::max(dir.dot(h0.hess * dir), 1e-300);
    double t = (g0 - radius) / curv;
    V x = center + t * dir;
    double fx = objective(x);
    const double f0 = h0.value;
    for (int k = 0; k < 200 && !(fx < f0); ++k) {
      t *= 0.5;
      x = center + t * dir;
      fx = objective(x);
    }

    const double tol = 1e-13 * (1.0 + g0 + radius);
    for (int it = 0; it < max_iter; ++it) {
      const SmoothEval<N> e = h(x);
      const V delta = x - center;
      const double r = delta.norm();
      const V n = delta / r;
      const V f = e.grad + radius * n;
      res.iterations = it;
      if (f.norm() <= tol) {
        res.q = x;
        res.zeta = radius * n;
        return res;
      }
      const M jac = e.hess + (radius / r) * (M::Identity() - n * n.transpose());
      const V step = -jac.ldlt().solve(f);
      // Correction at the rounding level of x: the residual cannot improve.
      if (step.norm() <= 1e-15 * (1.0 + x.norm())) {
        res.q = x;
        res.zeta = radius * n;
        return res;
      }
      const double slope = f.dot(step);
      double a = 1.0;
      V xn = x + step;
      double fn = objective(xn);
      int ls = 0;
      // A decrease below the rounding level of the objective is not tested.
      const bool flat = -slope <= 1e-12 * (1.0 + std::abs(fx));
      while (!flat && (fn > fx + 1e-4 * a * slope || (xn - center).norm() == 0.0) && ls < 60) {
        a *= 0.5;
        xn = x + a * step;
        fn = objective(xn);
        ++ls;
      }
      if (ls == 60) {
        // Objective flat to rounding: accept the full Newton step.
        xn = x + step;
        fn = objective(xn);
      }
      x = xn;
      fx = fn;
    }
    throw std::runtime_error("return map: Newton did not converge in " + std::to_string(max_iter) +
                             " iterations");
  }
}

template <int D>
struct ReturnMapResult {
  DevMat<D> p;
  DevMat<D> zeta;
  bool yielded = false;
  int iterations = 0;
};

/// Solves zeta + (p - p_prev)/tau + tau |p|^{gamma-2} p = sigma_D with
/// zeta in sigma_y(z, theta_prev) * d|p - p_prev| for a fixed trial stress.
/// This is the minimizer of
///   sigma_y |q - p_prev| + |q - p_prev|^2 / (2 tau) + (tau/gamma) |q|^gamma
///   - sigma_D : (q - p_prev).
template <int D>
ReturnMapResult<D> plastic_return_map(const MaterialModel& m, const DevMat<D>& sigma_trial,
                                      const DevMat<D>& p_prev, double z, double theta_prev,
                                      double tau) {
  constexpr int N = kDev<D>;
  using V = Eigen::Matrix<double, N, 1>;
  const V sig = to_coords(sigma_trial);
  const V p1 = to_coords(p_prev);
  const double gam = m.gamma;
  const double wg = m.gamma_terms ? tau : 0.0;
  auto h = [&](const V& x) {
    SmoothEval<N> e;
    const V d = x - p1;
    e.value = d.squaredNorm() / (2.0 * tau) + wg * PowerTerm<N>::value(x, gam) - sig.dot(d);
    e.grad = d / tau + wg * PowerTerm<N>::grad(x, gam) - sig;
    e.hess = Eigen::Matrix<double, N, N>::Identity() / tau + wg * PowerTerm<N>::hess(x, gam);
    return e;
  };
  const auto r = solve_ball_prox<N>(h, p1, yield_radius(m, z, theta_prev));
  ReturnMapResult<D> out;
  out.p = dev_from_coords<D>(r.q);
  out.zeta = dev_from_coords<D>(r.zeta);
  out.yielded = r.yielded;
  out.iterations = r.iterations;
  return out;
}

// ---------------------------------------------------------------------------
// Derived constants and validation

/// Constants of the temperature positivity bound.
struct PositivityConstants {
  double C_bar = 0.0;   ///< max over z in [0,1] of the operator norm of C(z)
  double C_D1 = 0.0;    ///< coercivity constant of D(z)
  double E_norm = 0.0;  ///< Frobenius norm of the expansion matrix
  double C_star = 0.0;
  double theta_bar = 0.0;
};

inline PositivityConstants positivity_constants(double C_bar, double E_norm, double C_D1,
                                                double T, double theta_star) {
  PositivityConstants c;
  c.C_bar = C_bar;
  c.C_D1 = C_D1;
  c.E_norm = E_norm;
  c.C_star = C_bar * C_bar * E_norm * E_norm / (2.0 * C_D1);
  c.theta_bar = 1.0 / (c.C_star * T + 1.0 / theta_star);
  return c;
}

template <int D>
PositivityConstants positivity_constants(const MaterialModel& m, double T, double theta_star) {
  const double C_bar = g_C(m, 1.0) * m.C0.max_eigenvalue(D);
  const double C_D1 = m.delta_D * m.D0.min_eigenvalue(D);
  return positivity_constants(C_bar, expansion_matrix<D>(m).norm(), C_D1, T, theta_star);
}

struct MaterialCheck {
  std::string name;
  double value = 0.0;
  bool pass = false;
  std::string note;
};

/// Samples the structural hypotheses on the operating range z in [0, 1.1].
template <int D>
std::vector<MaterialCheck> validate_material(const MaterialModel& m) {
  std::vector<MaterialCheck> out;
  const double zmax = 1.1;
  const int n = 111;

  double cmin = 1e300, cmax = 0.0, dmin = 1e300, dmax = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = zmax * i / (n - 1);
    cmin = std::min(cmin, g_C(m, z) * m.C0.min_eigenvalue(D));
    cmax = std::max(cmax, g_C(m, z) * m.C0.max_eigenvalue(D));
    dmin = std::min(dmin, g_D(m, z) * m.D0.min_eigenvalue(D));
    dmax = std::max(dmax, g_D(m, z) * m.D0.max_eigenvalue(D));
  }
  out.push_back({"elasticity_lower_bound", cmin, cmin > 0.0, ""});
  out.push_back({"elasticity_upper_bound", cmax, std::isfinite(cmax),
                 "sampled on [0, 1.1]; g_C grows without bound outside the operating range"});
  out.push_back({"viscosity_lower_bound", dmin, dmin > 0.0, ""});
  out.push_back({"viscosity_upper_bound", dmax, std::isfinite(dmax), ""});

  const double h = 1e-5;
  SymMat<D> a = SymMat<D>::identity();
  if constexpr (D == 2) a.m(0, 1) = a.m(1, 0) = 0.3;
  auto q = [&](double z) { return frobenius(elasticity_apply<D>(m, z, a), a); };
  const double dq0 = (q(h) - q(-h)) / (2.0 * h);
  out.push_back({"elasticity_derivative_at_zero", dq0, std::abs(dq0) <= 1e-8 * (1.0 + q(0.0)), ""});

  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; j += 5) {
      const double z1 = zmax * i / (n - 1), z2 = zmax * j / (n - 1);
      const double gap = 0.5 * (q(z1) + q(z2)) - q(0.5 * (z1 + z2));
      worst = std::min(worst, gap);
    }
  out.push_back({"elasticity_convexity_midpoint", worst, worst >= -1e-12 * q(zmax), ""});

  double kr_lo = 1e300, kr_hi = 0.0;
  for (int i = 1; i <= 200; ++i) {
    const double th = 0.05 * i;
    const double r = kappa(m, th) / (1.0 + std::pow(th, m.kappa_mu));
    kr_lo = std::min(kr_lo, r);
    kr_hi = std::max(kr_hi, r);
  }
  out.push_back({"kappa_growth_ratio_min", kr_lo, kr_lo > 0.0, ""});
  out.push_back({"kappa_growth_ratio_max", kr_hi, std::isfinite(kr_hi), ""});
  out.push_back({"kappa_exponent", m.kappa_mu, m.kappa_mu > 1.0, ""});

  double split = 0.0;
  for (int i = 1; i <= 100; ++i) {
    const double z = 0.01 * i;
    const auto w = damage_potential(m, D, z);
    split = std::max(split, std::abs(w.W - w.beta + 0.5 * m.lambda_W * z * z));
  }
  out.push_back({"damage_potential_split", split, split <= 1e-14, ""});
  const double qq = m.q_for(D);
  out.push_back({"damage_singularity_exponent", qq, qq >= 2.0 * D + 1.0 - 1e-12, ""});
  out.push_back({"damage_smooth_convexity", 2.0 * m.w1, m.w1 >= 0.0, ""});
  out.push_back({"yield_radii", m.C_R - m.c_r, m.c_r > 0.0 && m.C_R > m.c_r, ""});
  out.push_back({"regularization_exponent", m.gamma, m.gamma > 4.0, ""});
  out.push_back({"density", m.rho, m.rho > 0.0, ""});
  out.push_back({"damage_rate_weight", m.nu, m.nu >= 0.0, ""});
  return out;
}

}  // namespace tvpd
