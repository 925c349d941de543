#pragma once
// Independent reference computations used by the unit tests and the
// acceptance binary. None of them call into the solver code paths they
// check.

#include "tvpd/tvpd.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <future>
#include <string>
#include <vector>

namespace oracle {

inline std::string config_path(const std::string& name) { return std::string(TVPD_SOURCE_DIR) + "/configs/" + name; }

// ---------------------------------------------------------------------------
// Golden-section search

/// Minimizer of a unimodal f on [a, b].
inline double golden_section(const std::function<double(double)>& f, double a, double b, int iters = 200) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters && b - a > 1e-15 * (1.0 + std::abs(a) + std::abs(b)); ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

/// Root of an increasing function on [a, b] by bisection.
inline double bisect_increasing(const std::function<double(double)>& g, double a, double b) {
  for (int i = 0; i < 200 && b - a > 0.0; ++i) {
    const double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    (g(m) > 0.0 ? b : a) = m;
  }
  return 0.5 * (a + b);
}

// ---------------------------------------------------------------------------
// Scalar damage prox: minimizes over eta <= 0
//   -eta + eta^2/(2 tau) + F(z1 + eta),
//   F(z) = w0 z^-q + w1 (1 - z)^2 - lambda z1 z - theta z + (1/2)(delta + z^2) c.

struct ScalarDamage {
  double z1, tau, theta, w0, q, w1, lambda, delta, c;

  double f(double eta) const {
    const double z = z1 + eta;
    return -eta + eta * eta / (2.0 * tau) + w0 * std::pow(z, -q) + w1 * (1.0 - z) * (1.0 - z) - lambda * z1 * z -
           theta * z + 0.5 * (delta + z * z) * c;
  }
  double df(double eta) const {
    const double z = z1 + eta;
    return -1.0 + eta / tau - q * w0 * std::pow(z, -q - 1.0) - 2.0 * w1 * (1.0 - z) - lambda * z1 - theta + z * c;
  }
};

/// Golden-section bracket, refined by bisection on the derivative once the
/// bracket is below the rounding level of the objective.
inline double damage_prox(const ScalarDamage& s) {
  const double lo = -s.z1 * (1.0 - 1e-12);
  const double eta = golden_section([&](double x) { return s.f(x); }, lo, 0.0);
  if (s.df(0.0) <= 0.0) return 0.0;
  const double w = 1e-6 * s.z1;
  const double a = std::max(lo, eta - w), b = std::min(0.0, eta + w);
  if (s.df(a) < 0.0 && s.df(b) > 0.0) return bisect_increasing([&](double x) { return s.df(x); }, a, b);
  return eta;
}

// ---------------------------------------------------------------------------
// Return map by brute-force minimization in polar coordinates about p_prev.

struct ReturnMapInstance {
  Eigen::Vector2d sigma, p_prev;
  double tau, sigma_y, gamma;
  double wg;  ///< weight of the |q|^gamma term
};

inline double return_map_objective(const ReturnMapInstance& in, const Eigen::Vector2d& q) {
  const Eigen::Vector2d d = q - in.p_prev;
  return in.sigma_y * d.norm() + d.squaredNorm() / (2.0 * in.tau) + in.wg / in.gamma * std::pow(q.norm(), in.gamma) -
         in.sigma.dot(d);
}

inline Eigen::Vector2d return_map_brute_force(const ReturnMapInstance& in) {
  const double rmax = in.tau * (in.sigma.norm() + in.sigma_y) + 1e-12;
  auto best_r = [&](double phi, double& val) {
    const Eigen::Vector2d n(std::cos(phi), std::sin(phi));
    auto g = [&](double r) { return return_map_objective(in, in.p_prev + r * n); };
    const double r = golden_section(g, 0.0, rmax);
    val = g(r);
    return r;
  };
  const int samples = 720;
  double best = std::numeric_limits<double>::infinity(), best_phi = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double phi = 2.0 * M_PI * i / samples;
    double v;
    best_r(phi, v);
    if (v < best) {
      best = v;
      best_phi = phi;
    }
  }
  const double h = 2.0 * M_PI / samples;
  const double phi = golden_section(
      [&](double p) {
        double v;
        best_r(p, v);
        return v;
      },
      best_phi - 2.0 * h, best_phi + 2.0 * h);
  double v;
  const double r = best_r(phi, v);
  if (v >= return_map_objective(in, in.p_prev)) return in.p_prev;
  return in.p_prev + r * Eigen::Vector2d(std::cos(phi), std::sin(phi));
}

// ---------------------------------------------------------------------------
// Kernel weights K(E, E') = int_E int_E' |x - y|^-alpha by nested adaptive
// quadrature.

/// One-dimensional cells [a, b] and [c, d] with b <= c.
inline double kernel_1d(double a, double b, double c, double d, double alpha) {
  // Separate integrator objects: nested use of one instance is not reentrant.
  boost::math::quadrature::tanh_sinh<double> outer, inner_ts;
  auto inner = [&](double x) {
    return inner_ts.integrate([&](double y) { return std::pow(y - x, -alpha); }, c, d, 1e-12);
  };
  return outer.integrate(inner, a, b, 1e-11);
}

using P = Eigen::Vector2d;
using Tri = std::array<P, 3>;

inline double cross(const P& a, const P& b) { return a(0) * b(1) - a(1) * b(0); }

/// int_T |x - y|^-alpha dy for x outside the open triangle T, in polar
/// coordinates about x with the radial integral in closed form.
inline double kernel_point_triangle(const P& x, const Tri& t, double alpha) {
  std::array<double, 3> ang{};
  const P d0 = t[0] - x;
  for (int j = 0; j < 3; ++j) {
    const P dj = t[j] - x;
    ang[j] = std::atan2(cross(d0, dj), d0.dot(dj));
  }
  std::sort(ang.begin(), ang.end());
  const double base = std::atan2(d0(1), d0(0));
  auto dir = [&](double phi) { return P(std::cos(base + phi), std::sin(base + phi)); };
  // Distance along direction n from x to the line through edge j.
  auto hit = [&](int j, const P& n) {
    const P e = t[(j + 1) % 3] - t[j];
    return cross(t[j] - x, e) / cross(n, e);
  };
  const double k = 2.0 - alpha;
  double sum = 0.0;
  for (int piece = 0; piece < 2; ++piece) {
    const double a = ang[piece], b = ang[piece + 1];
    if (b - a < 1e-12) continue;
    // Inside one sector the ray enters and leaves through fixed edges,
    // found from the bisecting ray; the radial integral is then analytic.
    const P nm = dir(0.5 * (a + b));
    std::array<int, 2> edges{};
    int found = 0;
    for (int j = 0; j < 3 && found < 2; ++j) {
      const P e = t[(j + 1) % 3] - t[j];
      const double den = cross(nm, e);
      if (den == 0.0) continue;
      const double sp = cross(t[j] - x, nm) / den;
      if (sp > 0.0 && sp < 1.0) edges[found++] = j;
    }
    if (found < 2) continue;
    auto radial = [&](double phi) {
      const P n = dir(phi);
      double r1 = hit(edges[0], n), r2 = hit(edges[1], n);
      if (r1 > r2) std::swap(r1, r2);
      if (!(r1 > 0.0)) return 0.0;
      if (std::abs(k) < 1e-14) return std::log(r2 / r1);
      return (std::pow(r2, k) - std::pow(r1, k)) / k;
    };
    sum += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(radial, a, b, 8, 1e-11);
  }
  return sum;
}

/// int_E int_E' |x - y|^-alpha with a collapsed-square parametrization of E.
inline double kernel_2d(const Tri& e, const Tri& f, double alpha) {
  boost::math::quadrature::tanh_sinh<double> outer(10), inner_ts(10);
  const double area = 0.5 * std::abs(cross(e[1] - e[0], e[2] - e[0]));
  auto inner = [&](double u) {
    return inner_ts.integrate(
        [&](double v) {
          const P x = e[0] + u * (e[1] - e[0]) + u * v * (e[2] - e[1]);
          return 2.0 * area * u * kernel_point_triangle(x, f, alpha);
        },
        0.0, 1.0, 1e-9);
  };
  return outer.integrate(inner, 0.0, 1.0, 1e-8);
}

/// Matrix of a_s from the definition: sum over ordered pairs E != E' of
/// (g_i|E - g_i|E')(g_j|E - g_j|E') K(E, E'), with K from `kernel`.
template <int D>
Eigen::MatrixXd as_matrix_from_definition(const tvpd::Mesh<D>& m, const std::function<double(int, int)>& kernel) {
  const int nv = m.num_vertices(), ne = m.num_elements();
  std::vector<std::future<double>> jobs;
  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < ne; ++a)
    for (int b = a + 1; b < ne; ++b) {
      pairs.emplace_back(a, b);
      jobs.push_back(std::async(std::launch::async, [&kernel, a, b] { return kernel(a, b); }));
    }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nv, nv);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [a, b] = pairs[p];
    const double k = jobs[p].get();
    // Basis gradient of vertex i on element e (zero when i is not a vertex).
    auto grad = [&](int e, int i) {
      tvpd::Vec<D> g = tvpd::Vec<D>::Zero();
      for (int l = 0; l <= D; ++l)
        if (m.elements[e][l] == i) g = m.grad[e].col(l);
      return g;
    };
    for (int i = 0; i < nv; ++i)
      for (int j = 0; j < nv; ++j) out(i, j) += 2.0 * k * (grad(a, i) - grad(b, i)).dot(grad(a, j) - grad(b, j));
  }
  return out;
}

inline Tri triangle_of(const tvpd::Mesh<2>& m, int e) {
  Tri t;
  for (int l = 0; l < 3; ++l) t[l] = m.vertices[m.elements[e][l]];
  return t;
}

// ---------------------------------------------------------------------------
// Single-element bar: left end pulled with velocity -a, constant traction f
// on the right end. Scalar ODE for the right displacement r(t) with the left
// end l(t) = -a t:
//   rho (M_rr r'' + M_rl l'') + Dv (r' - l') + C (r - l) = f.
// The velocity jump of l at t = 0 gives r'(0+) = -(M_rl / M_rr) l'(0+) = a/2
// with the consistent mass, then classical RK4 at step dt.

struct BarOracle {
  double rho, Dv, C, a, traction, h_len;
  double M_rr() const { return rho * h_len / 3.0; }

  /// Elastic strain (r - l)/h at time T from rest.
  double strain_at(double T, double dt) const {
    const int n = static_cast<int>(std::llround(T / dt));
    Eigen::Vector2d y(0.0, 0.5 * a);  // r, r'
    auto rhs = [&](double t, const Eigen::Vector2d& s) {
      const double l = -a * t, ldot = -a;
      const double f = traction;
      const double eps = (s(0) - l) / h_len;
      const double epsdot = (s(1) - ldot) / h_len;
      const double acc = (f - Dv * epsdot - C * eps) / M_rr();
      return Eigen::Vector2d(s(1), acc);
    };
    for (int i = 0; i < n; ++i) {
      const double t = i * dt;
      const Eigen::Vector2d k1 = rhs(t, y);
      const Eigen::Vector2d k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1);
      const Eigen::Vector2d k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2);
      const Eigen::Vector2d k4 = rhs(t + dt, y + dt * k3);
      y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return (y(0) + a * T) / h_len;
  }
};

}  // namespace oracle
