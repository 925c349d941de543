#pragma once
/// @file problem.hpp
/// @brief Time profiles, loads, Dirichlet datum and initial data.

#include "tvpd/mesh.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvpd {

/// Scalar time profile: constant, linear ramp a + b t, or a sampled table
/// interpolated linearly (held constant outside the sampled range).
struct TimeProfile {
  enum class Kind { Constant, Ramp, Table };
  Kind kind = Kind::Constant;
  double a = 1.0;
  double b = 0.0;
  std::vector<double> t, v;

  static TimeProfile constant(double c) { return {Kind::Constant, c, 0.0, {}, {}}; }
  static TimeProfile ramp(double a0, double slope) { return {Kind::Ramp, a0, slope, {}, {}}; }
  static TimeProfile table(std::vector<double> ts, std::vector<double> vs) {
    if (ts.size() != vs.size() || ts.size() < 2)
      throw std::invalid_argument("table profile needs at least two (t, v) samples");
    for (std::size_t i = 1; i < ts.size(); ++i)
      if (!(ts[i] > ts[i - 1])) throw std::invalid_argument("table profile times must increase");
    return {Kind::Table, 0.0, 0.0, std::move(ts), std::move(vs)};
  }

  double value(double time) const {
    switch (kind) {
      case Kind::Constant: return a;
      case Kind::Ramp: return a + b * time;
      case Kind::Table: {
        if (time <= t.front()) return v.front();
        if (time >= t.back()) return v.back();
        const auto it = std::upper_bound(t.begin(), t.end(), time);
        const std::size_t i = static_cast<std::size_t>(it - t.begin());
        const double w = (time - t[i - 1]) / (t[i] - t[i - 1]);
        return (1.0 - w) * v[i - 1] + w * v[i];
      }
    }
    return 0.0;
  }

  double slope(double time) const {
    switch (kind) {
      case Kind::Constant: return 0.0;
      case Kind::Ramp: return b;
      case Kind::Table: {
        if (time < t.front() || time >= t.back()) return 0.0;
        const auto it = std::upper_bound(t.begin(), t.end(), time);
        const std::size_t i = static_cast<std::size_t>(it - t.begin());
        return (v[i] - v[i - 1]) / (t[i] - t[i - 1]);
      }
    }
    return 0.0;
  }

  /// Exact integral over [t0, t1].
  double integral(double t0, double t1) const {
    switch (kind) {
      case Kind::Constant: return a * (t1 - t0);
      case Kind::Ramp: return a * (t1 - t0) + 0.5 * b * (t1 * t1 - t0 * t0);
      case Kind::Table: {
        // Piecewise-linear integrand: trapezoid on every piece is exact.
        std::vector<double> pts{t0};
        for (double s : t)
          if (s > t0 && s < t1) pts.push_back(s);
        pts.push_back(t1);
        double sum = 0.0;
        for (std::size_t i = 1; i < pts.size(); ++i)
          sum += 0.5 * (pts[i] - pts[i - 1]) * (value(pts[i - 1]) + value(pts[i]));
        return sum;
      }
    }
    return 0.0;
  }

  double mean(double t0, double t1) const {
    if (kind == Kind::Constant) return a;
    return integral(t0, t1) / (t1 - t0);
  }
};

/// Per-step averages over (t_{k-1}, t_k], k = 1..K.
inline std::vector<double> local_means(const TimeProfile& p, double tau, int K) {
  std::vector<double> out(K);
  for (int k = 1; k <= K; ++k) out[k - 1] = p.mean((k - 1) * tau, k * tau);
  return out;
}

/// Loads, sources, Dirichlet datum and initial data of one run.
template <int D>
struct ProblemData {
  Mesh<D> mesh;
  double T = 1.0;

  Vec<D> body_force = Vec<D>::Zero();
  TimeProfile body_profile;
  /// Traction per boundary facet (ignored on Dirichlet facets).
  std::vector<Vec<D>> traction;
  TimeProfile traction_profile;
  /// Volumetric heat source G (spatially constant).
  double heat_source = 0.0;
  TimeProfile heat_profile;
  /// Boundary heat flux g per boundary facet.
  std::vector<double> heat_flux;
  TimeProfile flux_profile;

  /// w(x, t) = profile(t) (offset + gradient x).
  Vec<D> w_offset = Vec<D>::Zero();
  Mat<D> w_gradient = Mat<D>::Zero();
  TimeProfile w_profile;

  Eigen::VectorXd u0, v0, z0, theta0;
  std::vector<DevMat<D>> p0;

  /// Prescribed temperature Theta(x, t) = shape(x) profile(t) + offset,
  /// used instead of the heat equation when enabled.
  bool prescribed_temperature = false;
  Eigen::VectorXd theta_shape;
  TimeProfile theta_profile;
  double theta_offset = 0.0;

  /// Nodal interpolant of w(., t) given the profile factor.
  Eigen::VectorXd dirichlet_field(double factor) const {
    Eigen::VectorXd w(mesh.num_dofs());
    for (int i = 0; i < mesh.num_vertices(); ++i) {
      const Vec<D> val = factor * (w_offset + w_gradient * mesh.vertices[i]);
      for (int c = 0; c < D; ++c) w(D * i + c) = val(c);
    }
    return w;
  }

  Eigen::VectorXd prescribed_theta(double factor) const {
    return (factor * theta_shape.array() + theta_offset).matrix();
  }
};

/// Data averaged over one step (t_{k-1}, t_k].
template <int D>
struct StepData {
  Eigen::VectorXd load;       ///< <L^k, .> on interleaved dofs
  Eigen::VectorXd w;          ///< nodal w^k
  Eigen::VectorXd heat;       ///< nodal int G^k v_i
  Eigen::VectorXd flux;       ///< nodal int_{boundary} g^k v_i
  Eigen::VectorXd theta;      ///< prescribed Theta^k (if enabled)
  double G = 0.0;
  double g_factor = 0.0;
};

template <int D>
StepData<D> step_data(const ProblemData<D>& pb, int k, double tau) {
  const double t0 = (k - 1) * tau, t1 = k * tau;
  StepData<D> s;
  const auto& m = pb.mesh;
  std::vector<Vec<D>> tr(m.facets.size(), Vec<D>::Zero());
  const double tf = pb.traction_profile.mean(t0, t1);
  for (std::size_t f = 0; f < m.facets.size() && f < pb.traction.size(); ++f) tr[f] = tf * pb.traction[f];
  s.load = assemble_load(m, Vec<D>(pb.body_profile.mean(t0, t1) * pb.body_force), tr);
  s.w = pb.dirichlet_field(pb.w_profile.mean(t0, t1));
  s.G = pb.heat_source * pb.heat_profile.mean(t0, t1);
  s.heat = s.G * m.lumped;
  s.g_factor = pb.flux_profile.mean(t0, t1);
  std::vector<double> g(m.facets.size(), 0.0);
  for (std::size_t f = 0; f < m.facets.size() && f < pb.heat_flux.size(); ++f)
    g[f] = s.g_factor * pb.heat_flux[f];
  s.flux = assemble_boundary_flux(m, g);
  if (pb.prescribed_temperature) s.theta = pb.prescribed_theta(pb.theta_profile.mean(t0, t1));
  return s;
}

/// Time derivative of the Dirichlet datum at t = 0, used as the velocity of
/// w before the first step.
template <int D>
Eigen::VectorXd dirichlet_rate_at_zero(const ProblemData<D>& pb) {
  return pb.dirichlet_field(pb.w_profile.slope(0.0));
}

}  // namespace tvpd
