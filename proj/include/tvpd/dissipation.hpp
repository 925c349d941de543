#pragma once
/// @file dissipation.hpp
/// @brief Per-step dissipation and coupling terms. The heat equation source
/// and the energy audits both read these numbers, so they are assembled in
/// exactly one place.

#include "tvpd/constitutive.hpp"
#include "tvpd/fractional.hpp"
#include "tvpd/mesh.hpp"
#include "tvpd/state.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace tvpd {

/// Integrated rates of one step. Nodal vectors distribute the heat sources
/// with vertex quadrature, so their sums reproduce the totals.
struct StepDissipation {
  double viscous = 0.0;          ///< int D(z) de:de
  double damage_rate = 0.0;      ///< int R(dz) = int |dz|
  double damage_rate_sq = 0.0;   ///< int |dz|^2 (vertex quadrature)
  double damage_nonlocal = 0.0;  ///< nu a_s(dz, dz)
  double plastic = 0.0;          ///< int H(z, theta_prev; dp)
  double plastic_rate_sq = 0.0;  ///< int |dp|^2
  double damage_coupling = 0.0;  ///< int theta_prev dz (vertex quadrature)
  double expansion_coupling = 0.0;  ///< int T_M(theta) C(z+)E : de
  Eigen::VectorXd fixed_nodal;      ///< theta-independent part of the heat source
  Eigen::VectorXd expansion_coeff;  ///< c_i with expansion source -T_M(theta_i) c_i

  double bundle() const {
    return viscous + damage_rate + damage_rate_sq + damage_nonlocal + plastic + plastic_rate_sq;
  }

  /// Heat-equation right-hand side without G and g, at temperature theta.
  Eigen::VectorXd heat_source(const Eigen::VectorXd& theta, double M) const {
    Eigen::VectorXd b = fixed_nodal;
    for (int i = 0; i < b.size(); ++i) b(i) -= truncate(theta(i), M) * expansion_coeff(i);
    return b;
  }

  void set_expansion(const Eigen::VectorXd& theta, double M) {
    expansion_coupling = 0.0;
    for (int i = 0; i < theta.size(); ++i) expansion_coupling += truncate(theta(i), M) * expansion_coeff(i);
  }
};

/// Elementwise C(z+) E in orthonormal coordinates, z at the barycenter.
template <int D>
SymVec<D> thermal_stress_direction(const MaterialModel& m, double zbar) {
  return to_coords(elasticity_apply<D>(m, std::max(zbar, 0.0), expansion_matrix<D>(m)));
}

/// Assembles the dissipation of the step from (prev) to the new
/// (z, e, p). theta^k enters only through set_expansion().
template <int D>
StepDissipation assemble_dissipation(const Mesh<D>& mesh, const MaterialModel& model,
                                     const FractionalForm& form, const FieldState<D>& prev,
                                     const Eigen::VectorXd& z, const std::vector<SymMat<D>>& e,
                                     const std::vector<DevMat<D>>& p, double tau) {
  const int nv = mesh.num_vertices();
  StepDissipation s;
  s.fixed_nodal = Eigen::VectorXd::Zero(nv);
  s.expansion_coeff = Eigen::VectorXd::Zero(nv);

  for (int el = 0; el < mesh.num_elements(); ++el) {
    const double zbar = mesh.element_mean(z, el);
    const double th_prev = mesh.element_mean(prev.theta, el);
    const SymMat<D> de = (1.0 / tau) * (e[el] - prev.e[el]);
    const DevMat<D> dp = (1.0 / tau) * (p[el] - prev.p[el]);
    const double visc = frobenius(viscosity_apply<D>(model, zbar, de), de);
    const double plast = yield_radius(model, zbar, th_prev) * dp.norm();
    const double psq = frobenius(dp, dp);
    const double coup = to_coords(de).dot(thermal_stress_direction<D>(model, zbar));
    const double w = mesh.measure[el];
    s.viscous += w * visc;
    s.plastic += w * plast;
    s.plastic_rate_sq += w * psq;
    const double share = w / (D + 1);
    for (int i : mesh.elements[el]) {
      s.fixed_nodal(i) += share * (visc + plast + psq);
      s.expansion_coeff(i) += share * coup;
    }
  }

  const Eigen::VectorXd dz = (z - prev.z) / tau;
  const double nonlocal = model.nu * dz.dot(form.matrix * dz);
  const double nu_bar = nonlocal / mesh.total_measure;
  for (int i = 0; i < nv; ++i) {
    const double mi = mesh.lumped(i);
    const double r = std::abs(dz(i));
    const double sq = dz(i) * dz(i);
    const double cp = prev.theta(i) * dz(i);
    s.damage_rate += mi * r;
    s.damage_rate_sq += mi * sq;
    s.damage_coupling += mi * cp;
    s.fixed_nodal(i) += mi * (r + sq - cp + nu_bar);
  }
  s.damage_nonlocal = nonlocal;
  return s;
}

}  // namespace tvpd
