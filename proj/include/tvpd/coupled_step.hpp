#pragma once
/// @file coupled_step.hpp
/// @brief Implicit thermoviscoplastic block of one time step: momentum
/// balance with elementwise return map, heat equation, and the outer
/// fixed point on the temperature with truncation level M.

#include "tvpd/constitutive.hpp"
#include "tvpd/dissipation.hpp"
#include "tvpd/fractional.hpp"
#include "tvpd/mesh.hpp"
#include "tvpd/problem.hpp"
#include "tvpd/state.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvpd {

/// Constitutive data of one element during a step, in orthonormal
/// coordinates.
template <int D>
struct ElementLaw {
  using SV = SymVec<D>;
  using SM = Eigen::Matrix<double, kSym<D>, kSym<D>>;
  SM C = SM::Zero();    ///< C(z) at the barycenter
  SM Dv = SM::Zero();   ///< D(z) at the barycenter
  SV t = SV::Zero();    ///< C(z+) E
  SV e1 = SV::Zero();   ///< e^{k-1}
  DevVec<D> p1 = DevVec<D>::Zero();
  double theta = 0.0;   ///< mean of T_M(theta) over the vertices
  double sigma_y = 1.0;
  double tau = 1.0;
  double wg = 0.0;      ///< weight of the gamma terms (tau or 0)
  double gamma = 4.5;

  /// Stored energy plus viscous potential of the elastic strain.
  double psi(const SV& e) const {
    const SV d = e - e1;
    return d.dot(Dv * d) / (2.0 * tau) + 0.5 * e.dot(C * e) + wg * PowerTerm<kSym<D>>::value(e, gamma) -
           theta * t.dot(e);
  }
  /// Total stress.
  SV stress(const SV& e) const {
    return Dv * (e - e1) / tau + C * e + wg * PowerTerm<kSym<D>>::grad(e, gamma) - theta * t;
  }
  SM stress_tangent(const SV& e) const {
    return Dv / tau + C + wg * PowerTerm<kSym<D>>::hess(e, gamma);
  }
};

template <int D>
struct ElementResponse {
  SymVec<D> e;
  DevVec<D> q;
  DevVec<D> zeta;
  SymVec<D> sigma;
  Eigen::Matrix<double, kSym<D>, kSym<D>> tangent;
  double energy = 0.0;
  bool yielded = false;
};

/// Minimizes over the plastic strain q the element energy at total strain
/// eps: psi(eps - q) + |q - p1|^2/(2 tau) + wg |q|^gamma/gamma + sigma_y |q - p1|.
template <int D>
ElementResponse<D> element_response(const ElementLaw<D>& law, const SymVec<D>& eps) {
  constexpr int N = kDev<D>;
  using SM = Eigen::Matrix<double, kSym<D>, kSym<D>>;
  ElementResponse<D> r;
  if constexpr (N == 0) {
    r.e = eps;
    r.q = DevVec<D>();
    r.zeta = DevVec<D>();
    r.sigma = law.stress(eps);
    r.tangent = law.stress_tangent(eps);
    r.energy = law.psi(eps);
  } else {
    using V = Eigen::Matrix<double, N, 1>;
    using M = Eigen::Matrix<double, N, N>;
    auto h = [&](const V& q) {
      SmoothEval<N> s;
      const SymVec<D> e = eps - embed<D>(q);
      const V d = q - law.p1;
      const SM hp = law.stress_tangent(e);
      s.value = law.psi(e) + d.squaredNorm() / (2.0 * law.tau) + law.wg * PowerTerm<N>::value(q, law.gamma);
      s.grad = -law.stress(e).template head<N>() + d / law.tau + law.wg * PowerTerm<N>::grad(q, law.gamma);
      s.hess = hp.template topLeftCorner<N, N>() + M::Identity() / law.tau +
               law.wg * PowerTerm<N>::hess(q, law.gamma);
      return s;
    };
    const auto pr = solve_ball_prox<N>(h, law.p1, law.sigma_y);
    r.q = pr.q;
    r.zeta = pr.zeta;
    r.yielded = pr.yielded;
    r.e = eps - embed<D>(pr.q);
    r.sigma = law.stress(r.e);
    const SM hp = law.stress_tangent(r.e);
    const double dist = (pr.q - law.p1).norm();
    r.energy = law.psi(r.e) + dist * dist / (2.0 * law.tau) + law.wg * PowerTerm<N>::value(pr.q, law.gamma) +
               law.sigma_y * dist;
    if (pr.yielded) {
      const V n = (pr.q - law.p1) / dist;
      const M jac = hp.template topLeftCorner<N, N>() + M::Identity() / law.tau +
                    law.wg * PowerTerm<N>::hess(pr.q, law.gamma) +
                    (law.sigma_y / dist) * (M::Identity() - n * n.transpose());
      const Eigen::Matrix<double, N, kSym<D>> ph = hp.template topRows<N>();
      r.tangent = hp - ph.transpose() * jac.ldlt().solve(ph);
    } else {
      r.tangent = hp;
    }
  }
  return r;
}

/// Per-step operators shared by the mechanics and heat solves.
template <int D>
struct StepOperators {
  Eigen::MatrixXd mass;         ///< consistent scalar mass (unit density)
  Eigen::MatrixXd vector_mass;  ///< componentwise, interleaved dofs
  std::vector<int> free_dofs;

  explicit StepOperators(const Mesh<D>& m) : mass(mass_matrix(m)) {
    const int n = m.num_vertices();
    vector_mass = Eigen::MatrixXd::Zero(D * n, D * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int c = 0; c < D; ++c) vector_mass(D * i + c, D * j + c) = mass(i, j);
    for (int i = 0; i < n; ++i)
      if (!m.dirichlet_vertex[i])
        for (int c = 0; c < D; ++c) free_dofs.push_back(D * i + c);
  }
};

struct SolverSettings {
  double mechanics_tol = 1e-12;
  int mechanics_max_iter = 100;
  double heat_tol = 1e-12;
  int heat_max_iter = 100;
  double fixed_point_tol = 1e-12;
  int fixed_point_max_iter = 100;
  double min_relaxation = 0.1;
  double initial_M = 1e3;
  int max_M_doublings = 20;
};

template <int D>
struct MechanicsResult {
  Eigen::VectorXd u;
  std::vector<SymMat<D>> e;
  std::vector<DevMat<D>> p;
  std::vector<DevMat<D>> zeta;
  std::vector<SymMat<D>> sigma;
  int iterations = 0;
  double residual = 0.0;
  int yielded = 0;
};

/// Momentum balance with theta frozen: minimizes
///   rho/(2 tau^2) |u - 2u1 + u2|_M^2 + sum_E |E| phi_E(eps(u)) - <L, u>
/// over u with u = w on Dirichlet vertices, by Newton with the consistent
/// tangent and an Armijo line search.
template <int D>
MechanicsResult<D> solve_mechanics(const Mesh<D>& mesh, const MaterialModel& model,
                                   const StepOperators<D>& ops, const FieldState<D>& prev,
                                   const Eigen::VectorXd& u2, const Eigen::VectorXd& z,
                                   const Eigen::VectorXd& theta_mech, double M,
                                   const StepData<D>& data, double tau, const SolverSettings& cfg) {
  const int ne = mesh.num_elements();
  const int ndof = mesh.num_dofs();
  constexpr int L = D * (D + 1);
  const double rho_t = model.rho / (tau * tau);

  std::vector<ElementLaw<D>> laws(ne);
  std::vector<Eigen::Matrix<double, kSym<D>, L>> B(ne);
  const auto c0 = model.C0.coords_matrix<D>();
  const auto d0 = model.D0.coords_matrix<D>();
  for (int el = 0; el < ne; ++el) {
    const double zb = mesh.element_mean(z, el);
    auto& lw = laws[el];
    lw.C = g_C(model, zb) * c0;
    lw.Dv = g_D(model, zb) * d0;
    lw.t = thermal_stress_direction<D>(model, zb);
    lw.e1 = to_coords(prev.e[el]);
    lw.p1 = to_coords(prev.p[el]);
    double th = 0.0;
    for (int i : mesh.elements[el]) th += truncate(theta_mech(i), M);
    lw.theta = th / (D + 1);
    lw.sigma_y = yield_radius(model, zb, mesh.element_mean(prev.theta, el));
    lw.tau = tau;
    lw.wg = model.gamma_terms ? tau : 0.0;
    lw.gamma = model.gamma;
    B[el] = strain_operator(mesh, el);
  }
  auto local = [&](const Eigen::VectorXd& u, int el) {
    Eigen::Matrix<double, L, 1> ul;
    for (int a = 0; a < D + 1; ++a)
      for (int c = 0; c < D; ++c) ul(D * a + c) = u(D * mesh.elements[el][a] + c);
    return ul;
  };
  auto gdof = [&](int el, int k) { return D * mesh.elements[el][k / D] + k % D; };

  Eigen::VectorXd u = prev.u;
  for (int i = 0; i < mesh.num_vertices(); ++i)
    if (mesh.dirichlet_vertex[i])
      for (int c = 0; c < D; ++c) u(D * i + c) = data.w(D * i + c);

  const Eigen::VectorXd base = 2.0 * prev.u - u2;
  auto energy = [&](const Eigen::VectorXd& x, std::vector<ElementResponse<D>>* out) {
    const Eigen::VectorXd a = x - base;
    double f = 0.5 * rho_t * a.dot(ops.vector_mass * a) - data.load.dot(x);
    for (int el = 0; el < ne; ++el) {
      auto r = element_response<D>(laws[el], B[el] * local(x, el));
      f += mesh.measure[el] * r.energy;
      if (out) (*out)[el] = std::move(r);
    }
    return f;
  };

  const auto& fd = ops.free_dofs;
  const int nf = static_cast<int>(fd.size());
  std::vector<ElementResponse<D>> resp(ne);
  double f = energy(u, &resp);
  MechanicsResult<D> res;
  for (int it = 0;; ++it) {
    const Eigen::VectorXd inertia = rho_t * (ops.vector_mass * (u - base));
    Eigen::VectorXd grad = inertia - data.load;
    Eigen::VectorXd scale = inertia.cwiseAbs() + data.load.cwiseAbs();
    for (int el = 0; el < ne; ++el) {
      const Eigen::Matrix<double, L, 1> ge = mesh.measure[el] * B[el].transpose() * resp[el].sigma;
      for (int k = 0; k < L; ++k) {
        grad(gdof(el, k)) += ge(k);
        scale(gdof(el, k)) += std::abs(ge(k));
      }
    }
    double rn = 0.0, sc = 0.0;
    Eigen::VectorXd gf(nf);
    for (int a = 0; a < nf; ++a) {
      gf(a) = grad(fd[a]);
      rn = std::max(rn, std::abs(gf(a)));
      sc = std::max(sc, scale(fd[a]));
    }
    res.iterations = it;
    res.residual = rn / std::max(sc, 1e-300);
    if (rn <= cfg.mechanics_tol * sc) break;
    if (it == cfg.mechanics_max_iter)
      throw std::runtime_error("momentum balance: Newton did not converge (scaled residual " +
                               std::to_string(res.residual) + ")");

    Eigen::MatrixXd K = rho_t * ops.vector_mass;
    for (int el = 0; el < ne; ++el) {
      const Eigen::Matrix<double, L, L> ke = mesh.measure[el] * B[el].transpose() * resp[el].tangent * B[el];
      for (int a = 0; a < L; ++a)
        for (int b = 0; b < L; ++b) K(gdof(el, a), gdof(el, b)) += ke(a, b);
    }
    Eigen::MatrixXd kf(nf, nf);
    for (int a = 0; a < nf; ++a)
      for (int b = 0; b < nf; ++b) kf(a, b) = K(fd[a], fd[b]);
    const Eigen::VectorXd df = -kf.ldlt().solve(gf);
    const double slope = gf.dot(df);
    Eigen::VectorXd du = Eigen::VectorXd::Zero(ndof);
    for (int a = 0; a < nf; ++a) du(fd[a]) = df(a);
    if (!(du.norm() > 1e-15 * (1.0 + u.norm()))) break;

    double t = 1.0;
    std::vector<ElementResponse<D>> trial(ne);
    Eigen::VectorXd un = u + du;
    double fn = energy(un, &trial);
    int ls = 0;
    // Once the predicted decrease is below the rounding level of the energy
    // the full Newton step is taken.
    const bool resolved = -slope > 1e-12 * (1.0 + std::abs(f));
    while (resolved && !(fn <= f + 1e-4 * t * slope) && ls < 50) {
      t *= 0.5;
      un = u + t * du;
      fn = energy(un, &trial);
      ++ls;
    }
    // Near the minimum the energy decrease drowns in rounding; the full
    // Newton step is then taken.
    if (ls == 50) {
      un = u + du;
      fn = energy(un, &trial);
    }
    u = un;
    f = fn;
    resp = std::move(trial);
  }

  res.u = u;
  res.e.resize(ne);
  res.p.resize(ne);
  res.zeta.resize(ne);
  res.sigma.resize(ne);
  for (int el = 0; el < ne; ++el) {
    const auto& r = resp[el];
    res.p[el] = r.yielded ? dev_from_coords<D>(r.q) : prev.p[el];
    // Elastic strain from the exact split so that admissibility holds to rounding.
    res.e[el] = element_strain(mesh, el, u) - res.p[el].sym();
    res.zeta[el] = dev_from_coords<D>(r.zeta);
    res.sigma[el] = sym_from_coords<D>(r.sigma);
    if (r.yielded) ++res.yielded;
  }
  return res;
}

struct HeatResult {
  Eigen::VectorXd theta;
  int iterations = 0;
  double residual = 0.0;
};

/// Heat equation residual with vertex-lumped capacity and sources:
///   m_i (theta_i - theta1_i)/tau + sum_E kappa_M(theta_E) (K_E theta)_i
///     - G_i - g_i - fixed_i + T_M(theta_i) c_i.
template <int D>
Eigen::VectorXd heat_residual(const Mesh<D>& mesh, const MaterialModel& model,
                              const StepDissipation& s, const Eigen::VectorXd& theta1,
                              const StepData<D>& data, double tau, double M,
                              const Eigen::VectorXd& theta, Eigen::VectorXd* scale = nullptr) {
  const int n = mesh.num_vertices();
  Eigen::VectorXd r(n);
  Eigen::VectorXd sc(n);
  for (int i = 0; i < n; ++i) {
    const double cap = mesh.lumped(i) * (theta(i) - theta1(i)) / tau;
    const double exp = truncate(theta(i), M) * s.expansion_coeff(i);
    r(i) = cap - data.heat(i) - data.flux(i) - s.fixed_nodal(i) + exp;
    sc(i) = mesh.lumped(i) * (std::abs(theta(i)) + std::abs(theta1(i))) / tau + std::abs(data.heat(i)) +
            std::abs(data.flux(i)) + std::abs(s.fixed_nodal(i)) + std::abs(exp);
  }
  for (int el = 0; el < mesh.num_elements(); ++el) {
    const double k = kappa_M(model, mesh.element_mean(theta, el), M);
    const auto ke = mesh.stiffness(el);
    const auto& v = mesh.elements[el];
    for (int a = 0; a < D + 1; ++a) {
      double acc = 0.0, abs_acc = 0.0;
      for (int b = 0; b < D + 1; ++b) {
        acc += ke(a, b) * theta(v[b]);
        abs_acc += std::abs(ke(a, b) * theta(v[b]));
      }
      r(v[a]) += k * acc;
      sc(v[a]) += k * abs_acc;
    }
  }
  if (scale) *scale = sc;
  return r;
}

/// Newton for the heat block with the dissipation frozen.
template <int D>
HeatResult solve_heat(const Mesh<D>& mesh, const MaterialModel& model, const StepDissipation& s,
                      const Eigen::VectorXd& theta1, const Eigen::VectorXd& theta_start,
                      const StepData<D>& data, double tau, double M, const SolverSettings& cfg) {
  const int n = mesh.num_vertices();
  HeatResult res;
  Eigen::VectorXd th = theta_start;
  Eigen::VectorXd sc;
  Eigen::VectorXd r = heat_residual(mesh, model, s, theta1, data, tau, M, th, &sc);
  for (int it = 0;; ++it) {
    const double rn = r.cwiseAbs().maxCoeff();
    res.iterations = it;
    res.residual = rn / std::max(sc.maxCoeff(), 1e-300);
    if (rn <= cfg.heat_tol * sc.maxCoeff()) break;
    if (it == cfg.heat_max_iter)
      throw std::runtime_error("heat equation: Newton did not converge (scaled residual " +
                               std::to_string(res.residual) + ")");
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      J(i, i) += mesh.lumped(i) / tau;
      if (std::abs(th(i)) < M) J(i, i) += s.expansion_coeff(i);
    }
    for (int el = 0; el < mesh.num_elements(); ++el) {
      const double tb = mesh.element_mean(th, el);
      const double k = kappa_M(model, tb, M);
      const double dk = dkappa_M(model, tb, M) / (D + 1);
      const auto ke = mesh.stiffness(el);
      const auto& v = mesh.elements[el];
      for (int a = 0; a < D + 1; ++a) {
        double kth = 0.0;
        for (int b = 0; b < D + 1; ++b) kth += ke(a, b) * th(v[b]);
        for (int b = 0; b < D + 1; ++b) J(v[a], v[b]) += k * ke(a, b) + dk * kth;
      }
    }
    const Eigen::VectorXd d = -J.partialPivLu().solve(r);
    double t = 1.0;
    Eigen::VectorXd tn, rnew, scn;
    int ls = 0;
    for (; ls < 50; ++ls) {
      tn = th + t * d;
      rnew = heat_residual(mesh, model, s, theta1, data, tau, M, tn, &scn);
      if (tn.minCoeff() > 0.0 && rnew.cwiseAbs().maxCoeff() <= (1.0 - 1e-4 * t) * rn) break;
      t *= 0.5;
    }
    if (ls == 50) {
      tn = th + d;
      rnew = heat_residual(mesh, model, s, theta1, data, tau, M, tn, &scn);
    }
    th = tn;
    r = rnew;
    sc = scn;
  }
  res.theta = th;
  return res;
}

template <int D>
struct CoupledResult {
  MechanicsResult<D> mech;
  Eigen::VectorXd theta;
  StepDissipation dissipation;
  int fixed_point_iterations = 0;
  int mechanics_iterations = 0;
  int heat_iterations = 0;
  double heat_residual = 0.0;
  double M = 0.0;
};

/// One attempt at a fixed truncation level M. Throws on non-convergence.
template <int D>
CoupledResult<D> solve_coupled_fixed_M(const Mesh<D>& mesh, const MaterialModel& model,
                                       const FractionalForm& form, const StepOperators<D>& ops,
                                       const FieldState<D>& prev, const Eigen::VectorXd& u2,
                                       const Eigen::VectorXd& z, const StepData<D>& data, double tau,
                                       double M, bool prescribed, const SolverSettings& cfg) {
  CoupledResult<D> out;
  out.M = M;
  if (prescribed) {
    out.mech = solve_mechanics(mesh, model, ops, prev, u2, z, data.theta, M, data, tau, cfg);
    out.theta = data.theta;
    out.mechanics_iterations = out.mech.iterations;
    out.dissipation = assemble_dissipation(mesh, model, form, prev, z, out.mech.e, out.mech.p, tau);
    out.dissipation.set_expansion(out.theta, M);
    return out;
  }
  Eigen::VectorXd th = prev.theta;
  double omega = 1.0;
  double last_delta = std::numeric_limits<double>::infinity();
  for (int j = 0;; ++j) {
    auto mech = solve_mechanics(mesh, model, ops, prev, u2, z, th, M, data, tau, cfg);
    out.mechanics_iterations += mech.iterations;
    auto diss = assemble_dissipation(mesh, model, form, prev, z, mech.e, mech.p, tau);
    const auto heat = solve_heat(mesh, model, diss, prev.theta, th, data, tau, M, cfg);
    out.heat_iterations += heat.iterations;
    const double delta = (heat.theta - th).cwiseAbs().maxCoeff();
    if (delta <= cfg.fixed_point_tol * (1.0 + th.cwiseAbs().maxCoeff())) {
      out.mech = std::move(mech);
      out.theta = heat.theta;
      out.heat_residual = heat.residual;
      out.dissipation = std::move(diss);
      out.dissipation.set_expansion(out.theta, M);
      out.fixed_point_iterations = j + 1;
      return out;
    }
    if (j + 1 >= cfg.fixed_point_max_iter)
      throw std::runtime_error("temperature fixed point did not converge (last change " +
                               std::to_string(delta) + ")");
    if (delta > last_delta) omega = std::max(cfg.min_relaxation, 0.5 * omega);
    last_delta = delta;
    th = th + omega * (heat.theta - th);
  }
}

/// Coupled block with the truncation safeguard: M is doubled until the
/// iteration converges with T_M inactive at the solution.
template <int D>
CoupledResult<D> solve_coupled_step(const Mesh<D>& mesh, const MaterialModel& model,
                                    const FractionalForm& form, const StepOperators<D>& ops,
                                    const FieldState<D>& prev, const Eigen::VectorXd& u2,
                                    const Eigen::VectorXd& z, const StepData<D>& data, double tau,
                                    bool prescribed, const SolverSettings& cfg) {
  double M = std::max(cfg.initial_M, 2.0 * prev.theta.cwiseAbs().maxCoeff());
  if (prescribed) M = std::max(M, 2.0 * data.theta.cwiseAbs().maxCoeff());
  std::string last_error;
  for (int attempt = 0; attempt <= cfg.max_M_doublings; ++attempt, M *= 2.0) {
    try {
      auto r = solve_coupled_fixed_M(mesh, model, form, ops, prev, u2, z, data, tau, M, prescribed, cfg);
      if (r.theta.cwiseAbs().maxCoeff() < M) return r;
      last_error = "truncation active at the solution";
    } catch (const std::runtime_error& e) {
      last_error = e.what();
    }
  }
  throw std::runtime_error("coupled step failed at maximal truncation level: " + last_error);
}

}  // namespace tvpd
