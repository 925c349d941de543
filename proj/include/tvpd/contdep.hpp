#pragma once
/// @file contdep.hpp
/// @brief Continuous dependence on the data in the prescribed-temperature,
/// constant-yield regime: runs perturbed pairs and compares the solution
/// difference with the data difference.

#include "tvpd/audit.hpp"
#include "tvpd/stepper.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <future>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvpd {

enum class Perturbation { InitialDisplacement, InitialVelocity, InitialDamage, BodyForce, Dirichlet, Temperature, Traction, InitialPlastic };

inline const char* perturbation_name(Perturbation p) {
  switch (p) {
    case Perturbation::InitialDisplacement: return "u0";
    case Perturbation::InitialVelocity: return "v0";
    case Perturbation::InitialDamage: return "z0";
    case Perturbation::BodyForce: return "F";
    case Perturbation::Dirichlet: return "w";
    case Perturbation::Temperature: return "Theta";
    case Perturbation::Traction: return "f";
    case Perturbation::InitialPlastic: return "p0";
  }
  return "?";
}

inline Perturbation parse_perturbation(const std::string& s) {
  for (Perturbation p : {Perturbation::InitialDisplacement, Perturbation::InitialVelocity, Perturbation::InitialDamage,
                         Perturbation::BodyForce, Perturbation::Dirichlet, Perturbation::Temperature,
                         Perturbation::Traction, Perturbation::InitialPlastic})
    if (s == perturbation_name(p)) return p;
  throw std::invalid_argument("unknown perturbation direction '" + s + "'");
}

/// The six single-datum directions of the standard battery.
inline std::vector<Perturbation> standard_perturbations() {
  return {Perturbation::InitialDisplacement, Perturbation::InitialVelocity, Perturbation::InitialDamage,
          Perturbation::BodyForce, Perturbation::Dirichlet, Perturbation::Temperature};
}

/// Smooth nodal profile in [0, 1] vanishing on the whole boundary.
template <int D>
Eigen::VectorXd interior_bump(const Mesh<D>& m) {
  Eigen::VectorXd b(m.num_vertices());
  for (int i = 0; i < m.num_vertices(); ++i) {
    double v = 1.0;
    for (int k = 0; k < D; ++k) v *= std::sin(M_PI * (m.vertices[i](k) - m.spec.origin(k)) / m.spec.extent(k));
    b(i) = std::max(0.0, v);
  }
  return b;
}

template <int D>
Vec<D> perturbation_direction() {
  Vec<D> c;
  c(0) = 1.0;
  if constexpr (D == 2) c(1) = 0.5;
  return c;
}

template <int D>
Eigen::VectorXd vector_bump(const Mesh<D>& m) {
  const Eigen::VectorXd b = interior_bump(m);
  const Vec<D> c = perturbation_direction<D>();
  Eigen::VectorXd u(m.num_dofs());
  for (int i = 0; i < m.num_vertices(); ++i)
    for (int k = 0; k < D; ++k) u(D * i + k) = b(i) * c(k);
  return u;
}

/// Checks the regime of the estimate and aligns the initial temperature
/// with the prescribed profile.
template <int D>
void prepare_contdep_problem(ProblemData<D>& pb, const MaterialModel& model) {
  if (!(model.nu > 0.0)) throw std::invalid_argument("continuous dependence requires nu > 0");
  if (!model.constant_yield) throw std::invalid_argument("continuous dependence requires a constant yield radius");
  if (!pb.prescribed_temperature) throw std::invalid_argument("continuous dependence requires a prescribed temperature");
  pb.theta0 = pb.prescribed_theta(pb.theta_profile.value(0.0));
  if (!(pb.theta0.minCoeff() > 0.0)) throw std::invalid_argument("prescribed temperature must be positive");
}

/// Copy of `pb` with one datum perturbed by eps.
template <int D>
ProblemData<D> perturb(const ProblemData<D>& pb, Perturbation dir, double eps) {
  ProblemData<D> q = pb;
  const auto& m = pb.mesh;
  const Vec<D> c = perturbation_direction<D>();
  switch (dir) {
    case Perturbation::InitialDisplacement: q.u0 += eps * vector_bump(m); break;
    case Perturbation::InitialVelocity: q.v0 += eps * vector_bump(m); break;
    case Perturbation::InitialDamage: q.z0 -= eps * interior_bump(m); break;
    case Perturbation::BodyForce:
      if (pb.body_profile.kind == TimeProfile::Kind::Constant && pb.body_profile.a == 0.0)
        throw std::invalid_argument("body force perturbation needs a nonzero body-force profile");
      q.body_force += eps * c;
      break;
    case Perturbation::Dirichlet:
      if (pb.w_profile.value(0.0) != 0.0)
        throw std::invalid_argument("Dirichlet perturbation needs a datum profile vanishing at t = 0");
      q.w_offset += eps * c;
      break;
    case Perturbation::Temperature:
      q.theta_offset += eps;
      q.theta0 = q.prescribed_theta(q.theta_profile.value(0.0));
      break;
    case Perturbation::Traction: {
      if (q.traction.size() != m.facets.size()) q.traction.assign(m.facets.size(), Vec<D>::Zero());
      if (pb.traction_profile.kind == TimeProfile::Kind::Constant && pb.traction_profile.a == 0.0)
        throw std::invalid_argument("traction perturbation needs a nonzero traction profile");
      for (std::size_t f = 0; f < m.facets.size(); ++f)
        if (m.facets[f].tag == BoundaryTag::Neumann) q.traction[f] += eps * c;
      break;
    }
    case Perturbation::InitialPlastic: {
      if (D == 1) throw std::invalid_argument("plastic strain is trivial in one dimension");
      const Eigen::VectorXd b = interior_bump(m);
      for (int e = 0; e < m.num_elements(); ++e) {
        SymMat<D> a;
        a.m = Mat<D>::Zero();
        a.m(0, 1) = a.m(1, 0) = eps * m.element_mean(b, e);
        q.p0[e] = q.p0[e] + deviatoric_part(a);
      }
      break;
    }
  }
  return q;
}

// ---------------------------------------------------------------------------
// Discrete norms

/// Vector H1 Gram matrix (consistent mass plus componentwise stiffness).
template <int D>
Eigen::MatrixXd vector_h1_gram(const Mesh<D>& m) {
  const StepOperators<D> ops(m);
  const Eigen::MatrixXd k = stiffness_matrix(m, std::vector<double>(m.num_elements(), 1.0));
  Eigen::MatrixXd g = ops.vector_mass;
  const int n = m.num_vertices();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int c = 0; c < D; ++c) g(D * i + c, D * j + c) += k(i, j);
  return g;
}

/// Norms on the discrete spaces used by the estimate.
template <int D>
struct ContdepNorms {
  const Mesh<D>* mesh;
  Eigen::MatrixXd vmass, h1, hs;
  Eigen::LDLT<Eigen::MatrixXd> dual;  ///< H1 Gram on free dofs
  std::vector<int> free_dofs;

  ContdepNorms(const Mesh<D>& m, const FractionalForm& form) : mesh(&m) {
    const StepOperators<D> ops(m);
    vmass = ops.vector_mass;
    free_dofs = ops.free_dofs;
    h1 = vector_h1_gram(m);
    hs = form.matrix;
    hs.diagonal() += m.lumped;
    const int nf = static_cast<int>(free_dofs.size());
    Eigen::MatrixXd gf(nf, nf);
    for (int a = 0; a < nf; ++a)
      for (int b = 0; b < nf; ++b) gf(a, b) = h1(free_dofs[a], free_dofs[b]);
    dual.compute(gf);
  }

  double l2_sq(const Eigen::VectorXd& u) const { return u.dot(vmass * u); }
  double h1_sq(const Eigen::VectorXd& u) const { return u.dot(h1 * u); }
  double hs_sq(const Eigen::VectorXd& z) const { return z.dot(hs * z); }
  double scalar_l2_sq(const Eigen::VectorXd& f) const { return lumped_norm_sq(*mesh, f); }
  /// Dual norm of a load functional on the space vanishing on the Dirichlet part.
  double dual_sq(const Eigen::VectorXd& l) const {
    Eigen::VectorXd lf(static_cast<int>(free_dofs.size()));
    for (int a = 0; a < lf.size(); ++a) lf(a) = l(free_dofs[a]);
    return lf.dot(dual.solve(lf));
  }
  template <class T>
  double elem_l2_sq(const std::vector<T>& a, const std::vector<T>& b) const {
    double s = 0.0;
    for (int e = 0; e < mesh->num_elements(); ++e) s += mesh->measure[e] * frobenius(a[e] - b[e], a[e] - b[e]);
    return s;
  }
};

struct ContdepRow {
  std::string direction;
  double eps = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  double P = 0.0;
};

/// Left side of the estimate: differences of u, e, z and p in their
/// space-time norms.
template <int D>
double contdep_lhs(const ContdepNorms<D>& n, const DiscreteTrajectory<D>& a, const DiscreteTrajectory<D>& b) {
  const double tau = a.tau;
  double u_max = 0, v_max = 0, u_h1 = 0, e_h1 = 0, z_h1 = 0, p_h1 = 0;
  for (int k = 0; k <= a.steps(); ++k) {
    const auto& x = a.states[k];
    const auto& y = b.states[k];
    const Eigen::VectorXd du = x.u - y.u;
    const Eigen::VectorXd dv = ((x.u - x.u_prev_step) - (y.u - y.u_prev_step)) / tau;
    u_max = std::max(u_max, std::sqrt(n.l2_sq(du)));
    v_max = std::max(v_max, std::sqrt(n.l2_sq(dv)));
    if (k == 0) continue;
    const auto& xp = a.states[k - 1];
    const auto& yp = b.states[k - 1];
    u_h1 += tau * (n.h1_sq(du) + n.h1_sq(dv));
    std::vector<SymMat<D>> de(x.e.size()), dep(x.e.size());
    std::vector<DevMat<D>> dp(x.p.size()), dpp(x.p.size());
    for (std::size_t e = 0; e < x.e.size(); ++e) {
      de[e] = x.e[e] - y.e[e];
      dep[e] = xp.e[e] - yp.e[e];
      dp[e] = x.p[e] - y.p[e];
      dpp[e] = xp.p[e] - yp.p[e];
    }
    const std::vector<SymMat<D>> ze(x.e.size());
    const std::vector<DevMat<D>> zp(x.p.size());
    e_h1 += tau * n.elem_l2_sq(de, ze) + n.elem_l2_sq(de, dep) / tau;
    p_h1 += tau * n.elem_l2_sq(dp, zp) + n.elem_l2_sq(dp, dpp) / tau;
    const Eigen::VectorXd dz = x.z - y.z;
    const Eigen::VectorXd dzp = xp.z - yp.z;
    z_h1 += tau * n.hs_sq(dz) + n.hs_sq(dz - dzp) / tau;
  }
  return u_max + v_max + std::sqrt(u_h1) + std::sqrt(e_h1) + std::sqrt(z_h1) + std::sqrt(p_h1);
}

/// Right side of the estimate: initial-data, load, Dirichlet and
/// temperature differences.
template <int D>
double contdep_rhs(const ContdepNorms<D>& n, const ProblemData<D>& a, const ProblemData<D>& b, double tau,
                   const MaterialModel& model) {
  const auto& m = a.mesh;
  const int K = step_count(a.T, tau);
  const auto sa = initial_state(a, model, tau);
  const auto sb = initial_state(b, model, tau);
  double r = std::sqrt(n.h1_sq(a.u0 - b.u0)) + std::sqrt(n.l2_sq(a.v0 - b.v0));
  const std::vector<SymMat<D>> ze(m.num_elements());
  const std::vector<DevMat<D>> zp(m.num_elements());
  std::vector<SymMat<D>> de(m.num_elements());
  std::vector<DevMat<D>> dp(m.num_elements());
  for (int e = 0; e < m.num_elements(); ++e) {
    de[e] = sa.e[e] - sb.e[e];
    dp[e] = sa.p[e] - sb.p[e];
  }
  r += std::sqrt(n.elem_l2_sq(de, ze)) + std::sqrt(n.elem_l2_sq(dp, zp)) + std::sqrt(n.hs_sq(a.z0 - b.z0));

  double load = 0, w_h1 = 0, w_w21 = 0, th = 0;
  Eigen::VectorXd dw_prev = a.dirichlet_field(a.w_profile.value(0.0)) - b.dirichlet_field(b.w_profile.value(0.0));
  Eigen::VectorXd dwdot_prev = dirichlet_rate_at_zero(a) - dirichlet_rate_at_zero(b);
  for (int k = 1; k <= K; ++k) {
    const auto da = step_data(a, k, tau);
    const auto db = step_data(b, k, tau);
    load += tau * n.dual_sq(da.load - db.load);
    const Eigen::VectorXd dw = da.w - db.w;
    const Eigen::VectorXd dwdot = (dw - dw_prev) / tau;
    const Eigen::VectorXd dwddot = (dwdot - dwdot_prev) / tau;
    w_h1 += tau * (n.h1_sq(dw) + n.h1_sq(dwdot));
    w_w21 += tau * (std::sqrt(n.l2_sq(dw)) + std::sqrt(n.l2_sq(dwdot)) + std::sqrt(n.l2_sq(dwddot)));
    if (a.prescribed_temperature && b.prescribed_temperature) th += tau * n.scalar_l2_sq(da.theta - db.theta);
    dw_prev = dw;
    dwdot_prev = dwdot;
  }
  return r + std::sqrt(load) + std::sqrt(w_h1) + w_w21 + std::sqrt(th);
}

/// max over both runs of max_t ||e||_{L2} + max_t ||z||_inf.
template <int D>
double contdep_P(const Mesh<D>& m, const DiscreteTrajectory<D>& a, const DiscreteTrajectory<D>& b) {
  double P = 0.0;
  for (const auto* t : {&a, &b}) {
    double e_max = 0.0, z_max = 0.0;
    for (const auto& s : t->states) {
      double e2 = 0.0;
      for (int e = 0; e < m.num_elements(); ++e) e2 += m.measure[e] * frobenius(s.e[e], s.e[e]);
      e_max = std::max(e_max, std::sqrt(e2));
      z_max = std::max(z_max, s.z.cwiseAbs().maxCoeff());
    }
    P = std::max(P, e_max + z_max);
  }
  return P;
}

/// True when every stored field of the two trajectories agrees bit for bit.
template <int D>
bool trajectories_identical(const DiscreteTrajectory<D>& a, const DiscreteTrajectory<D>& b) {
  if (a.states.size() != b.states.size()) return false;
  auto same_mats = [](const auto& x, const auto& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (std::memcmp(x[i].m.data(), y[i].m.data(), sizeof(x[i].m)) != 0) return false;
    return true;
  };
  for (std::size_t k = 0; k < a.states.size(); ++k) {
    const auto& x = a.states[k];
    const auto& y = b.states[k];
    if (!bitwise_equal(x.u, y.u) || !bitwise_equal(x.u_prev_step, y.u_prev_step) || !bitwise_equal(x.z, y.z) ||
        !bitwise_equal(x.theta, y.theta) || !bitwise_equal(x.omega, y.omega) || !same_mats(x.e, y.e) ||
        !same_mats(x.p, y.p) || !same_mats(x.zeta, y.zeta) || !same_mats(x.sigma, y.sigma))
      return false;
  }
  return true;
}

/// Runs the pair (pb, perturbed pb) and evaluates the estimate. The two
/// runs are computed concurrently.
template <int D>
ContdepRow run_pair(const ProblemData<D>& base, const ProblemData<D>& pert, const MaterialModel& model,
                    const FractionalForm& form, double tau, const std::string& label, double eps,
                    const SolverSettings& cfg = {}) {
  auto fa = std::async(std::launch::async, [&] { return run(base, model, form, tau, cfg); });
  const auto rb = run(pert, model, form, tau, cfg);
  const auto ra = fa.get();
  if (!ra.traj.complete) throw std::runtime_error("contdep: base run failed: " + ra.traj.failure);
  if (!rb.traj.complete) throw std::runtime_error("contdep: perturbed run failed: " + rb.traj.failure);
  const ContdepNorms<D> n(base.mesh, form);
  ContdepRow row;
  row.direction = label;
  row.eps = eps;
  row.lhs = contdep_lhs(n, ra.traj, rb.traj);
  row.rhs = contdep_rhs(n, base, pert, tau, model);
  row.ratio = row.rhs > 0.0 ? row.lhs / row.rhs : 0.0;
  row.P = contdep_P(base.mesh, ra.traj, rb.traj);
  return row;
}

/// All directions times all magnitudes. The base problem must already be
/// prepared with prepare_contdep_problem().
template <int D>
std::vector<ContdepRow> contdep_battery(const ProblemData<D>& base, const MaterialModel& model,
                                        const FractionalForm& form, double tau,
                                        const std::vector<Perturbation>& dirs, const std::vector<double>& eps,
                                        const SolverSettings& cfg = {}) {
  std::vector<std::future<ContdepRow>> jobs;
  for (Perturbation d : dirs)
    for (double e : eps)
      jobs.push_back(std::async(std::launch::async, [&, d, e] {
        return run_pair(base, perturb(base, d, e), model, form, tau, perturbation_name(d), e, cfg);
      }));
  std::vector<ContdepRow> rows;
  for (auto& j : jobs) rows.push_back(j.get());
  return rows;
}

/// Ratio spread per direction: max ratio / min ratio over the magnitudes.
inline double ratio_spread(const std::vector<ContdepRow>& rows, const std::string& dir) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& r : rows)
    if (r.direction == dir) {
      lo = std::min(lo, r.ratio);
      hi = std::max(hi, r.ratio);
    }
  return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

}  // namespace tvpd
