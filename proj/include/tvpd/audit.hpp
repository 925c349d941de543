#pragma once
/// @file audit.hpp
/// @brief Runtime certificates for a computed trajectory: total and
/// mechanical energy inequalities, entropy inequality, positivity and
/// feasibility bounds, a priori norms, and the dissipation consistency check.

#include "tvpd/constitutive.hpp"
#include "tvpd/dissipation.hpp"
#include "tvpd/fractional.hpp"
#include "tvpd/problem.hpp"
#include "tvpd/state.hpp"
#include "tvpd/stepper.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvpd {

/// Margin of one audited inequality on the node-time interval [t_s, t_t].
struct MarginRow {
  std::string audit;
  int s = 0;
  int t = 0;
  double margin = 0.0;
};

/// One pass/fail line of the report.
struct AuditCheck {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct AuditSection {
  std::string name;
  std::vector<std::pair<std::string, std::string>> items;

  void add(const std::string& key, double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    items.emplace_back(key, os.str());
  }
  void add(const std::string& key, const std::string& v) { items.emplace_back(key, v); }
};

struct AuditReport {
  std::vector<AuditSection> sections;
  std::vector<AuditCheck> checks;
  std::vector<MarginRow> margins;
  double energy_scale = 0.0;

  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const AuditCheck& c) { return c.pass; });
  }
  const AuditCheck* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Per-state energies and per-step work terms

/// Energies of one state.
struct StateEnergy {
  double kinetic = 0.0;
  double stored = 0.0;     ///< (1/2) int C(z) e : e
  double nonlocal = 0.0;   ///< (1/2) a_s(z, z)
  double potential = 0.0;  ///< int W(z)
  double gamma = 0.0;      ///< (tau/gamma) int (|e|^gamma + |p|^gamma)
  double thermal = 0.0;    ///< int theta

  double mechanical() const { return stored + nonlocal + potential + gamma; }
  double total() const { return mechanical() + thermal; }
};

/// Everything the energy and entropy audits read from a trajectory.
template <int D>
struct AuditContext {
  const ProblemData<D>* pb = nullptr;
  const MaterialModel* model = nullptr;
  const FractionalForm* form = nullptr;
  const DiscreteTrajectory<D>* traj = nullptr;
  std::vector<StepDissipation> dissipation;
  std::vector<StepData<D>> data;         ///< data[k-1] for step k
  std::vector<Eigen::VectorXd> velocity;  ///< v^k, k = 0..K
  std::vector<Eigen::VectorXd> wdot;      ///< w-rate at step k, k = 0..K
  Eigen::MatrixXd vector_mass;
  std::vector<StateEnergy> energy;        ///< k = 0..K
};

template <int D>
double lumped_norm_sq(const Mesh<D>& m, const Eigen::VectorXd& f) {
  return (m.lumped.array() * f.array().square()).sum();
}

template <int D>
double gradient_norm_sq(const Mesh<D>& m, const Eigen::VectorXd& f) {
  double s = 0.0;
  for (int e = 0; e < m.num_elements(); ++e) s += m.measure[e] * element_gradient(m, e, f).squaredNorm();
  return s;
}

template <int D>
StateEnergy state_energy(const Mesh<D>& m, const MaterialModel& model, const FractionalForm& form,
                         const Eigen::MatrixXd& vector_mass, const FieldState<D>& s,
                         const Eigen::VectorXd& v, double tau) {
  StateEnergy en;
  en.kinetic = 0.5 * model.rho * v.dot(vector_mass * v);
  const double wg = model.gamma_terms ? tau : 0.0;
  for (int e = 0; e < m.num_elements(); ++e) {
    const double zb = m.element_mean(s.z, e);
    en.stored += 0.5 * m.measure[e] * frobenius(elasticity_apply<D>(model, zb, s.e[e]), s.e[e]);
    if (wg > 0.0)
      en.gamma += wg / model.gamma * m.measure[e] *
                  (std::pow(s.e[e].norm(), model.gamma) + std::pow(s.p[e].norm(), model.gamma));
  }
  en.nonlocal = 0.5 * form(s.z, s.z);
  for (int i = 0; i < m.num_vertices(); ++i) {
    en.potential += m.lumped(i) * damage_potential(model, D, s.z(i)).W;
    en.thermal += m.lumped(i) * s.theta(i);
  }
  return en;
}

/// Builds the audit context. When `stored` is empty the dissipation is
/// recomputed from the states.
template <int D>
AuditContext<D> make_audit_context(const ProblemData<D>& pb, const MaterialModel& model,
                                   const FractionalForm& form, const DiscreteTrajectory<D>& traj,
                                   const std::vector<StepDissipation>& stored = {}) {
  AuditContext<D> c;
  c.pb = &pb;
  c.model = &model;
  c.form = &form;
  c.traj = &traj;
  const auto& m = pb.mesh;
  const int K = traj.steps();
  const double tau = traj.tau;
  c.dissipation = stored.empty() ? recompute_dissipation(m, model, form, traj) : stored;
  if (static_cast<int>(c.dissipation.size()) < K) throw std::invalid_argument("audit: missing dissipation data");
  c.vector_mass = StepOperators<D>(m).vector_mass;
  for (int k = 1; k <= K; ++k) c.data.push_back(step_data(pb, k, tau));
  c.velocity.push_back((traj.states[0].u - traj.states[0].u_prev_step) / tau);
  for (int k = 1; k <= K; ++k) c.velocity.push_back((traj.states[k].u - traj.states[k - 1].u) / tau);
  c.wdot.push_back(dirichlet_rate_at_zero(pb));
  Eigen::VectorXd wprev = pb.dirichlet_field(pb.w_profile.value(0.0));
  for (int k = 1; k <= K; ++k) {
    c.wdot.push_back((c.data[k - 1].w - wprev) / tau);
    wprev = c.data[k - 1].w;
  }
  for (int k = 0; k <= K; ++k)
    c.energy.push_back(state_energy(m, model, form, c.vector_mass, traj.states[k], c.velocity[k], tau));
  return c;
}

/// Per-step external work, split as in the energy inequalities.
struct StepWork {
  double load = 0.0;        ///< tau <L^k, v^k - wdot^k>
  double heat = 0.0;        ///< tau (int G^k + int g^k)
  double stress_w = 0.0;    ///< tau int sigma^k : eps(wdot^k)
  double inertia_c = 0.0;   ///< rho <v^{k-1}, wdot^k - wdot^{k-1}>
  double bundle = 0.0;      ///< tau times the dissipation bundle
  double coupling = 0.0;    ///< tau (expansion + damage coupling)
};

template <int D>
std::vector<StepWork> step_work(const AuditContext<D>& c) {
  const auto& m = c.pb->mesh;
  const double tau = c.traj->tau;
  const double rho = c.model->rho;
  std::vector<StepWork> out;
  for (int k = 1; k <= c.traj->steps(); ++k) {
    StepWork w;
    const auto& d = c.data[k - 1];
    w.load = tau * d.load.dot(c.velocity[k] - c.wdot[k]);
    w.heat = tau * (d.heat.sum() + d.flux.sum());
    const auto& s = c.traj->states[k];
    for (int e = 0; e < m.num_elements(); ++e)
      w.stress_w += tau * m.measure[e] * frobenius(s.sigma[e], element_strain(m, e, c.wdot[k]));
    w.inertia_c = rho * c.velocity[k - 1].dot(c.vector_mass * (c.wdot[k] - c.wdot[k - 1]));
    const auto& ds = c.dissipation[k - 1];
    w.bundle = tau * ds.bundle();
    w.coupling = tau * (ds.expansion_coupling + ds.damage_coupling);
    out.push_back(w);
  }
  return out;
}

/// Scale of the energy audits: kinetic plus total energy at t = 0 plus the
/// absolute external work over the run.
template <int D>
double energy_scale(const AuditContext<D>& c, const std::vector<StepWork>& w) {
  double s = std::abs(c.energy[0].kinetic) + std::abs(c.energy[0].total());
  const double rho = c.model->rho;
  for (int k = 0; k <= c.traj->steps(); ++k)
    s += std::abs(rho * c.velocity[k].dot(c.vector_mass * c.wdot[k]));
  for (const auto& x : w) s += std::abs(x.load) + std::abs(x.heat) + std::abs(x.stress_w) + std::abs(x.inertia_c);
  return s;
}

struct IntervalSummary {
  double min_margin = std::numeric_limits<double>::infinity();
  int s = 0, t = 0;
  int intervals = 0;
  bool finite = true;
};

/// Margins of an inequality LHS(t) <= LHS(s) + sum_{k in (s,t]} inc_k
/// + boundary(s, t), given state[k] = LHS part at k and per-step increments.
inline IntervalSummary interval_margins(const std::string& name, const std::vector<double>& state,
                                        const std::vector<double>& increment,
                                        const std::function<double(int, int)>& boundary,
                                        std::vector<MarginRow>* rows) {
  const int K = static_cast<int>(state.size()) - 1;
  std::vector<double> prefix(K + 1, 0.0);
  for (int k = 1; k <= K; ++k) prefix[k] = prefix[k - 1] + increment[k - 1];
  IntervalSummary sum;
  for (int s = 0; s <= K; ++s)
    for (int t = s + 1; t <= K; ++t) {
      const double margin = state[s] + (prefix[t] - prefix[s]) + boundary(s, t) - state[t];
      if (!std::isfinite(margin)) sum.finite = false;
      if (margin < sum.min_margin) {
        sum.min_margin = margin;
        sum.s = s;
        sum.t = t;
      }
      ++sum.intervals;
      if (rows) rows->push_back({name, s, t, margin});
    }
  if (sum.intervals == 0) sum.min_margin = 0.0;
  return sum;
}

/// Inertia terms against the Dirichlet rate on [t_s, t_t]:
///   rho <v^t, wdot^t> - rho <v^s, wdot^s> - sum_{k in (s,t]} rho <v^{k-1}, wdot^k - wdot^{k-1}>.
template <int D>
std::function<double(int, int)> inertia_boundary(const AuditContext<D>& c, const std::vector<StepWork>& w) {
  const int K = c.traj->steps();
  std::vector<double> a(K + 1), pc(K + 1, 0.0);
  for (int k = 0; k <= K; ++k) a[k] = c.model->rho * c.velocity[k].dot(c.vector_mass * c.wdot[k]);
  for (int k = 1; k <= K; ++k) pc[k] = pc[k - 1] + w[k - 1].inertia_c;
  return [a, pc](int s, int t) { return a[t] - a[s] - (pc[t] - pc[s]); };
}

template <int D>
IntervalSummary audit_total_energy(const AuditContext<D>& c, const std::vector<StepWork>& w,
                                   std::vector<MarginRow>* rows) {
  std::vector<double> lhs, inc;
  for (const auto& e : c.energy) lhs.push_back(e.kinetic + e.total());
  for (const auto& x : w) inc.push_back(x.load + x.heat + x.stress_w);
  return interval_margins("total_energy", lhs, inc, inertia_boundary(c, w), rows);
}

template <int D>
IntervalSummary audit_mechanical_energy(const AuditContext<D>& c, const std::vector<StepWork>& w,
                                        std::vector<MarginRow>* rows) {
  std::vector<double> lhs, inc;
  for (const auto& e : c.energy) lhs.push_back(e.kinetic + e.mechanical());
  for (const auto& x : w) inc.push_back(x.load + x.stress_w + x.coupling - x.bundle);
  return interval_margins("mechanical_energy", lhs, inc, inertia_boundary(c, w), rows);
}

// ---------------------------------------------------------------------------
// Entropy inequality

/// Nonnegative nodal test field phi(x, t).
template <int D>
using TestField = std::function<Eigen::VectorXd(const Mesh<D>&, double)>;

/// Pyramid hat centered in the domain, vanishing on the boundary.
template <int D>
Eigen::VectorXd spatial_hat(const Mesh<D>& m) {
  Eigen::VectorXd phi(m.num_vertices());
  const Vec<D> c = m.spec.origin + 0.5 * m.spec.extent;
  for (int i = 0; i < m.num_vertices(); ++i) {
    double v = 1.0;
    for (int k = 0; k < D; ++k)
      v *= std::max(0.0, 1.0 - std::abs(m.vertices[i](k) - c(k)) / (0.5 * m.spec.extent(k)));
    phi(i) = v;
  }
  return phi;
}

template <int D>
std::vector<std::pair<std::string, TestField<D>>> standard_test_fields(double T) {
  return {
      {"one", [](const Mesh<D>& m, double) { return Eigen::VectorXd::Ones(m.num_vertices()).eval(); }},
      {"hat", [](const Mesh<D>& m, double) { return spatial_hat(m); }},
      {"hat_ramp", [T](const Mesh<D>& m, double t) { return (spatial_hat(m) * (t / T)).eval(); }},
  };
}

/// Per-step terms of the entropy inequality for one test field.
struct EntropyStep {
  double log_pair = 0.0;  ///< sum_i m_i phi^k_i log theta^k_i
  double log_rate = 0.0;  ///< sum_i m_i (phi^k_i - phi^{k-1}_i) log theta^{k-1}_i
  double A = 0.0;         ///< int kappa grad log theta . grad phi
  double B = 0.0;         ///< discrete int kappa phi |grad log theta|^2
  double S = 0.0;         ///< sources weighted by phi / theta
};

inline double log_gap(double x) { return std::log(x) - 1.0 + 1.0 / x; }

template <int D>
IntervalSummary audit_entropy(const AuditContext<D>& c, const std::string& name, const TestField<D>& phi_fn,
                              std::vector<MarginRow>* rows) {
  const auto& m = c.pb->mesh;
  const auto& traj = *c.traj;
  const double tau = traj.tau;
  const int K = traj.steps();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<Eigen::VectorXd> phi(K + 1), logt(K + 1);
  for (int k = 0; k <= K; ++k) {
    phi[k] = phi_fn(m, traj.time(k));
    if (phi[k].minCoeff() < 0.0) throw std::invalid_argument("entropy audit: test field must be nonnegative");
    if (traj.states[k].theta.minCoeff() <= 0.0) {
      IntervalSummary bad;
      bad.finite = false;
      bad.min_margin = -inf;
      return bad;
    }
    logt[k] = traj.states[k].theta.array().log().matrix();
  }
  std::vector<double> state(K + 1), inc(K);
  for (int k = 0; k <= K; ++k) state[k] = (m.lumped.array() * phi[k].array() * logt[k].array()).sum();
  for (int k = 1; k <= K; ++k) {
    const auto& th = traj.states[k].theta;
    EntropyStep es;
    es.log_rate = (m.lumped.array() * (phi[k] - phi[k - 1]).array() * logt[k - 1].array()).sum();
    for (int e = 0; e < m.num_elements(); ++e) {
      const double kap = kappa(*c.model, m.element_mean(th, e));
      const auto ke = m.stiffness(e);
      const auto& v = m.elements[e];
      for (int a = 0; a < D + 1; ++a)
        for (int b = 0; b < D + 1; ++b) es.A += kap * ke(a, b) * logt[k](v[a]) * phi[k](v[b]);
      for (int a = 0; a < D + 1; ++a)
        for (int b = a + 1; b < D + 1; ++b) {
          const double w = -kap * ke(a, b);
          const double ti = th(v[a]), tj = th(v[b]);
          es.B += w * (phi[k](v[a]) * log_gap(ti / tj) + phi[k](v[b]) * log_gap(tj / ti));
        }
    }
    const Eigen::VectorXd src =
        c.dissipation[k - 1].heat_source(th, inf) + c.data[k - 1].heat + c.data[k - 1].flux;
    es.S = (src.array() * phi[k].array() / th.array()).sum();
    // The state term carries the boundary-in-time log pairings; the
    // increment gathers the rest so that margins are additive.
    inc[k - 1] = -es.log_rate + tau * es.A - tau * (es.B + es.S);
  }
  // margin(s, t) = state[t] - state[s] + sum inc, i.e. LHS "state" enters
  // with the opposite sign of the energy audits.
  std::vector<double> neg(K + 1);
  for (int k = 0; k <= K; ++k) neg[k] = -state[k];
  return interval_margins("entropy_" + name, neg, inc, [](int, int) { return 0.0; }, rows);
}

// ---------------------------------------------------------------------------
// Positivity, feasibility and the plastic selection

struct PositivityReport {
  PositivityConstants constants;
  double theta_star = 0.0;
  double min_theta = 0.0;
  double min_z = 0.0;
  double max_z = 0.0;
  double max_dz = 0.0;  ///< max over steps and vertices of z^k - z^{k-1}
  double admissibility = 0.0;
  double trace = 0.0;
  double dirichlet = 0.0;
  double max_zeta = 0.0;
  double yield_deviation = 0.0;  ///< max | |zeta| - sigma_y | over yielded elements
  int yielded = 0;
};

template <int D>
PositivityReport audit_positivity(const ProblemData<D>& pb, const MaterialModel& model,
                                  const DiscreteTrajectory<D>& traj) {
  const auto& m = pb.mesh;
  PositivityReport r;
  r.theta_star = traj.states[0].theta.minCoeff();
  r.constants = positivity_constants<D>(model, pb.T, r.theta_star);
  r.min_theta = std::numeric_limits<double>::infinity();
  r.min_z = std::numeric_limits<double>::infinity();
  r.max_z = -std::numeric_limits<double>::infinity();
  r.max_dz = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= traj.steps(); ++k) {
    const auto& s = traj.states[k];
    r.min_theta = std::min(r.min_theta, s.theta.minCoeff());
    r.min_z = std::min(r.min_z, s.z.minCoeff());
    r.max_z = std::max(r.max_z, s.z.maxCoeff());
    if (k > 0) r.max_dz = std::max(r.max_dz, (s.z - traj.states[k - 1].z).maxCoeff());
    for (int e = 0; e < m.num_elements(); ++e) {
      const SymMat<D> res = element_strain(m, e, s.u) - s.e[e] - s.p[e].sym();
      r.admissibility = std::max(r.admissibility, res.norm() / (1.0 + s.e[e].norm() + s.p[e].norm()));
      r.trace = std::max(r.trace, std::abs(s.p[e].m.trace()));
      if (k > 0) {
        const double zn = s.zeta[e].norm();
        r.max_zeta = std::max(r.max_zeta, zn);
        const auto& prev = traj.states[k - 1];
        if ((s.p[e] - prev.p[e]).norm() > 0.0) {
          ++r.yielded;
          const double sy = yield_radius(model, m.element_mean(s.z, e), m.element_mean(prev.theta, e));
          r.yield_deviation = std::max(r.yield_deviation, std::abs(zn - sy));
        }
      }
    }
    if (k > 0) {
      const Eigen::VectorXd w = step_data(pb, k, traj.tau).w;
      for (int i = 0; i < m.num_vertices(); ++i)
        if (m.dirichlet_vertex[i])
          for (int c = 0; c < D; ++c) r.dirichlet = std::max(r.dirichlet, std::abs(s.u(D * i + c) - w(D * i + c)));
    }
  }
  if (traj.steps() == 0) r.max_dz = 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// A priori norms

/// Norms of one trajectory, keyed by name.
using NormTable = std::vector<std::pair<std::string, double>>;

/// Names of the tau-weighted norms that must decay with tau.
inline bool is_weighted_norm(const std::string& n) { return n.find("gamma_weighted") != std::string::npos; }

template <int D>
NormTable apriori_norms(const ProblemData<D>& pb, const MaterialModel& model, const FractionalForm& form,
                        const DiscreteTrajectory<D>& traj) {
  const auto& m = pb.mesh;
  const double tau = traj.tau;
  const int K = traj.steps();
  const Eigen::MatrixXd vm = StepOperators<D>(m).vector_mass;
  auto vec_l2 = [&](const Eigen::VectorXd& u) { return u.dot(vm * u); };
  auto vec_grad = [&](const Eigen::VectorXd& u) {
    double s = 0.0;
    for (int e = 0; e < m.num_elements(); ++e) {
      Mat<D> g = Mat<D>::Zero();
      const auto& el = m.elements[e];
      for (int a = 0; a < D + 1; ++a)
        for (int i = 0; i < D; ++i)
          for (int j = 0; j < D; ++j) g(i, j) += u(D * el[a] + i) * m.grad[e](j, a);
      s += m.measure[e] * g.squaredNorm();
    }
    return s;
  };
  auto elem_l2 = [&](auto get) {
    double s = 0.0;
    for (int e = 0; e < m.num_elements(); ++e) s += m.measure[e] * get(e) * get(e);
    return s;
  };
  auto hs = [&](const Eigen::VectorXd& z) { return lumped_norm_sq(m, z) + form(z, z); };

  double u_linf_h1 = 0, u_h1_h1 = 0, u_max_l2 = 0, v_max_l2 = 0;
  double e_linf = 0, e_h1 = 0, e_gam = 0, p_linf = 0, p_h1 = 0, p_gam = 0;
  double z_linf_hs = 0, z_h1_l2 = 0, z_h1_hs = 0, om = 0, zeta = 0;
  double th_l1 = 0, th_h1 = 0, lt_l2 = 0, lt_h1 = 0, pw_plus = 0, pw_minus = 0, lt_var = 0, th_var = 0;
  const double mu = model.kappa_mu;
  const double alpha = 0.5 * (std::max(0.0, 2.0 - mu) + 1.0);
  Eigen::MatrixXd hs_mat = form.matrix;
  hs_mat.diagonal() += m.lumped;
  const Eigen::LDLT<Eigen::MatrixXd> hs_solver(hs_mat);

  for (int k = 0; k <= K; ++k) {
    const auto& s = traj.states[k];
    u_linf_h1 = std::max(u_linf_h1, std::sqrt(vec_l2(s.u) + vec_grad(s.u)));
    u_max_l2 = std::max(u_max_l2, std::sqrt(vec_l2(s.u)));
    const Eigen::VectorXd v = (s.u - s.u_prev_step) / tau;
    v_max_l2 = std::max(v_max_l2, std::sqrt(vec_l2(v)));
    e_linf = std::max(e_linf, std::sqrt(elem_l2([&](int e) { return s.e[e].norm(); })));
    p_linf = std::max(p_linf, std::sqrt(elem_l2([&](int e) { return s.p[e].norm(); })));
    double eg = 0, pg = 0;
    for (int e = 0; e < m.num_elements(); ++e) {
      eg += m.measure[e] * std::pow(s.e[e].norm(), model.gamma);
      pg += m.measure[e] * std::pow(s.p[e].norm(), model.gamma);
    }
    e_gam = std::max(e_gam, std::pow(eg, 1.0 / model.gamma));
    p_gam = std::max(p_gam, std::pow(pg, 1.0 / model.gamma));
    z_linf_hs = std::max(z_linf_hs, std::sqrt(hs(s.z)));
    th_l1 = std::max(th_l1, (m.lumped.array() * s.theta.array().abs()).sum());
    const Eigen::VectorXd lt = s.theta.array().log().matrix();
    lt_l2 = std::max(lt_l2, std::sqrt(lumped_norm_sq(m, lt)));
    if (k == 0) continue;
    const auto& pr = traj.states[k - 1];
    u_h1_h1 += tau * (vec_l2(s.u) + vec_grad(s.u) + vec_l2(v) + vec_grad(v));
    e_h1 += tau * elem_l2([&](int e) { return s.e[e].norm(); }) +
            elem_l2([&](int e) { return (s.e[e] - pr.e[e]).norm(); }) / tau;
    p_h1 += tau * elem_l2([&](int e) { return s.p[e].norm(); }) +
            elem_l2([&](int e) { return (s.p[e] - pr.p[e]).norm(); }) / tau;
    const Eigen::VectorXd dz = (s.z - pr.z) / tau;
    z_h1_l2 += tau * (lumped_norm_sq(m, s.z) + lumped_norm_sq(m, dz));
    z_h1_hs += tau * (hs(s.z) + hs(dz));
    om += tau * s.omega.dot(hs_solver.solve(s.omega));
    for (int e = 0; e < m.num_elements(); ++e) zeta = std::max(zeta, s.zeta[e].norm());
    th_h1 += tau * (lumped_norm_sq(m, s.theta) + gradient_norm_sq(m, s.theta));
    lt_h1 += tau * (lumped_norm_sq(m, lt) + gradient_norm_sq(m, lt));
    const Eigen::VectorXd tp = s.theta.array().pow(0.5 * (mu + alpha)).matrix();
    const Eigen::VectorXd tm = s.theta.array().pow(0.5 * (mu - alpha)).matrix();
    pw_plus += tau * (lumped_norm_sq(m, tp) + gradient_norm_sq(m, tp));
    pw_minus += tau * (lumped_norm_sq(m, tm) + gradient_norm_sq(m, tm));
    const Eigen::VectorXd ltp = pr.theta.array().log().matrix();
    lt_var += (m.lumped.array() * (lt - ltp).array().abs()).sum();
    th_var += (m.lumped.array() * (s.theta - pr.theta).array().abs()).sum();
  }
  const double wt = std::pow(tau, 1.0 / model.gamma);
  NormTable t = {
      {"u_Linf_H1", u_linf_h1},
      {"u_H1_H1", std::sqrt(u_h1_h1)},
      {"u_W1inf_L2", u_max_l2 + v_max_l2},
      {"e_Linf_L2", e_linf},
      {"e_H1_L2", std::sqrt(e_h1)},
      {"e_gamma_weighted", wt * e_gam},
      {"z_Linf_Hs", z_linf_hs},
      {"z_H1_L2", std::sqrt(z_h1_l2)},
  };
  if (model.nu > 0.0) {
    t.push_back({"z_H1_Hs", std::sqrt(z_h1_hs)});
    t.push_back({"omega_L2_Hs_dual", std::sqrt(om)});
  }
  t.insert(t.end(), {
                        {"p_Linf_L2", p_linf},
                        {"p_H1_L2", std::sqrt(p_h1)},
                        {"p_gamma_weighted", wt * p_gam},
                        {"zeta_Linf", zeta},
                        {"theta_Linf_L1", th_l1},
                        {"theta_L2_H1", std::sqrt(th_h1)},
                        {"log_theta_Linf_L2", lt_l2},
                        {"log_theta_L2_H1", std::sqrt(lt_h1)},
                        {"theta_pow_plus_L2_H1", std::sqrt(pw_plus)},
                        {"theta_pow_minus_L2_H1", std::sqrt(pw_minus)},
                        {"log_theta_variation_L1", lt_var},
                    });
  if (D == 2 && mu > 1.0 && mu < 2.0) t.push_back({"theta_variation_L1", th_var});
  return t;
}

/// Norm table over a tau family (coarsest first).
struct AprioriRow {
  std::string name;
  std::vector<double> values;
  double max = 0.0;
  double growth = 1.0;    ///< max over the family / value at the coarsest tau
  double baseline = std::numeric_limits<double>::quiet_NaN();
  bool flagged = false;   ///< growth above 1.05
  bool bounded = true;    ///< max <= 1.05 x baseline (true without a baseline)
  bool decreasing = true; ///< only checked for weighted norms
};

/// Builds the table; `baseline` maps norm names to pinned reference values.
inline std::vector<AprioriRow> apriori_table(const std::vector<NormTable>& family,
                                             const std::map<std::string, double>& baseline = {}) {
  std::vector<AprioriRow> rows;
  if (family.empty()) return rows;
  for (std::size_t i = 0; i < family[0].size(); ++i) {
    AprioriRow r;
    r.name = family[0][i].first;
    for (const auto& t : family) r.values.push_back(t[i].second);
    r.max = *std::max_element(r.values.begin(), r.values.end());
    r.growth = r.values[0] > 0.0 ? r.max / r.values[0] : 1.0;
    r.flagged = r.growth > 1.05;
    const auto it = baseline.find(r.name);
    if (it != baseline.end()) {
      r.baseline = it->second;
      r.bounded = r.max <= 1.05 * r.baseline;
    }
    if (is_weighted_norm(r.name))
      for (std::size_t j = 1; j < r.values.size(); ++j)
        r.decreasing = r.decreasing && (r.values[j] < r.values[j - 1] || r.values[j - 1] == 0.0);
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Full report

struct AuditOptions {
  bool total = true;
  bool mechanical = true;
  bool entropy = true;
  bool positivity = true;
  bool dissipation = true;
  bool keep_rows = true;
  double relative_tol = 1e-7;

  /// Parses a comma-separated list; "all" enables everything, "none" nothing.
  static AuditOptions parse(const std::string& list) {
    AuditOptions o;
    if (list.empty() || list == "all") return o;
    o.total = o.mechanical = o.entropy = o.positivity = o.dissipation = false;
    if (list == "none") return o;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item == "total") o.total = true;
      else if (item == "mechanical") o.mechanical = true;
      else if (item == "entropy") o.entropy = true;
      else if (item == "positivity") o.positivity = true;
      else if (item == "dissipation") o.dissipation = true;
      else throw std::invalid_argument("unknown audit '" + item + "'");
    }
    return o;
  }
};

inline bool bitwise_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

inline bool bitwise_equal(const StepDissipation& a, const StepDissipation& b) {
  auto same = [](double x, double y) { return std::memcmp(&x, &y, sizeof(double)) == 0; };
  return same(a.viscous, b.viscous) && same(a.damage_rate, b.damage_rate) &&
         same(a.damage_rate_sq, b.damage_rate_sq) && same(a.damage_nonlocal, b.damage_nonlocal) &&
         same(a.plastic, b.plastic) && same(a.plastic_rate_sq, b.plastic_rate_sq) &&
         same(a.damage_coupling, b.damage_coupling) && same(a.expansion_coupling, b.expansion_coupling) &&
         bitwise_equal(a.fixed_nodal, b.fixed_nodal) && bitwise_equal(a.expansion_coeff, b.expansion_coeff);
}

template <int D>
AuditReport audit_trajectory(const ProblemData<D>& pb, const MaterialModel& model, const FractionalForm& form,
                             const DiscreteTrajectory<D>& traj, const std::vector<StepDissipation>& stored = {},
                             const AuditOptions& opt = {}) {
  AuditReport rep;
  const auto ctx = make_audit_context(pb, model, form, traj, stored);
  const auto work = step_work(ctx);
  rep.energy_scale = energy_scale(ctx, work);
  const double tol = opt.relative_tol * rep.energy_scale;
  auto* rows = opt.keep_rows ? &rep.margins : nullptr;

  AuditSection run;
  run.name = "run";
  run.add("tau", traj.tau);
  run.add("steps", static_cast<double>(traj.steps()));
  run.add("complete", traj.complete ? "true" : "false");
  if (!traj.failure.empty()) run.add("failure", traj.failure);
  run.add("energy_scale", rep.energy_scale);
  run.add("tolerance", tol);
  rep.sections.push_back(run);

  auto add_interval = [&](const std::string& name, const IntervalSummary& s) {
    AuditSection sec;
    sec.name = name;
    sec.add("min_margin", s.min_margin);
    sec.add("argmin_s", static_cast<double>(s.s));
    sec.add("argmin_t", static_cast<double>(s.t));
    sec.add("intervals", static_cast<double>(s.intervals));
    rep.sections.push_back(sec);
    rep.checks.push_back({name, s.min_margin, tol, s.finite && s.min_margin >= -tol});
  };
  if (opt.total) add_interval("total_energy", audit_total_energy(ctx, work, rows));
  if (opt.mechanical) add_interval("mechanical_energy", audit_mechanical_energy(ctx, work, rows));
  if (opt.entropy)
    for (const auto& [name, fn] : standard_test_fields<D>(pb.T))
      add_interval("entropy_" + name, audit_entropy(ctx, name, fn, rows));

  if (opt.positivity) {
    const auto p = audit_positivity(pb, model, traj);
    AuditSection sec;
    sec.name = "positivity_feasibility";
    sec.add("C_bar", p.constants.C_bar);
    sec.add("C_D1", p.constants.C_D1);
    sec.add("E_norm", p.constants.E_norm);
    sec.add("C_star", p.constants.C_star);
    sec.add("theta_star", p.theta_star);
    sec.add("theta_bar", p.constants.theta_bar);
    sec.add("min_theta", p.min_theta);
    sec.add("zeta_star_empirical", p.min_z);
    sec.add("max_z", p.max_z);
    sec.add("max_dz", p.max_dz);
    sec.add("admissibility_residual", p.admissibility);
    sec.add("trace_residual", p.trace);
    sec.add("dirichlet_residual", p.dirichlet);
    sec.add("max_zeta", p.max_zeta);
    sec.add("yielded_element_steps", static_cast<double>(p.yielded));
    sec.add("yield_surface_deviation", p.yield_deviation);
    rep.sections.push_back(sec);
    rep.checks.push_back({"positivity", p.min_theta - p.constants.theta_bar, 1e-9,
                          p.min_theta >= p.constants.theta_bar - 1e-9});
    rep.checks.push_back({"damage_positive", p.min_z, 0.0, p.min_z > 0.0});
    rep.checks.push_back({"damage_at_most_one", p.max_z, 1.0, p.max_z <= 1.0});
    rep.checks.push_back({"unidirectional", p.max_dz, 0.0, p.max_dz <= 0.0});
    rep.checks.push_back({"admissibility", p.admissibility, 1e-10, p.admissibility <= 1e-10});
    rep.checks.push_back({"plastic_trace", p.trace, 1e-14, p.trace <= 1e-14});
    const double cr = model.constant_yield ? model.sigma_y_const : model.C_R;
    rep.checks.push_back({"zeta_bound", p.max_zeta, cr + 1e-12, p.max_zeta <= cr + 1e-12});
    rep.checks.push_back({"zeta_on_yield_surface", p.yield_deviation, 1e-10, p.yield_deviation <= 1e-10});
  }

  if (opt.dissipation && !stored.empty()) {
    const auto again = recompute_dissipation(pb.mesh, model, form, traj);
    int mismatched = 0;
    for (std::size_t k = 0; k < again.size(); ++k)
      if (!bitwise_equal(again[k], stored[k])) ++mismatched;
    AuditSection sec;
    sec.name = "dissipation_consistency";
    sec.add("steps", static_cast<double>(again.size()));
    sec.add("mismatched_steps", static_cast<double>(mismatched));
    rep.sections.push_back(sec);
    rep.checks.push_back({"dissipation_bitwise", static_cast<double>(mismatched), 0.0, mismatched == 0});
  }

  AuditSection pass;
  pass.name = "checks";
  for (const auto& c : rep.checks) pass.add(c.name, c.pass ? "PASS" : "FAIL");
  rep.sections.push_back(pass);
  return rep;
}

}  // namespace tvpd
