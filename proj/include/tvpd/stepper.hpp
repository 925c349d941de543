#pragma once
/// @file stepper.hpp
/// @brief Trajectory driver: damage step, then the coupled block, for
/// k = 1..K.

#include "tvpd/constitutive.hpp"
#include "tvpd/coupled_step.hpp"
#include "tvpd/damage_step.hpp"
#include "tvpd/dissipation.hpp"
#include "tvpd/fractional.hpp"
#include "tvpd/problem.hpp"
#include "tvpd/state.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvpd {

/// Trajectory together with the per-step dissipation used by the heat
/// equation.
template <int D>
struct RunOutput {
  DiscreteTrajectory<D> traj;
  std::vector<StepDissipation> dissipation;  ///< dissipation[k-1] belongs to step k
};

/// Number of steps for horizon T; T must be an integer multiple of tau.
inline int step_count(double T, double tau) {
  if (!(tau > 0.0) || !(T > 0.0)) throw std::invalid_argument("time step and horizon must be positive");
  const double r = T / tau;
  const int K = static_cast<int>(std::llround(r));
  if (K < 1 || std::abs(r - K) > 1e-9 * r)
    throw std::invalid_argument("horizon T is not an integer multiple of tau");
  return K;
}

/// Checks the initial data and returns the initial state, with
/// e0 = eps(u0) - p0 and u^{-1} = u0 - tau v0.
template <int D>
FieldState<D> initial_state(const ProblemData<D>& pb, const MaterialModel& model, double tau) {
  const auto& m = pb.mesh;
  const int nv = m.num_vertices(), ne = m.num_elements();
  if (pb.u0.size() != m.num_dofs() || pb.v0.size() != m.num_dofs())
    throw std::invalid_argument("initial displacement/velocity size mismatch");
  if (pb.z0.size() != nv || pb.theta0.size() != nv)
    throw std::invalid_argument("initial damage/temperature size mismatch");
  if (static_cast<int>(pb.p0.size()) != ne) throw std::invalid_argument("initial plastic strain size mismatch");
  for (int i = 0; i < nv; ++i) {
    if (!(pb.z0(i) > 0.0) || pb.z0(i) > 1.0)
      throw std::invalid_argument("initial damage must lie in (0, 1] (vertex " + std::to_string(i) + ")");
    if (!(pb.theta0(i) > 0.0))
      throw std::invalid_argument("initial temperature must be positive (vertex " + std::to_string(i) + ")");
  }
  const Eigen::VectorXd w0 = pb.dirichlet_field(pb.w_profile.value(0.0));
  for (int i = 0; i < nv; ++i)
    if (m.dirichlet_vertex[i])
      for (int c = 0; c < D; ++c)
        if (std::abs(pb.u0(D * i + c) - w0(D * i + c)) > 1e-12 * (1.0 + std::abs(w0(D * i + c))))
          throw std::invalid_argument("initial displacement does not match the Dirichlet datum at vertex " +
                                      std::to_string(i));
  (void)model;
  FieldState<D> s;
  s.u = pb.u0;
  s.u_prev_step = pb.u0 - tau * pb.v0;
  s.p = pb.p0;
  s.e.resize(ne);
  for (int e = 0; e < ne; ++e) s.e[e] = element_strain(m, e, pb.u0) - s.p[e].sym();
  s.z = pb.z0;
  s.theta = pb.theta0;
  s.omega = Eigen::VectorXd::Zero(nv);
  s.zeta.assign(ne, DevMat<D>());
  s.sigma.assign(ne, SymMat<D>());
  return s;
}

/// Advances the scheme over [0, T]. A failing step ends the run; the
/// states computed so far are kept and `failure` holds the reason.
template <int D>
RunOutput<D> run(const ProblemData<D>& pb, const MaterialModel& model, const FractionalForm& form,
                 double tau, const SolverSettings& cfg = {}) {
  const int K = step_count(pb.T, tau);
  RunOutput<D> out;
  auto& traj = out.traj;
  traj.tau = tau;
  traj.states.push_back(initial_state(pb, model, tau));
  const StepOperators<D> ops(pb.mesh);

  for (int k = 1; k <= K; ++k) {
    const FieldState<D>& prev = traj.states.back();
    StepStats st;
    try {
      const StepData<D> data = step_data(pb, k, tau);
      const auto dp = make_damage_problem(pb.mesh, form, model, prev.z, prev.e, prev.theta, tau);
      const auto dr = solve_damage_problem(dp);
      st.damage_iterations = dr.iterations;
      st.damage_residual = dr.residual;

      auto cr = solve_coupled_step(pb.mesh, model, form, ops, prev, prev.u_prev_step, dr.z, data, tau,
                                   pb.prescribed_temperature, cfg);
      st.fixed_point_iterations = cr.fixed_point_iterations;
      st.mechanics_iterations = cr.mechanics_iterations;
      st.heat_iterations = cr.heat_iterations;
      st.momentum_residual = cr.mech.residual;
      st.heat_residual = cr.heat_residual;
      st.truncation_level = cr.M;
      st.yielded_elements = cr.mech.yielded;

      FieldState<D> next;
      next.u = std::move(cr.mech.u);
      next.u_prev_step = prev.u;
      next.e = std::move(cr.mech.e);
      next.p = std::move(cr.mech.p);
      next.z = dr.z;
      next.theta = std::move(cr.theta);
      next.omega = dr.omega;
      next.zeta = std::move(cr.mech.zeta);
      next.sigma = std::move(cr.mech.sigma);
      out.dissipation.push_back(std::move(cr.dissipation));
      traj.stats.push_back(st);
      traj.states.push_back(std::move(next));
    } catch (const std::exception& e) {
      traj.failure = "step " + std::to_string(k) + ": " + e.what();
      return out;
    }
  }
  traj.complete = true;
  return out;
}

/// Recomputes the dissipation of every step from the stored states.
template <int D>
std::vector<StepDissipation> recompute_dissipation(const Mesh<D>& mesh, const MaterialModel& model,
                                                   const FractionalForm& form,
                                                   const DiscreteTrajectory<D>& traj) {
  std::vector<StepDissipation> out;
  const double M = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= traj.steps(); ++k) {
    const auto& s = traj.states[k];
    auto d = assemble_dissipation(mesh, model, form, traj.states[k - 1], s.z, s.e, s.p, traj.tau);
    d.set_expansion(s.theta, M);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace tvpd
