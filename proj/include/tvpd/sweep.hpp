#pragma once
/// @file sweep.hpp
/// @brief Runs over a family of time steps: a priori norm tables and
/// self-convergence of the final state.

#include "tvpd/audit.hpp"
#include "tvpd/stepper.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <future>
#include <vector>

namespace tvpd {

template <int D>
struct SweepResult {
  std::vector<double> taus;
  std::vector<RunOutput<D>> runs;
  std::vector<NormTable> norms;
  std::vector<AprioriRow> table;
  /// Final-state differences between consecutive step sizes and their ratios.
  std::vector<double> differences;
  std::vector<double> ratios;
};

/// Distance of two final states: L2 norms of u, e, p, z and theta.
template <int D>
double final_state_distance(const Mesh<D>& m, const FieldState<D>& a, const FieldState<D>& b) {
  const Eigen::MatrixXd vm = StepOperators<D>(m).vector_mass;
  const Eigen::VectorXd du = a.u - b.u;
  double d = std::sqrt(du.dot(vm * du));
  double e2 = 0.0, p2 = 0.0;
  for (int e = 0; e < m.num_elements(); ++e) {
    e2 += m.measure[e] * (a.e[e] - b.e[e]).norm() * (a.e[e] - b.e[e]).norm();
    p2 += m.measure[e] * (a.p[e] - b.p[e]).norm() * (a.p[e] - b.p[e]).norm();
  }
  d += std::sqrt(e2) + std::sqrt(p2);
  d += std::sqrt(lumped_norm_sq(m, a.z - b.z)) + std::sqrt(lumped_norm_sq(m, a.theta - b.theta));
  return d;
}

/// Runs every step size concurrently; the order of `taus` is kept.
template <int D>
SweepResult<D> sweep_tau(const ProblemData<D>& pb, const MaterialModel& model, const FractionalForm& form,
                         const std::vector<double>& taus, const SolverSettings& cfg = {}) {
  SweepResult<D> r;
  r.taus = taus;
  std::vector<std::future<RunOutput<D>>> jobs;
  for (double t : taus) jobs.push_back(std::async(std::launch::async, [&, t] { return run(pb, model, form, t, cfg); }));
  for (auto& j : jobs) r.runs.push_back(j.get());
  for (const auto& run_out : r.runs) r.norms.push_back(apriori_norms(pb, model, form, run_out.traj));
  r.table = apriori_table(r.norms);
  for (std::size_t i = 0; i + 1 < r.runs.size(); ++i) {
    const auto& a = r.runs[i].traj;
    const auto& b = r.runs[i + 1].traj;
    if (!a.complete || !b.complete) break;
    r.differences.push_back(final_state_distance(pb.mesh, a.states.back(), b.states.back()));
  }
  for (std::size_t i = 0; i + 1 < r.differences.size(); ++i)
    r.ratios.push_back(r.differences[i] > 0.0 ? r.differences[i + 1] / r.differences[i] : 0.0);
  return r;
}

}  // namespace tvpd
