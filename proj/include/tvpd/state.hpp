#pragma once
/// @file state.hpp
/// @brief Discrete states, trajectories and their time interpolants.

#include "tvpd/mesh.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvpd {

/// All unknowns at one time level.
template <int D>
struct FieldState {
  Eigen::VectorXd u;            ///< u^k, interleaved
  Eigen::VectorXd u_prev_step;  ///< u^{k-1}
  std::vector<SymMat<D>> e;
  std::vector<DevMat<D>> p;
  Eigen::VectorXd z;
  Eigen::VectorXd theta;
  Eigen::VectorXd omega;        ///< damage-rule selection, dual (nodal) vector
  std::vector<DevMat<D>> zeta;
  std::vector<SymMat<D>> sigma;
};

/// Solver statistics of one step.
struct StepStats {
  int damage_iterations = 0;
  double damage_residual = 0.0;
  int fixed_point_iterations = 0;
  int mechanics_iterations = 0;
  int heat_iterations = 0;
  double momentum_residual = 0.0;
  double heat_residual = 0.0;
  double truncation_level = 0.0;
  int yielded_elements = 0;
};

/// Sequence of states at step size tau, including the initial one.
template <int D>
struct DiscreteTrajectory {
  double tau = 0.0;
  std::vector<FieldState<D>> states;
  std::vector<StepStats> stats;  ///< stats[k-1] belongs to step k
  bool complete = false;
  std::string failure;

  int steps() const { return static_cast<int>(states.size()) - 1; }
  double time(int k) const { return k * tau; }

  /// Step index k with t in (t_{k-1}, t_k]; 0 for t <= 0.
  int right_index(double t) const {
    if (t <= 0.0) return 0;
    const int k = static_cast<int>(std::ceil(t / tau - 1e-12));
    return std::min(k, steps());
  }

  // Interpolants of a nodal field selected by `get`. At node times all three
  // coincide with the stored state.

  template <class Get>
  Eigen::VectorXd piecewise_constant_right(double t, Get get) const {
    return get(states[right_index(t)]);
  }

  template <class Get>
  Eigen::VectorXd piecewise_constant_left(double t, Get get) const {
    const int k = right_index(t);
    // At a node time t_k the left interpolant also returns state k.
    if (std::abs(t - time(k)) <= 1e-12 * tau) return get(states[k]);
    return get(states[std::max(k - 1, 0)]);
  }

  template <class Get>
  Eigen::VectorXd piecewise_linear(double t, Get get) const {
    const int k = right_index(t);
    if (k == 0) return get(states[0]);
    const double w = (t - time(k - 1)) / tau;
    return (1.0 - w) * get(states[k - 1]) + w * get(states[k]);
  }
};

/// Discrete summation by parts:
///   sum_k tau <v^k, (h^k - h^{k-1})/tau>
///     = <v^K, h^K> - <v^0, h^0> - sum_k tau <(v^k - v^{k-1})/tau, h^{k-1}>.
/// Returns (left side, right side).
inline std::pair<double, double> by_parts_sides(const std::vector<Eigen::VectorXd>& v,
                                                const std::vector<Eigen::VectorXd>& h,
                                                double tau) {
  if (v.size() != h.size() || v.empty()) throw std::invalid_argument("by_parts: sequence mismatch");
  const std::size_t K = v.size() - 1;
  double lhs = 0.0, sum = 0.0;
  for (std::size_t k = 1; k <= K; ++k) {
    lhs += tau * v[k].dot((h[k] - h[k - 1]) / tau);
    sum += tau * ((v[k] - v[k - 1]) / tau).dot(h[k - 1]);
  }
  const double rhs = v[K].dot(h[K]) - v[0].dot(h[0]) - sum;
  return {lhs, rhs};
}

}  // namespace tvpd
