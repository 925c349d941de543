#pragma once
/// @file damage_step.hpp
/// @brief Damage update: minimization of the incremental functional over
/// z <= z_prev by a projected Newton method.

#include "tvpd/constitutive.hpp"
#include "tvpd/fractional.hpp"
#include "tvpd/mesh.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvpd {

/// Data of the damage step. Zeroth-order terms use vertex quadrature with
/// weights m_i; C(z) e:e uses z at the barycenter.
struct DamageProblem {
  Eigen::VectorXd mass;        ///< m_i
  Eigen::MatrixXd A;           ///< a_s matrix
  double tau = 1.0;
  double nu = 0.0;
  int dim = 1;
  /// Elements: vertex lists and weights |E| C0 e_prev : e_prev.
  std::vector<std::vector<int>> elements;
  std::vector<double> elastic_weight;
  Eigen::VectorXd z_prev;
  Eigen::VectorXd theta_prev;
  const MaterialModel* model = nullptr;
};

template <int D>
DamageProblem make_damage_problem(const Mesh<D>& mesh, const FractionalForm& form,
                                  const MaterialModel& model, const Eigen::VectorXd& z_prev,
                                  const std::vector<SymMat<D>>& e_prev,
                                  const Eigen::VectorXd& theta_prev, double tau) {
  DamageProblem p;
  p.mass = mesh.lumped;
  p.A = form.matrix;
  p.tau = tau;
  p.nu = model.nu;
  p.dim = D;
  p.z_prev = z_prev;
  p.theta_prev = theta_prev;
  p.model = &model;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    p.elements.emplace_back(mesh.elements[e].begin(), mesh.elements[e].end());
    p.elastic_weight.push_back(mesh.measure[e] *
                               frobenius(model.C0.apply(e_prev[e]), e_prev[e]));
  }
  return p;
}

/// Incremental damage functional; +infinity outside z > 0.
inline double damage_objective(const DamageProblem& p, const Eigen::VectorXd& z) {
  const MaterialModel& m = *p.model;
  if (!(z.minCoeff() > 0.0)) return std::numeric_limits<double>::infinity();
  const Eigen::VectorXd dz = z - p.z_prev;
  double j = 0.0;
  for (int i = 0; i < z.size(); ++i) {
    const auto w = damage_potential(m, p.dim, z(i));
    j += p.mass(i) * (-dz(i) + dz(i) * dz(i) / (2.0 * p.tau) + w.beta -
                      m.lambda_W * p.z_prev(i) * z(i) - p.theta_prev(i) * z(i));
  }
  j += 0.5 * p.nu / p.tau * dz.dot(p.A * dz) + 0.5 * z.dot(p.A * z);
  for (std::size_t e = 0; e < p.elements.size(); ++e) {
    double zb = 0.0;
    for (int i : p.elements[e]) zb += z(i);
    zb /= static_cast<double>(p.elements[e].size());
    j += 0.5 * g_C(m, zb) * p.elastic_weight[e];
  }
  return j;
}

/// Gradient of the functional on the feasible set (R contributes -m_i).
inline Eigen::VectorXd damage_gradient(const DamageProblem& p, const Eigen::VectorXd& z) {
  const MaterialModel& m = *p.model;
  const Eigen::VectorXd dz = z - p.z_prev;
  Eigen::VectorXd g(z.size());
  for (int i = 0; i < z.size(); ++i) {
    const auto w = damage_potential(m, p.dim, z(i));
    g(i) = p.mass(i) * (-1.0 + dz(i) / p.tau + w.dbeta - m.lambda_W * p.z_prev(i) - p.theta_prev(i));
  }
  g += (p.nu / p.tau) * (p.A * dz) + p.A * z;
  for (std::size_t e = 0; e < p.elements.size(); ++e) {
    const double n = static_cast<double>(p.elements[e].size());
    double zb = 0.0;
    for (int i : p.elements[e]) zb += z(i);
    zb /= n;
    const double c = 0.5 * dg_C(m, zb) * p.elastic_weight[e] / n;
    for (int i : p.elements[e]) g(i) += c;
  }
  return g;
}

inline Eigen::MatrixXd damage_hessian(const DamageProblem& p, const Eigen::VectorXd& z) {
  const MaterialModel& m = *p.model;
  Eigen::MatrixXd h = (1.0 + p.nu / p.tau) * p.A;
  for (int i = 0; i < z.size(); ++i)
    h(i, i) += p.mass(i) * (1.0 / p.tau + damage_potential(m, p.dim, z(i)).d2beta);
  for (std::size_t e = 0; e < p.elements.size(); ++e) {
    const double n = static_cast<double>(p.elements[e].size());
    double zb = 0.0;
    for (int i : p.elements[e]) zb += z(i);
    zb /= n;
    const double c = 0.5 * d2g_C(m, zb) * p.elastic_weight[e] / (n * n);
    for (int i : p.elements[e])
      for (int j : p.elements[e]) h(i, j) += c;
  }
  return h;
}

struct DamageResult {
  Eigen::VectorXd z;
  /// Selection in dR(dz), as a dual vector: -m_i on decreasing vertices.
  Eigen::VectorXd omega;
  int iterations = 0;
  /// Projected-gradient norm, scaled by the vertex weights.
  double residual = 0.0;
  double objective = 0.0;
  int active = 0;
};

/// Projected gradient at z for the bound z <= z_prev, divided by m_i.
inline double damage_projected_residual(const DamageProblem& p, const Eigen::VectorXd& z,
                                        const Eigen::VectorXd& g) {
  double r = 0.0;
  for (int i = 0; i < z.size(); ++i) {
    // Step along -g projected onto z <= z_prev.
    const double target = std::min(p.z_prev(i), z(i) - g(i) / p.mass(i));
    r = std::max(r, std::abs(z(i) - target));
  }
  return r;
}

/// Minimizes the damage functional. Two-metric projected Newton: vertices at
/// the bound whose gradient pushes upward are frozen, the rest take a Newton
/// step; the step is projected and backtracked with an Armijo test.
/// Falls back to a projected gradient step when Newton stalls.
inline DamageResult solve_damage_problem(const DamageProblem& p, double tol = 1e-12,
                                         int max_iter = 200) {
  const int n = static_cast<int>(p.z_prev.size());
  if (!(p.z_prev.minCoeff() > 0.0)) throw std::domain_error("damage step: z_prev must be positive");
  DamageResult res;
  Eigen::VectorXd z = p.z_prev;
  double f = damage_objective(p, z);
  const double scale = 1.0 + p.theta_prev.cwiseAbs().maxCoeff() + 1.0 / p.tau;

  auto project = [&](const Eigen::VectorXd& x) { return x.cwiseMin(p.z_prev); };

  for (int it = 0; it <= max_iter; ++it) {
    const Eigen::VectorXd g = damage_gradient(p, z);
    const double r = damage_projected_residual(p, z, g);
    res.iterations = it;
    res.residual = r;
    if (r <= tol * scale) break;
    if (it == max_iter) throw std::runtime_error("damage step: no convergence");

    const double eps = std::min(1e-3, r);
    std::vector<int> freev;
    std::vector<char> fixed(n, 0);
    for (int i = 0; i < n; ++i) {
      if (z(i) >= p.z_prev(i) - eps && g(i) <= 0.0)
        fixed[i] = 1;
      else
        freev.push_back(i);
    }
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    const Eigen::MatrixXd h = damage_hessian(p, z);
    // Vertices near the bound take a diagonally scaled gradient step, which
    // the projection clips onto the bound.
    for (int i = 0; i < n; ++i)
      if (fixed[i]) d(i) = -g(i) / h(i, i);
    if (!freev.empty()) {
      const int nf = static_cast<int>(freev.size());
      Eigen::MatrixXd hf(nf, nf);
      Eigen::VectorXd gf(nf);
      for (int a = 0; a < nf; ++a) {
        gf(a) = g(freev[a]);
        for (int b = 0; b < nf; ++b) hf(a, b) = h(freev[a], freev[b]);
      }
      const Eigen::VectorXd df = -hf.ldlt().solve(gf);
      for (int a = 0; a < nf; ++a) d(freev[a]) = df(a);
    }

    auto line_search = [&](const Eigen::VectorXd& dir, Eigen::VectorXd& znew, double& fnew) {
      double t = 1.0;
      for (int ls = 0; ls < 50; ++ls) {
        znew = project(z + t * dir);
        fnew = damage_objective(p, znew);
        if (!std::isfinite(fnew)) {
          t *= 0.5;
          continue;
        }
        const double pred = g.dot(znew - z);
        // A predicted decrease below the rounding level of f is accepted.
        if (-pred <= 1e-13 * (1.0 + std::abs(f)) || fnew <= f + 1e-4 * pred) return true;
        t *= 0.5;
      }
      return false;
    };

    Eigen::VectorXd znew;
    double fnew;
    bool ok = d.squaredNorm() > 0.0 && g.dot(project(z + d) - z) < 0.0 && line_search(d, znew, fnew);
    if (!ok) {
      const Eigen::VectorXd dg = -g.cwiseQuotient(p.mass) / (1.0 / p.tau + 1.0);
      ok = line_search(dg, znew, fnew);
    }
    if (!ok) {
      // No decrease representable in floating point: accept if stationary to rounding.
      if (r <= 1e3 * tol * scale) break;
      throw std::runtime_error("damage step: line search failed after 50 retries");
    }
    z = znew;
    f = fnew;
  }

  res.z = z;
  res.objective = f;
  const Eigen::VectorXd g = damage_gradient(p, z);
  // Euler-Lagrange: omega + (gradient of the smooth part) = 0, and the smooth
  // part's gradient is g + m.
  res.omega = -(g + p.mass);
  for (int i = 0; i < n; ++i) {
    if (z(i) < p.z_prev(i)) {
      res.omega(i) = -p.mass(i);
    } else {
      ++res.active;
    }
  }
  return res;
}

}  // namespace tvpd
