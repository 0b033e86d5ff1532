#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "plap/errors.hpp"
#include "plap/grid.hpp"
#include "plap/norms.hpp"
#include "plap/prox_solver.hpp"

namespace plap {

struct StepObservables {
  double t = 0;
  double dirichlet = 0;  // D_p(u)
  double l1 = 0, l2 = 0, l4 = 0, linf = 0;
  ProxDiagnostics diag;
};

// One epsilon-approximate solution: uniform partition, snapshots, observables.
struct Trajectory {
  const MatrixWeightField* field = nullptr;
  double p = 2;
  double T = 0;
  int n = 0;
  std::vector<double> times;           // n+1 entries
  std::vector<GridFunction> snapshots; // n+1 entries
  std::vector<StepObservables> observables;

  double tau() const { return T / n; }
  const GridFunction& initial() const { return snapshots.front(); }

  bool compatible(const Trajectory& o) const {
    return field == o.field && p == o.p && T == o.T && n == o.n;
  }
};

namespace detail {
inline StepObservables observe(const GridFunction& u, double t, double p,
                               const MatrixWeightField& field, const ProxDiagnostics& d) {
  StepObservables o;
  o.t = t;
  o.dirichlet = dirichlet_energy(u, p, field);
  o.l1 = norm_Lq_v(u, 1, field);
  o.l2 = norm_Lq_v(u, 2, field);
  o.l4 = norm_Lq_v(u, 4, field);
  o.linf = norm_Lq_v(u, kInf, field);
  o.diag = d;
  return o;
}
}  // namespace detail

// March u_{k} = prox(u_{k-1}, tau = T/n), k = 1..n.
inline Trajectory evolve(const GridFunction& u0, double T, int n, double p,
                         const MatrixWeightField& field, const InnerSolverConfig& cfg) {
  if (n < 1) throw InvalidParameters("evolve needs n >= 1");
  if (!(T > 0)) throw InvalidParameters("evolve needs T > 0");
  if (!u0.zero_boundary()) throw InvalidParameters("initial datum must vanish on the boundary");
  Trajectory traj;
  traj.field = &field;
  traj.p = p;
  traj.T = T;
  traj.n = n;
  const double tau = T / n;
  traj.snapshots.reserve(n + 1);
  traj.snapshots.push_back(u0);
  traj.times.push_back(0.0);
  traj.observables.push_back(detail::observe(u0, 0.0, p, field, {}));
  for (int k = 1; k <= n; ++k) {
    ProxProblem pb;
    pb.u_prev = &traj.snapshots.back();
    pb.tau = tau;
    pb.p = p;
    pb.field = &field;
    ProxDiagnostics diag;
    GridFunction u;
    try {
      u = prox_step(pb, cfg, &diag);
    } catch (const NonConvergence& e) {
      throw NonConvergence("step " + std::to_string(k) + ": " + e.what(), e.final_residual);
    }
    const double t = k * tau;
    traj.observables.push_back(detail::observe(u, t, p, field, diag));
    traj.snapshots.push_back(std::move(u));
    traj.times.push_back(t);
  }
  return traj;
}

// Piecewise-constant rule: u(t) = u_k on (t_{k-1}, t_k], u(0) = u_0.
inline const GridFunction& evaluate(const Trajectory& traj, double t) {
  if (t < 0 || t > traj.T * (1 + 1e-12)) throw OutOfRange("time outside [0, T]");
  if (t <= 0) return traj.snapshots.front();
  const double tau = traj.tau();
  int k = static_cast<int>(std::ceil(t / tau - 1e-12));
  k = std::min(std::max(k, 1), traj.n);
  return traj.snapshots[k];
}

// Linear-in-time interpolant between snapshots.
inline GridFunction evaluate_interpolant(const Trajectory& traj, double t) {
  if (t < 0 || t > traj.T * (1 + 1e-12)) throw OutOfRange("time outside [0, T]");
  const double tau = traj.tau();
  if (t <= 0) return traj.snapshots.front();
  int k = static_cast<int>(std::ceil(t / tau - 1e-12));
  k = std::min(std::max(k, 1), traj.n);
  const double theta = (t - traj.times[k - 1]) / tau;
  GridFunction out = traj.snapshots[k - 1];
  GridFunction diff = traj.snapshots[k];
  diff -= traj.snapshots[k - 1];
  diff *= theta;
  out += diff;
  return out;
}

struct ConvergenceReport {
  std::vector<int> steps;          // n for each refinement level
  std::vector<double> distances;   // max_t ||u_n(t) - u_{2n}(t)||_{L^2_v}
  bool cauchy = false;
  double tol = 0;
};

// Double n until consecutive piecewise-constant trajectories are tol-close
// in L^2_v, compared on the coarse partition.
inline std::pair<Trajectory, ConvergenceReport> refine_until_cauchy(
    const GridFunction& u0, double T, double p, const MatrixWeightField& field,
    const InnerSolverConfig& cfg, double tol, int n_start = 8, int n_cap = 4096) {
  if (!(tol > 0)) throw InvalidParameters("refine_until_cauchy needs tol > 0");
  ConvergenceReport rep;
  rep.tol = tol;
  Trajectory coarse = evolve(u0, T, n_start, p, field, cfg);
  for (int n = n_start; 2 * n <= n_cap; n *= 2) {
    Trajectory fine = evolve(u0, T, 2 * n, p, field, cfg);
    double dist = 0;
    for (int k = 1; k <= n; ++k) {
      GridFunction diff = coarse.snapshots[k];
      diff -= fine.snapshots[2 * k];
      dist = std::max(dist, norm_L2v(diff, field));
    }
    rep.steps.push_back(n);
    rep.distances.push_back(dist);
    coarse = std::move(fine);
    if (dist <= tol) {
      rep.cauchy = true;
      return {std::move(coarse), rep};
    }
  }
  return {std::move(coarse), rep};
}

struct AprioriReport {
  bool lq_nonincreasing = false;   // q in {1, 2, 4, inf}
  bool energy_nonincreasing = false;
  bool gradient_bound = false;     // sum_k tau int |sqrtQ grad u_k|^p <= 1/2 ||u0||^2
  double gradient_lhs = 0;
  double gradient_rhs = 0;
  double slack = 0;
  bool pass() const { return lq_nonincreasing && energy_nonincreasing && gradient_bound; }
};

// Trajectory-level a-priori estimates, with slack scaled to the inner tolerance.
inline AprioriReport trajectory_checks(const Trajectory& traj, double inner_tol = 1e-9) {
  const MatrixWeightField& field = *traj.field;
  AprioriReport rep;
  const double scale = norm_L2v(traj.initial(), field) + traj.initial().max_abs();
  rep.slack = 10 * inner_tol * (scale + 1);
  rep.lq_nonincreasing = true;
  rep.energy_nonincreasing = true;
  const double qs[4] = {1, 2, 4, kInf};
  std::array<double, 4> prev{};
  for (int j = 0; j < 4; ++j) prev[j] = norm_Lq_v(traj.snapshots[0], qs[j], field);
  double prev_energy = traj.observables[0].dirichlet;
  double lhs = 0;
  const double tau = traj.tau();
  for (int k = 1; k <= traj.n; ++k) {
    for (int j = 0; j < 4; ++j) {
      const double cur = norm_Lq_v(traj.snapshots[k], qs[j], field);
      if (cur > prev[j] + rep.slack) rep.lq_nonincreasing = false;
      prev[j] = cur;
    }
    const double energy = traj.observables[k].dirichlet;
    if (energy > prev_energy + rep.slack) rep.energy_nonincreasing = false;
    prev_energy = energy;
    lhs += tau * traj.p * traj.observables[k].dirichlet;  // tau * int |sqrtQ grad u_k|^p
  }
  const double u0sq = inner_L2v(traj.initial(), traj.initial(), field);
  rep.gradient_lhs = lhs;
  rep.gradient_rhs = 0.5 * u0sq;
  rep.gradient_bound = lhs <= 0.5 * u0sq * (1 + 1e-6) + rep.slack;
  return rep;
}

struct ComparisonSeries {
  std::vector<double> s;  // v-mass of (u1 - u2)^+ per partition time
  bool nonincreasing_from_start = false;  // s_k <= s_0 (1 + slack)
  double slack = 0;
};

inline ComparisonSeries compare(const Trajectory& a, const Trajectory& b,
                                double inner_tol = 1e-9) {
  if (!a.compatible(b)) throw IncompatibleTrajectories("trajectories differ in scenario");
  ComparisonSeries out;
  const MatrixWeightField& field = *a.field;
  const double scale =
      norm_L2v(a.initial(), field) + norm_L2v(b.initial(), field) + 1;
  out.slack = 10 * inner_tol * scale;
  out.s.reserve(a.n + 1);
  for (int k = 0; k <= a.n; ++k) {
    GridFunction diff = a.snapshots[k];
    diff -= b.snapshots[k];
    out.s.push_back(positive_part_mass(diff, field));
  }
  out.nonincreasing_from_start = true;
  for (int k = 1; k <= a.n; ++k)
    if (out.s[k] > out.s[0] + out.slack) out.nonincreasing_from_start = false;
  return out;
}

}  // namespace plap
