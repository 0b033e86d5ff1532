#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "plap/errors.hpp"
#include "plap/evolution.hpp"
#include "plap/grid.hpp"
#include "plap/norms.hpp"
#include "plap/rng.hpp"

namespace plap {

struct DecayParameters {
  double p = 0, q0 = 0, sigma = 0;
  double sigma_prime = 0;  // sigma/(sigma-1)
  double q_c = 0;          // sigma'(2-p)
  double beta = 0, gamma = 0;
};

// beta = sigma'/(sigma'(p-2)+q0), gamma = q0/(sigma'(p-2)+q0).
inline DecayParameters decay_parameters(double p, double q0, double sigma) {
  if (!(sigma > 1)) throw InvalidParameters("decay parameters need sigma > 1");
  if (!(q0 >= 1)) throw InvalidParameters("decay parameters need q0 >= 1");
  DecayParameters d;
  d.p = p;
  d.q0 = q0;
  d.sigma = sigma;
  d.sigma_prime = sigma / (sigma - 1);
  d.q_c = d.sigma_prime * (2 - p);
  if (!(q0 > d.q_c)) throw InvalidParameters("decay parameters need q0 > q_c = sigma'(2-p)");
  const double denom = d.sigma_prime * (p - 2) + q0;
  d.beta = d.sigma_prime / denom;
  d.gamma = q0 / denom;
  return d;
}

struct DecayFitReport {
  std::vector<double> t;
  std::vector<double> c;       // ||u(t)||_inf t^beta / ||u0||_{q0}^gamma
  double c_sup = 0;            // over the whole partition, t > 0
  double c_sup_window = 0;     // over [t_lo, t_hi]
  double loglog_slope = 0;     // least-squares slope of log ||u||_inf vs log t on the window
  double t_lo = 0, t_hi = 0;
};

inline DecayFitReport ultracontractive_check(const Trajectory& traj,
                                             const DecayParameters& params,
                                             double window_lo = -1, double window_hi = -1) {
  const MatrixWeightField& field = *traj.field;
  const double u0q = norm_Lq_v(traj.initial(), params.q0, field);
  if (u0q == 0.0) throw UndefinedRatio("ultracontractive check needs u0 != 0");
  DecayFitReport rep;
  rep.t_lo = window_lo > 0 ? window_lo : 0.05 * traj.T;
  rep.t_hi = window_hi > 0 ? window_hi : traj.T;
  const double denom = std::pow(u0q, params.gamma);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int nfit = 0;
  for (int k = 1; k <= traj.n; ++k) {
    const double t = traj.times[k];
    const double linf = traj.observables[k].linf;
    const double c = linf * std::pow(t, params.beta) / denom;
    rep.t.push_back(t);
    rep.c.push_back(c);
    rep.c_sup = std::max(rep.c_sup, c);
    if (t >= rep.t_lo && t <= rep.t_hi) {
      rep.c_sup_window = std::max(rep.c_sup_window, c);
      if (linf > 0) {
        const double x = std::log(t), y = std::log(linf);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
        ++nfit;
      }
    }
  }
  if (nfit >= 2) {
    const double det = nfit * sxx - sx * sx;
    if (det != 0) rep.loglog_slope = (nfit * sxy - sx * sy) / det;
  }
  return rep;
}

struct ExtinctionResult {
  bool detected = false;
  double t_ext = 0;
  double eps_ext = 0;
  double T0 = 0;          // theoretical upper bound on the extinction time
  double h = 0;
  double q_used = 0;      // q_c in the primary branch, the fallback q0 otherwise
  bool fallback = false;  // q_c <= 1 branch
  bool within_bound = false;
};

// Extinction detection against the bound T0 = h^p sigma' M_p^p / (q_c(q_c-1))
// * ||u0||_{q_c}^{q_c/sigma'}; for q_c <= 1 the fallback integrates
// dY/dt <= -K Y^{(q0+p-2)/q0} with the v(Omega)-dependent constant.
inline ExtinctionResult extinction_analysis(const Trajectory& traj,
                                            const DecayParameters& params, double M_p,
                                            double eps_ext, double slack = 1e-3,
                                            double fallback_q0 = 1.5) {
  const double p = traj.p;
  if (!(p < 2)) throw NotApplicable("extinction bound needs 1 < p < 2");
  if (!(M_p > 0)) throw InvalidParameters("extinction bound needs M_p > 0");
  const MatrixWeightField& field = *traj.field;
  ExtinctionResult res;
  res.eps_ext = eps_ext;
  const double q_c = params.q_c;
  if (q_c > 1) {
    res.q_used = q_c;
    res.h = (q_c + p - 2) / p;
    res.T0 = std::pow(res.h, p) * params.sigma_prime * std::pow(M_p, p) / (q_c * (q_c - 1)) *
             std::pow(norm_Lq_v(traj.initial(), q_c, field), q_c / params.sigma_prime);
  } else {
    res.fallback = true;
    const double q0 = fallback_q0;
    res.q_used = q0;
    res.h = (q0 + p - 2) / p;
    const double vmass = field.v_mass();
    const double K = q0 * (q0 - 1) /
                     (std::pow(M_p, p) * std::pow(res.h, p) *
                      std::pow(vmass, (q0 - q_c) / (q0 * params.sigma_prime)));
    const double a = (q0 + p - 2) / q0;  // < 1 for p < 2
    const double Y0 = std::pow(norm_Lq_v(traj.initial(), q0, field), q0);
    res.T0 = std::pow(Y0, 1 - a) / (K * (1 - a));
  }
  if (norm_Lq_v(traj.initial(), kInf, field) == 0.0) {
    res.detected = true;
    res.t_ext = 0;
    res.within_bound = true;
    return res;
  }
  // first partition time after which all sampled sup norms stay below eps_ext
  int first = -1;
  for (int k = traj.n; k >= 1; --k) {
    if (traj.observables[k].linf >= eps_ext) break;
    first = k;
  }
  if (first >= 0) {
    res.detected = true;
    res.t_ext = traj.times[first];
    res.within_bound = res.t_ext <= res.T0 * (1 + slack);
  }
  return res;
}

struct SobolevConfig {
  int starts = 20;
  int max_iters = 2000;
  double tol = 1e-10;
  std::uint64_t seed = 99;
};

struct SobolevEstimate {
  double M_hat = 0;
  GridFunction maximizer;
  int ascent_iters = 0;
  int starts = 0;
};

namespace detail {
inline double sobolev_ratio(const GridFunction& u, double p, double q,
                            const MatrixWeightField& field) {
  const double den = norm_LpQ(gradient(u), p, field);
  if (den == 0.0) return 0.0;
  return norm_Lq_v(u, q, field) / den;
}
}  // namespace detail

// Estimate M_p = sup ||u||_{L^{sigma p}_v} / ||sqrtQ grad u||_p over the
// discrete zero-boundary space. Inverse iteration on the extremal equation
// -div(|sqrtQ grad u|^{p-2} Q grad u) = mu |u|^{q-2} u v from several starts;
// each update minimizes D_p(w) - int w f dv with the implicit-step solver
// (large tau turns its quadratic term into a negligible ridge). A lower
// bound of the discrete supremum by construction.
inline SobolevEstimate estimate_sobolev(const Grid& grid, const MatrixWeightField& field,
                                        double p, double sigma, const SobolevConfig& cfg) {
  if (!(sigma >= 1)) throw InvalidParameters("estimate_sobolev needs sigma >= 1");
  const double q = sigma * p;
  SobolevEstimate best;
  best.starts = cfg.starts;
  const double tau = 1e8;
  InnerSolverConfig icfg;
  icfg.grad_tol = 1e-11;
  const int outer_cap = std::min(cfg.max_iters, 200);
  for (int s = 0; s < cfg.starts; ++s) {
    CounterRng rng(cfg.seed, 100 + static_cast<std::uint64_t>(s));
    std::array<double, 9> amp{};
    for (auto& a : amp) a = rng.normal();
    if (s == 0) {
      // deterministic positive start: the ground state usually has one sign
      amp = {1, 0, 0, 0, 0, 0, 0, 0, 0};
    }
    GridFunction u = GridFunction::sample(grid, [&](std::array<double, 3> x) {
      double val = 0;
      int idx = 0;
      for (int kx = 1; kx <= 3; ++kx) {
        double prod = amp[idx++];
        for (int a = 0; a < grid.dim(); ++a) {
          const double xa = (x[a] - grid.lo(a)) / (grid.hi(a) - grid.lo(a));
          prod *= std::sin(3.14159265358979323846 * kx * xa);
        }
        val += prod;
      }
      return val;
    });
    if (u.max_abs() == 0.0) continue;
    double r = detail::sobolev_ratio(u, p, q, field);
    int it = 0;
    for (; it < outer_cap; ++it) {
      const double nq = norm_Lq_v(u, q, field);
      if (nq == 0.0) break;
      GridFunction f(grid);
      for (Index i = 0; i < grid.node_count(); ++i) {
        const double a = std::abs(u[i]) / nq;
        if (a > 0) f[i] = tau * std::pow(a, q - 1) * (u[i] > 0 ? 1 : -1);
      }
      f.project_zero_boundary();
      ProxProblem pb;
      pb.u_prev = &f;
      pb.tau = tau;
      pb.p = p;
      pb.field = &field;
      GridFunction next;
      try {
        next = prox_step(pb, icfg);
      } catch (const NonConvergence&) {
        break;
      }
      if (next.max_abs() == 0.0) break;
      const double rn = detail::sobolev_ratio(next, p, q, field);
      u = std::move(next);
      const bool settled = rn <= r * (1 + cfg.tol);
      r = std::max(r, rn);
      if (settled) {
        ++it;
        break;
      }
    }
    best.ascent_iters += it;
    if (r > best.M_hat) {
      best.M_hat = r;
      // store the normalized maximizer
      const double den = norm_LpQ(gradient(u), p, field);
      if (den > 0) {
        u *= 1.0 / den;
        best.maximizer = u;
      }
    }
  }
  return best;
}

// Ratio of the Nash interpolation inequality; finite sup over probes is the
// numerically checkable form.
inline double nash_check(const GridFunction& u, double q0, double sigma, double p,
                         const MatrixWeightField& field) {
  if (!(q0 >= 1 && q0 < 2)) throw InvalidParameters("nash_check needs 1 <= q0 < 2");
  if (u.max_abs() == 0.0) throw UndefinedRatio("nash_check needs u != 0");
  const double sp = sigma * p;
  const double e1 = sp * (2 - q0) / (2 * sp - 2 * q0);
  const double e2 = (sigma * q0 * (p - 2) + 2 * (sigma - 1) * q0) / (2 * sp - 2 * q0);
  const double num = norm_Lq_v(u, 2, field);
  const double den = std::pow(norm_LpQ(gradient(u), p, field), e1) *
                     std::pow(norm_Lq_v(u, q0, field), e2);
  if (den == 0.0) throw UndefinedRatio("nash_check denominator vanished");
  return num / den;
}

// Weighted Young functional J_v(h, f).
inline double entropy_J(const GridFunction& f, double h, const MatrixWeightField& field) {
  if (!(h >= 1)) throw InvalidParameters("entropy_J needs h >= 1");
  const double nh = norm_Lq_v(f, h, field);
  if (nh == 0.0) throw UndefinedRatio("entropy_J needs f != 0");
  const Grid& g = f.grid();
  double s = 0;
  for (Index i = 0; i < g.node_count(); ++i) {
    const double a = std::abs(f[i]);
    if (a == 0.0) continue;  // x^h log x -> 0
    s += std::pow(a / nh, h) * std::log(a / nh) * field.v(i) * g.node_volume(i);
  }
  return s;
}

// LHS - RHS of the log-Sobolev bound; <= 0 whenever M_p dominates the true
// Sobolev constant.
inline double log_sobolev_gap(const GridFunction& f, double r, double eps, double sigma,
                              double M_p, double p, const MatrixWeightField& field) {
  if (f.max_abs() == 0.0) throw UndefinedRatio("log_sobolev_gap needs f != 0");
  if (!(eps > 0)) throw InvalidParameters("log_sobolev_gap needs eps > 0");
  const double sp = sigma * p;
  if (!(r >= 1 && r < sp)) throw InvalidParameters("log_sobolev_gap needs r in [1, sigma p)");
  const double lhs = entropy_J(f, r, field);
  const double fr = norm_Lq_v(f, r, field);
  const double gn = norm_LpQ(gradient(f), p, field);
  const double rhs = sigma / (sp - r) *
                     (eps * std::pow(M_p, p) * std::pow(gn, p) / std::pow(fr, p) - std::log(eps));
  return lhs - rhs;
}

struct SeriesReport {
  std::vector<double> lhs;     // (||u_k||_r^r - ||u_{k-1}||_r^r) / tau
  std::vector<double> rhs;     // -r(r-1)(p/(r+p-2))^p int |sqrtQ grad(u_k^h)|^p
  std::vector<double> margin;  // rhs + slack - lhs (>= 0 when the step passes)
  double slack = 0;
  bool pass = true;
};

// Discrete L^r-dissipation inequality along a nonnegative trajectory.
inline SeriesReport lr_dissipation_check(const Trajectory& traj, double r,
                                         const MatrixWeightField& field,
                                         double inner_tol = 1e-9) {
  if (!(r >= 1)) throw InvalidParameters("lr_dissipation_check needs r >= 1");
  SeriesReport rep;
  const double tau = traj.tau();
  const Grid& g = field.grid();
  const double scale = std::pow(norm_Lq_v(traj.initial(), std::max(r, 1.0), field),
                                r);
  for (const auto& snap : traj.snapshots)
    if (snap.min_value() < -1e-10 * (traj.initial().max_abs() + 1))
      throw InvalidRun("lr_dissipation_check needs a nonnegative trajectory");
  rep.slack = 10 * inner_tol * (scale / tau + 1.0);
  const double hexp = (r + traj.p - 2) / traj.p;
  double prev = std::pow(norm_Lq_v(traj.snapshots[0], r, field), r);
  const double coef = r * (r - 1) * std::pow(traj.p / (r + traj.p - 2), traj.p);
  for (int k = 1; k <= traj.n; ++k) {
    const double cur = std::pow(norm_Lq_v(traj.snapshots[k], r, field), r);
    const double lhs = (cur - prev) / tau;
    double rhs = 0;
    if (coef > 0) {
      GridFunction uh(g);
      for (Index i = 0; i < g.node_count(); ++i)
        uh[i] = traj.snapshots[k][i] > 0 ? std::pow(traj.snapshots[k][i], hexp) : 0.0;
      rhs = -coef * std::pow(norm_LpQ(gradient(uh), traj.p, field), traj.p);
    }
    rep.lhs.push_back(lhs);
    rep.rhs.push_back(rhs);
    rep.margin.push_back(rhs + rep.slack - lhs);
    if (lhs > rhs + rep.slack) rep.pass = false;
    prev = cur;
  }
  return rep;
}

}  // namespace plap
