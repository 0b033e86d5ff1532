#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "plap/errors.hpp"
#include "plap/grid.hpp"
#include "plap/norms.hpp"
#include "plap/rng.hpp"
#include "plap/weight_field.hpp"

namespace plap {

struct InnerSolverConfig {
  double grad_tol = 1e-9;       // relative first-order residual
  int max_iters = 200000;
  double delta0 = -1.0;         // < 0: 1e-2 * initial gradient scale
  double delta_factor = 0.1;    // continuation multiplier, in (0,1)
  double delta_floor = 1e-8;    // final delta for p < 2 (0 allowed)
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  double linear_tol = 1e-12;    // p = 2 CG path
  int ncg_stage_iters = 300;    // smoothing budget per continuation stage
  double extinction_floor = 1e-120;  // inputs below this are numerically extinct
};

struct ProxProblem {
  const GridFunction* u_prev = nullptr;
  double tau = 1.0;
  double p = 2.0;
  const MatrixWeightField* field = nullptr;
};

struct ProxDiagnostics {
  int iterations = 0;
  double residual = 0.0;
  int delta_stages = 0;
  double final_delta = 0.0;
  double energy = 0.0;
  bool linear_path = false;
};

namespace detail {

// Interior-unknown view of the prox objective
//   F(u) = sum_c ((|sqrtQ grad u|^2 + d^2)^{p/2}/p) vol
//        + (1/2tau) sum_i (u_i - uprev_i)^2 v_i nvol_i.
class ProxObjective {
 public:
  ProxObjective(const ProxProblem& pb) : pb_(pb), grid_(&pb.field->grid()) {
    const Grid& g = *grid_;
    unknown_of_.assign(static_cast<std::size_t>(g.node_count()), -1);
    for (Index i = 0; i < g.node_count(); ++i)
      if (!g.is_boundary(i)) {
        unknown_of_[i] = static_cast<Index>(interior_.size());
        interior_.push_back(i);
      }
    const int nc = g.corners_per_cell();
    coeff_.resize(static_cast<std::size_t>(nc) * 3);
    for (int k = 0; k < nc; ++k)
      for (int a = 0; a < g.dim(); ++a)
        coeff_[static_cast<std::size_t>(k) * 3 + a] = corner_grad_coeff(g, k, a);
    mass_.resize(interior_.size());
    for (std::size_t i = 0; i < interior_.size(); ++i)
      mass_[i] = pb.field->v(interior_[i]) * g.node_volume(interior_[i]);
    full_.assign(static_cast<std::size_t>(g.node_count()), 0.0);
  }

  std::size_t size() const { return interior_.size(); }
  const std::vector<Index>& interior() const { return interior_; }
  const std::vector<double>& mass() const { return mass_; }

  void to_full(const std::vector<double>& x, GridFunction& u) const {
    for (Index i = 0; i < grid_->node_count(); ++i) u[i] = 0.0;
    for (std::size_t i = 0; i < interior_.size(); ++i) u[interior_[i]] = x[i];
  }
  std::vector<double> from_full(const GridFunction& u) const {
    std::vector<double> x(interior_.size());
    for (std::size_t i = 0; i < interior_.size(); ++i) x[i] = u[interior_[i]];
    return x;
  }

  // Energy and gradient at x; grad may be null. Returns F.
  double eval(const std::vector<double>& x, double delta, std::vector<double>* grad) const {
    const Grid& g = *grid_;
    const double p = pb_.p, tau = pb_.tau;
    const GridFunction& uprev = *pb_.u_prev;
    for (std::size_t i = 0; i < interior_.size(); ++i) full_[interior_[i]] = x[i];
    if (grad) grad->assign(interior_.size(), 0.0);
    double f = 0;
    Index corners[8];
    const int nc = g.corners_per_cell();
    const double d2 = delta * delta;
    const double vol = g.cell_volume();
    for (Index c = 0; c < g.cell_count(); ++c) {
      g.cell_corners(c, corners);
      std::array<double, 3> gv{0, 0, 0};
      for (int k = 0; k < nc; ++k) {
        const double uv = full_[corners[k]];
        if (uv == 0.0) continue;
        for (int a = 0; a < g.dim(); ++a)
          gv[a] += uv * coeff_[static_cast<std::size_t>(k) * 3 + a];
      }
      const auto qg = pb_.field->Q(c).apply(gv);
      double s = 0;
      for (int a = 0; a < g.dim(); ++a) s += gv[a] * qg[a];
      s = std::max(0.0, s);
      f += std::pow(s + d2, p / 2) / p * vol;
      if (grad) {
        double factor;
        if (s + d2 == 0.0)
          factor = 0.0;  // integrand is C^1 at 0 for p > 1
        else
          factor = std::pow(s + d2, (p - 2) / 2) * vol;
        if (factor != 0.0) {
          for (int k = 0; k < nc; ++k) {
            const Index uidx = unknown_of_[corners[k]];
            if (uidx < 0) continue;
            double dot = 0;
            for (int a = 0; a < g.dim(); ++a)
              dot += qg[a] * coeff_[static_cast<std::size_t>(k) * 3 + a];
            (*grad)[uidx] += factor * dot;
          }
        }
      }
    }
    for (std::size_t i = 0; i < interior_.size(); ++i) {
      const double diff = x[i] - uprev[interior_[i]];
      f += 0.5 / tau * diff * diff * mass_[i];
      if (grad) (*grad)[i] += diff * mass_[i] / tau;
    }
    if (!std::isfinite(f)) throw NumericalBreakdown("non-finite prox objective");
    return f;
  }

  // Gauss-Newton diagonal of the Hessian at x, used as preconditioner.
  std::vector<double> precond_diag(const std::vector<double>& x, double delta) const {
    const Grid& g = *grid_;
    const double p = pb_.p, tau = pb_.tau;
    for (std::size_t i = 0; i < interior_.size(); ++i) full_[interior_[i]] = x[i];
    std::vector<double> d(interior_.size(), 0.0);
    Index corners[8];
    const int nc = g.corners_per_cell();
    const double d2 = delta * delta;
    const double vol = g.cell_volume();
    for (Index c = 0; c < g.cell_count(); ++c) {
      g.cell_corners(c, corners);
      std::array<double, 3> gv{0, 0, 0};
      for (int k = 0; k < nc; ++k) {
        const double uv = full_[corners[k]];
        for (int a = 0; a < g.dim(); ++a)
          gv[a] += uv * coeff_[static_cast<std::size_t>(k) * 3 + a];
      }
      double s = pb_.field->sqrtQ_norm_sq(c, gv);
      double factor = (s + d2 == 0.0) ? 0.0 : std::pow(s + d2, (p - 2) / 2) * vol;
      if (!std::isfinite(factor)) factor = 0.0;
      for (int k = 0; k < nc; ++k) {
        const Index uidx = unknown_of_[corners[k]];
        if (uidx < 0) continue;
        std::array<double, 3> ck{0, 0, 0};
        for (int a = 0; a < g.dim(); ++a) ck[a] = coeff_[static_cast<std::size_t>(k) * 3 + a];
        const auto qc = pb_.field->Q(c).apply(ck);
        double dot = 0;
        for (int a = 0; a < g.dim(); ++a) dot += ck[a] * qc[a];
        d[uidx] += factor * dot;
      }
    }
    for (std::size_t i = 0; i < interior_.size(); ++i) {
      d[i] += mass_[i] / tau;
      if (!(d[i] > 0)) d[i] = mass_[i] / tau;
    }
    return d;
  }

  // Exact Hessian action at x applied to vec. For p > 1 the objective is
  // convex, so this operator is positive definite (the mass term is uniform).
  std::vector<double> apply_hessian(const std::vector<double>& x, double delta,
                                    const std::vector<double>& vec) const {
    const Grid& g = *grid_;
    const double p = pb_.p, tau = pb_.tau;
    for (std::size_t i = 0; i < interior_.size(); ++i) full_[interior_[i]] = x[i];
    std::vector<double> vfull(static_cast<std::size_t>(g.node_count()), 0.0);
    for (std::size_t i = 0; i < interior_.size(); ++i) vfull[interior_[i]] = vec[i];
    std::vector<double> y(interior_.size(), 0.0);
    Index corners[8];
    const int nc = g.corners_per_cell();
    const double d2 = delta * delta;
    const double vol = g.cell_volume();
    for (Index c = 0; c < g.cell_count(); ++c) {
      g.cell_corners(c, corners);
      std::array<double, 3> gu{0, 0, 0}, gw{0, 0, 0};
      for (int k = 0; k < nc; ++k) {
        const double uv = full_[corners[k]];
        const double wv = vfull[corners[k]];
        for (int a = 0; a < g.dim(); ++a) {
          const double cka = coeff_[static_cast<std::size_t>(k) * 3 + a];
          gu[a] += uv * cka;
          gw[a] += wv * cka;
        }
      }
      const auto qu = pb_.field->Q(c).apply(gu);
      const auto qw = pb_.field->Q(c).apply(gw);
      double s = 0, quw = 0;
      for (int a = 0; a < g.dim(); ++a) {
        s += gu[a] * qu[a];
        quw += qu[a] * gw[a];
      }
      s = std::max(0.0, s);
      const double t = s + d2;
      if (t == 0.0) continue;
      const double w1 = std::pow(t, (p - 2) / 2) * vol;
      const double w2 = (p - 2) * std::pow(t, (p - 4) / 2) * quw * vol;
      if (!std::isfinite(w1) || !std::isfinite(w2)) continue;
      for (int k = 0; k < nc; ++k) {
        const Index uidx = unknown_of_[corners[k]];
        if (uidx < 0) continue;
        double dot = 0;
        for (int a = 0; a < g.dim(); ++a)
          dot += (w1 * qw[a] + w2 * qu[a]) * coeff_[static_cast<std::size_t>(k) * 3 + a];
        y[uidx] += dot;
      }
    }
    for (std::size_t i = 0; i < interior_.size(); ++i) y[i] += mass_[i] * vec[i] / tau;
    return y;
  }

  // Action of M + tau*K (the p = 2 operator with Q weights) on interior x.
  std::vector<double> apply_linear(const std::vector<double>& x) const {
    const Grid& g = *grid_;
    const double tau = pb_.tau;
    for (std::size_t i = 0; i < interior_.size(); ++i) full_[interior_[i]] = x[i];
    std::vector<double> y(interior_.size(), 0.0);
    Index corners[8];
    const int nc = g.corners_per_cell();
    const double vol = g.cell_volume();
    for (Index c = 0; c < g.cell_count(); ++c) {
      g.cell_corners(c, corners);
      std::array<double, 3> gv{0, 0, 0};
      for (int k = 0; k < nc; ++k) {
        const double uv = full_[corners[k]];
        if (uv == 0.0) continue;
        for (int a = 0; a < g.dim(); ++a)
          gv[a] += uv * coeff_[static_cast<std::size_t>(k) * 3 + a];
      }
      const auto qg = pb_.field->Q(c).apply(gv);
      for (int k = 0; k < nc; ++k) {
        const Index uidx = unknown_of_[corners[k]];
        if (uidx < 0) continue;
        double dot = 0;
        for (int a = 0; a < g.dim(); ++a)
          dot += qg[a] * coeff_[static_cast<std::size_t>(k) * 3 + a];
        y[uidx] += tau * vol * dot;
      }
    }
    for (std::size_t i = 0; i < interior_.size(); ++i) y[i] += mass_[i] * x[i];
    return y;
  }

 private:
  const ProxProblem& pb_;
  const Grid* grid_;
  std::vector<Index> interior_;
  std::vector<Index> unknown_of_;
  std::vector<double> coeff_;
  std::vector<double> mass_;
  mutable std::vector<double> full_;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Preconditioned CG for (M + tau K) x = b.
inline void solve_linear_cg(const ProxObjective& obj, const std::vector<double>& b,
                            std::vector<double>& x, double rel_tol, int max_iters,
                            ProxDiagnostics* diag) {
  const auto d = obj.precond_diag(x, 0.0);  // p=2: diag independent of x
  auto r = obj.apply_linear(x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
  std::vector<double> z(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) z[i] = r[i] / d[i];
  std::vector<double> pdir = z;
  double rz = dot(r, z);
  double bnorm = 0;
  for (std::size_t i = 0; i < b.size(); ++i) bnorm += b[i] * b[i] / d[i];
  bnorm = std::sqrt(bnorm);
  if (bnorm == 0.0) {
    x.assign(x.size(), 0.0);
    return;
  }
  int it = 0;
  for (; it < max_iters; ++it) {
    double rn = 0;
    for (std::size_t i = 0; i < r.size(); ++i) rn += r[i] * r[i] / d[i];
    rn = std::sqrt(rn);
    if (rn <= rel_tol * bnorm) break;
    const auto ap = obj.apply_linear(pdir);
    const double alpha = rz / dot(pdir, ap);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] += alpha * pdir[i];
      r[i] -= alpha * ap[i];
    }
    for (std::size_t i = 0; i < r.size(); ++i) z[i] = r[i] / d[i];
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < pdir.size(); ++i) pdir[i] = z[i] + beta * pdir[i];
  }
  if (it >= max_iters) throw NonConvergence("CG did not converge", 0.0);
  if (diag) {
    diag->iterations += it;
    diag->linear_path = true;
  }
}

// Polak-Ribiere nonlinear CG with Armijo backtracking; returns final residual.
inline double minimize_ncg(const ProxObjective& obj, std::vector<double>& x, double delta,
                           double tol_rel, double scale, int max_iters,
                           const InnerSolverConfig& cfg, ProxDiagnostics* diag) {
  std::vector<double> g, z, dir, xtrial, gprev_z;
  double f = obj.eval(x, delta, &g);
  auto d = obj.precond_diag(x, delta);
  auto resnorm = [&]() {
    double s = 0;
    for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * g[i] / d[i];
    return std::sqrt(s);
  };
  z.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) z[i] = g[i] / d[i];
  dir.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) dir[i] = -z[i];
  double gz = dot(g, z);
  double alpha_prev = 1.0;
  const int restart_every = static_cast<int>(g.size()) + 10;
  int since_restart = 0;
  double res = resnorm();
  int it = 0;
  for (; it < max_iters; ++it) {
    if (res <= tol_rel * scale) break;
    double gd = dot(g, dir);
    if (gd >= 0) {  // not a descent direction: restart on steepest descent
      for (std::size_t i = 0; i < g.size(); ++i) dir[i] = -z[i];
      gd = dot(g, dir);
      since_restart = 0;
      if (gd >= 0) break;  // gradient numerically zero
    }
    // Armijo backtracking
    double alpha = std::min(1.0, 4.0 * alpha_prev);
    bool accepted = false;
    double fnew = f;
    xtrial.resize(x.size());
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < x.size(); ++i) xtrial[i] = x[i] + alpha * dir[i];
      fnew = obj.eval(xtrial, delta, nullptr);
      if (fnew <= f + cfg.armijo_c * alpha * gd + 1e-16 * (std::abs(f) + 1e-300)) {
        accepted = true;
        break;
      }
      alpha *= cfg.backtrack;
    }
    if (!accepted) break;  // stagnated at round-off
    alpha_prev = alpha;
    x.swap(xtrial);
    gprev_z = z;
    f = obj.eval(x, delta, &g);
    ++since_restart;
    if (since_restart >= restart_every) {
      d = obj.precond_diag(x, delta);
      since_restart = 0;
    }
    for (std::size_t i = 0; i < g.size(); ++i) z[i] = g[i] / d[i];
    const double gz_new = dot(g, z);
    double beta = 0;
    if (since_restart != 0) {
      double gy = gz_new;
      for (std::size_t i = 0; i < g.size(); ++i) gy -= g[i] * gprev_z[i];
      beta = std::max(0.0, gy / gz);
    }
    gz = gz_new;
    for (std::size_t i = 0; i < dir.size(); ++i) dir[i] = -z[i] + beta * dir[i];
    res = resnorm();
  }
  if (diag) {
    diag->iterations += it;
    diag->residual = res / scale;
    diag->energy = f;
  }
  return res;
}

// Newton polish with residual-based acceptance. Objective round-off limits
// line searches on F near the minimum; the gradient norm stays computable,
// so the steps are accepted on residual decrease instead. Returns the final
// preconditioned residual norm.
inline double newton_refine(const ProxObjective& obj, std::vector<double>& x, double delta,
                            double tol_rel, double scale, const InnerSolverConfig& cfg,
                            ProxDiagnostics* diag) {
  std::vector<double> g;
  obj.eval(x, delta, &g);
  auto d = obj.precond_diag(x, delta);
  auto pres = [&](const std::vector<double>& grad) {
    double s = 0;
    for (std::size_t i = 0; i < grad.size(); ++i) s += grad[i] * grad[i] / d[i];
    return std::sqrt(s);
  };
  double res = pres(g);
  std::vector<double> xtrial(x.size()), gtrial;
  for (int outer = 0; outer < 100 && res > tol_rel * scale; ++outer) {
    // solve H dx = -g by Jacobi-preconditioned CG
    std::vector<double> dx(x.size(), 0.0), r = g;
    for (auto& ri : r) ri = -ri;
    std::vector<double> z(r.size()), pd;
    for (std::size_t i = 0; i < r.size(); ++i) z[i] = r[i] / d[i];
    pd = z;
    double rz = dot(r, z);
    const double cg_target = 0.05 * pres(g);
    const int cg_max = static_cast<int>(x.size()) * 4 + 50;
    for (int it = 0; it < cg_max; ++it) {
      if (pres(r) <= cg_target) break;
      const auto hp = obj.apply_hessian(x, delta, pd);
      const double php = dot(pd, hp);
      if (!(php > 0)) break;
      const double alpha = rz / php;
      for (std::size_t i = 0; i < dx.size(); ++i) {
        dx[i] += alpha * pd[i];
        r[i] -= alpha * hp[i];
      }
      for (std::size_t i = 0; i < r.size(); ++i) z[i] = r[i] / d[i];
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < pd.size(); ++i) pd[i] = z[i] + beta * pd[i];
      if (diag) ++diag->iterations;
    }
    if (dot(g, dx) >= 0) for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = -g[i] / d[i];
    bool accepted = false;
    double alpha = 1.0;
    for (int ls = 0; ls < 40; ++ls) {
      for (std::size_t i = 0; i < x.size(); ++i) xtrial[i] = x[i] + alpha * dx[i];
      obj.eval(xtrial, delta, &gtrial);
      const double rnew = pres(gtrial);
      if (rnew < res) {
        x.swap(xtrial);
        g.swap(gtrial);
        res = rnew;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
    d = obj.precond_diag(x, delta);
    res = pres(g);
  }
  if (diag) diag->residual = res / scale;
  return res;
}

}  // namespace detail

// One implicit Euler step: the resolvent of tau * dD_p at u_prev.
inline GridFunction prox_step(const ProxProblem& pb, const InnerSolverConfig& cfg,
                              ProxDiagnostics* diag = nullptr) {
  if (!pb.u_prev || !pb.field) throw InvalidParameters("prox problem missing data");
  if (!(pb.tau > 0)) throw InvalidParameters("prox step needs tau > 0");
  if (!(pb.p > 1)) throw InvalidParameters("prox step needs p > 1");
  if (!pb.u_prev->zero_boundary())
    throw InvalidParameters("prox input must vanish on the boundary");
  const Grid& g = pb.field->grid();
  GridFunction out(g);
  if (pb.u_prev->max_abs() <= cfg.extinction_floor) {
    if (diag) *diag = ProxDiagnostics{};
    return out;  // 0 minimizes both terms, or the input is below round-off
  }

  detail::ProxObjective obj(pb);
  std::vector<double> x = obj.from_full(*pb.u_prev);
  ProxDiagnostics local;
  ProxDiagnostics* dg = diag ? diag : &local;
  *dg = ProxDiagnostics{};

  if (pb.p == 2.0) {
    // quadratic objective: solve (M + tau K) u = M uprev directly by CG
    std::vector<double> b(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) b[i] = obj.mass()[i] * x[i];
    detail::solve_linear_cg(obj, b, x, cfg.linear_tol, cfg.max_iters, dg);
    obj.to_full(x, out);
    return out;
  }

  // delta continuation (single zero-delta stage for p > 2)
  std::vector<double> deltas;
  if (pb.p > 2.0) {
    deltas.push_back(0.0);
  } else {
    double grad_scale = 0;
    const auto gv = gradient(*pb.u_prev);
    for (Index c = 0; c < g.cell_count(); ++c)
      grad_scale += pb.field->sqrtQ_norm_sq(c, gv[c]);
    grad_scale = std::sqrt(grad_scale / std::max<Index>(1, g.cell_count()));
    double d0 = cfg.delta0 >= 0 ? cfg.delta0 : 1e-2 * grad_scale;
    if (d0 < cfg.delta_floor) d0 = cfg.delta_floor;
    for (double dlt = d0; dlt > cfg.delta_floor; dlt *= cfg.delta_factor) {
      deltas.push_back(dlt);
      if (deltas.size() > 40) break;
    }
    deltas.push_back(cfg.delta_floor);
  }

  // residual scale: dual norm of the linear term (1/tau) M uprev
  std::vector<double> g0;
  obj.eval(std::vector<double>(x.size(), 0.0), deltas.front(), &g0);
  auto d0diag = obj.precond_diag(x, deltas.front());
  double scale = 0;
  for (std::size_t i = 0; i < g0.size(); ++i) scale += g0[i] * g0[i] / d0diag[i];
  scale = std::sqrt(scale);
  if (scale == 0.0) scale = 1.0;

  for (std::size_t s = 0; s < deltas.size(); ++s) {
    const bool last = s + 1 == deltas.size();
    const double stage_tol = last ? cfg.grad_tol : std::max(cfg.grad_tol, 1e-5);
    detail::minimize_ncg(obj, x, deltas[s], stage_tol, scale,
                         std::min(cfg.max_iters, cfg.ncg_stage_iters), cfg, dg);
    const double res = detail::newton_refine(obj, x, deltas[s], stage_tol, scale, cfg, dg);
    ++dg->delta_stages;
    dg->final_delta = deltas[s];
    if (last && res > cfg.grad_tol * scale * 10)
      throw NonConvergence("prox inner solver stalled", res / scale);
  }
  obj.to_full(x, out);
  return out;
}

// Resolvent (id + dD_p)^{-1} f: prox with tau = 1.
inline GridFunction resolvent(const GridFunction& f, const MatrixWeightField& field, double p,
                              const InnerSolverConfig& cfg, ProxDiagnostics* diag = nullptr) {
  ProxProblem pb;
  pb.u_prev = &f;
  pb.tau = 1.0;
  pb.p = p;
  pb.field = &field;
  return prox_step(pb, cfg, diag);
}

// Discrete left side of the implicit Euler weak form; vanishes at the
// minimizer for every zero-boundary test function phi.
inline double weak_residual(const GridFunction& u_next, const GridFunction& u_prev, double tau,
                            const GridFunction& phi, const MatrixWeightField& field, double p) {
  const Grid& g = field.grid();
  if (!phi.zero_boundary()) throw InvalidParameters("test function must vanish on the boundary");
  const auto gu = gradient(u_next);
  const auto gphi = gradient(phi);
  double s = 0;
  for (Index c = 0; c < g.cell_count(); ++c) {
    const double sq = field.sqrtQ_norm_sq(c, gu[c]);
    if (sq == 0.0) continue;
    const auto qg = field.Q(c).apply(gu[c]);
    double dot = 0;
    for (int a = 0; a < g.dim(); ++a) dot += qg[a] * gphi[c][a];
    s += tau * std::pow(sq, (p - 2) / 2) * dot * g.cell_volume();
  }
  for (Index i = 0; i < g.node_count(); ++i)
    s += (u_next[i] - u_prev[i]) * phi[i] * field.v(i) * g.node_volume(i);
  return s;
}

struct SimonReport {
  double p = 0;
  long samples = 0;
  double c_primary = 0;    // smallest admissible C in the difference inequality
  double c_secondary = 0;  // smallest admissible C in the Lipschitz-type inequality
  bool calibrated = false;
  bool pass = true;
};

// Empirical constants for the vector inequalities behind accretivity.
// By homogeneity both ratios are invariant under joint scaling, so sampling
// normalizes max(|xi|,|zeta|) = 1.
inline SimonReport simon_check(double p, long sample_count, std::uint64_t seed = 2024) {
  if (!(p > 1)) throw InvalidParameters("simon_check needs p > 1");
  SimonReport rep;
  rep.p = p;
  rep.samples = sample_count;
  CounterRng rng(seed, 3);
  auto phi = [&](const std::array<double, 2>& x) -> std::array<double, 2> {
    const double n = std::hypot(x[0], x[1]);
    if (n == 0) return {0, 0};
    const double f = std::pow(n, p - 2);
    return {f * x[0], f * x[1]};
  };
  double c1 = 0, c2 = 0;
  for (long s = 0; s < sample_count; ++s) {
    const double th1 = rng.uniform(0, 6.283185307179586);
    const double th2 = rng.uniform(0, 6.283185307179586);
    double r1 = 1.0, r2 = rng.next_double();
    if (rng.next_u64() & 1) std::swap(r1, r2);
    const std::array<double, 2> xi{r1 * std::cos(th1), r1 * std::sin(th1)};
    const std::array<double, 2> ze{r2 * std::cos(th2), r2 * std::sin(th2)};
    const auto pxi = phi(xi), pze = phi(ze);
    const std::array<double, 2> dv{xi[0] - ze[0], xi[1] - ze[1]};
    const std::array<double, 2> dp{pxi[0] - pze[0], pxi[1] - pze[1]};
    const double dnorm = std::hypot(dv[0], dv[1]);
    const double mono = dp[0] * dv[0] + dp[1] * dv[1];
    const double sumn = std::hypot(xi[0], xi[1]) + std::hypot(ze[0], ze[1]);
    if (dnorm < 1e-12) continue;
    if (p >= 2) {
      if (mono > 1e-14) c1 = std::max(c1, std::pow(dnorm, p) / mono);
      const double den2 = dnorm * std::pow(sumn, p - 2);
      if (den2 > 1e-14) c2 = std::max(c2, std::hypot(dp[0], dp[1]) / den2);
    } else {
      if (mono > 1e-14)
        c1 = std::max(c1, dnorm * dnorm / (std::pow(sumn, 2 - p) * mono));
      c2 = std::max(c2, std::hypot(dp[0], dp[1]) / std::pow(dnorm, p - 1));
    }
  }
  rep.c_primary = c1;
  rep.c_secondary = c2;
  // caps calibrated on an independent 10^7-sample pre-run, inflated 25%
  static const std::map<double, std::pair<double, double>> caps = {
      {1.5, {1.77, 1.77}}, {2.0, {1.25, 1.25}}, {2.5, {1.77, 1.33}},
      {3.0, {2.5, 1.25}}, {4.0, {5.0, 1.25}}};
  auto it = caps.find(p);
  if (it != caps.end()) {
    rep.calibrated = true;
    rep.pass = c1 <= it->second.first && c2 <= it->second.second;
  }
  return rep;
}

}  // namespace plap
