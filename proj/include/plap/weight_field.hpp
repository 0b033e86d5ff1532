#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "plap/errors.hpp"
#include "plap/grid.hpp"
#include "plap/rng.hpp"

namespace plap {

// Small symmetric matrix, N <= 3, stored dense.
struct SymMat {
  int n = 0;
  double m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};

  static SymMat identity(int n) {
    SymMat a;
    a.n = n;
    for (int i = 0; i < n; ++i) a.m[i][i] = 1.0;
    return a;
  }
  static SymMat diag(int n, std::array<double, 3> d) {
    SymMat a;
    a.n = n;
    for (int i = 0; i < n; ++i) a.m[i][i] = d[i];
    return a;
  }

  double max_abs() const {
    double v = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) v = std::max(v, std::abs(m[i][j]));
    return v;
  }
  bool symmetric(double rel = 1e-12) const {
    const double scale = max_abs();
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (std::abs(m[i][j] - m[j][i]) > rel * std::max(scale, 1e-300)) return false;
    return true;
  }
  bool finite() const {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (!std::isfinite(m[i][j])) return false;
    return true;
  }
  std::array<double, 3> apply(const std::array<double, 3>& x) const {
    std::array<double, 3> y{0, 0, 0};
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) y[i] += m[i][j] * x[j];
    return y;
  }
};

// Eigendecomposition A = U diag(lam) U^T with orthonormal columns U.
struct EigenDecomp {
  int n = 0;
  std::array<double, 3> lam{0, 0, 0};   // ascending
  double u[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};  // columns are eigenvectors

  double lambda_min() const { return lam[0]; }
  double lambda_max() const { return lam[n - 1]; }

  SymMat reconstruct_power(double r) const {
    SymMat a;
    a.n = n;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int k = 0; k < n; ++k) {
          const double lr = lam[k] == 0.0 ? (r == 0.0 ? 1.0 : 0.0) : std::pow(lam[k], r);
          s += u[i][k] * lr * u[j][k];
        }
        a.m[i][j] = s;
      }
    return a;
  }
  SymMat reconstruct() const { return reconstruct_power(1.0); }
};

namespace detail {

inline void sort_eigen(EigenDecomp& e) {
  int idx[3] = {0, 1, 2};
  std::sort(idx, idx + e.n, [&](int a, int b) { return e.lam[a] < e.lam[b]; });
  EigenDecomp s = e;
  for (int k = 0; k < e.n; ++k) {
    e.lam[k] = s.lam[idx[k]];
    for (int i = 0; i < e.n; ++i) e.u[i][k] = s.u[i][idx[k]];
  }
}

// Closed form for n <= 2, cyclic Jacobi for n = 3.
inline EigenDecomp eigen_decompose(const SymMat& a) {
  EigenDecomp e;
  e.n = a.n;
  if (a.n == 1) {
    e.lam[0] = a.m[0][0];
    e.u[0][0] = 1.0;
    return e;
  }
  if (a.n == 2) {
    const double tr = a.m[0][0] + a.m[1][1];
    const double det = a.m[0][0] * a.m[1][1] - a.m[0][1] * a.m[1][0];
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4 - det));
    e.lam[0] = tr / 2 - disc;
    e.lam[1] = tr / 2 + disc;
    const double b = (a.m[0][1] + a.m[1][0]) / 2;
    if (std::abs(b) < 1e-300) {
      // already diagonal; lam is ascending, pick the matching axes
      if (a.m[0][0] <= a.m[1][1]) {
        e.u[0][0] = 1; e.u[1][0] = 0; e.u[0][1] = 0; e.u[1][1] = 1;
      } else {
        e.u[0][0] = 0; e.u[1][0] = 1; e.u[0][1] = 1; e.u[1][1] = 0;
      }
      return e;
    }
    const double theta = 0.5 * std::atan2(2 * b, a.m[0][0] - a.m[1][1]);
    const double c = std::cos(theta), s = std::sin(theta);
    // rotation columns (c,s) and (-s,c) are eigenvectors of (lam+, lam-)
    const double l1 = c * c * a.m[0][0] + 2 * c * s * b + s * s * a.m[1][1];
    const double l2 = s * s * a.m[0][0] - 2 * c * s * b + c * c * a.m[1][1];
    e.lam[0] = l1;
    e.lam[1] = l2;
    e.u[0][0] = c; e.u[1][0] = s;
    e.u[0][1] = -s; e.u[1][1] = c;
    sort_eigen(e);
    return e;
  }
  // n == 3: cyclic Jacobi sweeps
  double w[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) w[i][j] = (a.m[i][j] + a.m[j][i]) / 2;
  double v[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j) off += w[i][j] * w[i][j];
    if (off < 1e-30 * std::max(1.0, a.max_abs() * a.max_abs())) break;
    for (int p = 0; p < 3; ++p)
      for (int q = p + 1; q < 3; ++q) {
        if (std::abs(w[p][q]) < 1e-300) continue;
        const double theta = 0.5 * std::atan2(2 * w[p][q], w[p][p] - w[q][q]);
        const double c = std::cos(theta), s = std::sin(theta);
        for (int k = 0; k < 3; ++k) {
          const double wkp = w[k][p], wkq = w[k][q];
          w[k][p] = c * wkp + s * wkq;
          w[k][q] = -s * wkp + c * wkq;
        }
        for (int k = 0; k < 3; ++k) {
          const double wpk = w[p][k], wqk = w[q][k];
          w[p][k] = c * wpk + s * wqk;
          w[q][k] = -s * wpk + c * wqk;
        }
        for (int k = 0; k < 3; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp + s * vkq;
          v[k][q] = -s * vkp + c * vkq;
        }
      }
  }
  for (int i = 0; i < 3; ++i) {
    e.lam[i] = w[i][i];
    for (int k = 0; k < 3; ++k) e.u[k][i] = v[k][i];
  }
  sort_eigen(e);
  return e;
}

}  // namespace detail

// Largest eigenvalue; the operator norm on the SPSD class.
inline double operator_norm(const SymMat& a) {
  return detail::eigen_decompose(a).lambda_max();
}

enum class WeightFamily { Identity, IsotropicPower, AnisotropicDiagonal, GridFile };

struct WeightFamilySpec {
  WeightFamily family = WeightFamily::Identity;
  double alpha = 1.0;                       // isotropic-power: v = d(x,boundary)^alpha, Q = vI
  std::array<double, 3> diag_exp{0, 0, 0};  // anisotropic: Q = diag(|x_i|^{a_i}), v = 1
  std::string path;                         // grid-file
};

// Matrix weight Q on cells plus scalar weight v on nodes, with cached
// eigendecompositions. Immutable after build.
class MatrixWeightField {
 public:
  const Grid& grid() const { return *grid_; }
  int dim() const { return grid_->dim(); }
  const SymMat& Q(Index cell) const { return q_[cell]; }
  const EigenDecomp& eigen(Index cell) const { return eig_[cell]; }
  double v(Index node) const { return v_[node]; }
  const std::vector<double>& v_values() const { return v_; }

  // Quadrature mass v(Omega) = sum v_i |control volume_i|.
  double v_mass() const {
    double s = 0;
    for (Index i = 0; i < grid_->node_count(); ++i) s += v_[i] * grid_->node_volume(i);
    return s;
  }

  double sqrtQ_norm_sq(Index cell, const std::array<double, 3>& g) const {
    // |sqrt(Q) g|^2 = g . Q g
    const auto qg = q_[cell].apply(g);
    double s = 0;
    for (int a = 0; a < dim(); ++a) s += g[a] * qg[a];
    return std::max(0.0, s);
  }

  friend MatrixWeightField build_field(const WeightFamilySpec&, const Grid&);
  friend MatrixWeightField make_field(const Grid& g, std::vector<SymMat> q, std::vector<double> v);

 private:
  const Grid* grid_ = nullptr;
  std::vector<SymMat> q_;       // per cell
  std::vector<EigenDecomp> eig_;
  std::vector<double> v_;       // per node
};

inline MatrixWeightField make_field(const Grid& g, std::vector<SymMat> q, std::vector<double> v) {
  if (static_cast<Index>(q.size()) != g.cell_count() ||
      static_cast<Index>(v.size()) != g.node_count())
    throw InvalidField("field size mismatch with grid");
  MatrixWeightField f;
  f.grid_ = &g;
  f.q_ = std::move(q);
  f.v_ = std::move(v);
  f.eig_.reserve(f.q_.size());
  for (Index c = 0; c < g.cell_count(); ++c) {
    const SymMat& a = f.q_[c];
    if (!a.finite()) throw InvalidField("non-finite Q entry");
    if (!a.symmetric()) throw InvalidField("Q not symmetric");
    auto e = detail::eigen_decompose(a);
    for (int i = 0; i < e.n; ++i) {
      if (e.lam[i] < 0) {
        if (e.lam[i] > -1e-12 * std::max(1.0, a.max_abs()))
          e.lam[i] = 0.0;  // clip round-off
        else
          throw InvalidField("Q has a negative eigenvalue");
      }
    }
    f.eig_.push_back(e);
  }
  for (Index i = 0; i < g.node_count(); ++i) {
    if (!std::isfinite(f.v_[i])) throw InvalidField("non-finite v entry");
    if (f.v_[i] <= 0.0) throw DegenerateWeight("v <= 0 at a node");
  }
  return f;
}

namespace detail {

// Grid-file weight format:
//   plap-weightfield N n0 [n1 [n2]]
//   one line per cell (row-major): N(N+1)/2 upper-triangle entries of Q
//   one line per node (row-major): v
inline MatrixWeightField load_weight_file(const std::string& path, const Grid& g) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open weight file " + path, 0, "path");
  std::string tag;
  int dim = 0;
  in >> tag >> dim;
  if (tag != "plap-weightfield") throw ParseError("bad weight-file header", 1, "header");
  if (dim != g.dim()) throw ParseError("weight-file dimension mismatch", 1, "dimension");
  for (int a = 0; a < dim; ++a) {
    int n = 0;
    in >> n;
    if (n != g.nodes_along(a)) throw ParseError("weight-file node-count mismatch", 1, "nodes");
  }
  std::vector<SymMat> q(static_cast<std::size_t>(g.cell_count()));
  for (Index c = 0; c < g.cell_count(); ++c) {
    SymMat& a = q[c];
    a.n = dim;
    for (int i = 0; i < dim; ++i)
      for (int j = i; j < dim; ++j) {
        if (!(in >> a.m[i][j])) throw ParseError("weight file truncated in Q records",
                                                 static_cast<int>(c) + 2, "Q");
        a.m[j][i] = a.m[i][j];
      }
  }
  std::vector<double> v(static_cast<std::size_t>(g.node_count()));
  for (Index i = 0; i < g.node_count(); ++i)
    if (!(in >> v[i])) throw ParseError("weight file truncated in v records",
                                        static_cast<int>(g.cell_count() + i) + 2, "v");
  return make_field(g, std::move(q), std::move(v));
}

}  // namespace detail

inline void save_weight_file(const MatrixWeightField& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out.precision(17);
  const Grid& g = f.grid();
  out << "plap-weightfield " << g.dim();
  for (int a = 0; a < g.dim(); ++a) out << ' ' << g.nodes_along(a);
  out << '\n';
  for (Index c = 0; c < g.cell_count(); ++c) {
    bool first = true;
    for (int i = 0; i < g.dim(); ++i)
      for (int j = i; j < g.dim(); ++j) {
        if (!first) out << ' ';
        out << f.Q(c).m[i][j];
        first = false;
      }
    out << '\n';
  }
  for (Index i = 0; i < g.node_count(); ++i) out << f.v(i) << '\n';
}

inline MatrixWeightField build_field(const WeightFamilySpec& spec, const Grid& grid) {
  const int n = grid.dim();
  std::vector<SymMat> q(static_cast<std::size_t>(grid.cell_count()));
  std::vector<double> v(static_cast<std::size_t>(grid.node_count()), 1.0);
  switch (spec.family) {
    case WeightFamily::Identity:
      for (auto& a : q) a = SymMat::identity(n);
      break;
    case WeightFamily::IsotropicPower: {
      if (spec.alpha < 0) throw InvalidParameters("isotropic-power exponent must be >= 0");
      // v vanishes on the boundary itself; boundary nodes take the value at
      // the centroid of their lumped control volume, which stays interior.
      for (Index i = 0; i < grid.node_count(); ++i) {
        double d = grid.boundary_distance(grid.node_coord(i));
        if (d <= 0.0) d = grid.boundary_distance(grid.node_control_centroid(i));
        v[i] = std::pow(d, spec.alpha);
      }
      // cell weight from the corner average of v, so the discrete form of
      // the family keeps Q tied to the same quadrature as v
      {
        Index corners[8];
        const int nc = grid.corners_per_cell();
        for (Index c = 0; c < grid.cell_count(); ++c) {
          grid.cell_corners(c, corners);
          double s = 0;
          for (int k = 0; k < nc; ++k) s += v[corners[k]];
          s /= nc;
          SymMat a = SymMat::identity(n);
          for (int i = 0; i < n; ++i) a.m[i][i] = s;
          q[c] = a;
        }
      }
      break;
    }
    case WeightFamily::AnisotropicDiagonal: {
      for (Index c = 0; c < grid.cell_count(); ++c) {
        const auto x = grid.cell_center(c);
        SymMat a;
        a.n = n;
        for (int i = 0; i < n; ++i)
          a.m[i][i] = spec.diag_exp[i] == 0.0 ? 1.0 : std::pow(std::abs(x[i]), spec.diag_exp[i]);
        q[c] = a;
      }
      break;
    }
    case WeightFamily::GridFile:
      return detail::load_weight_file(spec.path, grid);
  }
  return make_field(grid, std::move(q), std::move(v));
}

// Random SPD family for oracle scenarios: smooth positive v and per-cell
// rotated diagonal Q with eigenvalues in [lam_lo, lam_hi].
inline MatrixWeightField make_random_field(const Grid& grid, CounterRng& rng,
                                           double lam_lo = 0.2, double lam_hi = 2.0,
                                           double v_lo = 0.3, double v_hi = 3.0) {
  const int n = grid.dim();
  // low-frequency random coefficients keep the fields smooth
  std::array<double, 6> cv{}, cq{}, cr{};
  for (auto& x : cv) x = rng.uniform(-1, 1);
  for (auto& x : cq) x = rng.uniform(-1, 1);
  for (auto& x : cr) x = rng.uniform(-1, 1);
  auto smooth01 = [&](const std::array<double, 6>& c, const std::array<double, 3>& x) {
    double s = 0;
    for (int a = 0; a < 3; ++a)
      s += c[a] * std::sin(3.1 * (a + 1) * x[a]) + c[3 + a] * std::cos(2.3 * (a + 1) * x[a]);
    return 0.5 + 0.5 * std::sin(s);  // in [0,1]
  };
  std::vector<double> v(static_cast<std::size_t>(grid.node_count()));
  for (Index i = 0; i < grid.node_count(); ++i)
    v[i] = v_lo + (v_hi - v_lo) * smooth01(cv, grid.node_coord(i));
  std::vector<SymMat> q(static_cast<std::size_t>(grid.cell_count()));
  for (Index c = 0; c < grid.cell_count(); ++c) {
    const auto x = grid.cell_center(c);
    std::array<double, 3> lam{1, 1, 1};
    for (int a = 0; a < n; ++a) {
      std::array<double, 3> xs = x;
      xs[0] += 0.37 * a;
      lam[a] = lam_lo + (lam_hi - lam_lo) * smooth01(cq, xs);
    }
    SymMat d = SymMat::diag(n, lam);
    if (n == 1) {
      q[c] = d;
    } else {
      const double th = 3.14159265358979323846 * smooth01(cr, x);
      double r[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
      r[0][0] = std::cos(th); r[0][1] = -std::sin(th);
      r[1][0] = std::sin(th); r[1][1] = std::cos(th);
      SymMat a;
      a.n = n;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0;
          for (int k = 0; k < n; ++k) s += r[i][k] * d.m[k][k] * r[j][k];
          a.m[i][j] = s;
        }
      // symmetrize round-off
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) a.m[i][j] = a.m[j][i] = (a.m[i][j] + a.m[j][i]) / 2;
      q[c] = a;
    }
  }
  return make_field(grid, std::move(q), std::move(v));
}

// Per-cell Q^r via the cached eigendecomposition.
inline std::vector<SymMat> matrix_power(const MatrixWeightField& field, double r) {
  std::vector<SymMat> out;
  out.reserve(static_cast<std::size_t>(field.grid().cell_count()));
  for (Index c = 0; c < field.grid().cell_count(); ++c) {
    const auto& e = field.eigen(c);
    if (r < 0 && e.lambda_min() == 0.0)
      throw SingularMatrix("negative power of a singular Q");
    out.push_back(e.reconstruct_power(r));
  }
  return out;
}

struct DerivedW {
  std::vector<double> w;  // per cell, lambda_min^{p/2}
  bool degenerate = false;  // some cell has lambda_min == 0
};

inline DerivedW derive_w(const MatrixWeightField& field, double p) {
  DerivedW out;
  out.w.reserve(static_cast<std::size_t>(field.grid().cell_count()));
  for (Index c = 0; c < field.grid().cell_count(); ++c) {
    const double lmin = field.eigen(c).lambda_min();
    if (lmin == 0.0) out.degenerate = true;
    out.w.push_back(std::pow(lmin, p / 2));
  }
  return out;
}

struct HypothesisReport {
  bool v_integrable = false;       // heuristic: two-level quadrature stays finite/stable
  bool op_bound_ok = false;        // max_c |sqrt(Q)_c|_op^p <= v at the cell center
  bool inverse_integrable = false; // heuristic on interior compacta
  bool sandwich_ok = false;        // w|xi|^p <= |sqrt(Q)xi|^p <= |sqrt(Q)|_op^p |xi|^p
  bool heuristic = true;           // integrability verdicts are quadrature-based
  double v_mass = 0.0;
  double worst_op_slack = 0.0;     // max over cells of |sqrtQ|_op^p - v (positive = violation)
  bool pass() const { return v_integrable && op_bound_ok && inverse_integrable && sandwich_ok; }
};

// Numerically checkable form of the weight hypothesis. v is compared at the
// cell center via multilinear interpolation of the nodal values.
inline HypothesisReport check_hypothesis(const MatrixWeightField& field, double p,
                                         std::uint64_t seed = 12345) {
  const Grid& g = field.grid();
  HypothesisReport rep;
  rep.v_mass = field.v_mass();
  rep.v_integrable = std::isfinite(rep.v_mass) && rep.v_mass > 0;

  Index corners[8];
  const int nc = g.corners_per_cell();
  const double pprime = p / (p - 1.0);
  double worst = -1e300;
  double inv_integral = 0.0;
  bool inv_finite = true;
  bool sandwich = true;
  CounterRng rng(seed, 7);
  const double slack = 1e-10;
  for (Index c = 0; c < g.cell_count(); ++c) {
    g.cell_corners(c, corners);
    double v_center = 0;
    for (int k = 0; k < nc; ++k) v_center += field.v(corners[k]);
    v_center /= nc;
    const auto& e = field.eigen(c);
    const double opp = std::pow(e.lambda_max(), p / 2);  // |sqrtQ|_op^p
    worst = std::max(worst, opp - v_center * (1 + slack));
    // interior compacta: skip the one-cell collar at the boundary
    const auto m = g.cell_multi(c);
    bool interior = true;
    for (int a = 0; a < g.dim(); ++a)
      if (m[a] == 0 || m[a] == g.cells_along(a) - 1) interior = false;
    if (interior) {
      if (e.lambda_min() == 0.0)
        inv_finite = false;
      else
        inv_integral += std::pow(e.lambda_min(), -pprime / 2) * g.cell_volume();
    }
    // sandwich on sampled directions
    const double w_c = std::pow(e.lambda_min(), p / 2);
    for (int s = 0; s < 100; ++s) {
      std::array<double, 3> xi{0, 0, 0};
      double nrm = 0;
      for (int a = 0; a < g.dim(); ++a) {
        xi[a] = rng.normal();
        nrm += xi[a] * xi[a];
      }
      nrm = std::sqrt(nrm);
      if (nrm == 0) continue;
      for (int a = 0; a < g.dim(); ++a) xi[a] /= nrm;
      const double sq = std::pow(field.sqrtQ_norm_sq(c, xi), p / 2);
      if (sq < w_c * (1 - 1e-9) - 1e-14 || sq > opp * (1 + 1e-9) + 1e-14) sandwich = false;
    }
  }
  rep.worst_op_slack = worst;
  rep.op_bound_ok = worst <= 0.0;
  rep.inverse_integrable = inv_finite && std::isfinite(inv_integral);
  rep.sandwich_ok = sandwich;
  return rep;
}

}  // namespace plap
