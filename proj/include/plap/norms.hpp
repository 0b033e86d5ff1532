#pragma once

#include <cmath>
#include <limits>

#include "plap/errors.hpp"
#include "plap/grid.hpp"
#include "plap/weight_field.hpp"

namespace plap {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ||u||_{L^q_v} with lumped nodal quadrature; q = inf gives the nodal max
// (v > 0 everywhere by construction).
inline double norm_Lq_v(const GridFunction& u, double q, const MatrixWeightField& field) {
  if (q == kInf) return u.max_abs();
  if (q < 1.0) throw InvalidExponent("L^q_v norm needs q >= 1");
  const Grid& g = u.grid();
  double s = 0;
  for (Index i = 0; i < g.node_count(); ++i) {
    const double a = std::abs(u[i]);
    if (a == 0.0) continue;
    s += std::pow(a, q) * field.v(i) * g.node_volume(i);
  }
  return std::pow(s, 1.0 / q);
}

// ||g||_{L^p_Q} over cells.
inline double norm_LpQ(const CellVectorField& gvec, double p, const MatrixWeightField& field) {
  if (p < 1.0) throw InvalidExponent("L^p_Q norm needs p >= 1");
  const Grid& g = gvec.grid();
  double s = 0;
  for (Index c = 0; c < g.cell_count(); ++c)
    s += std::pow(field.sqrtQ_norm_sq(c, gvec[c]), p / 2) * g.cell_volume();
  return std::pow(s, 1.0 / p);
}

inline double norm_H1pQ(const GridFunction& u, double p, const MatrixWeightField& field) {
  return norm_Lq_v(u, p, field) + norm_LpQ(gradient(u), p, field);
}

// D_p(u) = (1/p) int |sqrt(Q) grad u|^p dx
inline double dirichlet_energy(const GridFunction& u, double p, const MatrixWeightField& field) {
  return std::pow(norm_LpQ(gradient(u), p, field), p) / p;
}

// L^2_v inner product and norm (the Hilbert structure of the flow).
inline double inner_L2v(const GridFunction& a, const GridFunction& b,
                        const MatrixWeightField& field) {
  const Grid& g = a.grid();
  double s = 0;
  for (Index i = 0; i < g.node_count(); ++i) s += a[i] * b[i] * field.v(i) * g.node_volume(i);
  return s;
}
inline double norm_L2v(const GridFunction& u, const MatrixWeightField& field) {
  return std::sqrt(std::max(0.0, inner_L2v(u, u, field)));
}

// v-mass of the positive part, the comparison-principle functional.
inline double positive_part_mass(const GridFunction& u, const MatrixWeightField& field) {
  const Grid& g = u.grid();
  double s = 0;
  for (Index i = 0; i < g.node_count(); ++i)
    if (u[i] > 0) s += u[i] * field.v(i) * g.node_volume(i);
  return s;
}

}  // namespace plap
