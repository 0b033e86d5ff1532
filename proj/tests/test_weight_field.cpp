#include <cmath>
#include <cstdio>

#include <gtest/gtest.h>

#include "plap/grid.hpp"
#include "plap/norms.hpp"
#include "plap/rng.hpp"
#include "plap/weight_field.hpp"

using namespace plap;

TEST(build_field, identity_family) {
  Grid g = Grid::unit_box(2, 9);
  auto f = build_field(WeightFamilySpec{}, g);
  for (Index c = 0; c < g.cell_count(); ++c) {
    EXPECT_DOUBLE_EQ(f.Q(c).m[0][0], 1.0);
    EXPECT_DOUBLE_EQ(f.Q(c).m[1][1], 1.0);
    EXPECT_DOUBLE_EQ(f.Q(c).m[0][1], 0.0);
    EXPECT_DOUBLE_EQ(f.eigen(c).lambda_min(), 1.0);
  }
  for (Index i = 0; i < g.node_count(); ++i) EXPECT_DOUBLE_EQ(f.v(i), 1.0);
  auto w = derive_w(f, 3.0);
  EXPECT_FALSE(w.degenerate);
  for (double x : w.w) EXPECT_DOUBLE_EQ(x, 1.0);
}

TEST(build_field, isotropic_power_distance) {
  Grid g = Grid::interval(0, 1, 9);  // node 4 is x = 0.5
  WeightFamilySpec spec;
  spec.family = WeightFamily::IsotropicPower;
  spec.alpha = 1.0;
  auto f = build_field(spec, g);
  EXPECT_NEAR(f.v(g.node_id(4)), 0.5, 1e-14);
  EXPECT_NEAR(f.v(g.node_id(1)), 0.125, 1e-14);
  // boundary nodes sample the control-volume centroid, staying positive
  EXPECT_GT(f.v(g.node_id(0)), 0.0);
}

TEST(build_field, anisotropic_diagonal_eigenvalues) {
  Grid g = Grid::unit_box(2, 3);  // cell centers at 0.25/0.75
  WeightFamilySpec spec;
  spec.family = WeightFamily::AnisotropicDiagonal;
  spec.diag_exp = {1.0, 0.0, 0.0};
  auto f = build_field(spec, g);
  const Index c = g.cell_id(0, 0);  // center (0.25, 0.25)
  EXPECT_NEAR(f.eigen(c).lambda_min(), 0.25, 1e-14);
  EXPECT_NEAR(f.eigen(c).lambda_max(), 1.0, 1e-14);
}

TEST(build_field, rejects_bad_fields) {
  Grid g = Grid::interval(0, 1, 5);
  std::vector<SymMat> q(static_cast<std::size_t>(g.cell_count()), SymMat::identity(1));
  std::vector<double> v(static_cast<std::size_t>(g.node_count()), 1.0);
  v[2] = 0.0;
  EXPECT_THROW(make_field(g, q, v), DegenerateWeight);
  v[2] = std::nan("");
  EXPECT_THROW(make_field(g, q, v), InvalidField);
  v[2] = 1.0;
  q[1].m[0][0] = std::nan("");
  EXPECT_THROW(make_field(g, q, v), InvalidField);
  q[1].m[0][0] = -1.0;
  EXPECT_THROW(make_field(g, q, v), InvalidField);
}

TEST(eigen_decomposition, reconstruction_invariant) {
  CounterRng rng(42);
  for (int n = 1; n <= 3; ++n) {
    for (int trial = 0; trial < 50; ++trial) {
      // random SPSD A = B^T B
      double b[3][3];
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) b[i][j] = rng.normal();
      SymMat a;
      a.n = n;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0;
          for (int k = 0; k < n; ++k) s += b[k][i] * b[k][j];
          a.m[i][j] = s;
        }
      const auto e = detail::eigen_decompose(a);
      const SymMat r = e.reconstruct();
      const double scale = std::max(a.max_abs(), 1e-300);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          EXPECT_NEAR(r.m[i][j], a.m[i][j], 1e-10 * scale);
      EXPECT_GE(e.lambda_min(), -1e-12 * scale);
    }
  }
}

TEST(matrix_power, identities) {
  Grid g = Grid::unit_box(2, 5);
  CounterRng rng(3);
  auto f = make_random_field(g, rng, 0.5, 4.0);
  // r = 1 reproduces Q
  auto q1 = matrix_power(f, 1.0);
  for (Index c = 0; c < g.cell_count(); ++c)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        EXPECT_NEAR(q1[c].m[i][j], f.Q(c).m[i][j], 1e-10 * f.Q(c).max_abs());
  // (Q^{1/2})^2 = Q
  auto qh = matrix_power(f, 0.5);
  for (Index c = 0; c < g.cell_count(); ++c) {
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        double s = 0;
        for (int k = 0; k < 2; ++k) s += qh[c].m[i][k] * qh[c].m[k][j];
        EXPECT_NEAR(s, f.Q(c).m[i][j], 1e-10 * std::max(1.0, f.Q(c).max_abs()));
      }
  }
}

TEST(matrix_power, additivity_of_exponents) {
  Grid g = Grid::unit_box(2, 5);
  CounterRng rng(5);
  auto f = make_random_field(g, rng, 0.3, 3.0);
  const double rs[3] = {0.5, 1.0, 2.0};
  for (double r : rs)
    for (double s : rs) {
      auto qr = matrix_power(f, r);
      auto qs = matrix_power(f, s);
      auto qrs = matrix_power(f, r + s);
      for (Index c = 0; c < g.cell_count(); ++c) {
        const double scale = std::max(1.0, qrs[c].max_abs());
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) {
            double prod = 0;
            for (int k = 0; k < 2; ++k) prod += qr[c].m[i][k] * qs[c].m[k][j];
            EXPECT_NEAR(prod, qrs[c].m[i][j], 1e-9 * scale);
          }
      }
    }
}

TEST(matrix_power, diagonal_square_root_and_singular) {
  Grid g = Grid::interval(0, 1, 3);
  Grid g2 = Grid::unit_box(2, 3);
  std::vector<SymMat> q(static_cast<std::size_t>(g2.cell_count()),
                        SymMat::diag(2, {4.0, 9.0, 0.0}));
  std::vector<double> v(static_cast<std::size_t>(g2.node_count()), 1.0);
  auto f = make_field(g2, std::move(q), std::move(v));
  auto qh = matrix_power(f, 0.5);
  EXPECT_NEAR(qh[0].m[0][0], 2.0, 1e-12);
  EXPECT_NEAR(qh[0].m[1][1], 3.0, 1e-12);

  std::vector<SymMat> qs(static_cast<std::size_t>(g2.cell_count()),
                         SymMat::diag(2, {1.0, 0.0, 0.0}));
  std::vector<double> vs(static_cast<std::size_t>(g2.node_count()), 1.0);
  auto fs = make_field(g2, std::move(qs), std::move(vs));
  EXPECT_THROW(matrix_power(fs, -1.0), SingularMatrix);
  auto w = derive_w(fs, 2.0);
  EXPECT_TRUE(w.degenerate);
  EXPECT_EQ(w.w[0], 0.0);
}

TEST(operator_norm_op, examples_and_sampling_oracle) {
  EXPECT_DOUBLE_EQ(operator_norm(SymMat::identity(2)), 1.0);
  EXPECT_DOUBLE_EQ(operator_norm(SymMat::diag(2, {4.0, 9.0, 0.0})), 9.0);

  // random SPD: max_i lambda_i equals sup over random unit xi of |A xi|
  CounterRng rng(17);
  double b[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) b[i][j] = rng.normal();
  SymMat a;
  a.n = 3;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += b[k][i] * b[k][j];
      a.m[i][j] = s;
    }
  double best = 0;
  for (int t = 0; t < 10000; ++t) {
    std::array<double, 3> xi{rng.normal(), rng.normal(), rng.normal()};
    double nrm = std::sqrt(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]);
    for (auto& x : xi) x /= nrm;
    const auto ax = a.apply(xi);
    best = std::max(best, std::sqrt(ax[0] * ax[0] + ax[1] * ax[1] + ax[2] * ax[2]));
  }
  EXPECT_NEAR(best, operator_norm(a), 1e-2 * operator_norm(a));
  EXPECT_NEAR(operator_norm(a), std::pow(operator_norm(detail::eigen_decompose(a)
                                                            .reconstruct_power(0.5)),
                                         2.0),
              1e-10 * operator_norm(a));
}

TEST(derive_w, diagonal_examples) {
  Grid g = Grid::unit_box(2, 3);
  std::vector<SymMat> q(static_cast<std::size_t>(g.cell_count()),
                        SymMat::diag(2, {4.0, 9.0, 0.0}));
  std::vector<double> v(static_cast<std::size_t>(g.node_count()), 1.0);
  auto f = make_field(g, std::move(q), std::move(v));
  EXPECT_NEAR(derive_w(f, 2.0).w[0], 4.0, 1e-12);
  EXPECT_NEAR(derive_w(f, 3.0).w[0], 8.0, 1e-12);
}

TEST(check_hypothesis_op, identity_passes_violation_fails) {
  Grid g = Grid::unit_box(2, 9);
  auto id = build_field(WeightFamilySpec{}, g);
  EXPECT_TRUE(check_hypothesis(id, 2.0).pass());

  // v = 0.5 with Q = I violates |sqrtQ|_op^p <= v
  std::vector<SymMat> q(static_cast<std::size_t>(g.cell_count()), SymMat::identity(2));
  std::vector<double> v(static_cast<std::size_t>(g.node_count()), 0.5);
  auto bad = make_field(g, std::move(q), std::move(v));
  const auto rep = check_hypothesis(bad, 2.0);
  EXPECT_FALSE(rep.op_bound_ok);
  EXPECT_TRUE(rep.v_integrable);
  EXPECT_GT(rep.worst_op_slack, 0.0);
}

TEST(check_hypothesis_op, trace_remark_family_passes) {
  // v = d(x)^{2p}, Q = v I with p = 2; check on two grid levels
  const double p = 2.0;
  WeightFamilySpec spec;
  spec.family = WeightFamily::IsotropicPower;
  spec.alpha = 2 * p;
  for (int nodes : {17, 33}) {
    Grid g = Grid::unit_box(2, nodes);
    auto f = build_field(spec, g);
    const auto rep = check_hypothesis(f, p);
    EXPECT_TRUE(rep.pass()) << "nodes=" << nodes;
  }
}

TEST(weight_file, roundtrip) {
  Grid g = Grid::unit_box(2, 5);
  CounterRng rng(23);
  auto f = make_random_field(g, rng);
  const std::string path = "weights_test.txt";
  save_weight_file(f, path);
  WeightFamilySpec spec;
  spec.family = WeightFamily::GridFile;
  spec.path = path;
  auto f2 = build_field(spec, g);
  for (Index c = 0; c < g.cell_count(); ++c)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) EXPECT_EQ(f.Q(c).m[i][j], f2.Q(c).m[i][j]);
  for (Index i = 0; i < g.node_count(); ++i) EXPECT_EQ(f.v(i), f2.v(i));
  std::remove(path.c_str());
}

TEST(sandwich, random_fields_hold) {
  CounterRng rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    Grid g = Grid::unit_box(2, 9);
    auto f = make_random_field(g, rng);
    const double p = 1.5 + trial * 0.5;
    auto w = derive_w(f, p);
    CounterRng xirng(100 + trial);
    for (Index c = 0; c < g.cell_count(); ++c) {
      const double opp = std::pow(f.eigen(c).lambda_max(), p / 2);
      for (int s = 0; s < 20; ++s) {
        std::array<double, 3> xi{xirng.normal(), xirng.normal(), 0};
        const double nrm = std::hypot(xi[0], xi[1]);
        if (nrm == 0) continue;
        xi[0] /= nrm;
        xi[1] /= nrm;
        const double val = std::pow(f.sqrtQ_norm_sq(c, xi), p / 2);
        EXPECT_GE(val, w.w[c] * (1 - 1e-9) - 1e-14);
        EXPECT_LE(val, opp * (1 + 1e-9) + 1e-14);
      }
    }
  }
}
