#include <cmath>

#include <gtest/gtest.h>

#include "plap/analysis.hpp"
#include "plap/evolution.hpp"
#include "plap/grid.hpp"
#include "plap/norms.hpp"
#include "plap/rng.hpp"
#include "plap/weight_field.hpp"

using namespace plap;

namespace {

const double kPi = 3.14159265358979323846;

GridFunction first_mode(const Grid& g) {
  return GridFunction::sample(g, [&](std::array<double, 3> x) {
    double v = 1;
    for (int a = 0; a < g.dim(); ++a) v *= std::sin(kPi * x[a]);
    return v;
  });
}

GridFunction smooth_random(const Grid& g, std::uint64_t seed) {
  CounterRng rng(seed);
  std::array<double, 3> amp{rng.normal(), rng.normal(), rng.normal()};
  return GridFunction::sample(g, [&](std::array<double, 3> x) {
    double v = 0;
    for (int k = 1; k <= 3; ++k) {
      double prod = amp[k - 1];
      for (int a = 0; a < g.dim(); ++a) prod *= std::sin(kPi * k * x[a]);
      v += prod;
    }
    return v;
  });
}

double probe_ratio(const GridFunction& u, double p, double q, const MatrixWeightField& f) {
  return norm_Lq_v(u, q, f) / norm_LpQ(gradient(u), p, f);
}

}  // namespace

TEST(decay_parameters, worked_examples) {
  // p = 2, q0 = 2, sigma = 3: sigma' = 1.5, q_c = 0, beta = 3/4, gamma = 1
  auto d = decay_parameters(2.0, 2.0, 3.0);
  EXPECT_DOUBLE_EQ(d.sigma_prime, 1.5);
  EXPECT_DOUBLE_EQ(d.q_c, 0.0);
  EXPECT_DOUBLE_EQ(d.beta, 0.75);
  EXPECT_DOUBLE_EQ(d.gamma, 1.0);

  // p = 3, q0 = 1, sigma = 2: sigma' = 2, q_c = -2, beta = 2/3, gamma = 1/3
  auto e = decay_parameters(3.0, 1.0, 2.0);
  EXPECT_DOUBLE_EQ(e.sigma_prime, 2.0);
  EXPECT_DOUBLE_EQ(e.q_c, -2.0);
  EXPECT_NEAR(e.beta, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(e.gamma, 1.0 / 3.0, 1e-15);
}

TEST(decay_parameters, rejects_inadmissible) {
  EXPECT_THROW(decay_parameters(2.0, 2.0, 1.0), InvalidParameters);
  EXPECT_THROW(decay_parameters(2.0, 0.5, 3.0), InvalidParameters);
  // p = 1.2, sigma = 2: q_c = 2 * 0.8 = 1.6, so q0 = 1.5 is inadmissible
  EXPECT_THROW(decay_parameters(1.2, 1.5, 2.0), InvalidParameters);
  EXPECT_NO_THROW(decay_parameters(1.2, 1.7, 2.0));
}

TEST(decay_parameters, exponent_identity_random) {
  // q0 + gamma(2 - q0) + p beta (2 - q0) = 2 (1 + beta (2 - q0))
  CounterRng rng(41);
  int done = 0;
  while (done < 50) {
    const double p = rng.uniform(1.1, 4.0);
    const double sigma = rng.uniform(1.1, 5.0);
    const double q0 = rng.uniform(1.0, 4.0);
    const double qc = sigma / (sigma - 1) * (2 - p);
    if (!(q0 > qc)) continue;
    const auto d = decay_parameters(p, q0, sigma);
    const double lhs = q0 + d.gamma * (2 - q0) + p * d.beta * (2 - q0);
    const double rhs = 2 * (1 + d.beta * (2 - q0));
    EXPECT_NEAR(lhs, rhs, 1e-12 * (std::abs(rhs) + 1));
    ++done;
  }
}

TEST(entropy, young_functional_identities) {
  Grid g = Grid::interval(0, 1, 65);
  CounterRng frng(43);
  auto field = make_random_field(g, frng);
  GridFunction f = smooth_random(g, 44);
  for (Index i = 0; i < g.node_count(); ++i) f[i] = std::abs(f[i]) + 0.1;
  for (double h : {1.5, 2.0, 3.0}) {
    // h J(h, f) = J(1, |f|^h)
    GridFunction fh(g);
    for (Index i = 0; i < g.node_count(); ++i) fh[i] = std::pow(std::abs(f[i]), h);
    EXPECT_NEAR(h * entropy_J(f, h, field), entropy_J(fh, 1.0, field),
                1e-10 * (std::abs(entropy_J(fh, 1.0, field)) + 1));
  }
  EXPECT_THROW(entropy_J(f, 0.5, field), InvalidParameters);
  GridFunction zero(g);
  EXPECT_THROW(entropy_J(zero, 2.0, field), UndefinedRatio);
}

TEST(entropy, constant_function_closed_form) {
  // f == c: J(h, f) = -log(v(Omega)) / h
  Grid g = Grid::interval(0, 2, 33);
  std::vector<SymMat> q(static_cast<std::size_t>(g.cell_count()), SymMat::identity(1));
  std::vector<double> v(static_cast<std::size_t>(g.node_count()), 1.5);
  auto field = make_field(g, std::move(q), std::move(v));
  const double vmass = field.v_mass();
  GridFunction c(g);
  for (Index i = 0; i < g.node_count(); ++i) c[i] = 2.7;
  for (double h : {1.0, 2.0, 3.5})
    EXPECT_NEAR(entropy_J(c, h, field), -std::log(vmass) / h, 1e-12);
}

TEST(entropy, nonnegative_under_unit_mass) {
  // v(Omega) = 1: Jensen gives J(h, f) >= 0
  Grid g = Grid::interval(0, 1, 65);
  std::vector<SymMat> q(static_cast<std::size_t>(g.cell_count()), SymMat::identity(1));
  std::vector<double> v(static_cast<std::size_t>(g.node_count()), 1.0);
  auto field = make_field(g, std::move(q), std::move(v));
  ASSERT_NEAR(field.v_mass(), 1.0, 1e-14);
  CounterRng rng(45);
  for (int t = 0; t < 10; ++t) {
    GridFunction f(g);
    for (Index i = 0; i < g.node_count(); ++i) f[i] = std::abs(rng.normal()) + 0.01;
    for (double h : {1.0, 2.0, 3.0}) EXPECT_GE(entropy_J(f, h, field), -1e-12);
  }
}

TEST(log_sobolev, gap_nonpositive_with_matching_constant) {
  Grid g = Grid::interval(0, 1, 65);
  auto field = build_field(WeightFamilySpec{}, g);
  const double p = 2.0, sigma = 2.0;
  GridFunction f = first_mode(g);
  // for this f the exact ratio is an admissible constant
  const double Mf = probe_ratio(f, p, sigma * p, field);
  for (double r : {1.0, 2.0, 3.0})
    for (double eps : {0.1, 0.5, 1.0, 2.0, 10.0})
      EXPECT_LE(log_sobolev_gap(f, r, eps, sigma, Mf, p, field), 1e-10)
          << "r=" << r << " eps=" << eps;
}

TEST(log_sobolev, scale_invariance_and_rejections) {
  Grid g = Grid::interval(0, 1, 65);
  auto field = build_field(WeightFamilySpec{}, g);
  GridFunction f = first_mode(g);
  const double p = 2.0, sigma = 2.0, M = 1.0;
  const double base = log_sobolev_gap(f, 2.0, 0.7, sigma, M, p, field);
  for (double s : {0.25, 4.0}) {
    GridFunction sf = s * f;
    EXPECT_NEAR(log_sobolev_gap(sf, 2.0, 0.7, sigma, M, p, field), base,
                1e-10 * (std::abs(base) + 1));
  }
  EXPECT_THROW(log_sobolev_gap(f, 0.5, 0.7, sigma, M, p, field), InvalidParameters);
  EXPECT_THROW(log_sobolev_gap(f, 4.0, 0.7, sigma, M, p, field), InvalidParameters);
  EXPECT_THROW(log_sobolev_gap(f, 2.0, 0.0, sigma, M, p, field), InvalidParameters);
  GridFunction zero(g);
  EXPECT_THROW(log_sobolev_gap(zero, 2.0, 0.7, sigma, M, p, field), UndefinedRatio);
}

TEST(nash, homogeneity_exponents_and_bound) {
  Grid g = Grid::interval(0, 1, 65);
  auto field = build_field(WeightFamilySpec{}, g);
  const double p = 2.0, sigma = 3.0, q0 = 1.0;
  // exponent pair for (2, 1, 3): e1 = 0.6, e2 = 0.4 and e1 + e2 = 1
  const double sp = sigma * p;
  const double e1 = sp * (2 - q0) / (2 * sp - 2 * q0);
  const double e2 = (sigma * q0 * (p - 2) + 2 * (sigma - 1) * q0) / (2 * sp - 2 * q0);
  EXPECT_DOUBLE_EQ(e1, 0.6);
  EXPECT_DOUBLE_EQ(e2, 0.4);
  EXPECT_NEAR(e1 + e2, 1.0, 1e-15);

  CounterRng rng(47);
  for (int t = 0; t < 10; ++t) {
    GridFunction u = smooth_random(g, 100 + t);
    const double ratio = nash_check(u, q0, sigma, p, field);
    // scale invariance
    EXPECT_NEAR(nash_check(3.0 * u, q0, sigma, p, field), ratio, 1e-10 * ratio);
    // interpolation: the ratio never beats the function's own Sobolev ratio
    const double Mu = probe_ratio(u, p, sp, field);
    EXPECT_LE(ratio, std::pow(Mu, e1) * (1 + 1e-10));
  }
  GridFunction u = first_mode(g);
  EXPECT_THROW(nash_check(u, 2.5, sigma, p, field), InvalidParameters);
  GridFunction zero(g);
  EXPECT_THROW(nash_check(zero, q0, sigma, p, field), UndefinedRatio);
}

TEST(sobolev_estimate, poincare_oracle_1d) {
  // p = 2, sigma = 1 on (0,1): the discrete optimum is the first mode with
  // ratio 1/sqrt(lam1h), lam1h = (4/h^2) sin^2(pi h/2); continuum value 1/pi
  Grid g = Grid::interval(0, 1, 65);
  auto field = build_field(WeightFamilySpec{}, g);
  SobolevConfig cfg;
  cfg.starts = 8;
  auto est = estimate_sobolev(g, field, 2.0, 1.0, cfg);
  const double h = g.spacing(0);
  const double lam = 4.0 / (h * h) * std::pow(std::sin(kPi * h / 2), 2);
  const double discrete_opt = 1.0 / std::sqrt(lam);
  EXPECT_LE(est.M_hat, discrete_opt * (1 + 1e-8));
  EXPECT_GE(est.M_hat, discrete_opt * (1 - 1e-3));
  EXPECT_GE(est.M_hat, 0.999 / kPi);
  // maximizer is stored normalized in the gradient seminorm
  EXPECT_NEAR(norm_LpQ(gradient(est.maximizer), 2.0, field), 1.0, 1e-10);
}

TEST(sobolev_estimate, probe_lower_bound_and_refinement) {
  Grid g = Grid::interval(0, 1, 33);
  auto field = build_field(WeightFamilySpec{}, g);
  const double p = 2.0, sigma = 2.0;
  SobolevConfig cfg;
  cfg.starts = 6;
  auto est = estimate_sobolev(g, field, p, sigma, cfg);
  GridFunction probe = first_mode(g);
  EXPECT_GE(est.M_hat, probe_ratio(probe, p, sigma * p, field) * (1 - 1e-9));

  Grid g2 = g.refined();
  auto field2 = build_field(WeightFamilySpec{}, g2);
  auto est2 = estimate_sobolev(g2, field2, p, sigma, cfg);
  EXPECT_GE(est2.M_hat, 0.99 * est.M_hat);

  EXPECT_THROW(estimate_sobolev(g, field, p, 0.5, cfg), InvalidParameters);
}

TEST(ultracontractive, heat_report_structure) {
  Grid g = Grid::interval(0, 1, 33);
  auto field = build_field(WeightFamilySpec{}, g);
  GridFunction u0 = first_mode(g);
  InnerSolverConfig cfg;
  auto traj = evolve(u0, 0.2, 32, 2.0, field, cfg);
  auto params = decay_parameters(2.0, 2.0, 3.0);
  auto rep = ultracontractive_check(traj, params);
  ASSERT_EQ(rep.t.size(), 32u);
  EXPECT_GT(rep.c_sup, 0.0);
  EXPECT_GE(rep.c_sup, rep.c_sup_window);
  EXPECT_LT(rep.loglog_slope, 0.0);  // sup norm decays
  EXPECT_DOUBLE_EQ(rep.t_lo, 0.05 * traj.T);
  EXPECT_DOUBLE_EQ(rep.t_hi, traj.T);

  GridFunction zero(g);
  auto ztraj = evolve(zero, 0.2, 4, 2.0, field, cfg);
  EXPECT_THROW(ultracontractive_check(ztraj, params), UndefinedRatio);
}

TEST(extinction, formula_and_applicability) {
  Grid g = Grid::interval(0, 1, 33);
  auto field = build_field(WeightFamilySpec{}, g);
  GridFunction u0 = first_mode(g);
  InnerSolverConfig cfg;
  auto traj2 = evolve(u0, 0.05, 4, 2.0, field, cfg);
  auto params2 = decay_parameters(2.0, 2.0, 3.0);
  EXPECT_THROW(extinction_analysis(traj2, params2, 1.0, 1e-6), NotApplicable);

  // primary branch: p = 1.5, sigma = 1.5 gives q_c = 1.5 > 1, h = 2/3
  auto traj = evolve(u0, 0.05, 4, 1.5, field, cfg);
  auto params = decay_parameters(1.5, 2.0, 1.5);
  ASSERT_NEAR(params.q_c, 1.5, 1e-15);
  auto res = extinction_analysis(traj, params, 2.0, 1e-6);
  EXPECT_FALSE(res.fallback);
  EXPECT_NEAR(res.h, 2.0 / 3.0, 1e-15);
  const double expected_T0 = std::pow(2.0 / 3.0, 1.5) * 3.0 * std::pow(2.0, 1.5) /
                             (1.5 * 0.5) *
                             std::pow(norm_Lq_v(u0, 1.5, field), 1.5 / 3.0);
  EXPECT_NEAR(res.T0, expected_T0, 1e-12 * expected_T0);

  // fallback branch: sigma = 4 gives q_c = 2/3 <= 1
  auto paramsf = decay_parameters(1.5, 2.0, 4.0);
  ASSERT_NEAR(paramsf.q_c, 2.0 / 3.0, 1e-15);
  auto resf = extinction_analysis(traj, paramsf, 2.0, 1e-6);
  EXPECT_TRUE(resf.fallback);
  EXPECT_EQ(resf.q_used, 1.5);
  EXPECT_GT(resf.T0, 0.0);

  EXPECT_THROW(extinction_analysis(traj, params, 0.0, 1e-6), InvalidParameters);
}

TEST(extinction, detected_on_fast_diffusion_run) {
  Grid g = Grid::interval(0, 1, 65);
  auto field = build_field(WeightFamilySpec{}, g);
  GridFunction u0 = first_mode(g);
  InnerSolverConfig cfg;
  // sigma = 4/3 gives q_c = 2 and h = 1, with T0 = 2 M^p ||u0||_2^{1/2}
  const double p = 1.5;
  const double sigma = 4.0 / 3.0;
  auto params = decay_parameters(p, 2.5, sigma);
  ASSERT_NEAR(params.q_c, 2.0, 1e-14);
  SobolevConfig scfg;
  scfg.starts = 6;
  const double M = estimate_sobolev(g, field, p, sigma, scfg).M_hat * 1.1;
  // march long enough to cross the predicted bound
  auto traj = evolve(u0, 2.0, 256, p, field, cfg);
  auto res = extinction_analysis(traj, params, M, 1e-8);
  EXPECT_TRUE(res.detected);
  EXPECT_GT(res.t_ext, 0.0);
  EXPECT_TRUE(res.within_bound) << "t_ext=" << res.t_ext << " T0=" << res.T0;
}

TEST(lr_dissipation, holds_along_runs_and_detects_bad_input) {
  Grid g = Grid::interval(0, 1, 65);
  auto field = build_field(WeightFamilySpec{}, g);
  GridFunction u0 = first_mode(g);
  InnerSolverConfig cfg;
  for (double p : {1.5, 2.0, 3.0}) {
    auto traj = evolve(u0, 0.1, 32, p, field, cfg);
    for (double r : {1.0, 2.0, 3.0}) {
      auto rep = lr_dissipation_check(traj, r, field, cfg.grad_tol);
      EXPECT_TRUE(rep.pass) << "p=" << p << " r=" << r;
      ASSERT_EQ(rep.lhs.size(), 32u);
      for (std::size_t k = 0; k < rep.lhs.size(); ++k)
        EXPECT_LE(rep.lhs[k], 1e-9) << "norms must not grow";
    }
    EXPECT_THROW(lr_dissipation_check(traj, 0.5, field), InvalidParameters);
  }
  // sign-changing data is rejected
  GridFunction w0 = smooth_random(g, 55);
  auto traj = evolve(w0, 0.05, 4, 2.0, field, cfg);
  EXPECT_THROW(lr_dissipation_check(traj, 2.0, field), InvalidRun);
}
