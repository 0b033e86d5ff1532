#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "plap/analysis.hpp"
#include "plap/errors.hpp"
#include "plap/evolution.hpp"
#include "plap/grid.hpp"
#include "plap/norms.hpp"
#include "plap/prox_solver.hpp"
#include "plap/weight_field.hpp"

namespace plap {

enum class InitialKind { SineProduct, Bump, RandomSmooth, File };

struct Scenario {
  std::string name;
  // grid
  int dim = 1;
  std::array<double, 3> lo{0, 0, 0}, hi{1, 1, 1};
  std::array<int, 3> nodes{65, 65, 65};
  // weights
  WeightFamilySpec weights;
  bool random_field = false;  // internal: oracle scenarios
  // evolution
  double p = 2.0;
  double T = 1.0;
  int steps = 64;
  double refine_tol = 0;  // > 0: use refine_until_cauchy instead of fixed steps
  InnerSolverConfig solver;
  // initial datum
  InitialKind initial = InitialKind::SineProduct;
  double initial_scale = 1.0;
  std::string initial_path;
  // analysis
  std::vector<std::string> checks;
  double sigma = 2.0;
  double q0 = -1;        // < 0: default per p
  double eps_ext_rel = 1e-8;
  std::vector<double> r_list{1, 2, 3};
  // self-test corruption hook
  int corrupt_step = -1;
  double corrupt_scale = 2.0;
  // output
  std::vector<double> snapshot_times;
  std::uint64_t seed = 1;

  double default_q0() const {
    if (q0 > 0) return q0;
    return p >= 2 ? 1.0 : 2.0;
  }
};

namespace detail {

struct KeyValue {
  std::string value;
  int line = 0;
  mutable bool used = false;
};
using Section = std::map<std::string, KeyValue>;

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::map<std::string, Section> parse_sections(std::istream& in) {
  std::map<std::string, Section> out;
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("malformed section header", line_no, line);
      section = trim(line.substr(1, line.size() - 2));
      out[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no, line);
    const std::string key = trim(line.substr(0, eq));
    if (section.empty()) throw ParseError("key outside a section", line_no, key);
    out[section][key] = KeyValue{trim(line.substr(eq + 1)), line_no, false};
  }
  return out;
}

inline double to_double(const KeyValue& kv, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(kv.value, &pos);
    if (pos != kv.value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ParseError("expected a number for '" + key + "'", kv.line, key);
  }
}
inline std::vector<double> to_doubles(const KeyValue& kv, const std::string& key) {
  std::istringstream ss(kv.value);
  std::vector<double> out;
  std::string tok;
  while (ss >> tok) {
    if (tok == "inf") {
      out.push_back(kInf);
      continue;
    }
    try {
      out.push_back(std::stod(tok));
    } catch (...) {
      throw ParseError("expected numbers for '" + key + "'", kv.line, key);
    }
  }
  return out;
}

}  // namespace detail

inline Scenario parse_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file " + path, 0, "path");
  auto sections = detail::parse_sections(in);
  Scenario sc;
  sc.name = std::filesystem::path(path).stem().string();

  static const std::map<std::string, std::vector<std::string>> known = {
      {"grid", {"dimension", "box", "nodes"}},
      {"weights", {"family", "alpha", "exponents", "path"}},
      {"evolution", {"p", "T", "steps", "refine_tol", "grad_tol", "delta_floor", "max_iters"}},
      {"initial", {"kind", "scale", "path"}},
      {"analysis", {"checks", "sigma", "q0", "eps_ext", "r_list"}},
      {"selftest", {"corrupt_step", "corrupt_scale"}},
      {"output", {"snapshots", "seed"}}};
  for (const auto& [sec, keys] : sections) {
    auto it = known.find(sec);
    if (it == known.end()) throw ParseError("unknown section [" + sec + "]", 0, sec);
    for (const auto& [key, kv] : keys)
      if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
        throw ParseError("unknown key '" + key + "' in [" + sec + "]", kv.line, key);
  }
  auto get = [&](const std::string& sec, const std::string& key) -> const detail::KeyValue* {
    auto s = sections.find(sec);
    if (s == sections.end()) return nullptr;
    auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  };
  auto require = [&](const std::string& sec, const std::string& key) -> const detail::KeyValue& {
    const auto* kv = get(sec, key);
    if (!kv) throw ParseError("missing required key '" + key + "' in [" + sec + "]", 0, key);
    return *kv;
  };

  // grid
  sc.dim = static_cast<int>(detail::to_double(require("grid", "dimension"), "dimension"));
  if (sc.dim < 1 || sc.dim > 3)
    throw ParseError("dimension must be 1, 2, or 3", require("grid", "dimension").line,
                     "dimension");
  if (const auto* kv = get("grid", "box")) {
    const auto vals = detail::to_doubles(*kv, "box");
    if (vals.size() != static_cast<std::size_t>(2 * sc.dim))
      throw ParseError("box needs 2*dimension numbers (lo hi per axis)", kv->line, "box");
    for (int a = 0; a < sc.dim; ++a) {
      sc.lo[a] = vals[2 * a];
      sc.hi[a] = vals[2 * a + 1];
    }
  }
  {
    const auto& kv = require("grid", "nodes");
    const auto vals = detail::to_doubles(kv, "nodes");
    if (vals.size() != 1 && vals.size() != static_cast<std::size_t>(sc.dim))
      throw ParseError("nodes needs 1 or dimension values", kv.line, "nodes");
    for (int a = 0; a < sc.dim; ++a)
      sc.nodes[a] = static_cast<int>(vals.size() == 1 ? vals[0] : vals[a]);
  }

  // weights
  if (const auto* kv = get("weights", "family")) {
    const std::string f = kv->value;
    if (f == "identity")
      sc.weights.family = WeightFamily::Identity;
    else if (f == "isotropic-power")
      sc.weights.family = WeightFamily::IsotropicPower;
    else if (f == "anisotropic-diagonal")
      sc.weights.family = WeightFamily::AnisotropicDiagonal;
    else if (f == "grid-file")
      sc.weights.family = WeightFamily::GridFile;
    else if (f == "random")
      sc.random_field = true;
    else
      throw ParseError("unknown weight family '" + f + "'", kv->line, "family");
  }
  if (const auto* kv = get("weights", "alpha")) sc.weights.alpha = detail::to_double(*kv, "alpha");
  if (const auto* kv = get("weights", "exponents")) {
    const auto vals = detail::to_doubles(*kv, "exponents");
    for (std::size_t a = 0; a < vals.size() && a < 3; ++a) sc.weights.diag_exp[a] = vals[a];
  }
  if (const auto* kv = get("weights", "path")) sc.weights.path = kv->value;
  if (sc.weights.family == WeightFamily::GridFile && sc.weights.path.empty())
    throw ParseError("grid-file weights need 'path'", 0, "path");

  // evolution
  {
    const auto& kv = require("evolution", "p");
    sc.p = detail::to_double(kv, "p");
    if (!(sc.p > 1)) throw ParseError("p must exceed 1", kv.line, "p");
  }
  sc.T = detail::to_double(require("evolution", "T"), "T");
  if (!(sc.T > 0)) throw ParseError("T must be positive", require("evolution", "T").line, "T");
  if (const auto* kv = get("evolution", "steps")) {
    sc.steps = static_cast<int>(detail::to_double(*kv, "steps"));
    if (sc.steps < 1) throw ParseError("steps must be >= 1", kv->line, "steps");
  }
  if (const auto* kv = get("evolution", "refine_tol"))
    sc.refine_tol = detail::to_double(*kv, "refine_tol");
  if (const auto* kv = get("evolution", "grad_tol"))
    sc.solver.grad_tol = detail::to_double(*kv, "grad_tol");
  if (const auto* kv = get("evolution", "delta_floor"))
    sc.solver.delta_floor = detail::to_double(*kv, "delta_floor");
  if (const auto* kv = get("evolution", "max_iters"))
    sc.solver.max_iters = static_cast<int>(detail::to_double(*kv, "max_iters"));

  // initial
  if (const auto* kv = get("initial", "kind")) {
    const std::string k = kv->value;
    if (k == "sine-product")
      sc.initial = InitialKind::SineProduct;
    else if (k == "bump")
      sc.initial = InitialKind::Bump;
    else if (k == "random-smooth")
      sc.initial = InitialKind::RandomSmooth;
    else if (k == "file")
      sc.initial = InitialKind::File;
    else
      throw ParseError("unknown initial kind '" + k + "'", kv->line, "kind");
  }
  if (const auto* kv = get("initial", "scale")) sc.initial_scale = detail::to_double(*kv, "scale");
  if (const auto* kv = get("initial", "path")) sc.initial_path = kv->value;
  if (sc.initial == InitialKind::File && sc.initial_path.empty())
    throw ParseError("file initial datum needs 'path'", 0, "path");

  // analysis
  if (const auto* kv = get("analysis", "checks")) {
    std::istringstream ss(kv->value);
    std::string tok;
    static const std::vector<std::string> valid = {
        "hypothesis", "contraction", "dissipation",  "ultracontractivity",
        "extinction", "log-sobolev", "nash",         "lr-dissipation",
        "simon"};
    while (ss >> tok) {
      if (std::find(valid.begin(), valid.end(), tok) == valid.end())
        throw ParseError("unknown check '" + tok + "'", kv->line, "checks");
      sc.checks.push_back(tok);
    }
  }
  if (const auto* kv = get("analysis", "sigma")) {
    sc.sigma = detail::to_double(*kv, "sigma");
    if (!(sc.sigma > 1)) throw ParseError("sigma must exceed 1", kv->line, "sigma");
  }
  if (const auto* kv = get("analysis", "q0")) {
    sc.q0 = detail::to_double(*kv, "q0");
    if (!(sc.q0 >= 1)) throw ParseError("q0 must be >= 1", kv->line, "q0");
    const double sp = sc.sigma / (sc.sigma - 1);
    const double qc = sp * (2 - sc.p);
    if (!(sc.q0 > qc)) {
      std::ostringstream msg;
      msg << "q0 must exceed q_c = sigma'(2-p) = " << qc;
      throw ParseError(msg.str(), kv->line, "q0");
    }
  }
  if (const auto* kv = get("analysis", "eps_ext"))
    sc.eps_ext_rel = detail::to_double(*kv, "eps_ext");
  if (const auto* kv = get("analysis", "r_list")) sc.r_list = detail::to_doubles(*kv, "r_list");

  if (const auto* kv = get("selftest", "corrupt_step"))
    sc.corrupt_step = static_cast<int>(detail::to_double(*kv, "corrupt_step"));
  if (const auto* kv = get("selftest", "corrupt_scale"))
    sc.corrupt_scale = detail::to_double(*kv, "corrupt_scale");

  if (const auto* kv = get("output", "snapshots"))
    sc.snapshot_times = detail::to_doubles(*kv, "snapshots");
  if (const auto* kv = get("output", "seed"))
    sc.seed = static_cast<std::uint64_t>(detail::to_double(*kv, "seed"));

  return sc;
}

inline Grid make_grid(const Scenario& sc) { return Grid(sc.dim, sc.lo, sc.hi, sc.nodes); }

inline MatrixWeightField make_scenario_field(const Scenario& sc, const Grid& grid) {
  if (sc.random_field) {
    CounterRng rng(sc.seed, 11);
    return make_random_field(grid, rng);
  }
  return build_field(sc.weights, grid);
}

inline GridFunction make_initial(const Scenario& sc, const Grid& grid,
                                 const MatrixWeightField& /*field*/) {
  GridFunction u(grid);
  switch (sc.initial) {
    case InitialKind::SineProduct:
      u = GridFunction::sample(grid, [&](std::array<double, 3> x) {
        double val = 1.0;
        for (int a = 0; a < grid.dim(); ++a) {
          const double xa = (x[a] - grid.lo(a)) / (grid.hi(a) - grid.lo(a));
          val *= std::sin(3.14159265358979323846 * xa);
        }
        return val;
      });
      break;
    case InitialKind::Bump:
      u = GridFunction::sample(grid, [&](std::array<double, 3> x) {
        double r2 = 0;
        for (int a = 0; a < grid.dim(); ++a) {
          const double c = (grid.lo(a) + grid.hi(a)) / 2;
          const double w = (grid.hi(a) - grid.lo(a)) / 2;
          const double z = (x[a] - c) / w;
          r2 += z * z;
        }
        return r2 < 1 ? std::exp(1.0 - 1.0 / (1.0 - r2)) : 0.0;
      });
      break;
    case InitialKind::RandomSmooth: {
      CounterRng rng(sc.seed, 5);
      std::array<double, 27> amp{};
      for (auto& a : amp) a = rng.normal();
      u = GridFunction::sample(grid, [&](std::array<double, 3> x) {
        double val = 0;
        int idx = 0;
        for (int k1 = 1; k1 <= 3; ++k1) {
          double prod = amp[idx++];
          for (int a = 0; a < grid.dim(); ++a) {
            const double xa = (x[a] - grid.lo(a)) / (grid.hi(a) - grid.lo(a));
            prod *= std::sin(3.14159265358979323846 * ((a + k1 - 1) % 3 + 1) * xa);
          }
          val += prod;
        }
        return val;
      });
      const double m = u.max_abs();
      if (m > 0) u *= 1.0 / m;
      break;
    }
    case InitialKind::File:
      u = GridFunction::load(sc.initial_path, grid);
      u.project_zero_boundary();
      break;
  }
  u *= sc.initial_scale;
  return u;
}

struct CheckVerdict {
  std::string name;
  bool pass = false;
  double value = 0;   // headline number for the report
  double slack = 0;
  std::string note;
};

struct RunResult {
  std::vector<CheckVerdict> verdicts;
  bool solver_ok = true;
  std::string error;
  bool all_pass() const {
    if (!solver_ok) return false;
    for (const auto& v : verdicts)
      if (!v.pass) return false;
    return true;
  }
};

namespace detail {

inline void write_observables_csv(const Trajectory& traj, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error("cannot open " + path + " for writing");
  std::fprintf(f, "t,Dp,L1,L2,L4,Linf,iterations,residual,delta_stages\n");
  for (const auto& o : traj.observables)
    std::fprintf(f, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g,%d\n", o.t, o.dirichlet, o.l1,
                 o.l2, o.l4, o.linf, o.diag.iterations, o.diag.residual, o.diag.delta_stages);
  std::fclose(f);
}

inline void write_series_csv(const std::string& path, const std::string& header,
                             const std::vector<double>& x, const std::vector<double>& y) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error("cannot open " + path + " for writing");
  std::fprintf(f, "%s\n", header.c_str());
  for (std::size_t i = 0; i < x.size(); ++i) std::fprintf(f, "%.17g,%.17g\n", x[i], y[i]);
  std::fclose(f);
}

}  // namespace detail

// Execute one scenario: evolve, run requested checks, write artifacts.
inline RunResult run_scenario(const Scenario& sc, const std::string& out_dir, bool strict = false) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  RunResult result;
  const double slack_scale = strict ? 0.0 : 1.0;

  Grid grid = make_grid(sc);
  MatrixWeightField field = make_scenario_field(sc, grid);
  GridFunction u0 = make_initial(sc, grid, field);
  const double u0_l2 = norm_L2v(u0, field);
  const double u0_inf = norm_Lq_v(u0, kInf, field);

  Trajectory traj;
  try {
    if (sc.refine_tol > 0) {
      auto [t, rep] = refine_until_cauchy(u0, sc.T, sc.p, field, sc.solver,
                                          sc.refine_tol * std::max(u0_l2, 1e-300));
      traj = std::move(t);
      detail::write_series_csv(out_dir + "/refinement.csv", "n,distance",
                               std::vector<double>(rep.steps.begin(), rep.steps.end()),
                               rep.distances);
      if (!rep.cauchy) {
        result.solver_ok = false;
        result.error = "refinement cap reached without Cauchy tolerance";
      }
    } else {
      traj = evolve(u0, sc.T, sc.steps, sc.p, field, sc.solver);
    }
  } catch (const NonConvergence& e) {
    result.solver_ok = false;
    result.error = e.what();
    return result;
  }

  if (sc.corrupt_step >= 0 && sc.corrupt_step <= traj.n) {
    traj.snapshots[sc.corrupt_step] *= sc.corrupt_scale;
    traj.observables[sc.corrupt_step] =
        detail::observe(traj.snapshots[sc.corrupt_step], traj.times[sc.corrupt_step], sc.p,
                        field, traj.observables[sc.corrupt_step].diag);
  }

  detail::write_observables_csv(traj, out_dir + "/observables.csv");
  for (double t : sc.snapshot_times) {
    std::ostringstream name;
    name << out_dir << "/snapshot_t" << t << ".txt";
    evaluate(traj, t).save(name.str(), t);
  }

  const double inner_tol = sc.solver.grad_tol * slack_scale;
  const double q0 = sc.default_q0();

  for (const std::string& check : sc.checks) {
    CheckVerdict v;
    v.name = check;
    try {
      if (check == "hypothesis") {
        const auto rep = check_hypothesis(field, sc.p, sc.seed);
        v.pass = rep.pass();
        v.value = rep.v_mass;
        v.note = "heuristic quadrature verdicts";
      } else if (check == "contraction") {
        const auto rep = trajectory_checks(traj, inner_tol);
        v.pass = rep.lq_nonincreasing;
        v.slack = rep.slack;
        v.note = "L^q_v norms nonincreasing, q in {1,2,4,inf}";
      } else if (check == "dissipation") {
        const auto rep = trajectory_checks(traj, inner_tol);
        v.pass = rep.energy_nonincreasing && rep.gradient_bound;
        v.value = rep.gradient_lhs;
        v.slack = rep.slack;
        v.note = "D_p nonincreasing and time-integrated gradient bound";
      } else if (check == "ultracontractivity") {
        const auto params = decay_parameters(sc.p, q0, sc.sigma);
        const auto rep = ultracontractive_check(traj, params);
        v.pass = std::isfinite(rep.c_sup_window) && rep.c_sup_window > 0;
        v.value = rep.c_sup_window;
        detail::write_series_csv(out_dir + "/decay_c.csv", "t,c", rep.t, rep.c);
        v.note = "empirical C over the fit window";
      } else if (check == "extinction") {
        const auto params = decay_parameters(sc.p, q0, sc.sigma);
        SobolevConfig scfg;
        scfg.seed = sc.seed;
        const auto sob = estimate_sobolev(grid, field, sc.p, sc.sigma, scfg);
        const auto res = extinction_analysis(traj, params, sob.M_hat * 1.1,
                                             sc.eps_ext_rel * u0_inf);
        v.pass = res.detected && res.within_bound;
        v.value = res.t_ext;
        v.note = "T0 bound " + std::to_string(res.T0);
      } else if (check == "log-sobolev") {
        SobolevConfig scfg;
        scfg.seed = sc.seed;
        const auto sob = estimate_sobolev(grid, field, sc.p, sc.sigma, scfg);
        CounterRng rng(sc.seed, 21);
        bool ok = true;
        double worst = -kInf;
        for (int trial = 0; trial < 200; ++trial) {
          GridFunction f(grid);
          for (Index i = 0; i < grid.node_count(); ++i)
            if (!grid.is_boundary(i)) f[i] = rng.normal();
          const double r = rng.uniform(1.0, sc.sigma * sc.p * 0.999);
          const double eps = std::exp(rng.uniform(std::log(0.1), std::log(10.0)));
          const double gap =
              log_sobolev_gap(f, r, eps, sc.sigma, sob.M_hat * 1.05, sc.p, field);
          worst = std::max(worst, gap);
          if (gap > 1e-10) ok = false;
        }
        v.pass = ok;
        v.value = worst;
        v.note = "max gap over 200 random (f, r, eps)";
      } else if (check == "nash") {
        const double qn = std::min(q0, 1.9);
        CounterRng rng(sc.seed, 23);
        double sup = 0;
        for (int trial = 0; trial < 100; ++trial) {
          GridFunction f(grid);
          for (Index i = 0; i < grid.node_count(); ++i)
            if (!grid.is_boundary(i)) f[i] = rng.normal();
          sup = std::max(sup, nash_check(f, qn, sc.sigma, sc.p, field));
        }
        v.pass = std::isfinite(sup) && sup > 0;
        v.value = sup;
        v.note = "sup Nash ratio over 100 probes";
      } else if (check == "lr-dissipation") {
        // comparison reduction: rerun with the positive part of u0
        GridFunction u0p = u0;
        for (Index i = 0; i < grid.node_count(); ++i) u0p[i] = std::max(0.0, u0p[i]);
        Trajectory tp = evolve(u0p, sc.T, traj.n, sc.p, field, sc.solver);
        bool ok = true;
        double worst = kInf;
        for (double r : sc.r_list) {
          const auto rep = lr_dissipation_check(tp, r, field, inner_tol);
          if (!rep.pass) ok = false;
          for (double m : rep.margin) worst = std::min(worst, m);
        }
        v.pass = ok;
        v.value = worst;
        v.note = "min margin over steps and r_list";
      } else if (check == "simon") {
        const auto rep = simon_check(sc.p, 100000, sc.seed);
        v.pass = rep.pass;
        v.value = rep.c_primary;
        v.note = rep.calibrated ? "calibrated constants" : "uncalibrated p (report only)";
      }
    } catch (const Error& e) {
      v.pass = false;
      v.note = e.what();
    }
    result.verdicts.push_back(v);
  }

  // structured text report
  {
    std::ofstream rep(out_dir + "/report.txt");
    rep.precision(12);
    rep << "scenario " << sc.name << "\n";
    rep << "p " << sc.p << " T " << sc.T << " n " << traj.n << " dim " << sc.dim << "\n";
    rep << "u0_L2v " << u0_l2 << " u0_Linf " << u0_inf << "\n";
    rep << "inner_grad_tol " << sc.solver.grad_tol << (strict ? " (strict)" : "") << "\n";
    for (const auto& v : result.verdicts)
      rep << "check " << v.name << " " << (v.pass ? "PASS" : "FAIL") << " value " << v.value
          << " slack " << v.slack << " # " << v.note << "\n";
    if (!result.solver_ok) rep << "solver FAIL " << result.error << "\n";
  }
  return result;
}

struct SuiteSummary {
  std::vector<std::pair<std::string, RunResult>> rows;
  bool all_pass() const {
    for (const auto& [name, r] : rows)
      if (!r.all_pass()) return false;
    return true;
  }
};

inline SuiteSummary run_suite(const std::string& dir, const std::string& out_dir,
                              bool strict = false) {
  namespace fs = std::filesystem;
  SuiteSummary summary;
  std::vector<std::string> files;
  if (fs::exists(dir))
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".scenario") files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    Scenario sc = parse_scenario(f);
    RunResult r = run_scenario(sc, out_dir + "/" + sc.name, strict);
    summary.rows.emplace_back(sc.name, std::move(r));
  }
  return summary;
}

}  // namespace plap
