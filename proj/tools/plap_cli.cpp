// Command-line driver: run scenarios, sweep suites, estimate Sobolev
// constants, and exercise the self-test sensitivity mode.

#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "plap/analysis.hpp"
#include "plap/scenario.hpp"

namespace {

int cmd_run(const std::string& file, const std::string& out, std::uint64_t seed_override,
            bool have_seed, bool strict) {
  plap::Scenario sc = plap::parse_scenario(file);
  if (have_seed) sc.seed = seed_override;
  std::printf("scenario %s: dim=%d p=%g T=%g n=%d seed=%llu\n", sc.name.c_str(), sc.dim, sc.p,
              sc.T, sc.steps, static_cast<unsigned long long>(sc.seed));
  const plap::RunResult r = plap::run_scenario(sc, out, strict);
  if (!r.solver_ok) {
    std::printf("solver FAIL: %s\n", r.error.c_str());
    return 2;
  }
  for (const auto& v : r.verdicts)
    std::printf("check %-20s %s  value=%.6g slack=%.2g  %s\n", v.name.c_str(),
                v.pass ? "PASS" : "FAIL", v.value, v.slack, v.note.c_str());
  return r.all_pass() ? 0 : 1;
}

int cmd_suite(const std::string& dir, const std::string& out, bool strict) {
  const plap::SuiteSummary s = plap::run_suite(dir, out, strict);
  std::printf("%-32s %s\n", "scenario", "verdicts");
  for (const auto& [name, r] : s.rows) {
    std::string cells;
    for (const auto& v : r.verdicts) cells += v.name + (v.pass ? ":PASS " : ":FAIL ");
    if (!r.solver_ok) cells += "solver:FAIL ";
    std::printf("%-32s %s\n", name.c_str(), cells.c_str());
  }
  return s.all_pass() ? 0 : 1;
}

int cmd_estimate_sobolev(const std::string& file, std::uint64_t seed_override, bool have_seed) {
  plap::Scenario sc = plap::parse_scenario(file);
  if (have_seed) sc.seed = seed_override;
  const plap::Grid grid = plap::make_grid(sc);
  const plap::MatrixWeightField field = plap::make_scenario_field(sc, grid);
  plap::SobolevConfig cfg;
  cfg.seed = sc.seed;
  const auto est = plap::estimate_sobolev(grid, field, sc.p, sc.sigma, cfg);
  std::printf("M_hat = %.12g  (p=%g sigma=%g, %d starts, %d ascent iterations)\n", est.M_hat,
              sc.p, sc.sigma, est.starts, est.ascent_iters);
  return 0;
}

// Verifies that the trajectory checks flag a deliberately corrupted run and
// that the clean heat benchmark passes.
int cmd_self_test(const std::string& out) {
  namespace fs = std::filesystem;
  fs::create_directories(out);

  plap::Scenario heat;
  heat.name = "selftest-heat";
  heat.dim = 1;
  heat.nodes = {129, 1, 1};
  heat.p = 2.0;
  heat.T = 0.2;
  heat.steps = 64;
  heat.checks = {"contraction", "dissipation"};
  const plap::RunResult clean = plap::run_scenario(heat, out + "/clean");
  const bool clean_ok = clean.all_pass();

  plap::Scenario bad = heat;
  bad.name = "selftest-corrupt";
  bad.corrupt_step = heat.steps / 2;
  bad.corrupt_scale = 2.0;
  const plap::RunResult corrupt = plap::run_scenario(bad, out + "/corrupt");
  const bool detected = !corrupt.all_pass();

  std::printf("clean heat run: %s\n", clean_ok ? "PASS" : "FAIL");
  std::printf("corruption detected: %s\n", detected ? "PASS" : "FAIL");
  return clean_ok && detected ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"p-Laplacian gradient-flow solver and theorem-check harness"};
  app.require_subcommand(1);
  app.fallthrough();  // accept global options after the subcommand too

  std::string out = "out";
  std::uint64_t seed = 0;
  bool strict = false;
  int threads = 1;
  app.add_option("--out", out, "output directory");
  auto* seed_opt = app.add_option("--seed", seed, "override the scenario seed");
  app.add_option("--threads", threads, "worker count (scenario runs are serial-deterministic)");
  app.add_flag("--strict", strict, "zero slack-tolerance inflation");

  std::string run_file, suite_dir, sob_file;
  auto* run_cmd = app.add_subcommand("run", "run one scenario file");
  run_cmd->add_option("scenario", run_file, "scenario file")->required();
  auto* suite_cmd = app.add_subcommand("suite", "run every *.scenario in a directory");
  suite_cmd->add_option("dir", suite_dir, "scenario directory")->required();
  auto* sob_cmd = app.add_subcommand("estimate-sobolev", "estimate M_p for a scenario");
  sob_cmd->add_option("scenario", sob_file, "scenario file")->required();
  auto* self_cmd = app.add_subcommand("self-test", "check-sensitivity self test");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(run_file, out, seed, seed_opt->count() > 0, strict);
    if (*suite_cmd) return cmd_suite(suite_dir, out, strict);
    if (*sob_cmd) return cmd_estimate_sobolev(sob_file, seed, seed_opt->count() > 0);
    if (*self_cmd) return cmd_self_test(out);
  } catch (const plap::ParseError& e) {
    std::fprintf(stderr, "parse error (line %d, key '%s'): %s\n", e.line, e.key.c_str(),
                 e.what());
    return 3;
  } catch (const plap::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
