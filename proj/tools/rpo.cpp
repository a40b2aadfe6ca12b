// rpo: regularized expected-shortfall portfolio optimization from the
// command line. See `rpo --help` and `rpo <command> --help`.

#include "rpo/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>

int main(int argc, char** argv) {
  using rpo::Command;
  rpo::RunConfig config;
  try {
    config.tol = rpo::default_tolerances();
  } catch (const rpo::Error& e) {
    std::cerr << "error [" << rpo::to_string(e.code()) << "]: " << e.what() << "\n";
    return 1;
  }

  CLI::App app{"Minimum expected shortfall portfolios with L2 regularization"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "rpo 1.0.0");

  const std::map<std::string, rpo::RegMode> modes{
      {"es", rpo::RegMode::kAsymmetricES}, {"sta", rpo::RegMode::kSymmetricSTA}};
  const std::map<std::string, rpo::SolverChoice> solvers{
      {"dual", rpo::SolverChoice::kDual}, {"primal", rpo::SolverChoice::kPrimal}};

  std::string mode = "es";
  std::string solver = "dual";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", config.seed, "Random seed")->capture_default_str();
    sub->add_option("--tol", config.tol.relative,
                    "Relative optimality tolerance (default from RPO_TOL, else 1e-8)")
        ->capture_default_str();
    sub->add_option("--out", config.output, "JSON report path (default: standard output)");
    sub->add_flag("--timing", config.timing, "Record wall_time_ms in the report");
  };
  auto add_input = [&](CLI::App* sub) {
    sub->add_option("--input", config.input,
                    "Returns CSV, or synthetic:iid:n=<N>,t=<T> (drawn with --seed)");
  };
  auto add_nu = [&](CLI::App* sub) {
    sub->add_option("--nu", config.nu, "Tail fraction nu in (0, 1]")->capture_default_str();
  };
  auto add_mode = [&](CLI::App* sub) {
    sub->add_option("--mode", mode, "Loss: es (expected shortfall) or sta (symmetric)")
        ->check(CLI::IsMember(modes, CLI::ignore_case))
        ->capture_default_str();
  };
  auto add_grid = [&](CLI::App* sub) {
    sub->add_option("--c-grid", config.c_grid, "Comma separated C values")
        ->delimiter(',')
        ->default_str("0.01,0.1,1,10,100");
    sub->add_option("--folds", config.folds, "Cross-validation folds")->capture_default_str();
  };
  auto add_threads = [&](CLI::App* sub) {
    sub->add_option("--threads", config.threads, "Worker threads (0: all cores)")
        ->capture_default_str();
  };

  auto* optimize = app.add_subcommand("optimize", "Regularized portfolio (ES or STA)");
  add_input(optimize);
  add_nu(optimize);
  optimize->add_option("--c", config.c, "Regularization strength C")->capture_default_str();
  add_mode(optimize);
  optimize->add_option("--solver", solver, "dual or primal")
      ->check(CLI::IsMember(solvers, CLI::ignore_case))
      ->capture_default_str();
  add_common(optimize);

  auto* es_lp = app.add_subcommand("es-lp", "Unregularized minimum expected shortfall (exit 2 if unbounded)");
  add_input(es_lp);
  add_nu(es_lp);
  add_common(es_lp);

  auto* minvar = app.add_subcommand("minvar", "Minimum variance portfolio");
  add_input(minvar);
  add_common(minvar);

  auto* sweep = app.add_subcommand("sweep", "q0 estimation-error sweep over T");
  sweep->add_option("--n", config.n, "Number of assets")->capture_default_str();
  sweep->add_option("--t", config.t, "Comma separated sample lengths")
      ->delimiter(',')
      ->default_str("40,60,100,200");
  sweep->add_option("--trials", config.trials, "Trials per T")->capture_default_str();
  add_threads(sweep);
  add_common(sweep);

  auto* stability = app.add_subcommand("stability", "Out-of-sample comparison of LP and regularized portfolios");
  stability->add_option("--n", config.n, "Number of assets")->default_str("50");
  stability->add_option("--t", config.t, "Training sample length")->default_str("60");
  stability->add_option("--trials", config.trials, "Trials")->capture_default_str();
  stability->add_option("--test-t", config.test_t, "Held-out sample length")
      ->capture_default_str();
  add_nu(stability);
  add_mode(stability);
  add_grid(stability);
  add_threads(stability);
  add_common(stability);

  auto* crossval = app.add_subcommand("crossval", "Cross-validate C on a returns sample");
  add_input(crossval);
  add_nu(crossval);
  add_mode(crossval);
  add_grid(crossval);
  add_common(crossval);

  const std::map<CLI::App*, Command> commands{
      {optimize, Command::kOptimize}, {es_lp, Command::kEsLp},
      {minvar, Command::kMinVar},     {sweep, Command::kSweep},
      {stability, Command::kStability}, {crossval, Command::kCrossVal}};

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  if (stability->parsed() && stability->count("--t") == 0) config.t = {60};
  if (stability->parsed() && stability->count("--n") == 0) config.n = 50;
  config.mode = modes.at(CLI::detail::to_lower(mode));
  config.solver = solvers.at(CLI::detail::to_lower(solver));
  for (const auto& [sub, command] : commands) {
    if (sub->parsed()) config.command = command;
  }
  return rpo::run(config, std::cout, std::cerr);
}
