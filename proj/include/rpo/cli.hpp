#pragma once

// Command-line front end: CSV ingestion, JSON reports and the command
// dispatcher behind the `rpo` tool.
//
// CSV: first row holds the asset names, every further row one time point.
// Comma separated, '.' as decimal point, fields may be double-quoted.
// Empty lines are skipped.
//
// JSON: keys in a fixed order, floating point values printed with 17
// significant digits, non-finite values as null.

#include "rpo/core.hpp"
#include "rpo/experiments.hpp"
#include "rpo/lp_es.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rpo {

/// Errors: IoError, EmptyFile, RaggedRow, UnparsableNumber, plus the
/// validation errors of ReturnsMatrix. Messages carry line and column.
ReturnsMatrix parse_returns_csv(const std::string& path);
ReturnsMatrix parse_returns_csv_text(const std::string& text);

enum class Command { kOptimize, kEsLp, kMinVar, kSweep, kStability, kCrossVal };

std::string_view to_string(Command command);

enum class SolverChoice { kDual, kPrimal };

struct RunConfig {
  Command command = Command::kOptimize;
  /// CSV path or "synthetic:iid:n=<N>,t=<T>".
  std::string input;
  double nu = 0.3;
  double c = 1.0;
  RegMode mode = RegMode::kAsymmetricES;
  SolverChoice solver = SolverChoice::kDual;
  std::uint64_t seed = 0;
  Tolerances tol;
  std::string output;  // empty: JSON goes to the summary stream
  int n = 20;
  std::vector<int> t{40, 60, 100, 200};
  int trials = 100;
  std::vector<double> c_grid{0.01, 0.1, 1.0, 10.0, 100.0};
  int folds = 5;
  int test_t = 10000;
  unsigned threads = 0;
  /// Wall-clock times make reports differ between runs, so they are only
  /// recorded on request.
  bool timing = false;
};

/// Every problem found, joined into one InvalidConfig error.
void validate(const RunConfig& config);

/// Tolerance default taken from RPO_TOL when set.
Tolerances default_tolerances();

struct SolveJson {
  std::string status;
  std::vector<std::string> names;
  std::optional<Eigen::VectorXd> weights;
  std::optional<Eigen::VectorXd> certificate;
  std::optional<double> objective;
  std::optional<double> epsilon;
  std::optional<double> duality_gap;
  std::optional<double> kkt_residual;
  std::optional<double> n_eff;
  std::optional<double> nu;
  std::optional<double> c;
  std::uint64_t seed = 0;
  std::optional<double> wall_time_ms;
};

std::string solve_json(const SolveJson& report);
std::string sweep_json(const SweepResult& result, std::optional<double> wall_time_ms);
std::string cv_json(const CVResult& result, double nu,
                    std::optional<double> wall_time_ms);
std::string stability_json(const StabilityConfig& config,
                           const StabilitySummary& summary,
                           std::optional<double> wall_time_ms);

/// Throws IoError when the file cannot be written.
void write_text(const std::string& path, const std::string& text);

/// Exit code: 0 success, 2 unbounded LP, 1 anything else. Errors are
/// reported on `err`; the human-readable summary goes to `out`.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace rpo
