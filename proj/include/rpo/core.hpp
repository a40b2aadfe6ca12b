#pragma once

// Domain types shared by the risk evaluators, the solvers and the
// experiment harness. Everything here is immutable after construction.

#include <Eigen/Core>

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rpo {

enum class ErrorCode {
  kEmptyMatrix,
  kNonFiniteEntry,
  kDuplicateAssetName,
  kDimensionMismatch,
  kBudgetViolation,
  kInvalidArgument,
  kTailTooSmall,
  kInsufficientSamples,
  kNumericalFailure,
  kMissingDual,
  kLPUnbounded,
  kNotPositiveDefinite,
  kSingularCovariance,
  kRaggedRow,
  kUnparsableNumber,
  kEmptyFile,
  kIoError,
  kInvalidConfig,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Numeric tolerances handed to every solver.
struct Tolerances {
  double relative = 1e-8;
  double budget = 1e-10;
};

/// T x N sample of asset returns, rows are time points.
class ReturnsMatrix {
 public:
  /// Validating constructor; see validate_returns().
  ReturnsMatrix(Eigen::MatrixXd values, std::vector<std::string> names);

  const Eigen::MatrixXd& values() const noexcept { return values_; }
  const std::vector<std::string>& asset_names() const noexcept {
    return names_;
  }
  Eigen::Index samples() const noexcept { return values_.rows(); }
  Eigen::Index assets() const noexcept { return values_.cols(); }

  /// Rows [begin, end) as a new matrix.
  ReturnsMatrix slice_rows(Eigen::Index begin, Eigen::Index end) const;

 private:
  Eigen::MatrixXd values_;
  std::vector<std::string> names_;
};

ReturnsMatrix validate_returns(const Eigen::MatrixXd& raw,
                               const std::vector<std::string>& names);

/// Generic names "A1", "A2", ... for synthetic data.
std::vector<std::string> default_asset_names(Eigen::Index n);

/// Weight vector satisfying the budget Σw = 1.
class PortfolioWeights {
 public:
  explicit PortfolioWeights(Eigen::VectorXd w, double budget_tol = 1e-10);

  static PortfolioWeights equal(Eigen::Index n);

  const Eigen::VectorXd& values() const noexcept { return w_; }
  Eigen::Index size() const noexcept { return w_.size(); }
  double operator[](Eigen::Index i) const { return w_[i]; }

 private:
  Eigen::VectorXd w_;
};

/// Tail fraction ν = 1 - β used by expected shortfall.
class TailConfig {
 public:
  explicit TailConfig(double nu);

  double nu() const noexcept { return nu_; }
  double beta() const noexcept { return 1.0 - nu_; }

  /// Throws TailTooSmall unless ν·T >= 1.
  void require_samples(Eigen::Index t) const;

 private:
  double nu_;
};

struct ESValue {
  double value = 0.0;
  double threshold = 0.0;
};

enum class RegMode { kAsymmetricES, kSymmetricSTA };

std::string_view to_string(RegMode mode);

class RegConfig {
 public:
  explicit RegConfig(double c, RegMode mode = RegMode::kAsymmetricES);

  double c() const noexcept { return c_; }
  RegMode mode() const noexcept { return mode_; }
  bool symmetric() const noexcept { return mode_ == RegMode::kSymmetricSTA; }

 private:
  double c_;
  RegMode mode_;
};

struct PrimalSolution {
  PortfolioWeights weights;
  double epsilon = 0.0;
  Eigen::VectorXd xi;
  Eigen::VectorXd xi_star;  // zero in AsymmetricES mode
  double objective = 0.0;
};

struct DualSolution {
  Eigen::VectorXd alpha;
  Eigen::VectorXd alpha_star;  // empty in AsymmetricES mode
  double gamma = 0.0;
  double objective = 0.0;
  std::vector<Eigen::Index> support_set;
};

enum class SolveStatus { kOptimal, kUnbounded, kInfeasible, kMaxIterations };

std::string_view to_string(SolveStatus status);

struct SolveReport {
  SolveStatus status = SolveStatus::kMaxIterations;
  std::optional<PrimalSolution> primal;
  std::optional<DualSolution> dual;
  double duality_gap = 0.0;
  double kkt_residual = 0.0;
  double n_eff = 0.0;
  long iterations = 0;
  std::chrono::nanoseconds wall_time{0};
};

struct GridPoint {
  int n = 0;
  int t = 0;
};

struct SweepResult {
  std::vector<GridPoint> grid;
  std::vector<double> q0_mean;
  std::vector<double> q0_stderr;
  std::vector<int> trials;
  std::vector<int> resamples;
  std::uint64_t seed = 0;
};

/// N_eff = 1 / Σ w_i².
double effective_assets(const PortfolioWeights& w);

}  // namespace rpo
