#pragma once

// Synthetic return generators, the minimum-variance baseline and the Monte
// Carlo studies built on them: the q0 estimation-error sweep, the
// regularized versus unregularized stability study, and cross-validation
// of the regularization strength C.
//
// Randomness: every draw comes from a std::mt19937_64 whose state is
// filled by std::seed_seq from the user seed followed by stream indices
// (grid point, trial, resample, ...). Streams therefore do not depend on
// the order in which trials run, and trials may run on several threads.

#include "rpo/core.hpp"

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace rpo {

enum class GeneratorKind { kIidGaussian, kCorrelatedGaussian };

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::kIidGaussian;
  int n = 1;
  int t = 1;
  Eigen::MatrixXd covariance;  // CorrelatedGaussian only
  std::uint64_t seed = 0;
};

/// Seed for the stream identified by `path` under `seed`.
std::uint64_t derive_seed(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> path);

/// Throws NotPositiveDefinite when the covariance is not symmetric positive
/// definite, InvalidArgument when n or t is below 1.
ReturnsMatrix generate(const GeneratorSpec& spec);

/// w = C⁻¹1 / 1'C⁻¹1 for the empirical covariance C. Throws
/// SingularCovariance when T <= N or C is numerically singular.
PortfolioWeights min_variance(const ReturnsMatrix& r);

/// q0 = sqrt(N Σ ŵ_i²) of the sample minimum-variance portfolio under iid
/// standard normal returns, averaged over `trials` draws per T.
/// threads = 0 uses the hardware concurrency.
SweepResult q0_sweep(int n, const std::vector<int>& t_list, int trials,
                     std::uint64_t seed, unsigned threads = 0);

struct CVResult {
  std::vector<double> c_grid;
  Eigen::MatrixXd fold_scores;  // grid × folds, out-of-sample ES
  double best_c = 0.0;
  std::uint64_t seed = 0;
};

/// Contiguous-block K-fold cross-validation of C. Each fit sees only the
/// training blocks; the held-out block is scored by its exact ES. Ties in
/// the mean score go to the earliest grid entry.
CVResult cross_validate_c(const ReturnsMatrix& r, const TailConfig& tail,
                          const std::vector<double>& c_grid, int folds,
                          std::uint64_t seed,
                          RegMode mode = RegMode::kAsymmetricES);

struct StabilityConfig {
  int n = 50;
  int t = 60;
  double nu = 0.3;
  /// One entry: fixed C. Several: C picked per trial by cross-validation
  /// on the training sample.
  std::vector<double> c_grid{0.01, 0.1, 1.0, 10.0, 100.0};
  int folds = 5;
  int test_t = 10000;
  int trials = 100;
  std::uint64_t seed = 0;
  RegMode mode = RegMode::kAsymmetricES;
  unsigned threads = 0;
};

/// Means are NaN when no trial qualifies; dispersions need two trials.
struct StabilitySummary {
  int trials = 0;
  int lp_optimal = 0;
  double unbounded_fraction = 0.0;
  double lp_oos_es_mean = 0.0;
  double lp_oos_es_stderr = 0.0;
  double reg_oos_es_mean = 0.0;
  double reg_oos_es_stderr = 0.0;
  /// Over the trials where the LP was optimal.
  double reg_oos_es_mean_paired = 0.0;
  double lp_angle_dispersion = 0.0;
  double reg_angle_dispersion = 0.0;
  double reg_angle_dispersion_paired = 0.0;
  std::vector<double> chosen_c;
  std::vector<bool> lp_bounded;
  std::uint64_t seed = 0;
};

StabilitySummary stability_study(const StabilityConfig& config);

/// Mean pairwise angle in radians between the vectors.
double mean_pairwise_angle(const std::vector<Eigen::VectorXd>& vectors);

/// Regularized weights from the dual solver, falling back to the primal
/// interior point solver when the dual is not certified optimal.
PortfolioWeights fit_regularized(const ReturnsMatrix& r, const TailConfig& tail,
                                 const RegConfig& reg);

}  // namespace rpo
