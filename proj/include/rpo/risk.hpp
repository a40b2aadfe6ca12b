#pragma once

// Risk functionals evaluated at a fixed portfolio. These are the ground
// truth the optimizers are checked against, so they are written for
// exactness rather than speed.

#include "rpo/core.hpp"

#include <limits>
#include <span>

namespace rpo {

/// ℓ_k = -w·x^k for every time point.
Eigen::VectorXd losses(const ReturnsMatrix& r, const PortfolioWeights& w);

/// Result of minimizing g(ε) = ν ε + (1/T) Σ_k max(0, a_k - ε) over
/// ε >= lower. The minimizers form the closed interval [eps_lo, eps_hi].
struct TailMinimum {
  double value = 0.0;
  double eps_lo = 0.0;
  double eps_hi = 0.0;
};

TailMinimum minimize_tail_function(
    std::span<const double> a, double nu,
    double lower = -std::numeric_limits<double>::infinity());

/// Expected shortfall of an explicit loss sample.
ESValue expected_shortfall_of_losses(std::span<const double> losses,
                                     const TailConfig& tail);

ESValue expected_shortfall(const ReturnsMatrix& r, const PortfolioWeights& w,
                           const TailConfig& tail);

/// min over ε >= 0 of εν + (1/T) Σ_k [max(0, -w·x^k - ε) + max(0, w·x^k - ε)].
ESValue symmetric_tail_average(const ReturnsMatrix& r,
                               const PortfolioWeights& w,
                               const TailConfig& tail);

/// Population covariance (divide by T) of the return columns.
Eigen::MatrixXd empirical_covariance(const ReturnsMatrix& r);

double sample_variance_risk(const ReturnsMatrix& r, const PortfolioWeights& w);

}  // namespace rpo
