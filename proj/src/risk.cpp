#include "rpo/risk.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace rpo {
namespace {

void check_dimensions(const ReturnsMatrix& r, const PortfolioWeights& w) {
  if (w.size() != r.assets()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "weight vector has " + std::to_string(w.size()) +
                    " entries, returns have " + std::to_string(r.assets()) +
                    " assets");
  }
}

// Splits ν·T into whole samples and a fractional remainder. Values within
// rounding of an integer are snapped so that 0.3 * 10 counts as 3.
struct TailCount {
  std::size_t whole;
  double fraction;
};

TailCount tail_count(double nu, std::size_t t) {
  const double m = nu * static_cast<double>(t);
  const double rounded = std::round(m);
  if (std::abs(m - rounded) <= 1e-9 * std::max(1.0, m)) {
    return {static_cast<std::size_t>(rounded), 0.0};
  }
  const double whole = std::floor(m);
  return {static_cast<std::size_t>(whole), m - whole};
}

}  // namespace

Eigen::VectorXd losses(const ReturnsMatrix& r, const PortfolioWeights& w) {
  check_dimensions(r, w);
  return -(r.values() * w.values());
}

TailMinimum minimize_tail_function(std::span<const double> a, double nu,
                                   double lower) {
  const std::size_t t = a.size();
  if (t == 0) throw Error(ErrorCode::kEmptyMatrix, "empty loss sample");
  std::vector<double> sorted(a.begin(), a.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  const auto [whole, fraction] = tail_count(nu, t);
  const double inv_t = 1.0 / static_cast<double>(t);
  double sum = 0.0;
  for (std::size_t i = 0; i < std::min(whole, t); ++i) sum += sorted[i];

  TailMinimum out;
  if (fraction == 0.0) {
    // Flat segment between the whole-th and (whole+1)-th largest values.
    out.eps_hi = sorted[whole - 1];
    out.eps_lo = whole < t ? sorted[whole]
                           : -std::numeric_limits<double>::infinity();
    out.value = sum * inv_t;
  } else {
    out.eps_hi = out.eps_lo = sorted[whole];
    out.value = (sum + fraction * sorted[whole]) * inv_t;
  }

  if (lower > out.eps_hi) {
    double v = nu * lower;
    for (double x : a) v += std::max(0.0, x - lower) * inv_t;
    return {v, lower, lower};
  }
  out.eps_lo = std::max(out.eps_lo, lower);
  return out;
}

ESValue expected_shortfall_of_losses(std::span<const double> loss,
                                     const TailConfig& tail) {
  const std::size_t t = loss.size();
  tail.require_samples(static_cast<Eigen::Index>(t));
  std::vector<double> sorted(loss.begin(), loss.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  const auto [whole, fraction] = tail_count(tail.nu(), t);
  double sum = 0.0;
  for (std::size_t i = 0; i < whole; ++i) sum += sorted[i];
  if (fraction == 0.0) {
    return {sum / static_cast<double>(whole), sorted[whole - 1]};
  }
  const double m = static_cast<double>(whole) + fraction;
  return {(sum + fraction * sorted[whole]) / m, sorted[whole]};
}

ESValue expected_shortfall(const ReturnsMatrix& r, const PortfolioWeights& w,
                           const TailConfig& tail) {
  tail.require_samples(r.samples());
  const Eigen::VectorXd l = losses(r, w);
  return expected_shortfall_of_losses({l.data(), static_cast<std::size_t>(l.size())},
                                      tail);
}

ESValue symmetric_tail_average(const ReturnsMatrix& r,
                               const PortfolioWeights& w,
                               const TailConfig& tail) {
  tail.require_samples(r.samples());
  // For ε >= 0 at most one of the two hinges is active, so the summand is
  // max(0, |w·x^k| - ε).
  const Eigen::VectorXd abs_returns = losses(r, w).cwiseAbs();
  const TailMinimum m = minimize_tail_function(
      {abs_returns.data(), static_cast<std::size_t>(abs_returns.size())},
      tail.nu(), 0.0);
  return {m.value, m.eps_hi};
}

Eigen::MatrixXd empirical_covariance(const ReturnsMatrix& r) {
  const Eigen::MatrixXd centered =
      r.values().rowwise() - r.values().colwise().mean();
  return centered.transpose() * centered / static_cast<double>(r.samples());
}

double sample_variance_risk(const ReturnsMatrix& r, const PortfolioWeights& w) {
  check_dimensions(r, w);
  if (r.samples() < 2) {
    throw Error(ErrorCode::kInsufficientSamples,
                "variance needs at least two samples");
  }
  return w.values().dot(empirical_covariance(r) * w.values());
}

}  // namespace rpo
