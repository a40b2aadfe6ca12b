#include "rpo/core.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace rpo {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyMatrix: return "EmptyMatrix";
    case ErrorCode::kNonFiniteEntry: return "NonFiniteEntry";
    case ErrorCode::kDuplicateAssetName: return "DuplicateAssetName";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kBudgetViolation: return "BudgetViolation";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kTailTooSmall: return "TailTooSmall";
    case ErrorCode::kInsufficientSamples: return "InsufficientSamples";
    case ErrorCode::kNumericalFailure: return "NumericalFailure";
    case ErrorCode::kMissingDual: return "MissingDual";
    case ErrorCode::kLPUnbounded: return "LPUnbounded";
    case ErrorCode::kNotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::kSingularCovariance: return "SingularCovariance";
    case ErrorCode::kRaggedRow: return "RaggedRow";
    case ErrorCode::kUnparsableNumber: return "UnparsableNumber";
    case ErrorCode::kEmptyFile: return "EmptyFile";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

std::string_view to_string(RegMode mode) {
  return mode == RegMode::kAsymmetricES ? "es" : "sta";
}

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kUnbounded: return "unbounded";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kMaxIterations: return "max_iterations";
  }
  return "unknown";
}

ReturnsMatrix::ReturnsMatrix(Eigen::MatrixXd values,
                             std::vector<std::string> names)
    : values_(std::move(values)), names_(std::move(names)) {
  if (values_.rows() == 0 || values_.cols() == 0) {
    throw Error(ErrorCode::kEmptyMatrix, "returns matrix has no rows or columns");
  }
  if (static_cast<Eigen::Index>(names_.size()) != values_.cols()) {
    std::ostringstream os;
    os << "expected " << values_.cols() << " asset names, got " << names_.size();
    throw Error(ErrorCode::kDimensionMismatch, os.str());
  }
  for (Eigen::Index k = 0; k < values_.rows(); ++k) {
    for (Eigen::Index i = 0; i < values_.cols(); ++i) {
      if (!std::isfinite(values_(k, i))) {
        std::ostringstream os;
        os << "non-finite return at row " << k + 1 << ", column " << i + 1;
        throw Error(ErrorCode::kNonFiniteEntry, os.str());
      }
    }
  }
  std::unordered_set<std::string> seen;
  for (const auto& name : names_) {
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::kDuplicateAssetName,
                  "duplicate asset name '" + name + "'");
    }
  }
}

ReturnsMatrix ReturnsMatrix::slice_rows(Eigen::Index begin,
                                        Eigen::Index end) const {
  if (begin < 0 || end > samples() || begin >= end) {
    throw Error(ErrorCode::kInvalidArgument, "invalid row slice");
  }
  return ReturnsMatrix(values_.middleRows(begin, end - begin), names_);
}

ReturnsMatrix validate_returns(const Eigen::MatrixXd& raw,
                               const std::vector<std::string>& names) {
  return ReturnsMatrix(raw, names);
}

std::vector<std::string> default_asset_names(Eigen::Index n) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) names.push_back("A" + std::to_string(i + 1));
  return names;
}

PortfolioWeights::PortfolioWeights(Eigen::VectorXd w, double budget_tol)
    : w_(std::move(w)) {
  if (w_.size() == 0) {
    throw Error(ErrorCode::kEmptyMatrix, "empty weight vector");
  }
  if (!w_.allFinite()) {
    throw Error(ErrorCode::kNonFiniteEntry, "non-finite portfolio weight");
  }
  // The tolerance scales with the gross exposure so that long-short
  // portfolios with large legs are not rejected for rounding noise.
  const double scale = std::max(1.0, w_.lpNorm<1>());
  if (std::abs(w_.sum() - 1.0) > budget_tol * scale) {
    std::ostringstream os;
    os.precision(17);
    os << "weights sum to " << w_.sum() << ", budget requires 1";
    throw Error(ErrorCode::kBudgetViolation, os.str());
  }
}

PortfolioWeights PortfolioWeights::equal(Eigen::Index n) {
  return PortfolioWeights(
      Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
}

TailConfig::TailConfig(double nu) : nu_(nu) {
  if (!(nu > 0.0 && nu <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "tail fraction nu must lie in (0, 1]");
  }
}

void TailConfig::require_samples(Eigen::Index t) const {
  // ν·T is computed in floating point; 0.1 * 10 must count as one sample.
  if (nu_ * static_cast<double>(t) < 1.0 - 1e-12) {
    std::ostringstream os;
    os << "tail fraction " << nu_ << " times " << t
       << " samples is below one sample";
    throw Error(ErrorCode::kTailTooSmall, os.str());
  }
}

RegConfig::RegConfig(double c, RegMode mode) : c_(c), mode_(mode) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw Error(ErrorCode::kInvalidArgument, "C must be positive and finite");
  }
}

double effective_assets(const PortfolioWeights& w) {
  return 1.0 / w.values().squaredNorm();
}

}  // namespace rpo
