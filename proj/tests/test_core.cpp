#include "rpo/core.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace rpo;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an rpo::Error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("validate_returns accepts a well formed matrix") {
  MatrixXd x(2, 2);
  x << 0.01, -0.02, 0.03, 0.04;
  const ReturnsMatrix r = validate_returns(x, {"A", "B"});
  CHECK(r.assets() == 2);
  CHECK(r.samples() == 2);
  CHECK(r.asset_names()[1] == "B");
  CHECK(r.values()(1, 0) == 0.03);
}

TEST_CASE("validate_returns rejects bad input") {
  MatrixXd x(2, 2);
  x << 0.01, -0.02, 0.03, 0.04;

  SUBCASE("non-finite entry") {
    x(1, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK(code_of([&] { validate_returns(x, {"A", "B"}); }) == ErrorCode::kNonFiniteEntry);
    x(1, 0) = std::numeric_limits<double>::infinity();
    CHECK(code_of([&] { validate_returns(x, {"A", "B"}); }) == ErrorCode::kNonFiniteEntry);
  }
  SUBCASE("duplicate names") {
    CHECK(code_of([&] { validate_returns(x, {"A", "A"}); }) == ErrorCode::kDuplicateAssetName);
  }
  SUBCASE("empty matrix") {
    CHECK(code_of([&] { validate_returns(MatrixXd(0, 2), {"A", "B"}); }) ==
          ErrorCode::kEmptyMatrix);
    CHECK(code_of([&] { validate_returns(MatrixXd(2, 0), {}); }) == ErrorCode::kEmptyMatrix);
  }
  SUBCASE("name count") {
    CHECK(code_of([&] { validate_returns(x, {"A"}); }) == ErrorCode::kDimensionMismatch);
  }
}

TEST_CASE("non-finite error names the offending cell") {
  MatrixXd x = MatrixXd::Zero(3, 2);
  x(2, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    validate_returns(x, {"A", "B"});
    FAIL("no error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 3") != std::string::npos);
    CHECK(msg.find("column 2") != std::string::npos);
  }
}

TEST_CASE("slice_rows keeps names") {
  MatrixXd x(4, 2);
  x << 1, 2, 3, 4, 5, 6, 7, 8;
  const ReturnsMatrix r(x, {"A", "B"});
  const ReturnsMatrix s = r.slice_rows(1, 3);
  CHECK(s.samples() == 2);
  CHECK(s.values()(0, 1) == 4);
  CHECK(s.asset_names() == r.asset_names());
}

TEST_CASE("portfolio weights enforce the budget") {
  CHECK_NOTHROW(PortfolioWeights(VectorXd::Constant(4, 0.25)));
  VectorXd w(2);
  w << 0.7, 0.3 + 1e-12;
  CHECK_NOTHROW(PortfolioWeights{w});
  w << 0.7, 0.31;
  CHECK(code_of([&] { PortfolioWeights{w}; }) == ErrorCode::kBudgetViolation);
  w << std::numeric_limits<double>::quiet_NaN(), 1.0;
  CHECK(code_of([&] { PortfolioWeights{w}; }) == ErrorCode::kNonFiniteEntry);
}

TEST_CASE("effective number of assets") {
  CHECK(effective_assets(PortfolioWeights::equal(7)) == doctest::Approx(7.0).epsilon(1e-14));
  VectorXd w = VectorXd::Zero(4);
  w[0] = 1.0;
  CHECK(effective_assets(PortfolioWeights(w)) == 1.0);
  w << 0.5, 0.5, 0.0, 0.0;
  CHECK(effective_assets(PortfolioWeights(w)) == 2.0);
  w << 1.5, -0.5, 0.0, 0.0;
  const double neff = effective_assets(PortfolioWeights(w));
  CHECK(neff > 0.0);
  CHECK(neff <= 4.0);
}

TEST_CASE("effective assets lie in [1, N] for long-only weights") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 9;
    VectorXd w(n);
    for (int i = 0; i < n; ++i) w[i] = u(rng);
    w /= w.sum();
    const double neff = effective_assets(PortfolioWeights(w));
    CHECK(neff >= 1.0 - 1e-12);
    CHECK(neff <= n + 1e-12);
  }
}

TEST_CASE("tail config") {
  const TailConfig tail(0.3);
  CHECK(tail.beta() == 1.0 - 0.3);
  CHECK(code_of([] { TailConfig(0.0); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { TailConfig(1.5); }) == ErrorCode::kInvalidArgument);
  CHECK_NOTHROW(TailConfig(1.0));
  CHECK_NOTHROW(tail.require_samples(10));  // 0.3 * 10 = 3 despite rounding
  CHECK(code_of([&] { tail.require_samples(3); }) == ErrorCode::kTailTooSmall);
}

TEST_CASE("reg config") {
  CHECK(RegConfig(2.0).mode() == RegMode::kAsymmetricES);
  CHECK(RegConfig(2.0, RegMode::kSymmetricSTA).symmetric());
  CHECK(code_of([] { RegConfig(0.0); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { RegConfig(-1.0); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { RegConfig(std::numeric_limits<double>::infinity()); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("status and mode names") {
  CHECK(to_string(SolveStatus::kOptimal) == "optimal");
  CHECK(to_string(SolveStatus::kUnbounded) == "unbounded");
  CHECK(to_string(SolveStatus::kMaxIterations) == "max_iterations");
  CHECK(to_string(RegMode::kSymmetricSTA) == "sta");
  CHECK(to_string(ErrorCode::kRaggedRow) == "RaggedRow");
}
