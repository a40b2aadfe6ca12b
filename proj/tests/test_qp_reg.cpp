#include "rpo/lp_es.hpp"
#include "rpo/qp_reg.hpp"
#include "rpo/risk.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace rpo;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ReturnsMatrix returns(const MatrixXd& x) {
  return ReturnsMatrix(x, default_asset_names(x.cols()));
}

double max_abs(const VectorXd& v) { return v.lpNorm<Eigen::Infinity>(); }

}  // namespace

TEST_CASE("vanishing C gives equal weights") {
  const ReturnsMatrix r = returns(oracle::gaussian(30, 5, 17));
  for (RegMode mode : {RegMode::kAsymmetricES, RegMode::kSymmetricSTA}) {
    const RegConfig reg(1e-12, mode);
    for (const SolveReport& rep :
         {solve_primal(r, TailConfig(0.3), reg), solve_dual(r, TailConfig(0.3), reg)}) {
      REQUIRE(rep.status == SolveStatus::kOptimal);
      CHECK(max_abs(rep.primal->weights.values().array() - 0.2) <= 1e-8);
      CHECK(rep.n_eff == doctest::Approx(5.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("zero dual variables reproduce the equal-weight point") {
  const ReturnsMatrix r = returns(oracle::gaussian(10, 4, 3));
  const SolveReport rep = solve_dual(r, TailConfig(0.5), RegConfig(1e-14));
  REQUIRE(rep.dual.has_value());
  CHECK(max_abs(rep.dual->alpha) <= 1e-13);
  CHECK(rep.dual->gamma == doctest::Approx(-0.25).epsilon(1e-10));
  CHECK(kkt_check(r, TailConfig(0.5), RegConfig(1e-14), rep) <= 1e-10);
}

TEST_CASE("exchange symmetry gives equal weights") {
  // Every row (a, b) has its mirror (b, a), so swapping the assets maps the
  // sample onto itself.
  const MatrixXd base = oracle::gaussian(8, 2, 99);
  MatrixXd x(16, 2);
  x.topRows(8) = base;
  x.bottomRows(8).col(0) = base.col(1);
  x.bottomRows(8).col(1) = base.col(0);
  for (RegMode mode : {RegMode::kAsymmetricES, RegMode::kSymmetricSTA}) {
    const SolveReport p = solve_primal(returns(x), TailConfig(0.25), RegConfig(3.0, mode));
    const SolveReport d = solve_dual(returns(x), TailConfig(0.25), RegConfig(3.0, mode));
    CHECK(p.primal->weights[0] == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(d.primal->weights[0] == doctest::Approx(0.5).epsilon(1e-7));
  }
}

TEST_CASE("primal objective against a golden-section search on the budget plane") {
  for (int seed = 0; seed < 4; ++seed) {
    const MatrixXd x = oracle::gaussian(15, 3, 500 + seed);
    for (bool sym : {false, true}) {
      const RegConfig reg(10.0, sym ? RegMode::kSymmetricSTA : RegMode::kAsymmetricES);
      const SolveReport rep = solve_primal(returns(x), TailConfig(0.4), reg);
      REQUIRE(rep.status == SolveStatus::kOptimal);
      auto f = [&](const VectorXd& w) { return oracle::regularized_objective(x, w, 0.4, 10.0, sym); };
      const VectorXd w = oracle::minimize_on_budget_plane(f, 3, 4.0, 1e-11);
      const double best = f(w);
      CHECK(std::abs(rep.primal->objective - best) <= 1e-6 * (1.0 + std::abs(best)));
      CHECK(rep.primal->objective <= best + 1e-9);
      CHECK(max_abs(rep.primal->weights.values() - w) <= 1e-5);
    }
  }
}

TEST_CASE("dual reconstruction agrees with the primal solver") {
  const MatrixXd x = oracle::gaussian(6, 2, 31);
  const ReturnsMatrix r = returns(x);
  const SolveReport p = solve_primal(r, TailConfig(0.5), RegConfig(5.0));
  const SolveReport d = solve_dual(r, TailConfig(0.5), RegConfig(5.0));
  REQUIRE(d.status == SolveStatus::kOptimal);
  CHECK(max_abs(p.primal->weights.values() - d.primal->weights.values()) <= 1e-5);
}

TEST_CASE("weak duality and gap in symmetric mode") {
  for (int seed = 0; seed < 5; ++seed) {
    const ReturnsMatrix r = returns(oracle::gaussian(10, 3, 40 + seed));
    const RegConfig reg(2.0, RegMode::kSymmetricSTA);
    const SolveReport d = solve_dual(r, TailConfig(0.3), reg);
    const SolveReport p = solve_primal(r, TailConfig(0.3), reg);
    REQUIRE(d.status == SolveStatus::kOptimal);
    CHECK(d.dual->objective <= p.primal->objective + 1e-10);
    CHECK(d.duality_gap <= 1e-6 * (1.0 + std::abs(d.primal->objective)));
    CHECK(d.duality_gap >= -1e-12);
  }
}

TEST_CASE("dual solution invariants") {
  for (int seed = 0; seed < 10; ++seed) {
    const int n = 2 + seed % 4;
    const ReturnsMatrix r = returns(oracle::gaussian(12 + seed, n, 60 + seed));
    const bool sym = seed % 2 == 1;
    const RegConfig reg(0.5 + seed, sym ? RegMode::kSymmetricSTA : RegMode::kAsymmetricES);
    const TailConfig tail(0.4);
    const SolveReport d = solve_dual(r, tail, reg);
    REQUIRE(d.dual.has_value());
    const DualSolution& s = *d.dual;
    const double upper = reg.c() / r.samples();
    CHECK(s.alpha.minCoeff() >= 0.0);
    CHECK(s.alpha.maxCoeff() <= upper);
    double used = s.alpha.sum();
    if (sym) {
      REQUIRE(s.alpha_star.size() == r.samples());
      CHECK(s.alpha_star.minCoeff() >= 0.0);
      CHECK(s.alpha_star.maxCoeff() <= upper);
      CHECK(s.alpha.cwiseProduct(s.alpha_star).maxCoeff() == 0.0);
      used += s.alpha_star.sum();
    } else {
      CHECK(s.alpha_star.size() == 0);
    }
    CHECK(used <= reg.c() * tail.nu() * (1.0 + 1e-12));

    // w = Σ (α - α*) x^k - γ 1 holds exactly up to rounding.
    const VectorXd beta = sym ? VectorXd(s.alpha - s.alpha_star) : s.alpha;
    const VectorXd expansion = r.values().transpose() * beta;
    const VectorXd w = expansion.array() - s.gamma;
    CHECK(max_abs(w - d.primal->weights.values()) <= 1e-12 * (1.0 + max_abs(expansion)));
    CHECK(std::abs(d.primal->weights.values().sum() - 1.0) <= 1e-10);

    for (std::size_t j = 0; j < s.support_set.size(); ++j) {
      const auto k = s.support_set[j];
      CHECK((s.alpha[k] > 0.0 || (sym && s.alpha_star[k] > 0.0)));
    }
  }
}

TEST_CASE("kkt_check detects violations") {
  const ReturnsMatrix r = returns(oracle::gaussian(20, 3, 8));
  const TailConfig tail(0.3);
  const RegConfig reg(2.0);
  SolveReport rep = solve_dual(r, tail, reg);
  REQUIRE(rep.status == SolveStatus::kOptimal);
  CHECK(kkt_check(r, tail, reg, rep) <= 1e-6);

  rep.dual->alpha[0] = reg.c() / 20.0 + 0.1;
  CHECK(kkt_check(r, tail, reg, rep) >= 0.1);

  SolveReport primal_only = solve_primal(r, tail, reg);
  try {
    kkt_check(r, tail, reg, primal_only);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingDual);
  }
}

TEST_CASE("samples off their constraint carry no dual weight") {
  for (int seed = 0; seed < 20; ++seed) {
    const ReturnsMatrix r = returns(oracle::gaussian(25, 4, 700 + seed));
    const bool sym = seed % 2 == 0;
    const TailConfig tail(0.3);
    const RegConfig reg(std::pow(10.0, seed % 4 - 1), sym ? RegMode::kSymmetricSTA : RegMode::kAsymmetricES);
    const SolveReport rep = solve_dual(r, tail, reg);
    REQUIRE(rep.status == SolveStatus::kOptimal);
    const VectorXd loss = -(r.values() * rep.primal->weights.values());
    const double eps = rep.primal->epsilon;
    for (Eigen::Index k = 0; k < r.samples(); ++k) {
      if (loss[k] < eps - 1e-7) CHECK(rep.dual->alpha[k] <= 1e-8);
      if (sym && -loss[k] < eps - 1e-7) CHECK(rep.dual->alpha_star[k] <= 1e-8);
    }
  }
}

TEST_CASE("objective and weight length grow with C") {
  const ReturnsMatrix r = returns(oracle::gaussian(30, 4, 1234));
  for (RegMode mode : {RegMode::kAsymmetricES, RegMode::kSymmetricSTA}) {
    double prev_obj = -1.0, prev_norm = 0.0;
    for (double c : {0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0}) {
      const SolveReport rep = solve_dual(r, TailConfig(0.3), RegConfig(c, mode));
      REQUIRE(rep.status == SolveStatus::kOptimal);
      const double norm = rep.primal->weights.values().squaredNorm();
      CHECK(rep.primal->objective >= prev_obj - 1e-9);
      CHECK(norm >= prev_norm - 1e-7);
      prev_obj = rep.primal->objective;
      prev_norm = norm;
    }
  }
}

TEST_CASE("asset and time permutations") {
  const MatrixXd x = oracle::gaussian(24, 4, 2024);
  const TailConfig tail(0.25);
  const RegConfig reg(3.0);
  const VectorXd w = solve_dual(returns(x), tail, reg).primal->weights.values();

  std::vector<int> cols{2, 0, 3, 1};
  MatrixXd xc(24, 4);
  for (int i = 0; i < 4; ++i) xc.col(i) = x.col(cols[i]);
  const VectorXd wc = solve_dual(returns(xc), tail, reg).primal->weights.values();
  for (int i = 0; i < 4; ++i) CHECK(wc[i] == doctest::Approx(w[cols[i]]).epsilon(1e-7));

  std::vector<int> rows(24);
  std::iota(rows.begin(), rows.end(), 0);
  std::mt19937_64 rng(1);
  std::shuffle(rows.begin(), rows.end(), rng);
  MatrixXd xr(24, 4);
  for (int k = 0; k < 24; ++k) xr.row(k) = x.row(rows[k]);
  const VectorXd wr = solve_dual(returns(xr), tail, reg).primal->weights.values();
  CHECK(max_abs(wr - w) <= 1e-7);
}

TEST_CASE("full-tail ES against brute force") {
  for (int seed = 0; seed < 10; ++seed) {
    const int n = 2 + seed % 2;
    const MatrixXd x = oracle::gaussian(12, n, 900 + seed);
    const RegConfig reg(4.0);
    const SolveReport rep = solve_primal(returns(x), TailConfig(1.0), reg);
    auto f = [&](const VectorXd& w) { return oracle::regularized_objective(x, w, 1.0, 4.0, false); };
    const double best = f(oracle::minimize_on_budget_plane(f, n, 4.0, 1e-11));
    CHECK(std::abs(rep.primal->objective - best) <= 1e-6 * (1.0 + std::abs(best)));
  }
}

TEST_CASE("primal solution satisfies its constraints") {
  const ReturnsMatrix r = returns(oracle::gaussian(20, 3, 5));
  for (RegMode mode : {RegMode::kAsymmetricES, RegMode::kSymmetricSTA}) {
    const SolveReport rep = solve_primal(r, TailConfig(0.3), RegConfig(7.0, mode));
    const PrimalSolution& p = *rep.primal;
    const VectorXd ret = r.values() * p.weights.values();
    CHECK(p.epsilon >= 0.0);
    CHECK(p.xi.minCoeff() >= 0.0);
    CHECK(p.xi_star.minCoeff() >= 0.0);
    CHECK((-ret.array() - p.epsilon - p.xi.array()).maxCoeff() <= 1e-12);
    if (mode == RegMode::kSymmetricSTA) {
      CHECK((ret.array() - p.epsilon - p.xi_star.array()).maxCoeff() <= 1e-12);
    } else {
      CHECK(p.xi_star.maxCoeff() == 0.0);
    }
    CHECK(rep.primal->objective ==
          doctest::Approx(regularized_objective(r, TailConfig(0.3), RegConfig(7.0, mode),
                                                p.weights.values()))
              .epsilon(1e-12));
  }
}

TEST_CASE("unregularized limit") {
  const std::vector<double> cs{1.0, 10.0, 100.0, 1000.0};
  SUBCASE("long sample approaches the LP solution") {
    const MatrixXd x = oracle::gaussian(200, 2, 77);
    const ReturnsMatrix r = returns(x);
    const std::vector<double> d = unregularized_limit_distances(r, TailConfig(0.3), cs);
    REQUIRE(d.size() == 4);
    for (std::size_t i = 1; i < d.size(); ++i) CHECK(d[i] <= d[i - 1] + 1e-12);
    CHECK(d.back() < 1e-3);
    CHECK(unregularized_limit_check(r, TailConfig(0.3), cs) == d.back());
  }
  SUBCASE("single asset") {
    const ReturnsMatrix r = returns(oracle::gaussian(30, 1, 2));
    for (double d : unregularized_limit_distances(r, TailConfig(0.3), cs)) CHECK(d <= 1e-12);
  }
  SUBCASE("unbounded LP") {
    MatrixXd x(5, 2);
    x << 0.02, 0.01, -0.01, -0.03, 0.04, 0.00, 0.00, -0.02, 0.01, 0.005;
    try {
      unregularized_limit_check(returns(x), TailConfig(0.4), cs);
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kLPUnbounded);
    }
  }
}

TEST_CASE("solvers reject too small a tail") {
  const ReturnsMatrix r = returns(oracle::gaussian(4, 2, 1));
  CHECK_THROWS_AS(solve_primal(r, TailConfig(0.2), RegConfig(1.0)), Error);
  CHECK_THROWS_AS(solve_dual(r, TailConfig(0.2), RegConfig(1.0)), Error);
}
