#include "rpo/lp_es.hpp"

#include "rpo/risk.hpp"
#include "rpo/simplex.hpp"

#include <algorithm>
#include <cmath>

namespace rpo {

double ArbitrageRay::violation(const ReturnsMatrix& r, double nu) const {
  const Eigen::VectorXd contact = r.values() * direction +
                                  Eigen::VectorXd::Constant(r.samples(), epsilon) +
                                  xi;
  double v = std::abs(direction.sum());
  v = std::max(v, std::max(0.0, -contact.minCoeff()));
  v = std::max(v, std::max(0.0, -xi.minCoeff()));
  const double s = xi.sum() / static_cast<double>(r.samples()) + nu * epsilon;
  v = std::max(v, std::abs(s - slope));
  if (!(slope < 0.0)) v = std::max(v, 1.0);
  return v;
}

LPStanding minimize_es_lp(const ReturnsMatrix& r, const TailConfig& tail,
                          const Tolerances& tol) {
  tail.require_samples(r.samples());
  const Eigen::Index t = r.samples();
  const Eigen::Index n = r.assets();
  const double nu = tail.nu();
  const double inv_t = 1.0 / static_cast<double>(t);

  // Columns: w (n, free) | ε (free) | ξ (t) | surplus (t).
  const Eigen::Index e = n, xi0 = n + 1, s0 = n + 1 + t;
  const Eigen::Index cols = s0 + t;

  LinearProgram lp;
  lp.a = Eigen::MatrixXd::Zero(t + 1, cols);
  lp.b = Eigen::VectorXd::Zero(t + 1);
  lp.c = Eigen::VectorXd::Zero(cols);
  lp.free.assign(static_cast<std::size_t>(cols), false);
  for (Eigen::Index j = 0; j <= e; ++j) lp.free[static_cast<std::size_t>(j)] = true;
  lp.a.block(0, 0, t, n) = r.values();
  lp.a.col(e).head(t).setOnes();
  lp.a.block(0, xi0, t, t).setIdentity();
  lp.a.block(0, s0, t, t) = -Eigen::MatrixXd::Identity(t, t);
  lp.a.row(t).head(n).setOnes();
  lp.b[t] = 1.0;
  lp.c[e] = nu;
  lp.c.segment(xi0, t).setConstant(inv_t);

  const SimplexResult res = solve_simplex(lp);
  LPStanding out;
  out.iterations = res.iterations;

  if (res.status == LPStatus::kInfeasible) {
    // Σw = 1 with free w is always feasible; reaching here is a solver fault.
    throw Error(ErrorCode::kNumericalFailure, "simplex reported an infeasible ES program");
  }

  if (res.status == LPStatus::kUnbounded) {
    ArbitrageRay ray;
    ray.direction = res.ray.head(n);
    ray.epsilon = res.ray[e];
    ray.xi = res.ray.segment(xi0, t);
    const double scale = ray.direction.lpNorm<Eigen::Infinity>();
    if (!(scale > 0.0)) {
      throw Error(ErrorCode::kNumericalFailure, "degenerate unbounded ray");
    }
    ray.direction /= scale;
    ray.epsilon /= scale;
    ray.xi /= scale;
    ray.direction.array() -= ray.direction.mean();  // strip rounding from Σd
    ray.slope = ray.xi.sum() * inv_t + nu * ray.epsilon;
    if (ray.violation(r, nu) > 1e-7) {
      throw Error(ErrorCode::kNumericalFailure, "unbounded ray fails verification");
    }
    out.status = SolveStatus::kUnbounded;
    out.certificate = std::move(ray);
    return out;
  }

  Eigen::VectorXd w = res.x.head(n);
  w.array() += (1.0 - w.sum()) / static_cast<double>(n);
  const double eps = res.x[e];
  PortfolioWeights weights(w, tol.budget);
  const Eigen::VectorXd loss = losses(r, weights);
  const Eigen::VectorXd xi = (loss.array() - eps).cwiseMax(0.0);
  const double objective = eps + xi.sum() * inv_t / nu;

  if (std::abs(objective - res.objective / nu) >
      1e-7 * (1.0 + std::abs(objective))) {
    throw Error(ErrorCode::kNumericalFailure,
                "simplex solution inconsistent with recomputed objective");
  }

  out.status = SolveStatus::kOptimal;
  out.solution = PrimalSolution{std::move(weights), eps, xi,
                                Eigen::VectorXd::Zero(t), objective};
  return out;
}

}  // namespace rpo
