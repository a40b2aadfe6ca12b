#include "rpo/interior_point.hpp"

#include "rpo/core.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>

namespace rpo {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Largest step in [0, 1] keeping v + step * dv >= 0.
double max_step(const VectorXd& v, const VectorXd& dv) {
  double step = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv[i] < 0.0) step = std::min(step, -v[i] / dv[i]);
  }
  return step;
}

struct Iterate {
  VectorXd z, y, lambda, s;
};

}  // namespace

InteriorPointResult solve_interior_point(const QuadraticProgram& qp,
                                         const InteriorPointOptions& options) {
  const MatrixXd& H = qp.hessian;
  const MatrixXd& A = qp.eq_matrix;
  const MatrixXd& G = qp.ineq_matrix;
  const Eigen::Index n = H.rows();
  const Eigen::Index me = A.rows();
  const Eigen::Index mi = G.rows();
  if (H.cols() != n || qp.linear.size() != n || A.cols() != n ||
      G.cols() != n || qp.eq_rhs.size() != me || qp.ineq_rhs.size() != mi) {
    throw Error(ErrorCode::kDimensionMismatch, "inconsistent QP dimensions");
  }

  const double scale_d = 1.0 + qp.linear.lpNorm<Eigen::Infinity>();
  const double scale_p = 1.0 + (me > 0 ? qp.eq_rhs.lpNorm<Eigen::Infinity>() : 0.0);
  const double scale_i = 1.0 + (mi > 0 ? qp.ineq_rhs.lpNorm<Eigen::Infinity>() : 0.0);

  Iterate it{VectorXd::Zero(n), VectorXd::Zero(me), VectorXd::Ones(mi),
             (qp.ineq_rhs - G * VectorXd::Zero(n)).cwiseMax(1.0)};

  InteriorPointResult best;
  int iterations = 0;
  double best_merit = std::numeric_limits<double>::infinity();
  MatrixXd kkt(n + me, n + me);

  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    const VectorXd r_d = H * it.z + qp.linear + A.transpose() * it.y +
                         G.transpose() * it.lambda;
    const VectorXd r_p = A * it.z - qp.eq_rhs;
    const VectorXd r_i = G * it.z + it.s - qp.ineq_rhs;
    const double mu = mi > 0 ? it.s.dot(it.lambda) / static_cast<double>(mi) : 0.0;

    const double merit = std::max(
        {r_d.lpNorm<Eigen::Infinity>() / scale_d,
         me > 0 ? r_p.lpNorm<Eigen::Infinity>() / scale_p : 0.0,
         mi > 0 ? r_i.lpNorm<Eigen::Infinity>() / scale_i : 0.0, mu});
    if (merit < best_merit) {
      best_merit = merit;
      best.z = it.z;
      best.eq_multipliers = it.y;
      best.ineq_multipliers = it.lambda;
      best.slack = it.s;
      best.residual = merit;
    }
    iterations = iter;
    if (merit <= options.tolerance || iter == options.max_iterations) break;

    const VectorXd d = it.lambda.cwiseQuotient(it.s);
    kkt.setZero();
    kkt.topLeftCorner(n, n) = H + G.transpose() * d.asDiagonal() * G;
    kkt.topRightCorner(n, me) = A.transpose();
    kkt.bottomLeftCorner(me, n) = A;
    Eigen::PartialPivLU<MatrixXd> lu(kkt);

    auto solve = [&](const VectorXd& r_c, VectorXd& dz, VectorXd& dy,
                     VectorXd& dl, VectorXd& ds) {
      const VectorXd t = (-r_c + it.lambda.cwiseProduct(r_i)).cwiseQuotient(it.s);
      VectorXd rhs(n + me);
      rhs.head(n) = -r_d - G.transpose() * t;
      rhs.tail(me) = -r_p;
      const VectorXd sol = lu.solve(rhs);
      dz = sol.head(n);
      dy = sol.tail(me);
      ds = -r_i - G * dz;
      dl = (-r_c - it.lambda.cwiseProduct(ds)).cwiseQuotient(it.s);
    };

    VectorXd dz, dy, dl, ds;
    solve(it.s.cwiseProduct(it.lambda), dz, dy, dl, ds);
    const double a_aff = std::min(max_step(it.s, ds), max_step(it.lambda, dl));
    const double mu_aff =
        (it.s + a_aff * ds).dot(it.lambda + a_aff * dl) / static_cast<double>(mi);
    const double sigma = std::pow(mu_aff / mu, 3);

    const VectorXd r_c = it.s.cwiseProduct(it.lambda) + ds.cwiseProduct(dl) -
                         VectorXd::Constant(mi, sigma * mu);
    solve(r_c, dz, dy, dl, ds);
    const double eta = std::max(0.9, 1.0 - 10.0 * mu);
    const double step =
        std::min(1.0, eta * std::min(max_step(it.s, ds), max_step(it.lambda, dl)));
    if (!dz.allFinite() || !(step > 0.0)) break;

    it.z += step * dz;
    it.y += step * dy;
    it.lambda += step * dl;
    it.s += step * ds;
  }

  best.iterations = iterations;
  best.converged = best_merit <= options.acceptable;
  best.objective = 0.5 * best.z.dot(H * best.z) + qp.linear.dot(best.z);
  best.complementarity = best.slack.dot(best.ineq_multipliers);
  return best;
}

}  // namespace rpo
