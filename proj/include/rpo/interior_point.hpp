#pragma once

// Dense primal-dual interior point method (Mehrotra predictor-corrector)
// for convex quadratic programs
//
//   minimize ½ z'Hz + q'z   s.t.   A z = b,   G z <= h.
//
// Used for the primal route of the regularized problems, where N + 2T + 1
// variables keep the normal-equation system small enough to factor densely.

#include <Eigen/Core>

namespace rpo {

struct QuadraticProgram {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd linear;
  Eigen::MatrixXd eq_matrix;
  Eigen::VectorXd eq_rhs;
  Eigen::MatrixXd ineq_matrix;
  Eigen::VectorXd ineq_rhs;
};

struct InteriorPointOptions {
  double tolerance = 1e-12;
  /// Accept the best iterate when it reaches this level but `tolerance`
  /// stalls on rounding.
  double acceptable = 1e-9;
  int max_iterations = 200;
};

struct InteriorPointResult {
  bool converged = false;
  Eigen::VectorXd z;
  Eigen::VectorXd eq_multipliers;
  Eigen::VectorXd ineq_multipliers;
  Eigen::VectorXd slack;
  double objective = 0.0;
  double complementarity = 0.0;  // s'λ
  double residual = 0.0;         // scaled max of all KKT residuals
  int iterations = 0;
};

InteriorPointResult solve_interior_point(const QuadraticProgram& qp,
                                         const InteriorPointOptions& options = {});

}  // namespace rpo
