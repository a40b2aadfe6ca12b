#pragma once

// Dense two-phase revised simplex for standard-form linear programs
//
//   minimize c'x  subject to  A x = b,  x_j >= 0 unless column j is free.
//
// Entering columns are chosen by largest reduced cost; after a run of
// degenerate pivots the rule falls back to Bland's (lowest eligible index
// enters, lowest basic index leaves on ratio ties), which cannot cycle.
// Every choice is a deterministic function of the data. The constraint
// matrix is stored sparse and the basis inverse dense, refactorized
// periodically.

#include <Eigen/Core>

#include <vector>

namespace rpo {

struct LinearProgram {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  std::vector<bool> free;  // empty means every column is sign-constrained
};

enum class LPStatus { kOptimal, kUnbounded, kInfeasible };

struct SimplexOptions {
  double optimality_tol = 1e-10;
  double pivot_tol = 1e-9;  // relative to the largest entry of the column
  double feasibility_tol = 1e-9;
  long max_iterations = 200000;
  int refactor_every = 25;
};

struct SimplexResult {
  LPStatus status = LPStatus::kInfeasible;
  Eigen::VectorXd x;       // basic feasible solution (last one when unbounded)
  Eigen::VectorXd ray;     // recession direction when unbounded, A ray = 0
  double objective = 0.0;  // c'x
  long iterations = 0;
  std::vector<Eigen::Index> basis;
};

/// Throws Error(kNumericalFailure) when the iteration cap is hit or the
/// basis becomes singular.
SimplexResult solve_simplex(const LinearProgram& lp,
                            const SimplexOptions& options = {});

}  // namespace rpo
