#pragma once

// L2-regularized expected shortfall (AsymmetricES) and symmetric tail
// average (SymmetricSTA) portfolios:
//
//   minimize  ½‖w‖² + C [ (1/T) Σ_k (ξ_k + ξ*_k) + ν ε ]
//   s.t.      -w·x^k <= ε + ξ_k,   w·x^k <= ε + ξ*_k  (STA only),
//             ξ, ξ* >= 0,  ε >= 0,  Σ_i w_i = 1.
//
// Two independent routes are provided. solve_primal runs an interior point
// method on the problem as stated. solve_dual works on the support-vector
// dual over (α, α*) with the budget multiplier γ eliminated in closed form,
//
//   γ = (1/N) (Σ_k β_k Σ_i x_i^k - 1),   w = Σ_k β_k x^k - γ 1,
//
// where β = α - α*. The dual objective is -½‖w‖² - γ, maximized over the
// box 0 <= α, α* <= C/T intersected with Σ_k (α_k + α*_k) <= Cν.

#include "rpo/core.hpp"

#include <vector>

namespace rpo {

struct DualSolverOptions {
  /// Stop once ‖P(v - ∇f) - v‖∞ falls below this.
  double projected_gradient_tol = 1e-10;
  /// Stop once the relative duality gap falls below this.
  double gap_tol = 1e-13;
  long max_iterations = 100000;
};

/// Value of the data term min_{ε >= 0} [ν ε + (1/T) Σ_k loss_k(ε)] at a
/// fixed portfolio together with the interval of minimizing ε.
struct DataTerm {
  double value = 0.0;
  double eps_lo = 0.0;
  double eps_hi = 0.0;
};

DataTerm regularized_data_term(const ReturnsMatrix& r, const TailConfig& tail,
                               RegMode mode, const Eigen::VectorXd& w);

/// Primal objective at w with ε and the slacks at their best values.
double regularized_objective(const ReturnsMatrix& r, const TailConfig& tail,
                             const RegConfig& reg, const Eigen::VectorXd& w);

SolveReport solve_primal(const ReturnsMatrix& r, const TailConfig& tail,
                         const RegConfig& reg, const Tolerances& tol = {});

SolveReport solve_dual(const ReturnsMatrix& r, const TailConfig& tail,
                       const RegConfig& reg, const Tolerances& tol = {},
                       const DualSolverOptions& options = {});

/// Largest violation of the optimality conditions linking the primal and
/// dual parts of `report`. Throws MissingDual when either part is absent.
double kkt_check(const ReturnsMatrix& r, const TailConfig& tail,
                 const RegConfig& reg, const SolveReport& report);

/// ‖w(C) - w_LP‖₂ for each C, AsymmetricES mode. Throws LPUnbounded when the
/// unregularized program has no finite optimum.
std::vector<double> unregularized_limit_distances(
    const ReturnsMatrix& r, const TailConfig& tail,
    const std::vector<double>& c_sequence, const Tolerances& tol = {});

/// Distance at the largest C of `c_sequence`.
double unregularized_limit_check(const ReturnsMatrix& r, const TailConfig& tail,
                                 const std::vector<double>& c_sequence,
                                 const Tolerances& tol = {});

}  // namespace rpo
