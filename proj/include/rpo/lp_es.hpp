#pragma once

// Unregularized minimum expected shortfall portfolio as a linear program:
//
//   minimize  (1/T) Σ_k ξ_k + ν ε
//   s.t.      w·x^k + ε + ξ_k >= 0,  ξ_k >= 0,  Σ_i w_i = 1.
//
// ε is free. When the sample admits an apparent arbitrage the program has
// no finite optimum and a recession ray is returned instead.

#include "rpo/core.hpp"

#include <optional>

namespace rpo {

/// Direction along which the LP objective decreases without bound.
struct ArbitrageRay {
  Eigen::VectorXd direction;  // d_w, Σd = 0, max |d_i| = 1
  double epsilon = 0.0;       // d_ε
  Eigen::VectorXd xi;         // d_ξ >= 0
  double slope = 0.0;         // (1/T)Σd_ξ + ν d_ε < 0

  /// Largest violation of the recession-cone inequalities (0 when valid).
  double violation(const ReturnsMatrix& r, double nu) const;
};

struct LPStanding {
  SolveStatus status = SolveStatus::kOptimal;
  std::optional<PrimalSolution> solution;  // objective is in ES units
  std::optional<ArbitrageRay> certificate;
  long iterations = 0;
};

LPStanding minimize_es_lp(const ReturnsMatrix& r, const TailConfig& tail,
                          const Tolerances& tol = {});

}  // namespace rpo
