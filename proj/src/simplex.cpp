#include "rpo/simplex.hpp"

#include "rpo/core.hpp"

#include <Eigen/LU>
#include <Eigen/SparseCore>

#include <cmath>
#include <limits>

namespace rpo {
namespace {

using Eigen::Index;
using Eigen::VectorXd;

// Free columns start nonbasic at zero and, once basic, never leave (they
// are skipped by the ratio test), so every nonbasic column sits at zero.
// The constraint matrix is stored sparse; the basis inverse stays dense.
class RevisedSimplex {
 public:
  RevisedSimplex(const LinearProgram& lp, const SimplexOptions& options)
      : options_(options), m_(lp.a.rows()), n_(lp.a.cols()) {
    // Columns [0, n) are structural, [n, n + m) are phase-one artificials.
    b_ = lp.b;
    VectorXd sign = VectorXd::Ones(m_);
    for (Index i = 0; i < m_; ++i) {
      if (b_[i] < 0.0) {
        sign[i] = -1.0;
        b_[i] = -b_[i];
      }
    }
    std::vector<Eigen::Triplet<double>> entries;
    for (Index j = 0; j < n_; ++j) {
      for (Index i = 0; i < m_; ++i) {
        if (lp.a(i, j) != 0.0) entries.emplace_back(i, j, sign[i] * lp.a(i, j));
      }
    }
    for (Index i = 0; i < m_; ++i) entries.emplace_back(i, n_ + i, 1.0);
    a_.resize(m_, n_ + m_);
    a_.setFromTriplets(entries.begin(), entries.end());
    a_.makeCompressed();

    free_.assign(static_cast<std::size_t>(n_ + m_), false);
    for (std::size_t j = 0; j < lp.free.size(); ++j) free_[j] = lp.free[j];
    basis_.resize(static_cast<std::size_t>(m_));
    in_basis_.assign(static_cast<std::size_t>(n_ + m_), false);
    for (Index i = 0; i < m_; ++i) basis_[static_cast<std::size_t>(i)] = n_ + i;
    // Crash: a sign-constrained structural unit column e_i can stand in for
    // the artificial of row i, leaving fewer rows for phase one.
    for (Index j = 0; j < n_; ++j) {
      if (free_[static_cast<std::size_t>(j)] || a_.col(j).nonZeros() != 1) continue;
      Eigen::SparseMatrix<double>::InnerIterator it(a_, j);
      const Index i = it.row();
      if (it.value() > 0.0 && basis_[static_cast<std::size_t>(i)] >= n_) {
        basis_[static_cast<std::size_t>(i)] = j;
      }
    }
    for (Index i = 0; i < m_; ++i) in_basis_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)])] = true;
    refactor_every_ = std::max<long>(options_.refactor_every, m_ / 4);
    refactor();
  }

  // Runs simplex iterations for `cost` (length n + m); only columns below
  // `entering_limit` may enter. Returns false when an improving ray exists.
  bool optimize(const VectorXd& cost, Index entering_limit) {
    for (;;) {
      if (iterations_ >= options_.max_iterations) {
        throw Error(ErrorCode::kNumericalFailure, "simplex iteration limit reached");
      }
      if (since_refactor_ >= refactor_every_) refactor();

      VectorXd cb(m_);
      for (Index i = 0; i < m_; ++i) cb[i] = cost[basis_[static_cast<std::size_t>(i)]];
      const VectorXd y = binv_.transpose() * cb;

      // Dantzig pricing (largest violation, lowest index on ties); after a
      // run of degenerate pivots switch to Bland (lowest eligible index),
      // which cannot cycle. A free column improves in either direction.
      const bool bland = degenerate_run_ >= kBlandAfter;
      Index entering = -1;
      double direction = 1.0;
      double best = options_.optimality_tol;
      for (Index j = 0; j < entering_limit; ++j) {
        if (in_basis_[static_cast<std::size_t>(j)]) continue;
        const double reduced = cost[j] - a_.col(j).dot(y);
        double score = -reduced;
        double dir = 1.0;
        if (free_[static_cast<std::size_t>(j)] && reduced > score) {
          score = reduced;
          dir = -1.0;
        }
        if (score > best) {
          best = score;
          entering = j;
          direction = dir;
          if (bland) break;
        }
      }
      if (entering < 0) {
        if (since_refactor_ > 0) {
          refactor();  // confirm on a fresh factorization
          continue;
        }
        return true;
      }

      // Basic values move by -step * u as the entering column moves by step.
      const VectorXd u = direction * (binv_ * a_.col(entering));
      const double pivot_tol =
          options_.pivot_tol * std::max(1.0, u.lpNorm<Eigen::Infinity>());
      Index leave_row = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (Index i = 0; i < m_; ++i) {
        const Index basic = basis_[static_cast<std::size_t>(i)];
        if (free_[static_cast<std::size_t>(basic)] || u[i] <= pivot_tol) continue;
        const double ratio = std::max(0.0, xb_[i]) / u[i];
        if (leave_row < 0) {
          best_ratio = ratio;
          leave_row = i;
          continue;
        }
        const double tie = 1e-12 * std::max(1.0, best_ratio);
        if (ratio < best_ratio - tie) {
          best_ratio = ratio;
          leave_row = i;
        } else if (ratio <= best_ratio + tie &&
                   basic < basis_[static_cast<std::size_t>(leave_row)]) {
          leave_row = i;
        }
      }
      if (leave_row < 0) {
        if (since_refactor_ > 0) {
          refactor();
          continue;
        }
        ray_ = VectorXd::Zero(n_ + m_);
        ray_[entering] = direction;
        for (Index i = 0; i < m_; ++i) ray_[basis_[static_cast<std::size_t>(i)]] -= u[i];
        return false;
      }
      degenerate_run_ = best_ratio > 0.0 ? 0 : degenerate_run_ + 1;
      pivot(leave_row, entering, direction * u, best_ratio, direction);
    }
  }

  // Moves zero-level artificials out of the basis where a structural
  // column can replace them. Rows where none can are redundant.
  void drive_out_artificials() {
    for (Index r = 0; r < m_; ++r) {
      if (basis_[static_cast<std::size_t>(r)] < n_) continue;
      for (Index j = 0; j < n_; ++j) {
        if (in_basis_[static_cast<std::size_t>(j)]) continue;
        const double entry = a_.col(j).dot(binv_.row(r).transpose());
        if (std::abs(entry) <= 1e-9) continue;
        const VectorXd col = binv_ * a_.col(j);
        if (std::abs(col[r]) > 1e-7 * std::max(1.0, col.lpNorm<Eigen::Infinity>())) {
          pivot(r, j, col, 0.0, 1.0);
          break;
        }
      }
    }
    refactor();
  }

  VectorXd solution() const {
    VectorXd x = VectorXd::Zero(n_ + m_);
    for (Index i = 0; i < m_; ++i) x[basis_[static_cast<std::size_t>(i)]] = xb_[i];
    return x;
  }

  const VectorXd& ray() const { return ray_; }

  void refactor() {
    Eigen::MatrixXd basis_matrix(m_, m_);
    for (Index i = 0; i < m_; ++i) {
      basis_matrix.col(i) = VectorXd(a_.col(basis_[static_cast<std::size_t>(i)]));
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis_matrix);
    if (!(lu.rcond() > 1e-14)) {
      throw Error(ErrorCode::kNumericalFailure, "simplex basis became singular");
    }
    binv_ = lu.inverse();
    xb_ = binv_ * b_;
    since_refactor_ = 0;
  }

  long iterations() const { return iterations_; }
  const std::vector<Index>& basis() const { return basis_; }

 private:
  // col = B⁻¹ a_entering; the entering value becomes direction * step.
  void pivot(Index row, Index entering, const VectorXd& col, double step,
             double direction) {
    const Index leaving = basis_[static_cast<std::size_t>(row)];
    xb_ -= (direction * step) * col;
    xb_[row] = direction * step;
    const Eigen::RowVectorXd pivot_row = binv_.row(row) / col[row];
    VectorXd eliminate = col;
    eliminate[row] = 0.0;
    binv_.noalias() -= eliminate * pivot_row;
    binv_.row(row) = pivot_row;
    basis_[static_cast<std::size_t>(row)] = entering;
    in_basis_[static_cast<std::size_t>(entering)] = true;
    in_basis_[static_cast<std::size_t>(leaving)] = false;
    ++iterations_;
    ++since_refactor_;
  }

  SimplexOptions options_;
  Index m_;
  Index n_;
  Eigen::SparseMatrix<double> a_;
  VectorXd b_;
  std::vector<bool> free_;
  std::vector<Index> basis_;
  std::vector<bool> in_basis_;
  Eigen::MatrixXd binv_;
  VectorXd xb_;
  VectorXd ray_;
  long iterations_ = 0;
  long since_refactor_ = 0;
  long refactor_every_ = 25;
  long degenerate_run_ = 0;
  static constexpr long kBlandAfter = 50;
};

}  // namespace

SimplexResult solve_simplex(const LinearProgram& lp,
                            const SimplexOptions& options) {
  const Index m = lp.a.rows();
  const Index n = lp.a.cols();
  if (lp.b.size() != m || lp.c.size() != n ||
      (!lp.free.empty() && static_cast<Index>(lp.free.size()) != n)) {
    throw Error(ErrorCode::kDimensionMismatch, "inconsistent LP dimensions");
  }

  RevisedSimplex simplex(lp, options);
  SimplexResult result;

  VectorXd phase_one = VectorXd::Zero(n + m);
  phase_one.tail(m).setOnes();
  if (!simplex.optimize(phase_one, n + m)) {
    throw Error(ErrorCode::kNumericalFailure, "phase one reported an unbounded ray");
  }
  const VectorXd x1 = simplex.solution();
  if (x1.tail(m).sum() >
      options.feasibility_tol * std::max(1.0, lp.b.lpNorm<Eigen::Infinity>())) {
    result.status = LPStatus::kInfeasible;
    result.x = x1.head(n);
    result.iterations = simplex.iterations();
    return result;
  }
  simplex.drive_out_artificials();

  VectorXd phase_two = VectorXd::Zero(n + m);
  phase_two.head(n) = lp.c;
  const bool bounded = simplex.optimize(phase_two, n);

  result.x = simplex.solution().head(n);
  for (Index j = 0; j < n; ++j) {
    const bool is_free = !lp.free.empty() && lp.free[static_cast<std::size_t>(j)];
    if (!is_free) result.x[j] = std::max(0.0, result.x[j]);
  }
  result.objective = lp.c.dot(result.x);
  result.iterations = simplex.iterations();
  result.basis = simplex.basis();
  if (bounded) {
    result.status = LPStatus::kOptimal;
  } else {
    result.status = LPStatus::kUnbounded;
    result.ray = simplex.ray().head(n);
  }
  return result;
}

}  // namespace rpo
