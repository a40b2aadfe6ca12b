#include "rpo/qp_reg.hpp"

#include "rpo/interior_point.hpp"
#include "rpo/lp_es.hpp"
#include "rpo/risk.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>

namespace rpo {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Clock = std::chrono::steady_clock;

// Loss values a_k entering the hinge max(0, a_k - ε) of the data term.
VectorXd hinge_arguments(const ReturnsMatrix& r, RegMode mode,
                         const VectorXd& w) {
  VectorXd loss = -(r.values() * w);
  if (mode == RegMode::kSymmetricSTA) loss = loss.cwiseAbs();
  return loss;
}

struct Slacks {
  VectorXd xi;
  VectorXd xi_star;
};

Slacks minimal_slacks(const ReturnsMatrix& r, RegMode mode, const VectorXd& w,
                      double eps) {
  const VectorXd loss = -(r.values() * w);
  Slacks s;
  s.xi = (loss.array() - eps).cwiseMax(0.0);
  s.xi_star = VectorXd::Zero(r.samples());
  if (mode == RegMode::kSymmetricSTA) {
    s.xi_star = (-loss.array() - eps).cwiseMax(0.0);
  }
  return s;
}

double objective_value(const VectorXd& w, const RegConfig& reg, double nu,
                       double eps, const Slacks& s) {
  const double t = static_cast<double>(s.xi.size());
  return 0.5 * w.squaredNorm() +
         reg.c() * ((s.xi.sum() + s.xi_star.sum()) / t + nu * eps);
}

PrimalSolution make_primal(const ReturnsMatrix& r, const TailConfig& tail,
                           const RegConfig& reg, VectorXd w, double eps_hint,
                           const Tolerances& tol) {
  w.array() += (1.0 - w.sum()) / static_cast<double>(w.size());
  const DataTerm term = regularized_data_term(r, tail, reg.mode(), w);
  const double eps = std::clamp(eps_hint, term.eps_lo, term.eps_hi);
  Slacks s = minimal_slacks(r, reg.mode(), w, eps);
  const double objective = objective_value(w, reg, tail.nu(), eps, s);
  return PrimalSolution{PortfolioWeights(std::move(w), tol.budget), eps,
                        std::move(s.xi), std::move(s.xi_star), objective};
}

// Euclidean projection onto {0 <= v <= upper, Σ v <= budget}.
VectorXd project_box_halfspace(const VectorXd& y, double upper, double budget) {
  VectorXd v = y.cwiseMax(0.0).cwiseMin(upper);
  if (v.sum() <= budget) return v;

  auto mass = [&](double theta) {
    return (y.array() - theta).cwiseMax(0.0).cwiseMin(upper).sum();
  };
  double lo = 0.0;
  double hi = std::max(0.0, y.maxCoeff());
  for (int i = 0; i < 200 && hi - lo > 1e-16 * std::max(1.0, hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    (mass(mid) > budget ? lo : hi) = mid;
  }
  double theta = 0.5 * (lo + hi);

  // The bisection fixes which coordinates sit at 0, at the upper bound and
  // in between; solve the linear equation for θ on that pattern.
  double free_sum = 0.0;
  Index free_count = 0, upper_count = 0;
  for (Index i = 0; i < y.size(); ++i) {
    const double z = y[i] - theta;
    if (z >= upper) {
      ++upper_count;
    } else if (z > 0.0) {
      free_sum += y[i];
      ++free_count;
    }
  }
  if (free_count > 0) {
    const double exact =
        (free_sum - (budget - static_cast<double>(upper_count) * upper)) /
        static_cast<double>(free_count);
    if (std::abs(exact - theta) <= 1e-9 * std::max(1.0, std::abs(theta))) {
      theta = exact;
    }
  }
  v = (y.array() - theta).cwiseMax(0.0).cwiseMin(upper);
  const double total = v.sum();
  if (total > budget) v *= budget / total;
  return v;
}

// Dual variables v = [α; α*] (α* only in STA mode) and the derived portfolio.
class DualProblem {
 public:
  DualProblem(const ReturnsMatrix& r, const TailConfig& tail,
              const RegConfig& reg)
      : x_(r.values()),
        row_sums_(r.values().rowwise().sum()),
        t_(r.samples()),
        n_(r.assets()),
        symmetric_(reg.symmetric()),
        upper_(reg.c() / static_cast<double>(r.samples())),
        budget_(reg.c() * tail.nu()) {}

  Index size() const { return symmetric_ ? 2 * t_ : t_; }
  double upper() const { return upper_; }
  double budget() const { return budget_; }

  VectorXd beta(const VectorXd& v) const {
    return symmetric_ ? VectorXd(v.head(t_) - v.tail(t_)) : v;
  }

  double gamma(const VectorXd& beta) const {
    return (row_sums_.dot(beta) - 1.0) / static_cast<double>(n_);
  }

  // w = Σ_k β_k x^k - γ 1.
  VectorXd weights(const VectorXd& beta, double gamma) const {
    return x_.transpose() * beta - VectorXd::Constant(n_, gamma);
  }

  // Change of w for a change of β, with γ following its closed form.
  VectorXd weight_change(const VectorXd& dbeta) const {
    const double dgamma = row_sums_.dot(dbeta) / static_cast<double>(n_);
    return x_.transpose() * dbeta - VectorXd::Constant(n_, dgamma);
  }

  // Gradient of f = -D = ½‖w‖² + γ: ∂f/∂α_k = w·x^k, ∂f/∂α*_k = -w·x^k.
  VectorXd gradient(const VectorXd& w) const {
    const VectorXd r = x_ * w;
    if (!symmetric_) return r;
    VectorXd g(2 * t_);
    g << r, -r;
    return g;
  }

  VectorXd project(const VectorXd& y) const {
    return project_box_halfspace(y, upper_, budget_);
  }

 private:
  const MatrixXd& x_;
  VectorXd row_sums_;
  Index t_;
  Index n_;
  bool symmetric_;
  double upper_;
  double budget_;
};

// ε implied by the dual: free support vectors sit exactly on their
// constraint; with none, a slack Σ(α+α*) < Cν forces ε = 0.
double dual_epsilon_hint(const VectorXd& alpha, const VectorXd& alpha_star,
                         const VectorXd& loss, double upper, double budget,
                         const DataTerm& term) {
  const double margin = 1e-9 * upper;
  double sum = 0.0;
  int count = 0;
  for (Index k = 0; k < alpha.size(); ++k) {
    if (alpha[k] > margin && alpha[k] < upper - margin) {
      sum += loss[k];
      ++count;
    }
    if (alpha_star.size() > 0 && alpha_star[k] > margin &&
        alpha_star[k] < upper - margin) {
      sum -= loss[k];
      ++count;
    }
  }
  if (count > 0) return sum / count;
  const double used = alpha.sum() + (alpha_star.size() > 0 ? alpha_star.sum() : 0.0);
  if (used < budget * (1.0 - 1e-9)) return 0.0;
  return 0.5 * (term.eps_lo + term.eps_hi);
}

// Re-solves for the free multipliers of a dual point with the support
// pattern held fixed. Free support vectors hold their constraint with
// equality, bounded ones enter linearly, and ε is pinned at 0 unless the
// budget Σ <= Cν binds. In that equality-constrained QP the KKT system is
// well conditioned in w even when the free multipliers are not, so the
// multipliers it returns give a w accurate to working precision.
struct PatternSolve {
  VectorXd alpha;
  VectorXd alpha_star;
  double eps = 0.0;
};

PatternSolve solve_on_pattern(const ReturnsMatrix& r, const TailConfig& tail,
                              const RegConfig& reg, const VectorXd& alpha,
                              const VectorXd& alpha_star) {
  const Index t = r.samples();
  const Index n = r.assets();
  const double upper = reg.c() / static_cast<double>(t);
  const double budget = reg.c() * tail.nu();
  const double margin = 1e-9 * upper;

  PatternSolve out{alpha, alpha_star, 0.0};
  VectorXd linear_w = VectorXd::Zero(n);
  double linear_eps = budget;
  std::vector<VectorXd> rows;         // row·w - ε = 0
  std::vector<double*> multipliers;   // where each row's multiplier goes
  double used = 0.0;
  auto visit = [&](double& value, double sign, Index k) {
    used += value;
    // Constraint sign·(-x^k·w) <= ε + slack.
    const VectorXd row = -sign * r.values().row(k).transpose();
    if (value >= upper - margin) {
      linear_w += upper * row;
      linear_eps -= upper;
    } else if (value > margin) {
      rows.push_back(row);
      multipliers.push_back(&value);
    }
  };
  for (Index k = 0; k < t; ++k) {
    visit(out.alpha[k], 1.0, k);
    if (out.alpha_star.size() > 0) visit(out.alpha_star[k], -1.0, k);
  }
  const bool eps_free = used >= budget * (1.0 - 1e-9);

  // Unknowns [w | ε | row multipliers | budget multiplier γ | ε pin].
  const Index f = static_cast<Index>(rows.size());
  const Index m = f + 1 + (eps_free ? 0 : 1);
  const Index dim = n + 1 + m;
  MatrixXd kkt = MatrixXd::Zero(dim, dim);
  VectorXd rhs = VectorXd::Zero(dim);
  kkt.topLeftCorner(n, n).setIdentity();
  rhs.head(n) = -linear_w;
  rhs[n] = -linear_eps;
  for (Index j = 0; j < f; ++j) {
    kkt.block(n + 1 + j, 0, 1, n) = rows[static_cast<std::size_t>(j)].transpose();
    kkt(n + 1 + j, n) = -1.0;
  }
  kkt.block(n + 1 + f, 0, 1, n).setOnes();
  rhs[n + 1 + f] = 1.0;
  if (!eps_free) kkt(n + 2 + f, n) = 1.0;
  kkt.topRightCorner(n + 1, m) = kkt.bottomLeftCorner(m, n + 1).transpose();

  const VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
  if (!sol.allFinite()) return {alpha, alpha_star, 0.0};
  for (Index j = 0; j < f; ++j) {
    *multipliers[static_cast<std::size_t>(j)] =
        std::clamp(sol[n + 1 + j], 0.0, upper);
  }
  out.eps = std::max(0.0, sol[n]);
  return out;
}

void check_inputs(const ReturnsMatrix& r, const TailConfig& tail) {
  tail.require_samples(r.samples());
}

}  // namespace

DataTerm regularized_data_term(const ReturnsMatrix& r, const TailConfig& tail,
                               RegMode mode, const VectorXd& w) {
  if (w.size() != r.assets()) {
    throw Error(ErrorCode::kDimensionMismatch, "weight vector length differs from asset count");
  }
  const VectorXd a = hinge_arguments(r, mode, w);
  const TailMinimum m = minimize_tail_function(
      {a.data(), static_cast<std::size_t>(a.size())}, tail.nu(), 0.0);
  return {m.value, m.eps_lo, m.eps_hi};
}

double regularized_objective(const ReturnsMatrix& r, const TailConfig& tail,
                             const RegConfig& reg, const VectorXd& w) {
  return 0.5 * w.squaredNorm() +
         reg.c() * regularized_data_term(r, tail, reg.mode(), w).value;
}

SolveReport solve_primal(const ReturnsMatrix& r, const TailConfig& tail,
                         const RegConfig& reg, const Tolerances& tol) {
  check_inputs(r, tail);
  const auto start = Clock::now();
  const Index t = r.samples();
  const Index n = r.assets();
  const bool sym = reg.symmetric();
  const double c_over_t = reg.c() / static_cast<double>(t);

  // z = [w (n) | ε | ξ (t) | ξ* (t, STA only)]
  const Index e = n, xi0 = n + 1, xs0 = n + 1 + t;
  const Index dim = n + 1 + (sym ? 2 : 1) * t;
  const Index contact_rows = (sym ? 2 : 1) * t;
  const Index rows = contact_rows + 1 + (sym ? 2 : 1) * t;

  QuadraticProgram qp;
  qp.hessian = MatrixXd::Zero(dim, dim);
  qp.hessian.topLeftCorner(n, n).setIdentity();
  qp.linear = VectorXd::Zero(dim);
  qp.linear[e] = reg.c() * tail.nu();
  qp.linear.segment(xi0, dim - xi0).setConstant(c_over_t);
  qp.eq_matrix = MatrixXd::Zero(1, dim);
  qp.eq_matrix.leftCols(n).setOnes();
  qp.eq_rhs = VectorXd::Ones(1);

  qp.ineq_matrix = MatrixXd::Zero(rows, dim);
  qp.ineq_rhs = VectorXd::Zero(rows);
  // -x^k·w - ε - ξ_k <= 0
  qp.ineq_matrix.block(0, 0, t, n) = -r.values();
  qp.ineq_matrix.block(0, e, t, 1).setConstant(-1.0);
  qp.ineq_matrix.block(0, xi0, t, t) = -MatrixXd::Identity(t, t);
  if (sym) {
    // x^k·w - ε - ξ*_k <= 0
    qp.ineq_matrix.block(t, 0, t, n) = r.values();
    qp.ineq_matrix.block(t, e, t, 1).setConstant(-1.0);
    qp.ineq_matrix.block(t, xs0, t, t) = -MatrixXd::Identity(t, t);
  }
  // Nonnegativity of ε and the slacks.
  qp.ineq_matrix.block(contact_rows, e, dim - e, dim - e) =
      -MatrixXd::Identity(dim - e, dim - e);

  const InteriorPointResult ipm = solve_interior_point(qp);

  SolveReport report;
  report.primal = make_primal(r, tail, reg, ipm.z.head(n), ipm.z[e], tol);
  report.status = ipm.converged ? SolveStatus::kOptimal : SolveStatus::kMaxIterations;
  report.duality_gap = ipm.complementarity;
  report.kkt_residual = ipm.residual;
  report.n_eff = effective_assets(report.primal->weights);
  report.iterations = ipm.iterations;
  report.wall_time = Clock::now() - start;
  return report;
}

SolveReport solve_dual(const ReturnsMatrix& r, const TailConfig& tail,
                       const RegConfig& reg, const Tolerances& tol,
                       const DualSolverOptions& options) {
  check_inputs(r, tail);
  const auto start = Clock::now();
  const DualProblem dual(r, tail, reg);
  const Index t = r.samples();

  // Minimize f(v) = ½‖w‖² + γ (the negated dual) by spectral projected
  // gradient with exact line search along each projected direction.
  VectorXd v = VectorXd::Zero(dual.size());
  VectorXd beta = dual.beta(v);
  double gamma = dual.gamma(beta);
  VectorXd w = dual.weights(beta, gamma);
  VectorXd grad = dual.gradient(w);

  double step = 1.0;
  {
    const double pg0 = (dual.project(v - grad) - v).lpNorm<Eigen::Infinity>();
    if (pg0 > 0.0) step = 1.0 / pg0;
  }

  auto refresh = [&] {
    beta = dual.beta(v);
    gamma = dual.gamma(beta);
    w = dual.weights(beta, gamma);
    grad = dual.gradient(w);
  };

  long iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    const double pg = (dual.project(v - grad) - v).lpNorm<Eigen::Infinity>();
    const double dual_value = -0.5 * w.squaredNorm() - gamma;
    const double primal_value = regularized_objective(r, tail, reg, w);
    const double gap = primal_value - dual_value;
    if (pg <= options.projected_gradient_tol ||
        gap <= options.gap_tol * (1.0 + std::abs(primal_value))) {
      break;
    }

    const VectorXd d = dual.project(v - step * grad) - v;
    const VectorXd dw = dual.weight_change(dual.beta(d));
    const double curvature = dw.squaredNorm();
    const double slope = grad.dot(d);
    if (!(slope < 0.0)) break;  // no descent left at working precision
    const double length =
        curvature > 0.0 ? std::min(1.0, -slope / curvature) : 1.0;

    v += length * d;
    v = v.cwiseMax(0.0).cwiseMin(dual.upper());
    refresh();

    // Barzilai-Borwein: s's / s'y with s = length d and y = length² Hd.
    // Steps that move further than a few box widths only cost precision
    // in the projection.
    const double longest =
        10.0 * dual.upper() / std::max(grad.lpNorm<Eigen::Infinity>(), 1e-300);
    step = curvature > 0.0 ? d.squaredNorm() / curvature : longest;
    step = std::clamp(step, 1e-12, std::max(1e-12, longest));
  }

  // Only β = α - α* enters the objective; splitting it into its positive
  // and negative parts keeps feasibility and makes α_k α*_k = 0.
  beta = dual.beta(v);
  VectorXd alpha = reg.symmetric() ? VectorXd(beta.cwiseMax(0.0)) : beta;
  VectorXd alpha_star = reg.symmetric() ? VectorXd((-beta).cwiseMax(0.0)) : VectorXd();

  auto assemble = [&](VectorXd a, VectorXd a_star, std::optional<double> eps) {
    DualSolution sol;
    const double used = a.sum() + a_star.sum();
    if (used > dual.budget()) {
      a *= dual.budget() / used;
      a_star *= dual.budget() / used;
    }
    sol.alpha = std::move(a);
    sol.alpha_star = std::move(a_star);
    const VectorXd b = reg.symmetric() ? VectorXd(sol.alpha - sol.alpha_star) : sol.alpha;
    sol.gamma = dual.gamma(b);
    const VectorXd wd = dual.weights(b, sol.gamma);
    sol.objective = -0.5 * wd.squaredNorm() - sol.gamma;
    for (Index k = 0; k < t; ++k) {
      if (sol.alpha[k] > 0.0 ||
          (sol.alpha_star.size() > 0 && sol.alpha_star[k] > 0.0)) {
        sol.support_set.push_back(k);
      }
    }
    const DataTerm term = regularized_data_term(r, tail, reg.mode(), wd);
    const VectorXd loss = -(r.values() * wd);
    const double hint =
        eps ? *eps
            : dual_epsilon_hint(sol.alpha, sol.alpha_star, loss, dual.upper(),
                                dual.budget(), term);
    SolveReport report;
    report.primal = make_primal(r, tail, reg, wd, hint, tol);
    report.duality_gap = report.primal->objective - sol.objective;
    report.dual = std::move(sol);
    return report;
  };

  SolveReport report = assemble(alpha, alpha_star, std::nullopt);
  PatternSolve refined = solve_on_pattern(r, tail, reg, alpha, alpha_star);
  SolveReport alt = assemble(std::move(refined.alpha),
                             std::move(refined.alpha_star), refined.eps);
  if (std::abs(alt.duality_gap) < std::abs(report.duality_gap)) report = std::move(alt);
  report.status = report.duality_gap <=
                          tol.relative * (1.0 + std::abs(report.primal->objective))
                      ? SolveStatus::kOptimal
                      : SolveStatus::kMaxIterations;
  report.n_eff = effective_assets(report.primal->weights);
  report.iterations = iter;
  report.kkt_residual = kkt_check(r, tail, reg, report);
  report.wall_time = Clock::now() - start;
  return report;
}

double kkt_check(const ReturnsMatrix& r, const TailConfig& tail,
                 const RegConfig& reg, const SolveReport& report) {
  if (!report.primal || !report.dual) {
    throw Error(ErrorCode::kMissingDual,
                "KKT check needs both primal and dual solutions");
  }
  const PrimalSolution& p = *report.primal;
  const DualSolution& d = *report.dual;
  const Index t = r.samples();
  const bool sym = reg.symmetric();
  if (d.alpha.size() != t || (sym && d.alpha_star.size() != t)) {
    throw Error(ErrorCode::kDimensionMismatch, "dual vector length differs from sample count");
  }
  const double upper = reg.c() / static_cast<double>(t);
  const double budget = reg.c() * tail.nu();
  const VectorXd& w = p.weights.values();
  const VectorXd ret = r.values() * w;
  const VectorXd alpha_star = sym ? d.alpha_star : VectorXd::Zero(t);
  const VectorXd xi_star = p.xi_star.size() == t ? p.xi_star : VectorXd::Zero(t);

  double v = 0.0;
  auto worst = [&v](double x) { v = std::max(v, std::abs(x)); };

  // Dual feasibility.
  for (Index k = 0; k < t; ++k) {
    worst(std::max(0.0, -d.alpha[k]));
    worst(std::max(0.0, d.alpha[k] - upper));
    worst(std::max(0.0, -alpha_star[k]));
    worst(std::max(0.0, alpha_star[k] - upper));
  }
  const double used = d.alpha.sum() + alpha_star.sum();
  worst(std::max(0.0, used - budget));

  // Primal feasibility.
  worst(std::max(0.0, -p.epsilon));
  for (Index k = 0; k < t; ++k) {
    worst(std::max(0.0, -p.xi[k]));
    worst(std::max(0.0, -ret[k] - p.epsilon - p.xi[k]));
    if (sym) {
      worst(std::max(0.0, -xi_star[k]));
      worst(std::max(0.0, ret[k] - p.epsilon - xi_star[k]));
    }
  }
  worst(w.sum() - 1.0);

  // Complementary slackness.
  for (Index k = 0; k < t; ++k) {
    worst(d.alpha[k] * (ret[k] + p.epsilon + p.xi[k]));
    worst((upper - d.alpha[k]) * p.xi[k]);
    if (sym) {
      worst(alpha_star[k] * (p.epsilon + xi_star[k] - ret[k]));
      worst((upper - alpha_star[k]) * xi_star[k]);
    }
  }
  worst((budget - used) * p.epsilon);

  // Stationarity in w.
  const VectorXd expansion = r.values().transpose() * (d.alpha - alpha_star) -
                             VectorXd::Constant(w.size(), d.gamma);
  worst((w - expansion).lpNorm<Eigen::Infinity>());
  return v;
}

std::vector<double> unregularized_limit_distances(
    const ReturnsMatrix& r, const TailConfig& tail,
    const std::vector<double>& c_sequence, const Tolerances& tol) {
  const LPStanding lp = minimize_es_lp(r, tail, tol);
  if (lp.status != SolveStatus::kOptimal) {
    throw Error(ErrorCode::kLPUnbounded,
                "unregularized ES program is unbounded; limit undefined");
  }
  const VectorXd& w_lp = lp.solution->weights.values();
  std::vector<double> out;
  out.reserve(c_sequence.size());
  for (double c : c_sequence) {
    const SolveReport rep =
        solve_primal(r, tail, RegConfig(c, RegMode::kAsymmetricES), tol);
    out.push_back((rep.primal->weights.values() - w_lp).norm());
  }
  return out;
}

double unregularized_limit_check(const ReturnsMatrix& r, const TailConfig& tail,
                                 const std::vector<double>& c_sequence,
                                 const Tolerances& tol) {
  if (c_sequence.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty C sequence");
  }
  const auto d = unregularized_limit_distances(r, tail, c_sequence, tol);
  const auto largest = std::max_element(c_sequence.begin(), c_sequence.end());
  return d[static_cast<std::size_t>(largest - c_sequence.begin())];
}

}  // namespace rpo
