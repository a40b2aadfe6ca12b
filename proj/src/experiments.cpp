#include "rpo/experiments.hpp"

#include "rpo/lp_es.hpp"
#include "rpo/qp_reg.hpp"
#include "rpo/risk.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>
#include <thread>

namespace rpo {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Runs body(i) for i in [0, count). Results must be written to slot i so
// that aggregation afterwards does not depend on scheduling. The exception
// of the lowest failing index is rethrown.
template <typename Body>
void parallel_for(int count, unsigned threads, Body body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max(count, 1)));

  std::atomic<int> next{0};
  std::mutex mutex;
  int failed_index = count;
  std::exception_ptr failure;
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
}

struct MeanStderr {
  double mean = kNaN;
  double stderr_ = kNaN;
};

MeanStderr mean_stderr(const std::vector<double>& xs) {
  MeanStderr out;
  if (xs.empty()) return out;
  const double n = static_cast<double>(xs.size());
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / n;
  if (xs.size() < 2) {
    out.stderr_ = 0.0;
    return out;
  }
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.stderr_ = std::sqrt(ss / (n - 1.0) / n);
  return out;
}

ReturnsMatrix iid_sample(int n, int t, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.n = n;
  spec.t = t;
  spec.seed = seed;
  return generate(spec);
}

// Rows of r outside [begin, end).
ReturnsMatrix drop_rows(const ReturnsMatrix& r, Index begin, Index end) {
  const Index t = r.samples();
  MatrixXd kept(t - (end - begin), r.assets());
  kept.topRows(begin) = r.values().topRows(begin);
  kept.bottomRows(t - end) = r.values().bottomRows(t - end);
  return ReturnsMatrix(std::move(kept), r.asset_names());
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> path) {
  std::vector<std::uint32_t> words;
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  for (std::uint64_t p : path) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

ReturnsMatrix generate(const GeneratorSpec& spec) {
  if (spec.n < 1 || spec.t < 1) {
    throw Error(ErrorCode::kInvalidArgument, "generator needs n >= 1 and t >= 1");
  }
  MatrixXd chol;
  if (spec.kind == GeneratorKind::kCorrelatedGaussian) {
    const MatrixXd& cov = spec.covariance;
    if (cov.rows() != spec.n || cov.cols() != spec.n) {
      throw Error(ErrorCode::kDimensionMismatch, "covariance must be n x n");
    }
    if (!cov.allFinite() ||
        (cov - cov.transpose()).lpNorm<Eigen::Infinity>() >
            1e-12 * std::max(1.0, cov.lpNorm<Eigen::Infinity>())) {
      throw Error(ErrorCode::kNotPositiveDefinite, "covariance is not symmetric");
    }
    Eigen::LLT<MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14)) {
      throw Error(ErrorCode::kNotPositiveDefinite,
                  "covariance is not positive definite");
    }
    chol = llt.matrixL();
  }

  std::mt19937_64 rng(derive_seed(spec.seed, {}));
  std::normal_distribution<double> normal;
  MatrixXd x(spec.t, spec.n);
  for (Index k = 0; k < spec.t; ++k) {
    for (Index i = 0; i < spec.n; ++i) x(k, i) = normal(rng);
  }
  if (spec.kind == GeneratorKind::kCorrelatedGaussian) {
    x = x * chol.transpose();  // row k becomes L z_k
  }
  return ReturnsMatrix(std::move(x), default_asset_names(spec.n));
}

PortfolioWeights min_variance(const ReturnsMatrix& r) {
  const Index n = r.assets();
  if (r.samples() <= n) {
    throw Error(ErrorCode::kSingularCovariance,
                "empirical covariance is singular when T <= N");
  }
  const MatrixXd cov = empirical_covariance(r);
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-12)) {
    throw Error(ErrorCode::kSingularCovariance,
                "empirical covariance is numerically singular");
  }
  const VectorXd x = llt.solve(VectorXd::Ones(n));
  return PortfolioWeights(x / x.sum());
}

SweepResult q0_sweep(int n, const std::vector<int>& t_list, int trials,
                     std::uint64_t seed, unsigned threads) {
  if (n < 1 || trials < 1) {
    throw Error(ErrorCode::kInvalidArgument, "q0 sweep needs n >= 1 and trials >= 1");
  }
  for (int t : t_list) {
    if (t <= n) {
      throw Error(ErrorCode::kInvalidArgument,
                  "q0 sweep needs every T above N (T=" + std::to_string(t) + ")");
    }
  }
  constexpr int kMaxResamples = 10;

  SweepResult out;
  out.seed = seed;
  for (std::size_t g = 0; g < t_list.size(); ++g) {
    const int t = t_list[g];
    std::vector<double> q0(static_cast<std::size_t>(trials));
    std::vector<int> resampled(static_cast<std::size_t>(trials), 0);
    parallel_for(trials, threads, [&](int trial) {
      for (int attempt = 0;; ++attempt) {
        const ReturnsMatrix r =
            iid_sample(n, t, derive_seed(seed, {g, static_cast<std::uint64_t>(trial),
                                                static_cast<std::uint64_t>(attempt)}));
        try {
          const PortfolioWeights w = min_variance(r);
          q0[static_cast<std::size_t>(trial)] =
              std::sqrt(static_cast<double>(n) * w.values().squaredNorm());
          resampled[static_cast<std::size_t>(trial)] = attempt;
          return;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kSingularCovariance || attempt >= kMaxResamples) throw;
        }
      }
    });
    const MeanStderr stats = mean_stderr(q0);
    int total_resamples = 0;
    for (int k : resampled) total_resamples += k;
    out.grid.push_back({n, t});
    out.q0_mean.push_back(stats.mean);
    out.q0_stderr.push_back(stats.stderr_);
    out.trials.push_back(trials);
    out.resamples.push_back(total_resamples);
  }
  return out;
}

PortfolioWeights fit_regularized(const ReturnsMatrix& r, const TailConfig& tail,
                                 const RegConfig& reg) {
  const SolveReport dual = solve_dual(r, tail, reg);
  if (dual.status == SolveStatus::kOptimal) return dual.primal->weights;
  const SolveReport primal = solve_primal(r, tail, reg);
  if (primal.status == SolveStatus::kOptimal ||
      primal.primal->objective < dual.primal->objective) {
    return primal.primal->weights;
  }
  return dual.primal->weights;
}

CVResult cross_validate_c(const ReturnsMatrix& r, const TailConfig& tail,
                          const std::vector<double>& c_grid, int folds,
                          std::uint64_t seed, RegMode mode) {
  if (folds < 2) throw Error(ErrorCode::kInvalidArgument, "cross-validation needs folds >= 2");
  if (c_grid.empty()) throw Error(ErrorCode::kInvalidArgument, "empty C grid");
  const Index t = r.samples();
  if (t < folds) {
    throw Error(ErrorCode::kInsufficientSamples, "fewer samples than folds");
  }

  CVResult out;
  out.c_grid = c_grid;
  out.seed = seed;
  out.fold_scores.resize(static_cast<Index>(c_grid.size()), folds);

  for (int f = 0; f < folds; ++f) {
    const Index begin = t * f / folds;
    const Index end = t * (f + 1) / folds;
    const ReturnsMatrix train = drop_rows(r, begin, end);
    const ReturnsMatrix test = r.slice_rows(begin, end);
    tail.require_samples(train.samples());
    for (std::size_t g = 0; g < c_grid.size(); ++g) {
      const PortfolioWeights w = fit_regularized(train, tail, RegConfig(c_grid[g], mode));
      out.fold_scores(static_cast<Index>(g), f) = expected_shortfall(test, w, tail).value;
    }
  }

  const VectorXd mean = out.fold_scores.rowwise().mean();
  Index best = 0;
  for (Index g = 1; g < mean.size(); ++g) {
    if (mean[g] < mean[best]) best = g;
  }
  out.best_c = c_grid[static_cast<std::size_t>(best)];
  return out;
}

double mean_pairwise_angle(const std::vector<VectorXd>& vectors) {
  if (vectors.size() < 2) return kNaN;
  double sum = 0.0;
  long pairs = 0;
  for (std::size_t a = 0; a < vectors.size(); ++a) {
    for (std::size_t b = a + 1; b < vectors.size(); ++b) {
      const double cosine = vectors[a].dot(vectors[b]) /
                            (vectors[a].norm() * vectors[b].norm());
      sum += std::acos(std::clamp(cosine, -1.0, 1.0));
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

StabilitySummary stability_study(const StabilityConfig& config) {
  const TailConfig tail(config.nu);
  tail.require_samples(config.t);
  if (config.trials < 1 || config.c_grid.empty() || config.test_t < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "stability study needs trials >= 1, test_t >= 1 and a C grid");
  }
  for (double c : config.c_grid) RegConfig(c, config.mode);  // validates C

  struct Trial {
    bool bounded = false;
    VectorXd lp_w;
    double lp_es = kNaN;
    VectorXd reg_w;
    double reg_es = kNaN;
    double c = 0.0;
  };
  std::vector<Trial> trials(static_cast<std::size_t>(config.trials));

  parallel_for(config.trials, config.threads, [&](int i) {
    const auto id = static_cast<std::uint64_t>(i);
    const ReturnsMatrix train = iid_sample(config.n, config.t, derive_seed(config.seed, {id, 0}));
    const ReturnsMatrix test =
        iid_sample(config.n, config.test_t, derive_seed(config.seed, {id, 1}));
    Trial& out = trials[static_cast<std::size_t>(i)];

    const LPStanding lp = minimize_es_lp(train, tail);
    if (lp.status == SolveStatus::kOptimal) {
      out.bounded = true;
      out.lp_w = lp.solution->weights.values();
      out.lp_es = expected_shortfall(test, lp.solution->weights, tail).value;
    }

    out.c = config.c_grid.size() == 1
                ? config.c_grid.front()
                : cross_validate_c(train, tail, config.c_grid, config.folds,
                                   config.seed, config.mode)
                      .best_c;
    const PortfolioWeights w = fit_regularized(train, tail, RegConfig(out.c, config.mode));
    out.reg_w = w.values();
    out.reg_es = expected_shortfall(test, w, tail).value;
  });

  StabilitySummary s;
  s.trials = config.trials;
  s.seed = config.seed;
  std::vector<double> lp_es, reg_es, reg_es_paired;
  std::vector<VectorXd> lp_w, reg_w, reg_w_paired;
  for (const Trial& tr : trials) {
    s.chosen_c.push_back(tr.c);
    s.lp_bounded.push_back(tr.bounded);
    reg_es.push_back(tr.reg_es);
    reg_w.push_back(tr.reg_w);
    if (tr.bounded) {
      ++s.lp_optimal;
      lp_es.push_back(tr.lp_es);
      lp_w.push_back(tr.lp_w);
      reg_es_paired.push_back(tr.reg_es);
      reg_w_paired.push_back(tr.reg_w);
    }
  }
  s.unbounded_fraction =
      static_cast<double>(s.trials - s.lp_optimal) / static_cast<double>(s.trials);
  const MeanStderr lp = mean_stderr(lp_es);
  const MeanStderr reg = mean_stderr(reg_es);
  s.lp_oos_es_mean = lp.mean;
  s.lp_oos_es_stderr = lp.stderr_;
  s.reg_oos_es_mean = reg.mean;
  s.reg_oos_es_stderr = reg.stderr_;
  s.reg_oos_es_mean_paired = mean_stderr(reg_es_paired).mean;
  s.lp_angle_dispersion = mean_pairwise_angle(lp_w);
  s.reg_angle_dispersion = mean_pairwise_angle(reg_w);
  s.reg_angle_dispersion_paired = mean_pairwise_angle(reg_w_paired);
  return s;
}

}  // namespace rpo
