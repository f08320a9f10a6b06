#pragma once

// Projected gradient descent on J_n(beta) + gamma * ||beta||_1 over the
// nonnegative l1 ball, the pinned variant used for hierarchical discovery,
// and the multi-round hierarchical driver.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kfs/dataset.hpp"
#include "kfs/gradient.hpp"
#include "kfs/kernels.hpp"
#include "kfs/krr.hpp"
#include "kfs/projection.hpp"
#include "kfs/random.hpp"

namespace kfs {

using IndexSet = std::vector<Eigen::Index>;  // sorted, 0-based

struct SelectionConfig {
  double lambda = 0.01;
  double gamma = 0.0;
  double M = 10.0;
  std::optional<double> stepsize;  // empty means "auto"
  int max_iters = 2000;
  double tol = 1e-7;
  double support_eps = 1e-8;
  double tau = 1.0;
  std::uint64_t seed = 0;
  int lipschitz_probes = 4;
  int max_halvings = 20;
  int max_rounds = 0;  // hierarchical rounds; 0 means p

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be > 0");
    };
    positive(lambda, "lambda");
    positive(M, "M");
    positive(tol, "tol");
    positive(tau, "tau");
    if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
    if (!(support_eps >= 0.0)) throw std::invalid_argument("support_eps must be >= 0");
    if (stepsize) positive(*stepsize, "stepsize");
    if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    if (lipschitz_probes < 1) throw std::invalid_argument("lipschitz_probes must be >= 1");
    if (max_halvings < 0 || max_rounds < 0) throw std::invalid_argument("max_halvings and max_rounds must be >= 0");
  }
};

struct RoundRecord {
  IndexSet pinned;
  IndexSet support;
  int iterations = 0;
  double final_objective = 0.0;
};

struct SelectionResult {
  Beta beta_final = Beta::zeros(0, 1.0);
  IndexSet support;
  std::vector<double> objective_history;    // J_n + gamma ||beta||_1 per accepted iterate
  std::vector<double> iterate_sup_changes;  // ||beta^{k+1} - beta^k||_inf
  std::vector<bool> ever_nonzero;           // per coordinate, across all iterates
  std::vector<RoundRecord> rounds;          // hierarchical runs only
  double stepsize = 0.0;                    // resolved step at the start of the run
  double lipschitz_constant = 0.0;          // empirical C with step = lambda^2 / (C p); 0 if not estimated
  int iterations = 0;
  int halvings = 0;
  bool converged = false;
  SelectionConfig config;
};

/// One PGD step as seen by an observer.
struct StepTrace {
  int iteration;
  const Vector& beta_before;
  const Vector& grad_regularized;
  const Vector& beta_after;
};
using StepObserver = std::function<void(const StepTrace&)>;

inline IndexSet support_of(const Eigen::Ref<const Vector>& beta, double eps) {
  IndexSet s;
  for (Eigen::Index l = 0; l < beta.size(); ++l) {
    if (beta[l] > eps) s.push_back(l);
  }
  return s;
}

struct LipschitzEstimate {
  double L = 0.0;  // max ||g(b) - g(b')||_2 / ||b - b'||_2 over probes
  double C = 0.0;  // L * lambda^2 / p
};

/// Empirical Lipschitz constant of beta -> grad J_n over free coordinates.
/// Probes are the starting point and random feasible points, each paired
/// with a small random feasible perturbation.
inline LipschitzEstimate estimate_lipschitz(const GradientEngine& engine, const Vector& beta0,
                                            const std::vector<bool>& free, double M, int probes,
                                            std::uint64_t seed) {
  const Eigen::Index p = beta0.size();
  Eigen::Index n_free = 0;
  for (bool f : free) n_free += f ? 1 : 0;
  LipschitzEstimate est;
  if (n_free == 0) return est;

  Rng rng(seed, Stream::optimizer);
  const double scale = M / static_cast<double>(n_free);
  for (int k = 0; k < probes; ++k) {
    Vector base = beta0;
    if (k > 0) {
      // Random point on the free block, l1 mass uniform in (0, M).
      Vector raw = Vector::Zero(p);
      double total = 0.0;
      for (Eigen::Index l = 0; l < p; ++l) {
        if (free[static_cast<std::size_t>(l)]) {
          raw[l] = -std::log(std::max(rng.uniform(), 1e-300));
          total += raw[l];
        }
      }
      const double mass = M * rng.uniform(0.05, 0.95);
      for (Eigen::Index l = 0; l < p; ++l) {
        if (free[static_cast<std::size_t>(l)]) base[l] = raw[l] / total * mass;
      }
    }
    // Iterates move a few coordinates at a time, so the probe direction is
    // a single free coordinate.
    Eigen::Index pick = static_cast<Eigen::Index>(rng.next() % static_cast<std::uint64_t>(n_free));
    Eigen::Index coord = 0;
    for (Eigen::Index l = 0; l < p; ++l) {
      if (free[static_cast<std::size_t>(l)] && pick-- == 0) {
        coord = l;
        break;
      }
    }
    Vector other = base;
    other[coord] += 1e-2 * scale;
    const double dist = (other - base).norm();
    if (!(dist > 0.0)) continue;
    const Vector g0 = engine.gradient(base).grad;
    const Vector g1 = engine.gradient(other).grad;
    double diff_sq = 0.0;
    for (Eigen::Index l = 0; l < p; ++l) {
      if (free[static_cast<std::size_t>(l)]) diff_sq += (g1[l] - g0[l]) * (g1[l] - g0[l]);
    }
    est.L = std::max(est.L, std::sqrt(diff_sq) / dist);
  }
  const double lambda = engine.lambda();
  est.C = est.L * lambda * lambda / static_cast<double>(p);
  return est;
}

namespace detail {

inline Vector project_free_block(const Vector& v, const std::vector<bool>& free, double M, double tau) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index l = 0; l < v.size(); ++l) {
    if (free[static_cast<std::size_t>(l)]) idx.push_back(l);
  }
  Vector out(v.size());
  Vector block(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) block[static_cast<Eigen::Index>(k)] = v[idx[k]];
  const Beta projected = project_l1_nonneg(block, M);
  for (Eigen::Index l = 0; l < v.size(); ++l) out[l] = tau;
  for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = projected[static_cast<Eigen::Index>(k)];
  return out;
}

/// Shared PGD loop. Coordinates with free[l] == false stay at their initial value.
inline SelectionResult run_pgd(const GradientEngine& engine, const SelectionConfig& config, Vector beta,
                               const std::vector<bool>& free, double pinned_value, const StepObserver& observer) {
  config.validate();
  const Eigen::Index p = engine.data().p();
  if (beta.size() != p) throw DimensionError("initial beta length must equal p");

  SelectionResult res;
  res.config = config;
  res.ever_nonzero.assign(static_cast<std::size_t>(p), false);
  auto mark_nonzero = [&](const Vector& b) {
    for (Eigen::Index l = 0; l < p; ++l) {
      if (b[l] > 0.0) res.ever_nonzero[static_cast<std::size_t>(l)] = true;
    }
  };
  mark_nonzero(beta);

  const bool any_free = std::find(free.begin(), free.end(), true) != free.end();
  auto penalized = [&](const KrrFit& fit, const Vector& b) { return fit.objective + config.gamma * b.sum(); };

  GradientReport rep = engine.gradient(beta, config.gamma);
  double current = penalized(rep.fit, beta);
  res.objective_history.push_back(current);

  if (!any_free) {
    res.converged = true;
    res.beta_final = Beta(beta, std::max(config.M, beta.sum()));
    res.support = support_of(beta, config.support_eps);
    return res;
  }

  double step;
  if (config.stepsize) {
    step = *config.stepsize;
  } else {
    const LipschitzEstimate est =
        estimate_lipschitz(engine, beta, free, config.M, config.lipschitz_probes, config.seed);
    res.lipschitz_constant = est.C;
    step = est.L > 0.0 ? 1.0 / est.L : 1.0;
  }
  res.stepsize = step;

  // Accepted objective values may rise by at most this much (roundoff).
  constexpr double kSlack = 5e-13;

  for (int it = 0; it < config.max_iters; ++it) {
    bool accepted = false;
    bool stalled = false;
    Vector candidate;
    GradientEngine::Evaluation ev;
    for (int h = 0; h <= config.max_halvings; ++h) {
      Vector moved = beta - step * rep.grad_regularized;
      candidate = detail::project_free_block(moved, free, config.M, pinned_value);
      const double change = (candidate - beta).cwiseAbs().maxCoeff();
      if (change <= config.tol) {
        stalled = true;
        break;
      }
      ev = engine.evaluate(candidate);
      if (penalized(ev.fit, candidate) <= current + kSlack) {
        accepted = true;
        break;
      }
      step *= 0.5;
      ++res.halvings;
    }
    if (stalled) {
      res.converged = true;
      break;
    }
    if (!accepted) {
      throw SolverError("projected gradient step is not monotone after " + std::to_string(config.max_halvings) +
                        " stepsize halvings (iteration " + std::to_string(it) + ")");
    }

    GradientReport next = engine.gradient(std::move(ev), config.gamma);
    const double change = (candidate - beta).cwiseAbs().maxCoeff();
    if (observer) observer(StepTrace{it, beta, rep.grad_regularized, candidate});
    beta = std::move(candidate);
    rep = std::move(next);
    current = penalized(rep.fit, beta);
    res.objective_history.push_back(current);
    res.iterate_sup_changes.push_back(change);
    mark_nonzero(beta);
    res.iterations = it + 1;
    if (change <= config.tol) {
      res.converged = true;
      break;
    }
  }

  res.beta_final = Beta(beta, std::max(config.M, beta.sum()));
  res.support = support_of(beta, config.support_eps);
  return res;
}

}  // namespace detail

inline SelectionResult pgd_select(const GradientEngine& engine, const SelectionConfig& config, const Beta& beta0,
                                  const StepObserver& observer = {}) {
  if (beta0.size() != engine.data().p()) throw DimensionError("beta0 length must equal p");
  if (beta0.l1() > config.M + Beta::kBudgetSlack * std::max(1.0, config.M)) {
    throw std::invalid_argument("beta0 is outside the l1 ball of radius M");
  }
  const std::vector<bool> free(static_cast<std::size_t>(beta0.size()), true);
  return detail::run_pgd(engine, config, beta0.values(), free, 0.0, observer);
}

inline SelectionResult pgd_select(const KernelSpec& spec, const Dataset& data, const SelectionConfig& config,
                                  const Beta& beta0, const StepObserver& observer = {}) {
  const GradientEngine engine(spec, data, config.lambda);
  return pgd_select(engine, config, beta0, observer);
}

/// PGD with the coordinates in `pinned` held at tau and the rest started at 0
/// and kept in their own l1 ball of radius M.
inline SelectionResult pgd_select_pinned(const GradientEngine& engine, const SelectionConfig& config,
                                         const IndexSet& pinned, const StepObserver& observer = {}) {
  const Eigen::Index p = engine.data().p();
  std::vector<bool> free(static_cast<std::size_t>(p), true);
  Vector beta0 = Vector::Zero(p);
  for (Eigen::Index l : pinned) {
    if (l < 0 || l >= p) throw std::out_of_range("pinned index " + std::to_string(l) + " outside [0, p)");
    free[static_cast<std::size_t>(l)] = false;
    beta0[l] = config.tau;
  }
  return detail::run_pgd(engine, config, beta0, free, config.tau, observer);
}

inline SelectionResult pgd_select_pinned(const KernelSpec& spec, const Dataset& data, const SelectionConfig& config,
                                         const IndexSet& pinned, const StepObserver& observer = {}) {
  const GradientEngine engine(spec, data, config.lambda);
  return pgd_select_pinned(engine, config, pinned, observer);
}

/// Rounds of pinned PGD: each round pins the union of all supports found so
/// far at tau and searches the remaining coordinates from zero. Stops when a
/// round adds nothing or after max_rounds rounds (p when zero). The
/// iteration and halving counts of the result are totals over rounds.
inline SelectionResult hier_select(const GradientEngine& engine, const SelectionConfig& config) {
  const Eigen::Index p = engine.data().p();
  std::set<Eigen::Index> selected;
  std::vector<RoundRecord> rounds;
  SelectionResult last;
  int total_iterations = 0, total_halvings = 0;
  const Eigen::Index limit = config.max_rounds > 0 ? std::min<Eigen::Index>(config.max_rounds, p) : p;
  for (Eigen::Index round = 0; round < limit; ++round) {
    const IndexSet pinned(selected.begin(), selected.end());
    last = pgd_select_pinned(engine, config, pinned);
    total_iterations += last.iterations;
    total_halvings += last.halvings;
    rounds.push_back(RoundRecord{pinned, last.support, last.iterations,
                                 last.objective_history.empty() ? 0.0 : last.objective_history.back()});
    const std::size_t before = selected.size();
    selected.insert(last.support.begin(), last.support.end());
    if (selected.size() == before) break;
  }
  last.rounds = std::move(rounds);
  last.iterations = total_iterations;
  last.halvings = total_halvings;
  last.support.assign(selected.begin(), selected.end());
  return last;
}

inline SelectionResult hier_select(const KernelSpec& spec, const Dataset& data, const SelectionConfig& config) {
  const GradientEngine engine(spec, data, config.lambda);
  return hier_select(engine, config);
}

}  // namespace kfs
