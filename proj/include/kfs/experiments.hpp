#pragma once

// Monte-Carlo harness: ROC sweeps over a gamma grid for plain and
// hierarchical selection, and the empirical-gradient concentration trend.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kfs/gradient.hpp"
#include "kfs/kernels.hpp"
#include "kfs/optimize.hpp"
#include "kfs/parallel.hpp"
#include "kfs/random.hpp"
#include "kfs/signals.hpp"

namespace kfs {

inline std::vector<double> fig1_gamma_grid() { return {0, 0.002, 0.005, 0.01, 0.02, 0.05, 0.20, 0.6, 2.0}; }
inline std::vector<double> fig2_gamma_grid() { return {0, 0.002, 0.005, 0.01, 0.02, 0.05, 0.2, 0.5, 1.0}; }

struct RocPoint {
  std::string kernel;
  int q = 1;
  double gamma = 0.0;
  std::map<Eigen::Index, double> tpr_per_signal;  // 0-based signal index -> recovery frequency
  double fpr = 0.0;
  int trials = 0;
  int failures = 0;  // trials whose optimizer threw; excluded from the frequencies
};

struct TrendPoint {
  Eigen::Index n = 0;
  double sup_dev = 0.0;
  int seeds = 0;
};

struct ExperimentConfig {
  Eigen::Index n = 200;
  double lambda = 0.01;
  std::vector<double> gamma_grid = fig1_gamma_grid();
  int trials = 20;
  std::uint64_t seed = 1;
  // Optimizer settings shared by every run; gamma comes from the grid.
  SelectionConfig selection;
};

/// One optimizer run inside a sweep.
struct TrialRecord {
  std::size_t kernel = 0;
  std::size_t gamma_index = 0;
  int trial = 0;
  bool failed = false;
  std::string error;
  IndexSet support;
  std::vector<RoundRecord> rounds;
  std::vector<bool> ever_nonzero;
  int iterations = 0;
};

struct ExperimentReport {
  std::vector<RocPoint> points;  // kernel-major, then gamma order
  std::vector<TrialRecord> records;
};

namespace detail {

inline RocPoint aggregate(const std::vector<TrialRecord>& records, std::size_t kernel, std::size_t gamma_index,
                          const KernelSpec& spec, double gamma, const std::vector<Eigen::Index>& signals,
                          Eigen::Index p) {
  RocPoint pt;
  pt.kernel = spec.describe();
  pt.q = spec.q();
  pt.gamma = gamma;
  for (auto s : signals) pt.tpr_per_signal[s] = 0.0;
  const double noise_count = static_cast<double>(p - static_cast<Eigen::Index>(signals.size()));
  double fpr_sum = 0.0;
  for (const auto& r : records) {
    if (r.kernel != kernel || r.gamma_index != gamma_index) continue;
    if (r.failed) {
      ++pt.failures;
      continue;
    }
    ++pt.trials;
    std::size_t noise_hits = 0;
    for (auto l : r.support) {
      if (std::find(signals.begin(), signals.end(), l) != signals.end()) {
        pt.tpr_per_signal[l] += 1.0;
      } else {
        ++noise_hits;
      }
    }
    if (noise_count > 0) fpr_sum += static_cast<double>(noise_hits) / noise_count;
  }
  if (pt.trials > 0) {
    for (auto& [s, v] : pt.tpr_per_signal) v /= pt.trials;
    pt.fpr = fpr_sum / pt.trials;
  }
  return pt;
}

template <typename Runner>
ExperimentReport sweep(const ModelSpec& model, const std::vector<KernelSpec>& kernels, const ExperimentConfig& cfg,
                       Runner&& run) {
  if (cfg.gamma_grid.empty()) throw std::invalid_argument("gamma grid must be nonempty");
  if (cfg.trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (kernels.empty()) throw std::invalid_argument("at least one kernel is required");
  model.validate();
  const std::size_t G = cfg.gamma_grid.size();
  const std::size_t per_trial = kernels.size() * G;
  std::vector<TrialRecord> records(static_cast<std::size_t>(cfg.trials) * per_trial);

  parallel_for(cfg.trials, [&](int t) {
    const Dataset data = generate(model, cfg.n, derive_seed(cfg.seed, static_cast<std::uint64_t>(Stream::dataset),
                                                            static_cast<std::uint64_t>(t)));
    for (std::size_t k = 0; k < kernels.size(); ++k) {
      const GradientEngine engine(kernels[k], data, cfg.lambda);
      for (std::size_t g = 0; g < G; ++g) {
        TrialRecord& rec = records[static_cast<std::size_t>(t) * per_trial + k * G + g];
        rec.kernel = k;
        rec.gamma_index = g;
        rec.trial = t;
        SelectionConfig sc = cfg.selection;
        sc.lambda = cfg.lambda;
        sc.gamma = cfg.gamma_grid[g];
        sc.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(Stream::optimizer), static_cast<std::uint64_t>(t));
        try {
          const SelectionResult res = run(engine, sc);
          rec.support = res.support;
          rec.rounds = res.rounds;
          rec.ever_nonzero = res.ever_nonzero;
          rec.iterations = res.iterations;
        } catch (const std::exception& e) {
          rec.failed = true;
          rec.error = e.what();
        }
      }
    }
  });

  ExperimentReport report;
  const auto signals = model.signals();
  for (std::size_t k = 0; k < kernels.size(); ++k) {
    for (std::size_t g = 0; g < G; ++g) {
      report.points.push_back(aggregate(records, k, g, kernels[k], cfg.gamma_grid[g], signals, model.p));
    }
  }
  report.records = std::move(records);
  return report;
}

}  // namespace detail

/// Plain PGD from beta = 0 for every (kernel, gamma, trial). Each trial draws
/// one dataset shared by all kernels and grid values.
inline ExperimentReport run_roc(const ModelSpec& model, const std::vector<KernelSpec>& kernels,
                                const ExperimentConfig& cfg) {
  return detail::sweep(model, kernels, cfg, [](const GradientEngine& engine, const SelectionConfig& sc) {
    return pgd_select(engine, sc, Beta::zeros(engine.data().p(), sc.M));
  });
}

/// Hierarchical selection with the Laplace kernel on Y = X1 + X1 X2 + X1 X2 X3 + noise.
inline ExperimentReport run_hier_experiment(Eigen::Index p, double sigma2, const ExperimentConfig& cfg) {
  return detail::sweep(ModelSpec::hierarchical(p, sigma2), {KernelSpec::laplace()}, cfg,
                       [](const GradientEngine& engine, const SelectionConfig& sc) { return hier_select(engine, sc); });
}

// ---------------------------------------------------------------------------
// Concentration of the empirical gradient

struct TrendConfig {
  double lambda = 0.1;
  std::vector<Eigen::Index> n_list{100, 200, 400, 800};
  int seeds = 10;
  Eigen::Index n_ref = 3200;
  int betas = 5;
  std::uint64_t seed = 1;
};

/// Shared probe points: beta_l ~ U(0, 2/p), so ||beta||_1 is about 1.
inline std::vector<Vector> trend_betas(Eigen::Index p, int count, std::uint64_t seed) {
  Rng rng(seed, Stream::beta_probe);
  std::vector<Vector> out;
  for (int k = 0; k < count; ++k) {
    Vector b(p);
    for (Eigen::Index l = 0; l < p; ++l) b[l] = rng.uniform(0.0, 2.0 / static_cast<double>(p));
    out.push_back(std::move(b));
  }
  return out;
}

/// max over probe betas of ||grad J_n(beta) - reference(beta)||_inf.
inline double gradient_sup_deviation(const KernelSpec& kernel, const Dataset& data, double lambda,
                                     const std::vector<Vector>& betas, const std::vector<Vector>& reference) {
  const GradientEngine engine(kernel, data, lambda);
  double dev = 0.0;
  for (std::size_t b = 0; b < betas.size(); ++b) {
    dev = std::max(dev, (engine.gradient(betas[b]).grad - reference[b]).cwiseAbs().maxCoeff());
  }
  return dev;
}

inline std::uint64_t trend_dataset_seed(std::uint64_t seed, int index) {
  return derive_seed(seed, static_cast<std::uint64_t>(Stream::dataset), static_cast<std::uint64_t>(index));
}

/// Median over seeds of the sup-norm gap between the gradient at sample size n
/// and a reference gradient from one dataset of size n_ref. The reference uses
/// dataset index 0; trial seeds use indices 1..seeds.
inline std::vector<TrendPoint> run_concentration_trend(const ModelSpec& model, const KernelSpec& kernel,
                                                       const TrendConfig& cfg) {
  if (cfg.n_list.empty()) throw std::invalid_argument("n_list must be nonempty");
  if (cfg.seeds < 1) throw std::invalid_argument("seeds must be >= 1");
  const Eigen::Index n_max = *std::max_element(cfg.n_list.begin(), cfg.n_list.end());
  if (cfg.n_ref < 4 * n_max) throw std::invalid_argument("n_ref must be >= 4 * max(n_list)");

  const auto betas = trend_betas(model.p, cfg.betas, cfg.seed);
  const Dataset ref_data = generate(model, cfg.n_ref, trend_dataset_seed(cfg.seed, 0));
  std::vector<Vector> reference;
  {
    GradientOptions tiled;
    tiled.memory_budget = std::size_t{256} << 20;
    const GradientEngine ref_engine(kernel, ref_data, cfg.lambda, tiled);
    for (const auto& b : betas) reference.push_back(ref_engine.gradient(b).grad);
  }

  std::vector<Eigen::Index> ns = cfg.n_list;
  std::sort(ns.begin(), ns.end());
  std::vector<TrendPoint> out;
  for (Eigen::Index n : ns) {
    std::vector<double> devs(static_cast<std::size_t>(cfg.seeds));
    parallel_for(cfg.seeds, [&](int s) {
      const Dataset data = generate(model, n, trend_dataset_seed(cfg.seed, s + 1));
      devs[static_cast<std::size_t>(s)] = gradient_sup_deviation(kernel, data, cfg.lambda, betas, reference);
    });
    std::sort(devs.begin(), devs.end());
    const std::size_t m = devs.size();
    const double median = m % 2 ? devs[m / 2] : 0.5 * (devs[m / 2 - 1] + devs[m / 2]);
    out.push_back(TrendPoint{n, median, cfg.seeds});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tables

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// CSV with columns kernel,q,gamma,fpr,tpr_<s1>,tpr_<s2>,...,trials where
/// signal indices are 1-based.
inline std::string roc_csv(const std::vector<RocPoint>& points) {
  std::ostringstream os;
  std::vector<Eigen::Index> signals;
  if (!points.empty()) {
    for (const auto& [s, v] : points.front().tpr_per_signal) signals.push_back(s);
  }
  os << "kernel,q,gamma,fpr";
  for (auto s : signals) os << ",tpr_" << (s + 1);
  os << ",trials\n";
  for (const auto& pt : points) {
    os << pt.kernel << ',' << pt.q << ',' << format_double(pt.gamma) << ',' << format_double(pt.fpr);
    for (auto s : signals) {
      const auto it = pt.tpr_per_signal.find(s);
      os << ',' << format_double(it == pt.tpr_per_signal.end() ? 0.0 : it->second);
    }
    os << ',' << pt.trials << '\n';
  }
  return os.str();
}

inline std::string trend_csv(const std::vector<TrendPoint>& points) {
  std::ostringstream os;
  os << "n,sup_dev,seeds\n";
  for (const auto& pt : points) os << pt.n << ',' << format_double(pt.sup_dev) << ',' << pt.seeds << '\n';
  return os.str();
}

}  // namespace kfs
