#pragma once

// Synthetic models, Monte-Carlo effective signal sizes, and a quadrature
// check of the Fourier identity for the conditionally negative definite
// kernel |x - x'|.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <gsl/gsl_sf_expint.h>

#include "kfs/dataset.hpp"
#include "kfs/kernels.hpp"
#include "kfs/random.hpp"

namespace kfs {

enum class ModelKind { main_effect_fig1, hierarchical_fig2, custom_additive };

enum class ComponentKind { linear, centered_quadratic, sine };

inline double apply_component(ComponentKind kind, double x) {
  switch (kind) {
    case ComponentKind::linear:
      return x;
    case ComponentKind::centered_quadratic:
      return x * x - 1.0;
    case ComponentKind::sine:
      return std::sin(x);
  }
  return 0.0;
}

struct AdditiveComponent {
  Eigen::Index index;  // 0-based feature index
  ComponentKind kind;
};

struct ModelSpec {
  ModelKind kind = ModelKind::main_effect_fig1;
  Eigen::Index p = 10;
  double sigma2 = 1.0;
  std::vector<AdditiveComponent> components;  // custom_additive only

  /// Y = X1 + (X2^2 - 1) + N(0, sigma2)
  static ModelSpec main_effect(Eigen::Index p, double sigma2) { return {ModelKind::main_effect_fig1, p, sigma2, {}}; }
  /// Y = X1 + X1 X2 + X1 X2 X3 + N(0, sigma2)
  static ModelSpec hierarchical(Eigen::Index p, double sigma2) {
    return {ModelKind::hierarchical_fig2, p, sigma2, {}};
  }
  static ModelSpec additive(Eigen::Index p, double sigma2, std::vector<AdditiveComponent> parts) {
    return {ModelKind::custom_additive, p, sigma2, std::move(parts)};
  }

  /// 0-based indices of the signal variables.
  std::vector<Eigen::Index> signals() const {
    switch (kind) {
      case ModelKind::main_effect_fig1:
        return {0, 1};
      case ModelKind::hierarchical_fig2:
        return {0, 1, 2};
      case ModelKind::custom_additive: {
        std::vector<Eigen::Index> s;
        for (const auto& c : components) {
          if (std::find(s.begin(), s.end(), c.index) == s.end()) s.push_back(c.index);
        }
        std::sort(s.begin(), s.end());
        return s;
      }
    }
    return {};
  }

  void validate() const {
    if (!(sigma2 >= 0.0)) throw std::invalid_argument("sigma2 must be >= 0");
    const auto s = signals();
    const Eigen::Index needed = s.empty() ? 1 : s.back() + 1;
    if (p < needed) {
      throw std::invalid_argument("model needs p >= " + std::to_string(needed) + ", got " + std::to_string(p));
    }
    for (const auto& c : components) {
      if (c.index < 0) throw std::invalid_argument("component index must be >= 0");
    }
  }

  /// Noiseless regression function at one row.
  double mean_response(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    switch (kind) {
      case ModelKind::main_effect_fig1:
        return x[0] + (x[1] * x[1] - 1.0);
      case ModelKind::hierarchical_fig2:
        return x[0] + x[0] * x[1] + x[0] * x[1] * x[2];
      case ModelKind::custom_additive: {
        double s = 0.0;
        for (const auto& c : components) s += apply_component(c.kind, x[c.index]);
        return s;
      }
    }
    return 0.0;
  }

  std::string name() const {
    switch (kind) {
      case ModelKind::main_effect_fig1:
        return "main_effect_fig1";
      case ModelKind::hierarchical_fig2:
        return "hierarchical_fig2";
      case ModelKind::custom_additive:
        return "custom_additive";
    }
    return "unknown";
  }
};

/// X ~ N(0, I_p) row by row, then the response with independent Gaussian
/// noise. Features and noise come from separate streams of `seed`, so the
/// design does not depend on sigma2. The response is centered.
inline Dataset generate(const ModelSpec& model, Eigen::Index n, std::uint64_t seed) {
  model.validate();
  if (n < 1) throw std::invalid_argument("generate: n must be >= 1");
  Rng features(seed, Stream::dataset);
  Rng noise(seed, Stream::noise);
  Eigen::MatrixXd X(n, model.p);
  Eigen::VectorXd y(n);
  const double sd = std::sqrt(model.sigma2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index l = 0; l < model.p; ++l) X(i, l) = features.normal();
    y[i] = model.mean_response(X.row(i)) + sd * noise.normal();
  }
  return Dataset(std::move(X), std::move(y));
}

// ---------------------------------------------------------------------------
// Effective signal sizes

struct EffectSizeEstimate {
  double raw = 0.0;
  double abs = 0.0;
  double mc_stderr = 0.0;
  std::int64_t samples = 0;
};

/// Pair weight kappa(x_T, x'_T): either h(||x_T - x'_T||_1) or the plain
/// l1 distance ||x_T - x'_T||_1 (|x - x'| for a single index).
struct PairWeight {
  std::optional<KernelSpec> kernel;  // empty selects the absolute distance

  static PairWeight absolute_distance() { return {}; }
  static PairWeight kernel_weight(KernelSpec spec) { return {std::move(spec)}; }

  double operator()(double l1_distance) const { return kernel ? kernel->h(l1_distance) : l1_distance; }
};

using ComponentFn = std::function<double(std::span<const double>)>;
using Sampler = std::function<void(Rng&, std::span<double>)>;

inline Sampler standard_normal_sampler() {
  return [](Rng& rng, std::span<double> out) {
    for (double& v : out) v = rng.normal();
  };
}

/// raw = (1/m) sum_i g(X_i) g(X'_i) kappa(X_i,T, X'_i,T) over m independent
/// pairs; the standard error is the sample standard deviation over sqrt(m).
inline EffectSizeEstimate effect_size_mc(const PairWeight& weight, const ComponentFn& g, const Sampler& sampler,
                                         std::size_t dim, const std::vector<std::size_t>& T, std::int64_t m,
                                         std::uint64_t seed) {
  if (m < 2) throw std::invalid_argument("effect_size_mc: need at least 2 pairs");
  for (auto t : T) {
    if (t >= dim) throw std::invalid_argument("effect_size_mc: index set exceeds sample dimension");
  }
  Rng rng(seed, Stream::pairs);
  std::vector<double> x(dim), xp(dim);
  double mean = 0.0;
  double m2 = 0.0;  // Welford
  for (std::int64_t i = 0; i < m; ++i) {
    sampler(rng, x);
    sampler(rng, xp);
    double dist = 0.0;
    for (auto t : T) dist += std::abs(x[t] - xp[t]);
    const double v = g(x) * g(xp) * weight(dist);
    const double delta = v - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (v - mean);
  }
  EffectSizeEstimate est;
  est.raw = mean;
  est.abs = std::abs(mean);
  est.samples = m;
  est.mc_stderr = std::sqrt(m2 / static_cast<double>(m - 1) / static_cast<double>(m));
  return est;
}

/// prod_k min(|E_k|, 1) for one chain of nested index sets.
inline double compose_effect_size(const std::vector<EffectSizeEstimate>& parts) {
  if (parts.empty()) throw std::invalid_argument("compose_effect_size: empty chain");
  double prod = 1.0;
  for (const auto& e : parts) prod *= std::min(e.abs, 1.0);
  return prod;
}

/// All orderings of `signals` (|S| <= 6), each giving the chain of growing
/// prefixes T_1 = {s_1}, T_2 = {s_1, s_2}, ... The caller evaluates each chain
/// and takes the minimum.
inline std::vector<std::vector<std::vector<std::size_t>>> enumerate_chains(std::vector<std::size_t> signals) {
  if (signals.size() > 6) throw std::invalid_argument("chain enumeration is limited to |S| <= 6");
  std::sort(signals.begin(), signals.end());
  std::vector<std::vector<std::vector<std::size_t>>> chains;
  do {
    std::vector<std::vector<std::size_t>> chain;
    std::vector<std::size_t> prefix;
    for (auto s : signals) {
      prefix.push_back(s);
      chain.push_back(prefix);
    }
    chains.push_back(std::move(chain));
  } while (std::next_permutation(signals.begin(), signals.end()));
  return chains;
}

// ---------------------------------------------------------------------------
// Fourier identity for |x - x'|:
//   sum_ij p_i p_j |x_i - x_j| = -(2/pi) int_0^inf |p_hat(w)|^2 / w^2 dw
// for masses p summing to zero.

struct FourierCheck {
  double lhs = 0.0;
  double rhs = 0.0;
};

struct FourierQuadrature {
  double cutoff = 200.0;
  int n_quad = 20000;            // Simpson intervals on [eps, cutoff]; rounded up to even
  double eps = 1e-3;             // series expansion below this frequency
  bool tail_correction = true;   // add the analytic integral over [cutoff, inf)
};

namespace detail {

/// int_C^inf cos(a w) / w^2 dw for a >= 0, C > 0.
inline double cosine_tail(double a, double C) {
  if (a == 0.0) return 1.0 / C;
  const double z = a * C;
  return std::cos(z) / C - a * (std::numbers::pi / 2.0 - gsl_sf_Si(z));
}

}  // namespace detail

inline FourierCheck fourier_identity_check(std::span<const double> points, std::span<const double> masses,
                                           const FourierQuadrature& quad = {}) {
  if (points.size() != masses.size()) throw std::invalid_argument("fourier check: points and masses differ in length");
  if (points.size() < 2) throw std::invalid_argument("fourier check: need at least two points");
  double total = 0.0, abs_total = 0.0;
  for (double m : masses) {
    total += m;
    abs_total += std::abs(m);
  }
  if (std::abs(total) > 1e-12 * std::max(1.0, abs_total)) {
    throw std::invalid_argument("fourier check: masses must sum to zero");
  }
  if (!(quad.cutoff > quad.eps) || quad.eps <= 0.0 || quad.n_quad < 2) {
    throw std::invalid_argument("fourier check: need 0 < eps < cutoff and n_quad >= 2");
  }

  const std::size_t k = points.size();
  FourierCheck out;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) out.lhs += masses[i] * masses[j] * std::abs(points[i] - points[j]);
  }

  // |p_hat(w)|^2 = sum_ij p_i p_j cos(w (x_i - x_j))
  auto power = [&](double w) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      re += masses[i] * std::cos(w * points[i]);
      im += masses[i] * std::sin(w * points[i]);
    }
    return re * re + im * im;
  };

  // Near zero |p_hat|^2 / w^2 = -S2/2 + w^2 S4/24 - w^4 S6/720 + ...,
  // S_m = sum_ij p_i p_j d_ij^m.
  double s2 = 0.0, s4 = 0.0, s6 = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double d2 = (points[i] - points[j]) * (points[i] - points[j]);
      const double pp = masses[i] * masses[j];
      s2 += pp * d2;
      s4 += pp * d2 * d2;
      s6 += pp * d2 * d2 * d2;
    }
  }
  const double e = quad.eps;
  double integral = -0.5 * s2 * e + s4 * e * e * e / 72.0 - s6 * std::pow(e, 5) / 3600.0;

  const int intervals = quad.n_quad + (quad.n_quad % 2);
  const double h = (quad.cutoff - e) / intervals;
  double simpson = power(e) / (e * e) + power(quad.cutoff) / (quad.cutoff * quad.cutoff);
  for (int m = 1; m < intervals; ++m) {
    const double w = e + m * h;
    simpson += (m % 2 ? 4.0 : 2.0) * power(w) / (w * w);
  }
  integral += simpson * h / 3.0;

  if (quad.tail_correction) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        integral += masses[i] * masses[j] * detail::cosine_tail(std::abs(points[i] - points[j]), quad.cutoff);
      }
    }
  }
  out.rhs = -(2.0 / std::numbers::pi) * integral;
  return out;
}

}  // namespace kfs
