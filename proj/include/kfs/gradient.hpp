#pragma once

// Closed-form gradient of the empirical KRR objective J_n(beta).
//
// With r the KRR residuals at beta and d_ij = ||x_i - x_j||_{q,beta}^q,
//   dJ_n/dbeta_l = -1/(2 lambda n^2) * sum_{i,j} r_i r_j h'(d_ij) |x_il - x_jl|^q,
// the sum running over all ordered pairs (the i == j terms vanish).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kfs/dataset.hpp"
#include "kfs/kernels.hpp"
#include "kfs/krr.hpp"
#include "kfs/parallel.hpp"

namespace kfs {

struct GradientReport {
  Vector grad;              // grad J_n(beta)
  Vector grad_regularized;  // grad + gamma
  double pairwise_nsd_value = 0.0;  // sum_ij r_i r_j h'(d_ij) / n^2, always <= 0 up to roundoff
  double sup_norm = 0.0;
  KrrFit fit;
};

namespace detail {

inline void check_gradient_inputs(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& residuals,
                                  const Eigen::Ref<const Vector>& beta) {
  if (residuals.size() != X.rows()) throw DimensionError("gradient: residual length must equal row count");
  if (beta.size() != X.cols()) throw DimensionError("gradient: beta length must equal feature count");
}

/// Tile path: sum over all ordered pairs given the weighted distance matrix.
/// Per-tile partial sums are combined in tile order.
inline Vector pairwise_sum_tiled(const KernelSpec& spec, const Eigen::Ref<const Matrix>& X,
                                 const Eigen::Ref<const Vector>& residuals, const Eigen::Ref<const Matrix>& D,
                                 Eigen::Index block) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  const int q = spec.q();
  block = std::max<Eigen::Index>(1, block);
  const Eigen::Index tiles = (n + block - 1) / block;
  std::vector<Vector> partial(static_cast<std::size_t>(tiles), Vector::Zero(p));

  parallel_for(tiles, [&](Eigen::Index t) {
    Vector& acc = partial[static_cast<std::size_t>(t)];
    Vector w(n);
    const Eigen::Index j0 = t * block;
    const Eigen::Index j1 = std::min(n, j0 + block);
    for (Eigen::Index j = j0; j < j1; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) w[i] = residuals[i] * residuals[j] * spec.h_prime_unchecked(D(i, j));
      for (Eigen::Index l = 0; l < p; ++l) {
        const double* col = X.col(l).data();
        const double xj = col[j];
        double s = 0.0;
        if (q == 1) {
          for (Eigen::Index i = 0; i < n; ++i) s += w[i] * std::abs(col[i] - xj);
        } else {
          for (Eigen::Index i = 0; i < n; ++i) {
            const double d = col[i] - xj;
            s += w[i] * d * d;
          }
        }
        acc[l] += s;
      }
    }
  });

  Vector total = Vector::Zero(p);
  for (const auto& v : partial) total += v;
  return total;
}

inline double nsd_form(const KernelSpec& spec, const Eigen::Ref<const Vector>& residuals,
                       const Eigen::Ref<const Matrix>& D) {
  const Eigen::Index n = residuals.size();
  double s = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    double col = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) col += residuals[i] * spec.h_prime_unchecked(D(i, j));
    s += residuals[j] * col;
  }
  return s;
}

}  // namespace detail

/// Gradient of J_n at beta for given residuals (exact double sum, tile path).
inline Vector pairwise_gradient(const KernelSpec& spec, const Eigen::Ref<const Matrix>& X,
                                const Eigen::Ref<const Vector>& residuals, const Eigen::Ref<const Vector>& beta,
                                double lambda, Eigen::Index block = 64) {
  detail::check_gradient_inputs(X, residuals, beta);
  if (!(lambda > 0.0)) throw std::invalid_argument("pairwise_gradient: lambda must be > 0");
  const Matrix D = distance_matrix(spec.q(), X, beta, block);
  const double n = static_cast<double>(X.rows());
  return detail::pairwise_sum_tiled(spec, X, residuals, D, block) * (-1.0 / (2.0 * lambda * n * n));
}

/// sum_ij r_i r_j h'(d_ij(beta)), unnormalized.
inline double pairwise_nsd_sum(const KernelSpec& spec, const Eigen::Ref<const Matrix>& X,
                               const Eigen::Ref<const Vector>& residuals, const Eigen::Ref<const Vector>& beta) {
  detail::check_gradient_inputs(X, residuals, beta);
  return detail::nsd_form(spec, residuals, distance_matrix(spec.q(), X, beta));
}

/// |h'(0)| (2 max|X|)^q mean(y^2) / lambda
inline double gradient_sup_bound(const KernelSpec& spec, const Dataset& data, double lambda) {
  const double span = 2.0 * data.X.cwiseAbs().maxCoeff();
  return std::abs(spec.h_prime0()) * abs_pow(span, spec.q()) * data.y.squaredNorm() /
         static_cast<double>(data.n()) / lambda;
}

struct GradientOptions {
  Eigen::Index block = 64;
  // Byte budget for the per-pair coordinate-difference table; above it the
  // engine recomputes differences tile by tile.
  std::size_t memory_budget = std::size_t{256} << 20;
};

/// Evaluates J_n and its gradient repeatedly on one dataset. When the table
/// |x_il - x_jl|^q over pairs i < j fits the memory budget it is built once,
/// turning distances and gradients into matrix-vector products.
class GradientEngine {
 public:
  GradientEngine(KernelSpec spec, const Dataset& data, double lambda, GradientOptions options = {})
      : spec_(std::move(spec)), data_(&data), lambda_(lambda), options_(options) {
    if (!(lambda_ > 0.0)) throw std::invalid_argument("lambda must be > 0");
    const auto n = static_cast<std::size_t>(data.n());
    const auto p = static_cast<std::size_t>(data.p());
    const std::size_t pairs = n * (n - 1) / 2;
    if (pairs > 0 && pairs * p * sizeof(double) <= options_.memory_budget) build_table();
  }

  const KernelSpec& spec() const { return spec_; }
  const Dataset& data() const { return *data_; }
  double lambda() const { return lambda_; }
  bool uses_table() const { return table_.size() > 0; }

  Matrix distances(const Eigen::Ref<const Vector>& beta) const {
    check_beta(beta);
    if (!uses_table()) return distance_matrix(spec_.q(), data_->X, beta, options_.block);
    const Eigen::Index n = data_->n();
    Vector d = Vector::Zero(table_.rows());
    for (Eigen::Index l = 0; l < beta.size(); ++l) {
      if (beta[l] > 0.0) d.noalias() += beta[l] * table_.col(l);
    }
    Matrix D = Matrix::Zero(n, n);
    Eigen::Index k = 0;
    for (Eigen::Index j = 1; j < n; ++j) {
      for (Eigen::Index i = 0; i < j; ++i) D(i, j) = d[k++];
    }
    D.triangularView<Eigen::StrictlyLower>() = D.transpose();
    return D;
  }

  /// Distances and KRR fit at one beta; the gradient can be derived from it.
  struct Evaluation {
    Matrix distances;
    KrrFit fit;
  };

  Evaluation evaluate(const Eigen::Ref<const Vector>& beta) const {
    Evaluation ev;
    ev.distances = distances(beta);
    ev.fit = solve_krr(gram_from_distances(spec_, ev.distances), data_->y, lambda_);
    return ev;
  }

  KrrFit fit(const Eigen::Ref<const Vector>& beta) const { return evaluate(beta).fit; }

  double objective(const Eigen::Ref<const Vector>& beta) const { return fit(beta).objective; }

  GradientReport gradient(const Eigen::Ref<const Vector>& beta, double gamma = 0.0) const {
    return gradient(evaluate(beta), gamma);
  }

  GradientReport gradient(Evaluation ev, double gamma) const {
    const Matrix& D = ev.distances;
    GradientReport rep;
    rep.fit = std::move(ev.fit);
    const Vector& r = rep.fit.residuals;
    const double n = static_cast<double>(data_->n());

    if (uses_table()) {
      Vector w(table_.rows());
      Eigen::Index k = 0;
      for (Eigen::Index j = 1; j < data_->n(); ++j) {
        for (Eigen::Index i = 0; i < j; ++i, ++k) w[k] = r[i] * r[j] * spec_.h_prime_unchecked(D(i, j));
      }
      // Each unordered pair stands for two ordered ones.
      rep.grad.noalias() = table_.transpose() * w;
      rep.grad *= -1.0 / (lambda_ * n * n);
    } else {
      rep.grad = detail::pairwise_sum_tiled(spec_, data_->X, r, D, options_.block) * (-1.0 / (2.0 * lambda_ * n * n));
    }
    rep.grad_regularized = rep.grad.array() + gamma;
    rep.pairwise_nsd_value = detail::nsd_form(spec_, r, D) / (n * n);
    rep.sup_norm = rep.grad.size() ? rep.grad.cwiseAbs().maxCoeff() : 0.0;
    return rep;
  }

 private:
  void check_beta(const Eigen::Ref<const Vector>& beta) const {
    if (beta.size() != data_->p()) {
      throw DimensionError("beta length " + std::to_string(beta.size()) + " does not match p=" +
                           std::to_string(data_->p()));
    }
  }

  void build_table() {
    const Eigen::Index n = data_->n();
    const Eigen::Index p = data_->p();
    const Eigen::Index pairs = n * (n - 1) / 2;
    table_.resize(pairs, p);
    const int q = spec_.q();
    parallel_for(p, [&](Eigen::Index l) {
      const double* col = data_->X.col(l).data();
      double* out = table_.col(l).data();
      Eigen::Index k = 0;
      for (Eigen::Index j = 1; j < n; ++j) {
        for (Eigen::Index i = 0; i < j; ++i) out[k++] = abs_pow(col[i] - col[j], q);
      }
    });
  }

  KernelSpec spec_;
  const Dataset* data_;
  double lambda_;
  GradientOptions options_;
  Matrix table_;
};

/// Runs gram -> solve_krr -> pairwise gradient at beta.
inline GradientReport full_gradient(const KernelSpec& spec, const Dataset& data, const Eigen::Ref<const Vector>& beta,
                                    double lambda, double gamma = 0.0, GradientOptions options = {}) {
  if ((beta.array() < 0.0).any()) throw std::invalid_argument("full_gradient: beta must be >= 0");
  return GradientEngine(spec, data, lambda, options).gradient(beta, gamma);
}

/// Central differences of an arbitrary scalar function.
inline Vector central_differences(const std::function<double(const Vector&)>& f, const Vector& x, double step) {
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index l = 0; l < x.size(); ++l) {
    probe[l] = x[l] + step;
    const double up = f(probe);
    probe[l] = x[l] - step;
    const double down = f(probe);
    probe[l] = x[l];
    g[l] = (up - down) / (2.0 * step);
  }
  return g;
}

/// Central-difference gradient of J_n. Every beta_l must be >= step so the
/// probes stay in the nonnegative orthant.
inline Vector finite_diff_gradient(const KernelSpec& spec, const Dataset& data, const Eigen::Ref<const Vector>& beta,
                                   double lambda, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_gradient: step must be > 0");
  if (beta.size() != data.p()) throw DimensionError("finite_diff_gradient: beta length must equal p");
  if ((beta.array() < step).any()) {
    throw std::invalid_argument("finite_diff_gradient: every beta_l must be >= step");
  }
  GradientOptions opts;
  opts.memory_budget = 0;
  const GradientEngine engine(spec, data, lambda, opts);
  return central_differences([&](const Vector& b) { return engine.objective(b); }, beta, step);
}

}  // namespace kfs
