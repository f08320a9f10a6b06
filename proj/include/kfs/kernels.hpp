#pragma once

// lq-type kernels k(x, x') = h(||x - x'||_{q,beta}^q) where h is a finite
// mixture of decaying exponentials h(u) = sum_i w_i exp(-t_i u).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kfs/parallel.hpp"

namespace kfs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Atom {
  double scale;   // t
  double weight;  // w
};

class KernelSpec {
 public:
  KernelSpec(int q, std::vector<Atom> atoms) : q_(q), atoms_(std::move(atoms)) {
    if (q_ != 1 && q_ != 2) {
      throw std::invalid_argument("kernel exponent q must be 1 or 2, got " + std::to_string(q_));
    }
    if (atoms_.empty()) throw std::invalid_argument("kernel mixture needs at least one atom");
    for (const auto& a : atoms_) {
      if (!(a.scale > 0.0) || !std::isfinite(a.scale)) {
        throw std::invalid_argument("kernel atom scale must be finite and > 0");
      }
      if (!(a.weight > 0.0) || !std::isfinite(a.weight)) {
        throw std::invalid_argument("kernel atom weight must be finite and > 0");
      }
    }
  }

  /// exp(-||x - x'||_1)
  static KernelSpec laplace() { return KernelSpec(1, {{1.0, 1.0}}); }
  /// exp(-||x - x'||_2^2)
  static KernelSpec gaussian() { return KernelSpec(2, {{1.0, 1.0}}); }

  int q() const { return q_; }
  const std::vector<Atom>& atoms() const { return atoms_; }

  double h(double u) const {
    if (u < 0.0) throw std::domain_error("h(u) requires u >= 0");
    double s = 0.0;
    for (const auto& a : atoms_) s += a.weight * std::exp(-a.scale * u);
    return s;
  }

  double h_prime(double u) const {
    if (u < 0.0) throw std::domain_error("h'(u) requires u >= 0");
    double s = 0.0;
    for (const auto& a : atoms_) s -= a.weight * a.scale * std::exp(-a.scale * u);
    return s;
  }

  // Unchecked variants for inner loops where u is a sum of nonnegative terms.
  double h_unchecked(double u) const {
    if (atoms_.size() == 1) return atoms_[0].weight * std::exp(-atoms_[0].scale * u);
    double s = 0.0;
    for (const auto& a : atoms_) s += a.weight * std::exp(-a.scale * u);
    return s;
  }
  double h_prime_unchecked(double u) const {
    if (atoms_.size() == 1) {
      return -atoms_[0].weight * atoms_[0].scale * std::exp(-atoms_[0].scale * u);
    }
    double s = 0.0;
    for (const auto& a : atoms_) s -= a.weight * a.scale * std::exp(-a.scale * u);
    return s;
  }

  double h0() const { return h(0.0); }
  double h_prime0() const { return h_prime(0.0); }

  std::string describe() const {
    if (atoms_.size() == 1 && atoms_[0].scale == 1.0 && atoms_[0].weight == 1.0) {
      return q_ == 1 ? "laplace" : "gaussian";
    }
    std::string s = "mixture:";
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      if (i) s += ',';
      s += shortest(atoms_[i].scale) + ':' + shortest(atoms_[i].weight);
    }
    return s;
  }

 private:
  static std::string shortest(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  }

  int q_;
  std::vector<Atom> atoms_;
};

inline double h_eval(const KernelSpec& spec, double u) { return spec.h(u); }
inline double h_prime_eval(const KernelSpec& spec, double u) { return spec.h_prime(u); }

/// |d|^q for q in {1, 2}.
inline double abs_pow(double d, int q) { return q == 1 ? std::abs(d) : d * d; }

/// sum_l beta_l |x_l - x'_l|^q
inline double weighted_dist(int q, const Eigen::Ref<const Vector>& beta,
                            const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& xp) {
  if (x.size() != beta.size() || xp.size() != beta.size()) {
    throw DimensionError("weighted_dist: x, x' and beta must have equal length");
  }
  if (q != 1 && q != 2) throw std::invalid_argument("weighted_dist: q must be 1 or 2");
  double s = 0.0;
  for (Eigen::Index l = 0; l < beta.size(); ++l) {
    if (beta[l] != 0.0) s += beta[l] * abs_pow(x[l] - xp[l], q);
  }
  return s;
}

/// Pairwise weighted distances D_ij = ||x_i - x_j||_{q,beta}^q over rows of X.
/// Rows are processed in tiles of `block` rows; each entry is computed
/// independently so the result does not depend on the thread count.
inline Matrix distance_matrix(int q, const Eigen::Ref<const Matrix>& X,
                              const Eigen::Ref<const Vector>& beta, Eigen::Index block = 64) {
  if (X.cols() != beta.size()) {
    throw DimensionError("distance_matrix: beta length " + std::to_string(beta.size()) +
                         " does not match feature count " + std::to_string(X.cols()));
  }
  if ((beta.array() < 0.0).any()) throw std::invalid_argument("distance_matrix: beta must be >= 0");
  const Eigen::Index n = X.rows();
  block = std::max<Eigen::Index>(1, block);

  std::vector<Eigen::Index> active;
  for (Eigen::Index l = 0; l < beta.size(); ++l) {
    if (beta[l] > 0.0) active.push_back(l);
  }
  // Column-major copy of the active columns keeps the inner loop contiguous.
  Matrix Xa(n, static_cast<Eigen::Index>(active.size()));
  for (std::size_t k = 0; k < active.size(); ++k) Xa.col(static_cast<Eigen::Index>(k)) = X.col(active[k]);

  Matrix D = Matrix::Zero(n, n);
  const Eigen::Index tiles = (n + block - 1) / block;
  parallel_for(tiles, [&](Eigen::Index t) {
    const Eigen::Index j0 = t * block;
    const Eigen::Index j1 = std::min(n, j0 + block);
    for (Eigen::Index j = j0; j < j1; ++j) {
      for (std::size_t k = 0; k < active.size(); ++k) {
        const double b = beta[active[k]];
        const double* col = Xa.col(static_cast<Eigen::Index>(k)).data();
        const double xj = col[j];
        double* dj = D.col(j).data();
        if (q == 1) {
          for (Eigen::Index i = 0; i < j; ++i) dj[i] += b * std::abs(col[i] - xj);
        } else {
          for (Eigen::Index i = 0; i < j; ++i) {
            const double d = col[i] - xj;
            dj[i] += b * d * d;
          }
        }
      }
    }
  });
  D.triangularView<Eigen::StrictlyLower>() = D.transpose();
  return D;
}

/// Applies h entrywise to a distance matrix.
inline Matrix gram_from_distances(const KernelSpec& spec, const Eigen::Ref<const Matrix>& D) {
  Matrix K(D.rows(), D.cols());
  const double h0 = spec.h0();
  for (Eigen::Index j = 0; j < D.cols(); ++j) {
    for (Eigen::Index i = 0; i < j; ++i) K(i, j) = spec.h_unchecked(D(i, j));
    K(j, j) = h0;
  }
  K.triangularView<Eigen::StrictlyLower>() = K.transpose();
  return K;
}

inline Matrix gram_matrix(const KernelSpec& spec, const Eigen::Ref<const Matrix>& X,
                          const Eigen::Ref<const Vector>& beta, Eigen::Index block = 64) {
  return gram_from_distances(spec, distance_matrix(spec.q(), X, beta, block));
}

}  // namespace kfs
