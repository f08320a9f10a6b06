#pragma once

// Euclidean projection onto the nonnegative l1 ball {beta >= 0, sum beta <= M}.
// The projection is (v - theta)_+ with theta = inf{theta >= 0 : sum (v - theta)_+ <= M},
// found by sorting and scanning for the water level.

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace kfs {

/// Nonnegative feature weights with an l1 budget.
class Beta {
 public:
  static constexpr double kBudgetSlack = 1e-12;

  Beta(Eigen::VectorXd values, double budget) : values_(std::move(values)), budget_(budget) {
    if (!(budget_ > 0.0)) throw std::invalid_argument("beta budget M must be > 0");
    if ((values_.array() < 0.0).any()) throw std::invalid_argument("beta entries must be >= 0");
    if (values_.sum() > budget_ + kBudgetSlack * std::max(1.0, budget_)) {
      throw std::invalid_argument("beta exceeds its l1 budget");
    }
  }

  static Beta zeros(Eigen::Index p, double budget) { return Beta(Eigen::VectorXd::Zero(p), budget); }

  const Eigen::VectorXd& values() const { return values_; }
  double budget() const { return budget_; }
  Eigen::Index size() const { return values_.size(); }
  double operator[](Eigen::Index i) const { return values_[i]; }
  double l1() const { return values_.sum(); }

 private:
  Eigen::VectorXd values_;
  double budget_;
};

/// Water level theta >= 0 such that (v - theta)_+ is the projection of v.
inline double l1_ball_threshold(const Eigen::Ref<const Eigen::VectorXd>& v, double M) {
  if (!(M > 0.0)) throw std::invalid_argument("l1 projection radius must be > 0");
  std::vector<double> pos;
  pos.reserve(static_cast<std::size_t>(v.size()));
  double total = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] > 0.0) {
      pos.push_back(v[i]);
      total += v[i];
    }
  }
  if (total <= M) return 0.0;

  std::sort(pos.begin(), pos.end(), std::greater<>());
  double prefix = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < pos.size(); ++k) {
    prefix += pos[k];
    const double candidate = (prefix - M) / static_cast<double>(k + 1);
    if (pos[k] - candidate > 0.0) {
      theta = candidate;
    } else {
      break;
    }
  }
  return std::max(0.0, theta);
}

inline Beta project_l1_nonneg(const Eigen::Ref<const Eigen::VectorXd>& v, double M) {
  const double theta = l1_ball_threshold(v, M);
  Eigen::VectorXd out = (v.array() - theta).max(0.0).matrix();
  // Guard the budget against roundoff in the prefix sums.
  const double s = out.sum();
  if (s > M) out *= M / s;
  return Beta(std::move(out), M);
}

}  // namespace kfs
