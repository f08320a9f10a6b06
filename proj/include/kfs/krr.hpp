#pragma once

// Kernel ridge regression at fixed feature weights, solved in dual form:
//   (K + n*lambda*I) alpha = y,  fitted = K alpha,  residuals = y - fitted,
//   objective = 0.5 * mean(residuals^2) + 0.5 * lambda * alpha' K alpha.

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "kfs/dataset.hpp"
#include "kfs/kernels.hpp"

namespace kfs {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KrrFit {
  Vector alpha;
  Vector fitted;
  Vector residuals;
  double rkhs_norm_sq = 0.0;
  double objective = 0.0;
  double jitter = 0.0;  // diagonal jitter that was needed, 0 if none
};

struct JitterLadder {
  double relative_start = 1e-12;  // times the largest Gram diagonal entry
  double factor = 10.0;
  int max_retries = 4;
};

inline KrrFit solve_krr(const Eigen::Ref<const Matrix>& K, const Eigen::Ref<const Vector>& y, double lambda,
                        double initial_jitter = 0.0, const JitterLadder& ladder = {}) {
  const Eigen::Index n = K.rows();
  if (K.cols() != n || y.size() != n) throw DimensionError("solve_krr: K must be n x n and y of length n");
  if (!(lambda > 0.0)) throw std::invalid_argument("solve_krr: lambda must be > 0");

  const double ridge = static_cast<double>(n) * lambda;
  const double diag_scale = n > 0 ? K.diagonal().cwiseAbs().maxCoeff() : 1.0;
  double jitter = initial_jitter;
  double step = ladder.relative_start * (diag_scale > 0.0 ? diag_scale : 1.0);

  Eigen::LLT<Matrix> llt;
  for (int attempt = 0;; ++attempt) {
    Matrix A = K;
    A.diagonal().array() += ridge + jitter;
    llt.compute(A);
    if (llt.info() == Eigen::Success) break;
    if (attempt >= ladder.max_retries) {
      std::ostringstream msg;
      msg << "krr factorization failed after " << attempt << " jitter retries (n=" << n
          << ", lambda=" << lambda << ", max diag=" << diag_scale << ", min diag=" << K.diagonal().minCoeff()
          << ", last jitter=" << jitter << ")";
      throw SolverError(msg.str());
    }
    jitter = jitter > 0.0 ? jitter * ladder.factor : step;
  }

  KrrFit fit;
  fit.jitter = jitter;
  fit.alpha = llt.solve(y);
  fit.fitted = K * fit.alpha;
  fit.residuals = y - fit.fitted;
  fit.rkhs_norm_sq = std::max(0.0, fit.alpha.dot(fit.fitted));
  fit.objective = 0.5 * fit.residuals.squaredNorm() / static_cast<double>(n) + 0.5 * lambda * fit.rkhs_norm_sq;
  return fit;
}

inline KrrFit krr_fit(const KernelSpec& spec, const Dataset& data, const Eigen::Ref<const Vector>& beta,
                      double lambda) {
  return solve_krr(gram_matrix(spec, data.X, beta), data.y, lambda);
}

/// Empirical KRR objective J_n(beta), without the l1 penalty.
inline double objective_value(const KernelSpec& spec, const Dataset& data, const Eigen::Ref<const Vector>& beta,
                              double lambda) {
  return krr_fit(spec, data, beta, lambda).objective;
}

}  // namespace kfs
