#include <cmath>

#include <gtest/gtest.h>

#include "kfs/krr.hpp"
#include "kfs/signals.hpp"
#include "oracles.hpp"

using namespace kfs;

TEST(Krr, OneByOneClosedForm) {
  const auto fit = solve_krr(Matrix::Ones(1, 1), Vector::Constant(1, 3.0), 0.5);
  EXPECT_NEAR(fit.alpha[0], 2.0, 1e-14);
  EXPECT_NEAR(fit.fitted[0], 2.0, 1e-14);
  EXPECT_NEAR(fit.residuals[0], 1.0, 1e-14);
  EXPECT_EQ(fit.jitter, 0.0);
}

TEST(Krr, HugeRidgeReturnsResponse) {
  Rng rng(4);
  const Matrix X = oracle::normal_matrix(25, 3, rng);
  const Vector y = oracle::normal_vector(25, rng);
  const auto fit = solve_krr(gram_matrix(KernelSpec::laplace(), X, Vector::Ones(3)), y, 1e6);
  EXPECT_LE(fit.fitted.norm(), 1e-4 * y.norm());
  EXPECT_LE((fit.residuals - y).norm(), 1e-4 * y.norm());
}

TEST(Krr, ZeroResponse) {
  Rng rng(5);
  const Matrix X = oracle::normal_matrix(10, 2, rng);
  const Dataset data(X, Vector::Zero(10));
  const auto fit = krr_fit(KernelSpec::gaussian(), data, Vector::Ones(2), 0.1);
  EXPECT_EQ(fit.alpha.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(fit.objective, 0.0);
}

TEST(Krr, ConstantKernelClosedForm) {
  // beta = 0 gives K = h(0) 11^T; with uncentered y the fit is the shrunk
  // mean c = h0 ybar / (h0 + lambda).
  Rng rng(6);
  const Eigen::Index n = 15;
  Vector y = oracle::normal_vector(n, rng).array() + 2.0;
  const Dataset data(oracle::normal_matrix(n, 3, rng), y, false);
  const KernelSpec k(1, {{1.0, 0.7}, {2.0, 0.8}});
  const double h0 = 1.5, lambda = 0.3, ybar = y.mean();
  const double c = h0 * ybar / (h0 + lambda);
  const double expected = 0.5 * (y.array() - c).square().mean() + 0.5 * lambda * h0 * ybar * ybar /
                                                                         ((h0 + lambda) * (h0 + lambda));
  EXPECT_NEAR(objective_value(k, data, Vector::Zero(3), lambda), expected, 1e-13);
}

TEST(Krr, MatchesDenseInverseAndResidualBound) {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.uniform() * 40);
    const Matrix X = oracle::normal_matrix(n, 3, rng);
    const Vector y = oracle::normal_vector(n, rng);
    const double lambda = std::pow(10.0, rng.uniform(-3.0, 0.0));
    const Matrix K = gram_matrix(trial % 2 ? KernelSpec::gaussian() : KernelSpec::laplace(), X, Vector::Ones(3));
    const auto fit = solve_krr(K, y, lambda);
    const Vector ref = oracle::dense_inverse_alpha(K, y, lambda);
    EXPECT_LE((fit.alpha - ref).norm(), 1e-8 * ref.norm());
    EXPECT_LE(fit.residuals.norm(), y.norm() * (1.0 + 1e-10));
    // residuals = n lambda alpha
    EXPECT_LE((fit.residuals - static_cast<double>(n) * lambda * fit.alpha).norm(), 1e-9 * y.norm());
  }
}

TEST(Krr, ObjectiveIsContinuousInBeta) {
  const Dataset data = generate(ModelSpec::main_effect(4, 1.0), 30, 8);
  Rng rng(9);
  for (int k = 0; k < 5; ++k) {
    Vector beta(4);
    for (auto& v : beta) v = rng.uniform(0.1, 1.0);
    const double base = objective_value(KernelSpec::laplace(), data, beta, 0.1);
    double prev = 1e300;
    for (double delta : {1e-2, 1e-4, 1e-6, 1e-8}) {
      Vector b = beta;
      b[k % 4] += delta;
      const double gap = std::abs(objective_value(KernelSpec::laplace(), data, b, 0.1) - base);
      EXPECT_LE(gap, prev + 1e-15);
      prev = gap;
    }
    EXPECT_LE(prev, 1e-7);
  }
}

TEST(Krr, RejectsBadInput) {
  EXPECT_THROW(solve_krr(Matrix::Identity(3, 3), Vector::Zero(3), 0.0), std::invalid_argument);
  EXPECT_THROW(solve_krr(Matrix::Identity(3, 3), Vector::Zero(2), 1.0), DimensionError);
}

TEST(Krr, JitterRescuesIndefiniteMatrixOrReportsDiagnostics) {
  // A slightly indefinite "Gram" that the ridge alone cannot fix.
  Matrix K{{1.0, 2.0}, {2.0, 1.0}};
  EXPECT_THROW(
      {
        try {
          solve_krr(K, Vector::Ones(2), 1e-3);
        } catch (const SolverError& e) {
          EXPECT_NE(std::string(e.what()).find("jitter"), std::string::npos);
          throw;
        }
      },
      SolverError);
  // Within reach of the ladder: min eigenvalue -1e-13 against a ridge of ~0.
  Matrix near{{1.0, 1.0 + 1e-13}, {1.0 + 1e-13, 1.0}};
  const auto fit = solve_krr(near, Vector{{1.0, -1.0}}, 1e-300);
  EXPECT_GT(fit.jitter, 0.0);
  EXPECT_TRUE(fit.alpha.allFinite());
}

TEST(Dataset, CentersAndValidates) {
  const Dataset d(Matrix::Ones(3, 1), Vector{{1.0, 2.0, 6.0}});
  EXPECT_DOUBLE_EQ(d.y_mean, 3.0);
  EXPECT_NEAR(d.y.sum(), 0.0, 1e-15);
  EXPECT_THROW(Dataset(Matrix::Ones(3, 1), Vector::Ones(2)), std::invalid_argument);
  Matrix bad = Matrix::Ones(2, 2);
  bad(1, 1) = std::nan("");
  EXPECT_THROW(Dataset(bad, Vector::Ones(2)), std::invalid_argument);
}
