#include <cmath>
#include <stdexcept>

#include <gtest/gtest.h>

#include "kfs/kernels.hpp"
#include "oracles.hpp"

using namespace kfs;

TEST(Kernels, LaplaceValues) {
  const auto k = KernelSpec::laplace();
  EXPECT_DOUBLE_EQ(h_eval(k, 0.0), 1.0);
  EXPECT_NEAR(h_eval(k, 1.0), 0.36787944117144233, 1e-15);
  EXPECT_DOUBLE_EQ(h_prime_eval(k, 0.0), -1.0);
  EXPECT_NEAR(h_prime_eval(k, 1.0), -std::exp(-1.0), 1e-15);
  EXPECT_EQ(k.q(), 1);
  EXPECT_EQ(KernelSpec::gaussian().q(), 2);
}

TEST(Kernels, MixtureMatchesTermByTerm) {
  const KernelSpec k(1, {{1.0, 0.5}, {2.0, 0.5}});
  EXPECT_NEAR(h_eval(k, 0.3), 0.5 * std::exp(-0.3) + 0.5 * std::exp(-0.6), 1e-15);
  EXPECT_NEAR(h_prime_eval(k, 0.3), -0.5 * std::exp(-0.3) - 1.0 * std::exp(-0.6), 1e-15);
  EXPECT_EQ(k.describe(), "mixture:1:0.5,2:0.5");
}

TEST(Kernels, RejectsBadInput) {
  EXPECT_THROW(KernelSpec(3, {{1.0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(KernelSpec(1, {}), std::invalid_argument);
  EXPECT_THROW(KernelSpec(1, {{-1.0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(KernelSpec(1, {{1.0, -1.0}}), std::invalid_argument);
  EXPECT_THROW(h_eval(KernelSpec::laplace(), -1e-3), std::domain_error);
  EXPECT_THROW(h_prime_eval(KernelSpec::laplace(), -1.0), std::domain_error);
}

TEST(Kernels, WeightedDistance) {
  EXPECT_DOUBLE_EQ(weighted_dist(1, Vector::Ones(2), Vector::Zero(2), Vector{{1.0, 2.0}}), 3.0);
  EXPECT_DOUBLE_EQ(weighted_dist(2, Vector{{0.5, 2.0}}, Vector{{1.0, 1.0}}, Vector{{0.0, 3.0}}), 8.5);
  EXPECT_DOUBLE_EQ(weighted_dist(1, Vector::Zero(3), Vector{{1.0, -4.0, 9.0}}, Vector{{0.0, 3.0, 2.0}}), 0.0);
  EXPECT_THROW(weighted_dist(1, Vector::Ones(2), Vector::Zero(3), Vector::Zero(2)), DimensionError);
}

TEST(Kernels, GramAtZeroBetaIsConstant) {
  Rng rng(1);
  const Matrix X = oracle::normal_matrix(7, 3, rng);
  const KernelSpec k(1, {{1.0, 0.3}, {4.0, 1.2}});
  const Matrix K = gram_matrix(k, X, Vector::Zero(3));
  EXPECT_TRUE(K.isApprox(Matrix::Constant(7, 7, 1.5), 1e-15));
}

TEST(Kernels, TwoPointLaplaceGram) {
  const Matrix X{{0.0}, {1.0}};
  const Matrix K = gram_matrix(KernelSpec::laplace(), X, Vector::Ones(1));
  EXPECT_DOUBLE_EQ(K(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(K(1, 1), 1.0);
  EXPECT_NEAR(K(0, 1), std::exp(-1.0), 1e-15);
  EXPECT_EQ(K(0, 1), K(1, 0));
}

TEST(Kernels, DistanceMatrixMatchesPairwiseLoopAcrossTiles) {
  Rng rng(2);
  const Matrix X = oracle::normal_matrix(37, 5, rng);
  Vector beta{{0.3, 0.0, 1.7, 0.2, 0.9}};
  for (int q : {1, 2}) {
    for (Eigen::Index block : {1, 4, 64}) {
      const Matrix D = distance_matrix(q, X, beta, block);
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index j = 0; j < X.rows(); ++j) {
          EXPECT_NEAR(D(i, j), weighted_dist(q, beta, X.row(i).transpose(), X.row(j).transpose()), 1e-12);
        }
      }
    }
  }
}

TEST(Kernels, GramIsSymmetricPsd) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix X = oracle::normal_matrix(30, 4, rng);
    Vector beta(4);
    for (auto& v : beta) v = rng.uniform(0.0, 3.0);
    for (const auto& k : {KernelSpec::laplace(), KernelSpec::gaussian(), KernelSpec(1, {{0.5, 1.0}, {3.0, 2.0}})}) {
      const Matrix K = gram_matrix(k, X, beta);
      EXPECT_EQ((K - K.transpose()).cwiseAbs().maxCoeff(), 0.0);
      Eigen::SelfAdjointEigenSolver<Matrix> eig(K);
      EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10 * eig.eigenvalues().maxCoeff());
    }
  }
}

TEST(Kernels, GramRejectsMismatchedBeta) {
  EXPECT_THROW(gram_matrix(KernelSpec::laplace(), Matrix::Zero(3, 2), Vector::Ones(3)), DimensionError);
}
