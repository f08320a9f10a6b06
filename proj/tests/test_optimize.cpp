#include <gtest/gtest.h>

#include "kfs/optimize.hpp"
#include "kfs/signals.hpp"
#include "oracles.hpp"

using namespace kfs;

namespace {

SelectionConfig quick(double lambda, double gamma) {
  SelectionConfig c;
  c.lambda = lambda;
  c.gamma = gamma;
  c.max_iters = 200;
  c.tol = 1e-6;
  return c;
}

Dataset noise_only(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  Rng rng(seed);
  return Dataset(oracle::normal_matrix(n, p, rng), Vector::Zero(n));
}

}  // namespace

TEST(Optimize, ZeroSignalStaysAtZero) {
  const Dataset data = noise_only(30, 5, 40);
  const auto res = pgd_select(KernelSpec::laplace(), data, quick(0.1, 0.0), Beta::zeros(5, 10.0));
  EXPECT_EQ(res.beta_final.values().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE(res.support.empty());
  EXPECT_TRUE(res.converged);
}

TEST(Optimize, PenaltyAboveGradientBoundKillsEverything) {
  const Dataset data = generate(ModelSpec::main_effect(6, 1.0), 40, 41);
  for (const auto& spec : {KernelSpec::laplace(), KernelSpec::gaussian()}) {
    const double gamma = 1.01 * gradient_sup_bound(spec, data, 0.05);
    const auto res = pgd_select(spec, data, quick(0.05, gamma), Beta::zeros(6, 10.0));
    EXPECT_TRUE(res.support.empty());
    for (bool b : res.ever_nonzero) EXPECT_FALSE(b);
  }
}

TEST(Optimize, FindsMainEffectsOnSmallProblem) {
  const Dataset data = generate(ModelSpec::main_effect(6, 0.25), 120, 42);
  SelectionConfig c = quick(0.05, 0.02);
  c.max_iters = 400;
  const auto res = pgd_select(KernelSpec::laplace(), data, c, Beta::zeros(6, 10.0));
  EXPECT_TRUE(std::binary_search(res.support.begin(), res.support.end(), Eigen::Index{0}));
  EXPECT_TRUE(std::binary_search(res.support.begin(), res.support.end(), Eigen::Index{1}));
}

TEST(Optimize, ObjectiveHistoryIsMonotone) {
  Rng rng(43);
  for (int k = 0; k < 6; ++k) {
    const Dataset data = generate(ModelSpec::main_effect(5, 1.0), 50, rng.next());
    const auto res = pgd_select(k % 2 ? KernelSpec::gaussian() : KernelSpec::laplace(), data, quick(0.05, 0.01),
                                Beta::zeros(5, 5.0));
    for (std::size_t i = 1; i < res.objective_history.size(); ++i) {
      EXPECT_LE(res.objective_history[i], res.objective_history[i - 1] + 1e-12);
    }
    EXPECT_EQ(res.objective_history.size(), static_cast<std::size_t>(res.iterations) + 1);
    EXPECT_LE(res.beta_final.l1(), 5.0 * (1.0 + 1e-12));
  }
}

TEST(Optimize, ManualStepIsUsedAndObserverSeesEveryStep) {
  const Dataset data = generate(ModelSpec::main_effect(4, 1.0), 40, 44);
  SelectionConfig c = quick(0.1, 0.0);
  c.stepsize = 1e-3;
  c.max_iters = 15;
  int calls = 0;
  const auto res = pgd_select(KernelSpec::laplace(), data, c, Beta::zeros(4, 10.0), [&](const StepTrace& t) {
    EXPECT_EQ(t.iteration, calls);
    ++calls;
  });
  EXPECT_DOUBLE_EQ(res.stepsize, 1e-3);
  EXPECT_EQ(calls, res.iterations);
  EXPECT_EQ(res.iterate_sup_changes.size(), static_cast<std::size_t>(res.iterations));
}

TEST(Optimize, AutoStepReportsLipschitzEstimate) {
  const Dataset data = generate(ModelSpec::main_effect(4, 1.0), 40, 45);
  const auto res = pgd_select(KernelSpec::laplace(), data, quick(0.1, 0.0), Beta::zeros(4, 10.0));
  EXPECT_GT(res.lipschitz_constant, 0.0);
  EXPECT_NEAR(res.stepsize, 0.1 * 0.1 / (res.lipschitz_constant * 4.0), 1e-12 * res.stepsize);
}

TEST(Optimize, Deterministic) {
  const Dataset data = generate(ModelSpec::main_effect(5, 1.0), 40, 46);
  const auto a = pgd_select(KernelSpec::laplace(), data, quick(0.05, 0.01), Beta::zeros(5, 10.0));
  const auto b = pgd_select(KernelSpec::laplace(), data, quick(0.05, 0.01), Beta::zeros(5, 10.0));
  EXPECT_EQ(a.beta_final.values(), b.beta_final.values());
  EXPECT_EQ(a.objective_history, b.objective_history);
}

TEST(Optimize, AllPinnedReturnsTauImmediately) {
  const Dataset data = generate(ModelSpec::main_effect(3, 1.0), 20, 47);
  SelectionConfig c = quick(0.1, 0.0);
  c.tau = 0.7;
  const auto res = pgd_select_pinned(KernelSpec::laplace(), data, c, {0, 1, 2});
  EXPECT_TRUE(res.beta_final.values().isApprox(Vector::Constant(3, 0.7)));
  EXPECT_EQ(res.support, (IndexSet{0, 1, 2}));
  EXPECT_EQ(res.iterations, 0);
}

TEST(Optimize, EmptyPinSetMatchesPlainPgdBitForBit) {
  const Dataset data = generate(ModelSpec::main_effect(5, 1.0), 40, 48);
  const auto plain = pgd_select(KernelSpec::gaussian(), data, quick(0.05, 0.01), Beta::zeros(5, 10.0));
  const auto pinned = pgd_select_pinned(KernelSpec::gaussian(), data, quick(0.05, 0.01), {});
  EXPECT_EQ(plain.beta_final.values(), pinned.beta_final.values());
  EXPECT_EQ(plain.objective_history, pinned.objective_history);
  EXPECT_EQ(plain.support, pinned.support);
}

TEST(Optimize, PinnedCoordinatesStayAtTau) {
  const Dataset data = generate(ModelSpec::hierarchical(5, 0.5), 60, 49);
  SelectionConfig c = quick(0.05, 0.01);
  c.M = 2.0;
  const auto res = pgd_select_pinned(KernelSpec::laplace(), data, c, {0});
  EXPECT_EQ(res.beta_final[0], 1.0);
  double free_mass = 0.0;
  for (Eigen::Index l = 1; l < 5; ++l) free_mass += res.beta_final[l];
  EXPECT_LE(free_mass, 2.0 * (1.0 + 1e-12));
  EXPECT_THROW(pgd_select_pinned(KernelSpec::laplace(), data, c, {7}), std::out_of_range);
}

TEST(Optimize, HierNoSignalStopsAfterOneRound) {
  const Dataset data = noise_only(25, 4, 50);
  const auto res = hier_select(KernelSpec::laplace(), data, quick(0.1, 0.0));
  ASSERT_EQ(res.rounds.size(), 1u);
  EXPECT_TRUE(res.support.empty());
  EXPECT_TRUE(res.rounds[0].pinned.empty());
}

TEST(Optimize, HierSupportGrowsMonotonically) {
  const Dataset data = generate(ModelSpec::hierarchical(6, 0.25), 100, 51);
  SelectionConfig c = quick(0.05, 0.02);
  c.max_rounds = 3;
  const auto res = hier_select(KernelSpec::laplace(), data, c);
  ASSERT_FALSE(res.rounds.empty());
  EXPECT_LE(res.rounds.size(), 3u);
  for (std::size_t r = 1; r < res.rounds.size(); ++r) {
    const auto& prev = res.rounds[r - 1];
    IndexSet expected = prev.pinned;
    expected.insert(expected.end(), prev.support.begin(), prev.support.end());
    std::sort(expected.begin(), expected.end());
    expected.erase(std::unique(expected.begin(), expected.end()), expected.end());
    EXPECT_EQ(res.rounds[r].pinned, expected);
  }
  int total = 0;
  for (const auto& r : res.rounds) total += r.iterations;
  EXPECT_EQ(res.iterations, total);
}

TEST(Optimize, ConfigValidation) {
  const Dataset data = noise_only(10, 2, 52);
  SelectionConfig c;
  c.lambda = 0.0;
  EXPECT_THROW(pgd_select(KernelSpec::laplace(), data, c, Beta::zeros(2, 10.0)), std::invalid_argument);
  c = SelectionConfig{};
  c.gamma = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = SelectionConfig{};
  c.M = 1.0;
  EXPECT_THROW(pgd_select(KernelSpec::laplace(), data, c, Beta(Vector{{1.0, 1.0}}, 2.0)), std::invalid_argument);
  EXPECT_THROW(pgd_select(KernelSpec::laplace(), data, SelectionConfig{}, Beta::zeros(3, 10.0)), DimensionError);
}

TEST(Optimize, SupportThreshold) {
  EXPECT_EQ(support_of(Vector{{0.0, 1e-9, 0.5, 2e-8}}, 1e-8), (IndexSet{2, 3}));
}
