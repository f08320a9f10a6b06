#include <gtest/gtest.h>

#include "kfs/experiments.hpp"

using namespace kfs;

namespace {

ExperimentConfig tiny(std::vector<double> grid) {
  ExperimentConfig cfg;
  cfg.n = 40;
  cfg.lambda = 0.05;
  cfg.trials = 2;
  cfg.seed = 3;
  cfg.gamma_grid = std::move(grid);
  cfg.selection.max_iters = 60;
  cfg.selection.tol = 1e-5;
  cfg.selection.max_rounds = 2;
  return cfg;
}

}  // namespace

TEST(Experiments, RocIsDeterministicAndShaped) {
  const auto model = ModelSpec::main_effect(8, 1.0);
  const std::vector<KernelSpec> kernels{KernelSpec::laplace(), KernelSpec::gaussian()};
  const auto a = run_roc(model, kernels, tiny({0.0, 0.05}));
  const auto b = run_roc(model, kernels, tiny({0.0, 0.05}));
  ASSERT_EQ(a.points.size(), 4u);
  EXPECT_EQ(roc_csv(a.points), roc_csv(b.points));
  EXPECT_EQ(a.points[0].kernel, "laplace");
  EXPECT_EQ(a.points[2].kernel, "gaussian");
  EXPECT_EQ(a.points[2].q, 2);
  for (const auto& pt : a.points) {
    EXPECT_EQ(pt.trials + pt.failures, 2);
    EXPECT_GE(pt.fpr, 0.0);
    EXPECT_LE(pt.fpr, 1.0);
    EXPECT_EQ(pt.tpr_per_signal.size(), 2u);
  }
}

TEST(Experiments, PenaltyAboveBoundGivesEmptyPoint) {
  // With sigma2 = 0 every dataset is bounded, so a penalty far above the
  // gradient bound removes every coordinate.
  const auto model = ModelSpec::main_effect(6, 0.0);
  const auto report = run_roc(model, {KernelSpec::laplace()}, tiny({1e6}));
  const auto& pt = report.points.front();
  EXPECT_EQ(pt.fpr, 0.0);
  for (const auto& [s, v] : pt.tpr_per_signal) EXPECT_EQ(v, 0.0);
  const auto hier = run_hier_experiment(6, 0.0, tiny({1e6}));
  EXPECT_EQ(hier.points.front().fpr, 0.0);
  for (const auto& [s, v] : hier.points.front().tpr_per_signal) EXPECT_EQ(v, 0.0);
}

TEST(Experiments, HierRecordsRounds) {
  const auto report = run_hier_experiment(6, 0.5, tiny({0.01}));
  ASSERT_EQ(report.records.size(), 2u);
  for (const auto& rec : report.records) {
    EXPECT_FALSE(rec.failed);
    EXPECT_FALSE(rec.rounds.empty());
    EXPECT_LE(rec.rounds.size(), 2u);
  }
  EXPECT_EQ(report.points.front().tpr_per_signal.size(), 3u);
}

TEST(Experiments, CsvLayout) {
  RocPoint pt;
  pt.kernel = "laplace";
  pt.q = 1;
  pt.gamma = 0.5;
  pt.fpr = 0.25;
  pt.trials = 4;
  pt.tpr_per_signal = {{0, 1.0}, {1, 0.75}};
  EXPECT_EQ(roc_csv({pt}), "kernel,q,gamma,fpr,tpr_1,tpr_2,trials\nlaplace,1,0.5,0.25,1,0.75,4\n");
  EXPECT_EQ(trend_csv({TrendPoint{100, 0.5, 3}}), "n,sup_dev,seeds\n100,0.5,3\n");
}

TEST(Experiments, SameDataAsReferenceHasZeroDeviation) {
  const auto model = ModelSpec::main_effect(4, 1.0);
  const Dataset data = generate(model, 60, trend_dataset_seed(1, 0));
  const auto betas = trend_betas(4, 3, 1);
  const GradientEngine engine(KernelSpec::laplace(), data, 0.1);
  std::vector<Vector> ref;
  for (const auto& b : betas) ref.push_back(engine.gradient(b).grad);
  EXPECT_EQ(gradient_sup_deviation(KernelSpec::laplace(), data, 0.1, betas, ref), 0.0);
}

TEST(Experiments, TrendShrinksWithN) {
  TrendConfig cfg;
  cfg.n_list = {50, 200};
  cfg.n_ref = 800;
  cfg.seeds = 3;
  cfg.betas = 2;
  const auto pts = run_concentration_trend(ModelSpec::main_effect(4, 1.0), KernelSpec::laplace(), cfg);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_EQ(pts[0].n, 50);
  EXPECT_LT(pts[1].sup_dev, pts[0].sup_dev);
  cfg.n_ref = 100;
  EXPECT_THROW(run_concentration_trend(ModelSpec::main_effect(4, 1.0), KernelSpec::laplace(), cfg),
               std::invalid_argument);
}

TEST(Experiments, RejectsEmptyGrid) {
  EXPECT_THROW(run_roc(ModelSpec::main_effect(4, 1.0), {KernelSpec::laplace()}, tiny({})), std::invalid_argument);
}
