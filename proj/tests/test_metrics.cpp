#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "vasl/evaluation.hpp"
#include "vasl/rng.hpp"

using namespace vasl;

namespace {

// Pairwise enumeration: concordant pairs count 1, ties 1/2.
double auc_by_pairs(const std::vector<double>& prob, const std::vector<double>& gt) {
  double hits = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < prob.size(); ++i)
    for (std::size_t j = 0; j < prob.size(); ++j) {
      if (gt[i] != 1.0 || gt[j] != 0.0) continue;
      ++pairs;
      hits += prob[i] > prob[j] ? 1.0 : prob[i] == prob[j] ? 0.5 : 0.0;
    }
  return hits / static_cast<double>(pairs);
}

std::vector<double> random_mask(Rng& rng, std::size_t n, double p) {
  std::vector<double> m(n);
  for (double& v : m) v = rng.uniform() < p ? 1.0 : 0.0;
  return m;
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "vasl_test_metrics" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_mask(const std::filesystem::path& dir, const std::string& id, const std::vector<double>& m, std::size_t w,
                std::size_t h) {
  save_image(sample_paths(dir, id).mask.string(), mask_image(m, w, h));
}

}  // namespace

TEST(Binarize, ThresholdRule) {
  EXPECT_EQ(binarize({0.5, 0.49, 1.0, 0.0}, 0.5), (std::vector<double>{1, 0, 1, 0}));
  EXPECT_EQ(binarize({0.0, 0.2}, 0.0), (std::vector<double>{1, 1}));
  EXPECT_EQ(binarize({0.0, 0.0}), (std::vector<double>{0, 0}));
  EXPECT_THROW(binarize({0.1}, 1.5), ConfigError);
  EXPECT_THROW(binarize({0.1}, -0.1), ConfigError);
}

TEST(Iou, Examples) {
  EXPECT_EQ(iou({1, 1, 0, 0}, {1, 1, 0, 0}), 1.0);
  EXPECT_EQ(iou({1, 0, 0, 0}, {0, 1, 0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(iou({1, 1, 0}, {0, 1, 1}), 1.0 / 3.0);
  EXPECT_EQ(iou({0, 0}, {0, 0}), 1.0);
  EXPECT_THROW(iou({0.5, 0}, {0, 0}), DataError);
  EXPECT_THROW(iou({0, 0, 0}, {0, 0}), ShapeError);
}

TEST(PixelAccuracy, Examples) {
  EXPECT_EQ(pixel_accuracy({1, 0, 1}, {1, 0, 1}), 1.0);
  EXPECT_EQ(pixel_accuracy({1, 0, 1}, {0, 1, 0}), 0.0);
  EXPECT_EQ(pixel_accuracy({1, 0, 1, 1}, {1, 0, 1, 0}), 0.75);
}

TEST(PixelF1, Examples) {
  EXPECT_EQ(pixel_f1({1, 1, 0}, {1, 1, 0}), 1.0);
  EXPECT_EQ(pixel_f1({0, 0, 0}, {1, 1, 0}), 0.0);
  EXPECT_EQ(pixel_f1({0, 0}, {0, 0}), 1.0);
  // tp 2, fp 1, fn 1
  EXPECT_NEAR(pixel_f1({1, 1, 1, 0, 0}, {1, 1, 0, 1, 0}), 2.0 / 3.0, 1e-15);
}

TEST(PixelAuc, Examples) {
  EXPECT_EQ(pixel_auc({0.9, 0.4, 0.8, 0.3}, {1, 1, 0, 0}), 0.75);
  EXPECT_EQ(pixel_auc({0.9, 0.7, 0.2, 0.1}, {1, 1, 0, 0}), 1.0);
  EXPECT_EQ(pixel_auc({0.3, 0.3, 0.3, 0.3}, {1, 0, 1, 0}), 0.5);
  EXPECT_THROW(pixel_auc({0.3, 0.4}, {1, 1}), DataError);
  EXPECT_THROW(pixel_auc({0.3, 0.4}, {0, 0}), DataError);
}

TEST(Oracles, ConfusionMetricsMatchEnumeration) {
  Rng rng(91);
  for (int trial = 0; trial < 1000; ++trial) {
    const double p = 0.05 + 0.9 * rng.uniform();
    const auto pred = random_mask(rng, 64, p), gt = random_mask(rng, 64, 0.3);
    std::size_t inter = 0, uni = 0, agree = 0, tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < 64; ++i) {
      inter += pred[i] == 1.0 && gt[i] == 1.0;
      uni += pred[i] == 1.0 || gt[i] == 1.0;
      agree += pred[i] == gt[i];
      tp += pred[i] == 1.0 && gt[i] == 1.0;
      fp += pred[i] == 1.0 && gt[i] == 0.0;
      fn += pred[i] == 0.0 && gt[i] == 1.0;
    }
    const double i_ref = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    const double f_ref = tp + fp + fn == 0 ? 1.0 : 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
    const double io = iou(pred, gt), f1 = pixel_f1(pred, gt);
    ASSERT_EQ(io, i_ref);
    ASSERT_EQ(pixel_accuracy(pred, gt), static_cast<double>(agree) / 64.0);
    ASSERT_EQ(f1, f_ref);
    ASSERT_NEAR(f1, 2.0 * io / (1.0 + io), 1e-15);
    ASSERT_GE(f1, io);
  }
}

TEST(Oracles, AucMatchesPairEnumeration) {
  Rng rng(92);
  for (int trial = 0; trial < 1000; ++trial) {
    auto gt = random_mask(rng, 64, 0.3);
    gt[0] = 1.0;
    gt[1] = 0.0;
    std::vector<double> prob(64);
    // Coarse scores force plenty of ties.
    for (double& v : prob) v = std::floor(rng.uniform() * 10.0) / 10.0;
    ASSERT_NEAR(pixel_auc(prob, gt), auc_by_pairs(prob, gt), 1e-12);
  }
}

TEST(Oracles, AucInvariantUnderMonotoneTransform) {
  Rng rng(93);
  for (int trial = 0; trial < 100; ++trial) {
    auto gt = random_mask(rng, 64, 0.4);
    gt[0] = 1.0;
    gt[1] = 0.0;
    std::vector<double> prob(64), warped(64), flipped(64);
    for (std::size_t i = 0; i < 64; ++i) {
      prob[i] = rng.uniform();
      warped[i] = std::exp(3.0 * prob[i]) - 7.0;
      flipped[i] = 1.0 - prob[i];
    }
    const double a = pixel_auc(prob, gt);
    EXPECT_NEAR(pixel_auc(warped, gt), a, 1e-15);
    EXPECT_NEAR(a + pixel_auc(flipped, gt), 1.0, 1e-12);
  }
}

TEST(Report, MeansAndExcludedAuc) {
  std::vector<ImageMetrics> rows{evaluate_image("a", {0.9, 0.1, 0.8, 0.2}, {1, 0, 0, 0}, 0.5),
                                 evaluate_image("b", {0.1, 0.1, 0.1, 0.1}, {0, 0, 0, 0}, 0.5)};
  const MetricsReport r = aggregate(0.5, rows, std::nullopt);
  EXPECT_DOUBLE_EQ(r.mean_iou, (0.5 + 1.0) / 2);
  EXPECT_DOUBLE_EQ(r.mean_accuracy, (0.75 + 1.0) / 2);
  EXPECT_EQ(r.auc_excluded, 1u);
  ASSERT_TRUE(r.mean_auc);
  EXPECT_EQ(*r.mean_auc, 1.0);
  EXPECT_EQ(r.pooled.tp, 1u);
  EXPECT_EQ(r.pooled.fp, 1u);
  EXPECT_EQ(r.pooled.tn, 6u);
  const std::string csv = report_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "id,iou,acc,f1,auc");
  EXPECT_NE(csv.find("b,1.000000,1.000000,1.000000,n/a\n"), std::string::npos);
  EXPECT_NE(report_text(r).find("1 image(s) with single-class ground truth"), std::string::npos);
}

TEST(EvaluateDirs, SelfComparisonIsPerfect) {
  const auto dir = fresh_dir("self");
  write_mask(dir, "x", {1, 0, 0, 1}, 2, 2);
  write_mask(dir, "y", {0, 0, 1, 1}, 2, 2);
  write_manifest(dir, {"x", "y"});
  const MetricsReport r = evaluate_dirs(dir, dir);
  EXPECT_EQ(r.mean_iou, 1.0);
  EXPECT_EQ(r.mean_accuracy, 1.0);
  EXPECT_EQ(r.mean_f1, 1.0);
  EXPECT_EQ(r.rows[0].id, "x");
}

// Hand arithmetic: image p has tp 1 fp 1 fn 1 tn 1 (IoU 1/3, acc 1/2,
// F1 1/2); image q has tp 2 fp 0 fn 0 tn 2 (all 1). Pooled: tp 3 fp 1 fn 1.
TEST(EvaluateDirs, TwoImageToySet) {
  const auto gt = fresh_dir("toy_gt"), pred = fresh_dir("toy_pred");
  write_mask(gt, "p", {1, 1, 0, 0}, 2, 2);
  write_mask(gt, "q", {1, 1, 0, 0}, 2, 2);
  write_manifest(gt, {"p", "q"});
  write_mask(pred, "p", {1, 0, 1, 0}, 2, 2);
  write_mask(pred, "q", {1, 1, 0, 0}, 2, 2);
  const MetricsReport r = evaluate_dirs(pred, gt);
  EXPECT_DOUBLE_EQ(r.mean_iou, (1.0 / 3.0 + 1.0) / 2.0);
  EXPECT_DOUBLE_EQ(r.mean_accuracy, 0.75);
  EXPECT_DOUBLE_EQ(r.mean_f1, 0.75);
  EXPECT_DOUBLE_EQ(r.pooled.iou(), 3.0 / 5.0);
  EXPECT_DOUBLE_EQ(r.pooled.f1(), 6.0 / 8.0);
  EXPECT_EQ(r.rows[0].counts.tp, 1u);
  EXPECT_EQ(r.rows[0].counts.tn, 1u);
}

TEST(EvaluateDirs, ProbabilityMapsAreThresholded) {
  const auto gt = fresh_dir("prob_gt"), pred = fresh_dir("prob_pred");
  write_mask(gt, "p", {1, 1, 0, 0}, 2, 2);
  write_manifest(gt, {"p"});
  save_image(sample_paths(pred, "p").mask.string(), probability_image({0.7, 0.4, 0.3, 0.1}, 2, 2));
  const auto pairs = load_eval_pairs(pred, gt);
  const auto sweep = threshold_sweep(pairs, {0.35, 0.5});
  EXPECT_EQ(sweep[0].mean_iou, 1.0);
  EXPECT_EQ(sweep[1].mean_iou, 0.5);
  EXPECT_EQ(*sweep[0].mean_auc, 1.0);
  EXPECT_EQ(*sweep[0].pooled_auc, 1.0);
}

TEST(EvaluateDirs, MissingPredictionNamesTheId) {
  const auto gt = fresh_dir("miss_gt"), pred = fresh_dir("miss_pred");
  write_mask(gt, "p", {1, 1, 0, 0}, 2, 2);
  write_mask(gt, "lost", {1, 1, 0, 0}, 2, 2);
  write_manifest(gt, {"p", "lost"});
  write_mask(pred, "p", {1, 1, 0, 0}, 2, 2);
  try {
    evaluate_dirs(pred, gt);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("'lost'"), std::string::npos) << e.what();
  }
}

TEST(EvaluateDirs, DimensionMismatchRejected) {
  const auto gt = fresh_dir("dim_gt"), pred = fresh_dir("dim_pred");
  write_mask(gt, "p", {1, 1, 0, 0}, 2, 2);
  write_manifest(gt, {"p"});
  write_mask(pred, "p", {1, 1, 0, 0, 1, 1}, 3, 2);
  EXPECT_THROW(evaluate_dirs(pred, gt), DataError);
}
