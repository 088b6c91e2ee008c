#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vasl/dataset.hpp"
#include "vasl/metrics.hpp"

namespace vasl {

/// Predicted probability map and ground-truth mask for one image, both
/// flattened to [h*w] in [0,1].
struct EvalPair {
  std::string id;
  std::vector<double> prob;
  std::vector<double> gt;
};

/// Reads <id>.mask.pgm from both directories for every id in the ground
/// truth manifest. A prediction may be an 8-bit mask or a 16-bit
/// probability map; either is divided by its maxval.
inline std::vector<EvalPair> load_eval_pairs(const std::filesystem::path& pred_dir,
                                             const std::filesystem::path& gt_dir) {
  std::vector<EvalPair> pairs;
  for (const auto& id : read_manifest(gt_dir)) {
    const auto pred_path = sample_paths(pred_dir, id).mask;
    if (!std::filesystem::exists(pred_path))
      throw DataError("eval: no prediction for id '" + id + "' (expected " + pred_path.string() + ")");
    const Image pred = load_image(pred_path.string());
    const Image gt = load_image(sample_paths(gt_dir, id).mask.string());
    if (pred.channels != 1 || gt.channels != 1) throw DataError("eval: '" + id + "': masks must be single-channel");
    if (pred.width != gt.width || pred.height != gt.height)
      throw DataError("eval: '" + id + "': prediction is " + std::to_string(pred.width) + "x" +
                      std::to_string(pred.height) + ", ground truth is " + std::to_string(gt.width) + "x" +
                      std::to_string(gt.height));
    auto g = gt.planes();
    for (double v : g)
      if (v != 0.0 && v != 1.0) throw DataError("eval: '" + id + "': ground truth mask is not binary");
    pairs.push_back({id, pred.planes(), std::move(g)});
  }
  return pairs;
}

/// Metrics for every pair at one threshold. The pooled AUC ranks all
/// pixels of all images together.
inline MetricsReport evaluate_pairs(const std::vector<EvalPair>& pairs, double threshold) {
  std::vector<ImageMetrics> rows;
  std::vector<double> all_prob, all_gt;
  for (const auto& p : pairs) {
    rows.push_back(evaluate_image(p.id, p.prob, p.gt, threshold));
    all_prob.insert(all_prob.end(), p.prob.begin(), p.prob.end());
    all_gt.insert(all_gt.end(), p.gt.begin(), p.gt.end());
  }
  std::optional<double> pooled_auc;
  try {
    if (!pairs.empty()) pooled_auc = pixel_auc(all_prob, all_gt);
  } catch (const DataError&) {
  }
  return aggregate(threshold, std::move(rows), pooled_auc);
}

inline MetricsReport evaluate_dirs(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                                   double threshold = 0.5) {
  return evaluate_pairs(load_eval_pairs(pred_dir, gt_dir), threshold);
}

/// One report per threshold, in the given order.
inline std::vector<MetricsReport> threshold_sweep(const std::vector<EvalPair>& pairs,
                                                  const std::vector<double>& thresholds) {
  std::vector<MetricsReport> out;
  for (double t : thresholds) out.push_back(evaluate_pairs(pairs, t));
  return out;
}

/// "threshold 0.500000 mean_iou ... pooled_iou ..." for standard output.
inline std::string summary_line(const MetricsReport& r) {
  return "threshold " + detail::fmt(r.threshold) + " images " + std::to_string(r.rows.size()) + " mean_iou " +
         detail::fmt(r.mean_iou) + " mean_acc " + detail::fmt(r.mean_accuracy) + " mean_f1 " + detail::fmt(r.mean_f1) +
         " mean_auc " + detail::fmt(r.mean_auc) + " pooled_iou " + detail::fmt(r.pooled.iou()) + " pooled_f1 " +
         detail::fmt(r.pooled.f1()) + " pooled_auc " + detail::fmt(r.pooled_auc);
}

}  // namespace vasl
