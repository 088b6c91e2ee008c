#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "vasl/error.hpp"

namespace vasl {

inline void check_binary(const std::vector<double>& m, const char* who) {
  for (double v : m)
    if (v != 0.0 && v != 1.0) throw DataError(std::string(who) + ": mask is not binary");
}

/// prob >= threshold -> 1, else 0.
inline std::vector<double> binarize(const std::vector<double>& prob, double threshold = 0.5) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0,1]");
  std::vector<double> out(prob.size());
  for (std::size_t i = 0; i < prob.size(); ++i) out[i] = prob[i] >= threshold ? 1.0 : 0.0;
  return out;
}

struct Confusion {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }

  // Empty prediction and empty ground truth count as a perfect match.
  double iou() const { return tp + fp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp + fn); }
  double accuracy() const { return total() == 0 ? 1.0 : static_cast<double>(tp + tn) / static_cast<double>(total()); }
  double f1() const {
    return tp + fp + fn == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  }

  Confusion& operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
};

inline Confusion confusion(const std::vector<double>& pred, const std::vector<double>& gt) {
  if (pred.size() != gt.size()) throw ShapeError("metrics: prediction and ground truth sizes differ");
  check_binary(pred, "metrics (prediction)");
  check_binary(gt, "metrics (ground truth)");
  Confusion c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] == 1.0, g = gt[i] == 1.0;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

inline double iou(const std::vector<double>& pred, const std::vector<double>& gt) { return confusion(pred, gt).iou(); }
inline double pixel_accuracy(const std::vector<double>& pred, const std::vector<double>& gt) {
  return confusion(pred, gt).accuracy();
}
inline double pixel_f1(const std::vector<double>& pred, const std::vector<double>& gt) { return confusion(pred, gt).f1(); }

/// Mann-Whitney AUC: the probability that a random positive pixel scores
/// above a random negative one, ties counting one half (mid-ranks).
/// Throws when the ground truth holds only one class.
inline double pixel_auc(const std::vector<double>& prob, const std::vector<double>& gt) {
  if (prob.size() != gt.size()) throw ShapeError("pixel_auc: prediction and ground truth sizes differ");
  check_binary(gt, "pixel_auc (ground truth)");
  const std::size_t n = prob.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return prob[a] < prob[b]; });
  double rank_sum = 0.0;  // sum of positive ranks, 1-based
  std::uint64_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && prob[order[j]] == prob[order[i]]) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (gt[order[k]] == 1.0) {
        rank_sum += mid;
        ++pos;
      }
    i = j;
  }
  const std::uint64_t neg = n - pos;
  if (pos == 0 || neg == 0) throw DataError("pixel_auc: ground truth has a single class; AUC is undefined");
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

struct ImageMetrics {
  std::string id;
  Confusion counts;
  double iou = 0, accuracy = 0, f1 = 0;
  std::optional<double> auc;  // empty when the ground truth is single-class
};

inline ImageMetrics evaluate_image(const std::string& id, const std::vector<double>& prob,
                                   const std::vector<double>& gt, double threshold) {
  ImageMetrics m;
  m.id = id;
  m.counts = confusion(binarize(prob, threshold), gt);
  m.iou = m.counts.iou();
  m.accuracy = m.counts.accuracy();
  m.f1 = m.counts.f1();
  try {
    m.auc = pixel_auc(prob, gt);
  } catch (const DataError&) {
    m.auc.reset();
  }
  return m;
}

/// Per-image rows at one threshold plus two readings of the means row:
/// the unweighted per-image average, and metrics of the pooled confusion
/// counts over all pixels.
struct MetricsReport {
  double threshold = 0.5;
  std::vector<ImageMetrics> rows;
  double mean_iou = 0, mean_accuracy = 0, mean_f1 = 0;
  std::optional<double> mean_auc;
  std::size_t auc_excluded = 0;
  Confusion pooled;
  std::optional<double> pooled_auc;
};

inline MetricsReport aggregate(double threshold, std::vector<ImageMetrics> rows, std::optional<double> pooled_auc) {
  MetricsReport r;
  r.threshold = threshold;
  r.rows = std::move(rows);
  r.pooled_auc = pooled_auc;
  double auc_sum = 0.0;
  std::size_t auc_n = 0;
  for (const auto& m : r.rows) {
    r.mean_iou += m.iou;
    r.mean_accuracy += m.accuracy;
    r.mean_f1 += m.f1;
    r.pooled += m.counts;
    if (m.auc) {
      auc_sum += *m.auc;
      ++auc_n;
    } else {
      ++r.auc_excluded;
    }
  }
  if (!r.rows.empty()) {
    const auto n = static_cast<double>(r.rows.size());
    r.mean_iou /= n;
    r.mean_accuracy /= n;
    r.mean_f1 /= n;
  }
  if (auc_n > 0) r.mean_auc = auc_sum / static_cast<double>(auc_n);
  return r;
}

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string("n/a"); }

inline std::string pad_right(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace detail

/// CSV with header id,iou,acc,f1,auc; the last two rows hold the
/// per-image means and the pooled-pixel values.
inline std::string report_csv(const MetricsReport& r) {
  std::string out = "id,iou,acc,f1,auc\n";
  for (const auto& m : r.rows)
    out += m.id + "," + detail::fmt(m.iou) + "," + detail::fmt(m.accuracy) + "," + detail::fmt(m.f1) + "," +
           detail::fmt(m.auc) + "\n";
  out += "mean," + detail::fmt(r.mean_iou) + "," + detail::fmt(r.mean_accuracy) + "," + detail::fmt(r.mean_f1) + "," +
         detail::fmt(r.mean_auc) + "\n";
  out += "pooled," + detail::fmt(r.pooled.iou()) + "," + detail::fmt(r.pooled.accuracy()) + "," +
         detail::fmt(r.pooled.f1()) + "," + detail::fmt(r.pooled_auc) + "\n";
  return out;
}

inline std::string report_text(const MetricsReport& r) {
  std::size_t w = 6;
  for (const auto& m : r.rows) w = std::max(w, m.id.size());
  w += 2;
  auto row = [&](const std::string& id, const std::string& a, const std::string& b, const std::string& c,
                 const std::string& d) {
    return detail::pad_right(id, w) + detail::pad_right(a, 10) + detail::pad_right(b, 10) + detail::pad_right(c, 10) +
           d + "\n";
  };
  std::string out = "threshold " + detail::fmt(r.threshold) + "\n";
  out += row("id", "iou", "acc", "f1", "auc");
  for (const auto& m : r.rows)
    out += row(m.id, detail::fmt(m.iou), detail::fmt(m.accuracy), detail::fmt(m.f1), detail::fmt(m.auc));
  out += row("mean", detail::fmt(r.mean_iou), detail::fmt(r.mean_accuracy), detail::fmt(r.mean_f1),
             detail::fmt(r.mean_auc));
  out += row("pooled", detail::fmt(r.pooled.iou()), detail::fmt(r.pooled.accuracy()), detail::fmt(r.pooled.f1()),
             detail::fmt(r.pooled_auc));
  if (r.auc_excluded > 0)
    out += "note: " + std::to_string(r.auc_excluded) + " image(s) with single-class ground truth excluded from mean auc\n";
  return out;
}

}  // namespace vasl
