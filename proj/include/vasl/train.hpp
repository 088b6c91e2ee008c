#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "vasl/dataset.hpp"
#include "vasl/loss.hpp"
#include "vasl/metrics.hpp"
#include "vasl/model.hpp"
#include "vasl/optim.hpp"

namespace vasl {

struct EpochLog {
  std::size_t epoch = 0;
  std::size_t steps = 0;      // optimizer steps taken in this epoch
  double lr = 0.0;
  double loss = 0.0;          // mean focal loss over the epoch's batches
  double train_iou = 0.0;     // per-image mean IoU of the training forward passes at 0.5
};

struct FitOptions {
  std::optional<std::size_t> epochs;     // defaults to cfg.epochs
  std::optional<std::size_t> max_steps;  // stop after this many optimizer steps
  std::function<void(const EpochLog&)> on_epoch;
  std::function<void(std::size_t step, double loss)> on_step;
};

struct FitResult {
  std::vector<EpochLog> log;
  std::size_t steps = 0;
};

/// Sample order for one epoch: a Fisher-Yates shuffle from a stream keyed
/// by (seed, epoch).
inline std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, hash_name("shuffle")), epoch);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

namespace detail {

inline double image_iou(std::span<const double> prob, std::span<const double> gt) {
  Confusion c;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const bool p = prob[i] >= 0.5, g = gt[i] == 1.0;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c.iou();
}

}  // namespace detail

/// Minibatch training with focal loss and Adam. The last batch of an epoch
/// may be short. Throws NumericError naming the batch when the loss is not
/// finite; parameters are left as they were before that batch.
inline FitResult fit(SpliceNet& net, const std::vector<Sample>& data, const FitOptions& opt = {}) {
  if (data.empty()) throw DataError("fit: the training set is empty");
  const ModelConfig& cfg = net.config();
  const std::size_t epochs = opt.epochs.value_or(cfg.epochs);
  const AdamOptions adam = AdamOptions::from(cfg);
  net.set_mode(Mode::train);

  FitResult result;
  const std::size_t n = data.size();
  const std::size_t plane = data[0].width() * data[0].height();
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    if (opt.max_steps && result.steps >= *opt.max_steps) break;
    EpochLog log;
    log.epoch = epoch;
    log.lr = lr_at_epoch(epoch, cfg);
    std::size_t images = 0;
    const auto order = epoch_order(cfg.seed, epoch, n);
    for (std::size_t begin = 0, batch = 0; begin < n; begin += cfg.batch_size, ++batch) {
      if (opt.max_steps && result.steps >= *opt.max_steps) break;
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      const Batch b = make_batch(data, std::span(order).subspan(begin, end - begin), cfg.domains);
      const Tensor prob = net.forward(b.inputs);
      const Tensor loss = focal_loss(prob, b.target, cfg.focal_gamma, cfg.focal_alpha);
      const double value = loss.item();
      if (!std::isfinite(value))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                           " (global step " + std::to_string(result.steps) + ")");
      const auto p = prob.data();
      const auto t = b.target.data();
      for (std::size_t i = 0; i < end - begin; ++i)
        log.train_iou += detail::image_iou(p.subspan(i * plane, plane), t.subspan(i * plane, plane));
      images += end - begin;

      backward(loss);
      adam_step(net.params(), log.lr, adam);
      ++result.steps;
      ++log.steps;
      log.loss += value;
      if (opt.on_step) opt.on_step(result.steps, value);
    }
    if (log.steps == 0) break;
    log.loss /= static_cast<double>(log.steps);
    log.train_iou /= static_cast<double>(images);
    result.log.push_back(log);
    if (opt.on_epoch) opt.on_epoch(log);
  }
  return result;
}

/// One line per epoch: "epoch <e> steps <k> lr <lr> loss <loss> train_iou <iou>".
inline std::string format_epoch(const EpochLog& e) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "epoch %zu steps %zu lr %.9g loss %.9g train_iou %.6f", e.epoch, e.steps, e.lr,
                e.loss, e.train_iou);
  return buf;
}

/// Eval-mode probability map [N,1,H,W] without recording a graph.
inline Tensor predict(SpliceNet& net, const DomainInputs& inputs) {
  NoGradGuard guard;
  net.set_mode(Mode::eval);
  return net.forward(inputs);
}

/// Eval-mode metrics of the network on a set of samples, batched by the
/// configured batch size, in sample order.
inline MetricsReport evaluate_samples(SpliceNet& net, const std::vector<Sample>& data, double threshold = 0.5) {
  std::vector<ImageMetrics> rows;
  const std::size_t bs = net.config().batch_size;
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t begin = 0; begin < data.size(); begin += bs) {
    const std::size_t end = std::min(data.size(), begin + bs);
    const Batch b = make_batch(data, std::span(idx).subspan(begin, end - begin), net.config().domains);
    const Tensor prob = predict(net, b.inputs);
    const std::size_t plane = prob.shape().plane();
    const auto p = prob.data();
    const auto t = b.target.data();
    for (std::size_t i = 0; i < end - begin; ++i) {
      const std::vector<double> pi(p.begin() + i * plane, p.begin() + (i + 1) * plane);
      const std::vector<double> ti(t.begin() + i * plane, t.begin() + (i + 1) * plane);
      rows.push_back(evaluate_image(data[begin + i].id, pi, ti, threshold));
    }
  }
  return aggregate(threshold, std::move(rows), std::nullopt);
}

}  // namespace vasl
