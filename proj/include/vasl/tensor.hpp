#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "vasl/error.hpp"
#include "vasl/rng.hpp"

namespace vasl {

/// Dimensions of a rank-4 tensor in [batch, channel, height, width] order.
class Shape {
 public:
  Shape() = default;
  Shape(std::size_t n, std::size_t c, std::size_t h, std::size_t w) : dims_{n, c, h, w} {
    std::size_t total = 1;
    for (std::size_t d : dims_) {
      if (d != 0 && total > SIZE_MAX / d) throw ShapeError("tensor element count overflows: " + str());
      total *= d;
    }
    numel_ = total;
  }

  std::size_t operator[](std::size_t axis) const { return dims_[axis]; }
  std::size_t n() const { return dims_[0]; }
  std::size_t c() const { return dims_[1]; }
  std::size_t h() const { return dims_[2]; }
  std::size_t w() const { return dims_[3]; }
  std::size_t plane() const { return dims_[2] * dims_[3]; }
  std::size_t numel() const { return numel_; }
  const std::array<std::size_t, 4>& dims() const { return dims_; }

  std::string str() const {
    return "[" + std::to_string(dims_[0]) + "," + std::to_string(dims_[1]) + "," +
           std::to_string(dims_[2]) + "," + std::to_string(dims_[3]) + "]";
  }

  friend bool operator==(const Shape& a, const Shape& b) { return a.dims_ == b.dims_; }

 private:
  std::array<std::size_t, 4> dims_{0, 0, 0, 0};
  std::size_t numel_ = 0;
};

namespace detail {

inline std::atomic<std::uint64_t>& node_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient arrives
  bool requires_grad = false;
  bool is_leaf = true;
  bool consumed = false;
  std::uint64_t seq = node_counter().fetch_add(1, std::memory_order_relaxed);
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode(); }

// Disables graph recording for the lifetime of the guard.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Records the branch decisions of piecewise ops (relu sign, max argmax,
/// clamp side) into a hash while active. Two forward passes whose hashes
/// agree took the same linear piece everywhere; gradcheck uses this to
/// skip coordinates whose perturbation crosses a kink.
namespace kink {

struct Recorder {
  bool active = false;
  std::uint64_t hash = 0;
};

inline Recorder& recorder() {
  thread_local Recorder r;
  return r;
}

inline bool active() { return recorder().active; }

inline void note(std::uint64_t decision) {
  auto& r = recorder();
  r.hash = mix64(r.hash ^ (decision + 0x632be59bd9b4e019ULL));
}

class Scope {
 public:
  Scope() : saved_(recorder()) { recorder() = Recorder{true, 0}; }
  ~Scope() { recorder() = saved_; }
  Scope(const Scope&) = delete;
  Scope& operator=(const Scope&) = delete;
  std::uint64_t hash() const { return recorder().hash; }

 private:
  Recorder saved_;
};

}  // namespace kink

/// Rank-4 dense double tensor with an optional autodiff node. Copies share
/// storage; values are treated as immutable once an op has consumed them,
/// except for parameter updates made through mutable_data().
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, bool requires_grad = false) : node_(std::make_shared<detail::Node>()) {
    node_->shape = shape;
    node_->value.assign(shape.numel(), 0.0);
    node_->requires_grad = requires_grad;
  }

  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    if (values.size() != shape.numel())
      throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " + shape.str());
    node_->shape = shape;
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) { return Tensor(shape, requires_grad); }

  static Tensor full(Shape shape, double v, bool requires_grad = false) {
    return Tensor(shape, std::vector<double>(shape.numel(), v), requires_grad);
  }

  static Tensor scalar(double v) { return Tensor(Shape(1, 1, 1, 1), std::vector<double>{v}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->shape.numel(); }

  std::span<const double> data() const { return node_->value; }
  std::span<double> mutable_data() { return node_->value; }
  const std::vector<double>& values() const { return node_->value; }

  double item() const {
    if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape().str());
    return node_->value[0];
  }

  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    const Shape& s = shape();
    return node_->value[((n * s.c() + c) * s.h() + h) * s.w() + w];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad_buffer(); }
  void clear_grad() {
    node_->grad.clear();
    node_->grad.shrink_to_fit();
  }

  // Leaf copy of the current values, outside any graph.
  Tensor detach() const { return Tensor(shape(), node_->value, false); }

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  friend Tensor make_result(Shape, std::vector<double>, std::initializer_list<Tensor>);
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

  std::shared_ptr<detail::Node> node_;
};

/// Creates the output node of an op. The node records its inputs only when
/// grad mode is on and at least one input requires a gradient; callers
/// attach a backward rule with set_backward() in that case.
inline Tensor make_result(Shape shape, std::vector<double> value, std::initializer_list<Tensor> inputs) {
  auto node = std::make_shared<detail::Node>();
  node->shape = shape;
  node->value = std::move(value);
  node->is_leaf = false;
  if (grad_enabled()) {
    for (const Tensor& t : inputs) {
      if (t.requires_grad()) {
        node->requires_grad = true;
        break;
      }
    }
    if (node->requires_grad) {
      for (const Tensor& t : inputs) node->inputs.push_back(t.node_ptr());
    }
  }
  return Tensor(std::move(node));
}

template <typename F>
void set_backward(Tensor& out, F&& rule) {
  if (out.requires_grad()) out.node()->backward = std::forward<F>(rule);
}

/// Reverse-mode sweep from a scalar loss. Nodes run in descending creation
/// order, which is a valid reverse topological order because every op's
/// output is created after its inputs. Intermediate graph state is released
/// afterwards; leaf gradients accumulate until cleared.
inline void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw GraphError("backward() needs a scalar loss");
  detail::Node* root = loss.node();
  if (root->consumed) throw GraphError("backward() already ran on this loss; rebuild the graph first");
  if (!root->requires_grad || root->is_leaf) throw GraphError("loss is detached from every parameter");

  std::vector<std::shared_ptr<detail::Node>> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::shared_ptr<detail::Node>> stack{loss.node_ptr()};
  seen.insert(root);
  while (!stack.empty()) {
    auto node = std::move(stack.back());
    stack.pop_back();
    for (const auto& in : node->inputs) {
      if (in->requires_grad && seen.insert(in.get()).second) stack.push_back(in);
    }
    order.push_back(std::move(node));
  }
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a->seq > b->seq; });

  root->grad_buffer()[0] += 1.0;
  for (const auto& node : order) {
    if (node->is_leaf) continue;
    if (node->backward && !node->grad.empty()) node->backward(*node);
    node->backward = nullptr;
    node->inputs.clear();
    if (node.get() != root) {
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
  root->consumed = true;
}

/// Standard-normal tensor from a seeded PCG stream with Box-Muller pairs.
inline Tensor randn(Shape shape, std::uint64_t seed, bool requires_grad = false) {
  Rng rng(seed);
  std::vector<double> v(shape.numel());
  for (double& x : v) x = rng.normal();
  return Tensor(shape, std::move(v), requires_grad);
}

inline Tensor uniform(Shape shape, std::uint64_t seed, double lo, double hi) {
  Rng rng(seed);
  std::vector<double> v(shape.numel());
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(shape, std::move(v));
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace vasl
