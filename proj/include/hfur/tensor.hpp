#pragma once

// Dense 64-bit float tensors with reverse-mode gradients over a flat tape.
// Tensors are immutable after creation except for grad buffers; one tape per
// forward pass, freed by backward(). Single-threaded per network instance.

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hfur/errors.hpp"

namespace hfur {

using Shape = std::vector<std::int64_t>;

namespace detail {

inline std::int64_t numel_of(const Shape& s) {
  std::int64_t n = 1;
  for (auto e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // lazily allocated, same length as data
};

using ImplPtr = std::shared_ptr<TensorImpl>;

inline std::vector<double>& grad_of(const ImplPtr& t) {
  if (t->grad.size() != t->data.size()) t->grad.assign(t->data.size(), 0.0);
  return t->grad;
}

// Flat record of adjoint-propagation closures, executed in reverse.
struct Tape {
  std::vector<std::function<void()>> nodes;
};

inline Tape& tape() {
  thread_local Tape t;
  return t;
}

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

inline void record(std::function<void()> fn) { tape().nodes.push_back(std::move(fn)); }

}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode_flag(); }

/// Disables gradient tracking (and tape growth) for its scope.
struct NoGradGuard {
  NoGradGuard() : prev_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
  ~NoGradGuard() { detail::grad_mode_flag() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return make(std::move(shape), 0.0, requires_grad);
  }

  static Tensor full(Shape shape, double value, bool requires_grad = false) {
    return make(std::move(shape), value, requires_grad);
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return make({1}, value, requires_grad);
  }

  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false) {
    auto impl = std::make_shared<detail::TensorImpl>();
    const std::int64_t n = detail::numel_of(shape);
    if (static_cast<std::int64_t>(data.size()) != n) {
      throw ShapeError("from_data: shape " + detail::shape_str(shape) + " wants " +
                       std::to_string(n) + " values, got " + std::to_string(data.size()));
    }
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    Tensor t;
    t.impl_ = std::move(impl);
    return t;
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  std::int64_t dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(impl_->data.size()); }

  std::vector<double>& data() { return impl_->data; }
  const std::vector<double>& data() const { return impl_->data; }

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  void set_requires_grad(bool v) { impl_->requires_grad = v; }

  /// Gradient buffer, allocated (zeroed) on first access.
  std::vector<double>& grad() { return detail::grad_of(impl_); }
  const std::vector<double>& grad() const { return detail::grad_of(impl_); }
  bool has_grad() const { return impl_ && impl_->grad.size() == impl_->data.size(); }
  void zero_grad() {
    if (impl_) impl_->grad.assign(impl_->data.size(), 0.0);
  }

  /// Value of a one-element tensor.
  double value() const {
    if (numel() != 1) throw ContractError("value(): tensor has " + std::to_string(numel()) + " elements, expected 1");
    return impl_->data[0];
  }

  // 4-D convenience accessors (batch, channel, row, col).
  double& at(std::int64_t b, std::int64_t c, std::int64_t h, std::int64_t w) {
    const auto& s = impl_->shape;
    return impl_->data[static_cast<std::size_t>(((b * s[1] + c) * s[2] + h) * s[3] + w)];
  }
  double at(std::int64_t b, std::int64_t c, std::int64_t h, std::int64_t w) const {
    const auto& s = impl_->shape;
    return impl_->data[static_cast<std::size_t>(((b * s[1] + c) * s[2] + h) * s[3] + w)];
  }

  const detail::ImplPtr& impl() const { return impl_; }

 private:
  static Tensor make(Shape shape, double fill, bool requires_grad) {
    auto impl = std::make_shared<detail::TensorImpl>();
    const std::int64_t n = detail::numel_of(shape);
    impl->shape = std::move(shape);
    impl->data.assign(static_cast<std::size_t>(n), fill);
    impl->requires_grad = requires_grad;
    Tensor t;
    t.impl_ = std::move(impl);
    return t;
  }

  detail::ImplPtr impl_;
};

namespace detail {

/// True when the current op must be recorded for any of the given inputs.
inline bool track(std::initializer_list<const Tensor*> inputs) {
  if (!grad_mode_flag()) return false;
  for (const Tensor* t : inputs)
    if (t && t->defined() && t->requires_grad()) return true;
  return false;
}

}  // namespace detail

/// Reverse-mode sweep from a scalar loss. Frees the tape afterwards; leaf
/// gradients accumulate across successive forward/backward passes.
inline void backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + detail::shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward: loss is not connected to any tracked parameter");
  }
  detail::grad_of(loss.impl())[0] += 1.0;
  auto& nodes = detail::tape().nodes;
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) (*it)();
  nodes.clear();
}

/// Drops any recorded-but-unused tape nodes (e.g. after a forward with no backward).
inline void clear_tape() { detail::tape().nodes.clear(); }

}  // namespace hfur
