#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace frnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_count(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {
struct TensorImpl;
}

// Dense real tensor with optional reverse-mode gradient tracking.
//
// Tensors are reference types: copies share storage, as in the usual
// deep-learning frameworks. Operations record a tape node whenever any input
// requires a gradient; Tensor::backward() walks that tape once and then
// releases it.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double value, bool requires_grad = false);
  static Tensor from_data(const Shape& shape, std::vector<double> data, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const double> data() const;
  // Writing through this span bypasses the tape; use only on leaves.
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  // Copy of the values with no tape history.
  Tensor detach() const;

  // Populates grad() on every leaf reachable from this scalar. A second call
  // on the same result, or a call that would add into an existing leaf
  // gradient, throws ContractError.
  void backward() const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  // Used by op implementations.
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Backward rule: receives the output gradient and one buffer per input;
// buffers are null for inputs that need no gradient. Rules accumulate (+=).
using BackwardFn =
    std::function<void(std::span<const double> grad_out, std::span<const std::span<double>> grad_in)>;

// Disables tape recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

// Builds a result tensor and records a tape node if any input requires a grad.
Tensor make_result(const Shape& shape, std::vector<double> data, std::initializer_list<Tensor> inputs,
                   BackwardFn backward);

// Differentiable operations. Activations are 5-D [N, C, D, H, W].

Tensor conv3d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding);
// Kernel extent must equal stride (non-overlapping scatter), no padding.
Tensor conv_transpose3d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        std::size_t stride);

Tensor relu(const Tensor& x);
Tensor add(const Tensor& x, const Tensor& y);
Tensor concat_channels(const Tensor& x, const Tensor& y);
Tensor softmax_channels(const Tensor& logits);

Tensor sum(const Tensor& x);
// sum_i weights[i] * x[i], weights treated as constants.
Tensor weighted_sum(const Tensor& x, std::span<const double> weights);

}  // namespace frnet
