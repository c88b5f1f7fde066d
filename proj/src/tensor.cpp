#include "frnet/tensor.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "frnet/error.hpp"
#include "tensor_impl.hpp"

namespace frnet {

std::size_t shape_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace {

std::shared_ptr<detail::TensorImpl> make_impl(const Shape& shape, std::vector<double> data,
                                              bool requires_grad) {
  for (auto extent : shape) {
    if (extent == 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape));
  }
  if (data.size() != shape_count(shape)) {
    throw ShapeError("tensor " + shape_string(shape) + " needs " + std::to_string(shape_count(shape)) +
                     " values, got " + std::to_string(data.size()));
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = shape;
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return impl;
}

const detail::TensorImpl& checked(const std::shared_ptr<detail::TensorImpl>& impl) {
  if (!impl) throw ContractError("use of an undefined tensor");
  return *impl;
}

}  // namespace

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return full(shape, 0.0, requires_grad);
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
  return Tensor(make_impl(shape, std::vector<double>(shape_count(shape), value), requires_grad));
}

Tensor Tensor::from_data(const Shape& shape, std::vector<double> data, bool requires_grad) {
  return Tensor(make_impl(shape, std::move(data), requires_grad));
}

const Shape& Tensor::shape() const { return checked(impl_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_string(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return checked(impl_).data.size(); }

std::span<const double> Tensor::data() const { return checked(impl_).data; }

std::span<double> Tensor::mutable_data() {
  checked(impl_);
  return impl_->data;
}

double Tensor::item() const {
  const auto& impl = checked(impl_);
  if (impl.data.size() != 1) throw ShapeError("item() on tensor " + shape_string(impl.shape));
  return impl.data[0];
}

bool Tensor::requires_grad() const { return checked(impl_).requires_grad; }

void Tensor::set_requires_grad(bool value) {
  checked(impl_);
  if (impl_->node) throw ContractError("requires_grad can only be set on leaf tensors");
  impl_->requires_grad = value;
}

bool Tensor::is_leaf() const { return checked(impl_).node == nullptr; }

bool Tensor::has_grad() const { return checked(impl_).has_grad; }

std::span<const double> Tensor::grad() const {
  const auto& impl = checked(impl_);
  if (!impl.has_grad) throw ContractError("tensor has no gradient");
  return impl.grad;
}

void Tensor::zero_grad() {
  checked(impl_);
  impl_->grad.clear();
  impl_->has_grad = false;
}

Tensor Tensor::detach() const {
  const auto& impl = checked(impl_);
  auto view = std::make_shared<detail::TensorImpl>();
  view->shape = impl.shape;
  view->data = impl.data;
  return Tensor(view);
}

void Tensor::backward() const {
  using detail::TensorImpl;
  const auto& root = checked(impl_);
  if (root.data.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got " + shape_string(root.shape));
  }
  if (root.tape_consumed) throw ContractError("backward() already ran on this result; the tape was released");
  if (!root.node && !root.requires_grad) {
    throw ContractError("backward() on a tensor that is detached from the tape");
  }

  // Iterative post-order DFS yields a topological order.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack{{impl_.get(), 0}};
  visited.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (node->node && next < node->node->inputs.size()) {
      TensorImpl* child = node->node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  for (auto* t : order) {
    if (!t->node && t->has_grad) {
      throw ContractError("leaf gradient already populated; call zero_grad() before another backward()");
    }
  }

  std::unordered_map<TensorImpl*, std::vector<double>> grads;
  grads[impl_.get()] = {1.0};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* t = *it;
    if (!t->node) continue;
    auto found = grads.find(t);
    if (found == grads.end()) continue;
    std::vector<double> grad_out = std::move(found->second);
    grads.erase(found);

    const auto& inputs = t->node->inputs;
    std::vector<std::span<double>> grad_in(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (!inputs[i]->requires_grad) continue;
      auto& buffer = grads[inputs[i].get()];
      if (buffer.empty()) buffer.assign(inputs[i]->data.size(), 0.0);
      grad_in[i] = buffer;
    }
    t->node->backward(grad_out, grad_in);
  }

  for (auto* t : order) {
    if (t->node) {
      t->node.reset();
      t->tape_consumed = true;
      continue;
    }
    auto found = grads.find(t);
    if (found != grads.end()) {
      t->grad = std::move(found->second);
    } else {
      t->grad.assign(t->data.size(), 0.0);
    }
    t->has_grad = true;
  }
}

namespace {
thread_local bool g_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_mode_enabled() { return g_grad_enabled; }

Tensor make_result(const Shape& shape, std::vector<double> data, std::initializer_list<Tensor> inputs,
                   BackwardFn backward) {
  auto impl = make_impl(shape, std::move(data), false);
  bool needs_tape = false;
  if (!g_grad_enabled) return Tensor(impl);
  for (const auto& input : inputs) needs_tape = needs_tape || input.requires_grad();
  if (needs_tape) {
    auto node = std::make_shared<detail::TapeNode>();
    for (const auto& input : inputs) node->inputs.push_back(input.impl());
    node->backward = std::move(backward);
    impl->node = std::move(node);
    impl->requires_grad = true;
  }
  return Tensor(impl);
}

}  // namespace frnet
