#pragma once

#include <memory>
#include <vector>

#include "frnet/tensor.hpp"

namespace frnet::detail {

struct TapeNode {
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  BackwardFn backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool has_grad = false;
  bool requires_grad = false;
  bool tape_consumed = false;
  std::shared_ptr<TapeNode> node;
};

}  // namespace frnet::detail
