// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/tensor.hpp"

#include <sstream>

#include "xmodal/errors.hpp"

namespace xmodal {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto extent : shape) {
    if (extent <= 0) throw DimensionError("tensor extents must be positive, got " + shape_to_string(shape));
    n *= extent;
  }
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <class T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : node_(std::make_shared<Node>()) {
  const auto n = shape_numel(shape);
  node_->shape = std::move(shape);
  node_->data.assign(static_cast<std::size_t>(n), fill);
}

template <class T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> values) : node_(std::make_shared<Node>()) {
  const auto n = shape_numel(shape);
  if (static_cast<std::size_t>(n) != values.size()) {
    throw DimensionError("shape " + shape_to_string(shape) + " holds " + std::to_string(n) +
                         " values, got " + std::to_string(values.size()));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(values);
}

template <class T>
T BasicTensor<T>::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_to_string(shape()));
  return node_->data[0];
}

template <class T>
BasicTensor<T>& BasicTensor<T>::set_requires_grad(bool on) {
  node_->requires_grad = on;
  return *this;
}

template <class T>
std::span<T> BasicTensor<T>::mutable_grad() {
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), T(0));
  return node_->grad;
}

template <class T>
void BasicTensor<T>::zero_grad() {
  node_->grad.clear();
}

template <class T>
BasicTensor<T> BasicTensor<T>::clone() const {
  BasicTensor out;
  out.node_ = std::make_shared<Node>();
  out.node_->shape = node_->shape;
  out.node_->data = node_->data;
  return out;
}

template <class T>
BasicTensor<T> BasicTensor<T>::from_node(std::shared_ptr<Node> node) {
  BasicTensor out;
  out.node_ = std::move(node);
  return out;
}

template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace xmodal
