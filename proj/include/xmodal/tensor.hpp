// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace xmodal {

/// Tensor extents, outermost first. An empty shape denotes a scalar.
using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

template <class T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  /// Empty until a backward pass reaches this node.
  std::vector<T> grad;
  bool requires_grad = false;
  /// False once the node is the output of a recorded operation.
  bool leaf = true;
};

/// Dense row-major array with an optional gradient buffer.
///
/// BasicTensor is a handle: copies alias the same storage, which is what the
/// tape needs to route gradients back to parameters. Use clone() for an
/// independent copy.
template <class T>
class BasicTensor {
 public:
  using value_type = T;
  using Node = TensorNode<T>;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0));
  BasicTensor(Shape shape, std::vector<T> values);

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape), T(0)); }
  static BasicTensor scalar(T value) { return BasicTensor(Shape{}, std::vector<T>{value}); }

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::int64_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<T> data() { return node_->data; }
  std::span<const T> data() const { return node_->data; }
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  BasicTensor& set_requires_grad(bool on = true);
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  /// Gradient buffer, allocated (zero-filled) on first access.
  std::span<T> mutable_grad();
  void zero_grad();

  BasicTensor clone() const;

  bool same_storage(const BasicTensor& other) const noexcept { return node_ == other.node_; }
  const std::shared_ptr<Node>& node() const noexcept { return node_; }
  static BasicTensor from_node(std::shared_ptr<Node> node);

 private:
  std::shared_ptr<Node> node_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

template <class To, class From>
BasicTensor<To> tensor_cast(const BasicTensor<From>& src) {
  std::vector<To> values(src.data().begin(), src.data().end());
  return BasicTensor<To>(src.shape(), std::move(values));
}

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

}  // namespace xmodal
