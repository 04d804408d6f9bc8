// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "xmodal/tensor.hpp"

namespace xmodal {

/// Ordered record of differentiable operations for reverse-mode
/// differentiation. A tape belongs to one thread; it is consumed by a single
/// call to backward().
template <class T>
class BasicTape {
 public:
  using NodePtr = std::shared_ptr<TensorNode<T>>;
  using BackwardFn = std::function<void()>;

  struct Entry {
    std::string op;
    std::vector<NodePtr> inputs;
    NodePtr output;
    BackwardFn backward;
  };

  BasicTape() = default;
  BasicTape(const BasicTape&) = delete;
  BasicTape& operator=(const BasicTape&) = delete;
  BasicTape(BasicTape&&) = default;
  BasicTape& operator=(BasicTape&&) = default;

  bool recording() const noexcept { return recording_; }
  void set_recording(bool on) noexcept { recording_ = on; }

  /// True when an op over `inputs` must be recorded: recording is on and some
  /// input requires a gradient.
  bool wants(std::initializer_list<const BasicTensor<T>*> inputs) const;

  /// Appends an operation and marks `output` as a non-leaf requiring a
  /// gradient. Inputs must already be on the tape or be leaves.
  void record(std::string op, std::vector<NodePtr> inputs, const BasicTensor<T>& output,
              BackwardFn backward);

  /// Propagates d(loss)/d(node) to every reachable tensor that requires a
  /// gradient. Leaf gradients accumulate; intermediate gradients are released
  /// as soon as they have been propagated.
  void backward(const BasicTensor<T>& loss);

  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  /// Number of entries whose backward closure ran during the last backward().
  std::size_t backward_steps() const noexcept { return backward_steps_; }
  bool consumed() const noexcept { return consumed_; }
  void clear();

 private:
  std::vector<Entry> entries_;
  std::size_t backward_steps_ = 0;
  bool recording_ = true;
  bool consumed_ = false;
};

using Tape = BasicTape<float>;
using TapeD = BasicTape<double>;

/// Disables recording on a tape for the lifetime of the guard.
template <class T>
class NoGradGuard {
 public:
  explicit NoGradGuard(BasicTape<T>& tape) : tape_(tape), previous_(tape.recording()) {
    tape_.set_recording(false);
  }
  ~NoGradGuard() { tape_.set_recording(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  BasicTape<T>& tape_;
  bool previous_;
};

/// Gradient buffer of `node`, allocated zero-filled on first use.
template <class T>
std::vector<T>& grad_of(TensorNode<T>& node) {
  if (node.grad.empty()) node.grad.assign(node.data.size(), T(0));
  return node.grad;
}

extern template class BasicTape<float>;
extern template class BasicTape<double>;

}  // namespace xmodal
