// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/tape.hpp"

#include <algorithm>

#include "xmodal/errors.hpp"

namespace xmodal {

template <class T>
bool BasicTape<T>::wants(std::initializer_list<const BasicTensor<T>*> inputs) const {
  if (!recording_) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const BasicTensor<T>* t) { return t->defined() && t->requires_grad(); });
}

template <class T>
void BasicTape<T>::record(std::string op, std::vector<NodePtr> inputs, const BasicTensor<T>& output,
                          BackwardFn backward) {
  if (consumed_) throw ContractError("cannot record '" + op + "' on a tape that already ran backward");
  auto node = output.node();
  node->requires_grad = true;
  node->leaf = false;
  entries_.push_back(Entry{std::move(op), std::move(inputs), std::move(node), std::move(backward)});
}

template <class T>
void BasicTape<T>::backward(const BasicTensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        (loss.defined() ? shape_to_string(loss.shape()) : std::string("<undefined>")));
  }
  if (consumed_) throw ContractError("tape already consumed by a previous backward()");
  const auto it = std::find_if(entries_.rbegin(), entries_.rend(),
                               [&](const Entry& e) { return e.output == loss.node(); });
  if (it == entries_.rend()) throw ContractError("loss was not produced on this tape");

  consumed_ = true;
  backward_steps_ = 0;
  grad_of(*loss.node())[0] += T(1);

  // Recording order is a topological order, so a reverse sweep visits every
  // consumer of a tensor before the tensor itself.
  const auto last = static_cast<std::size_t>(std::distance(it, entries_.rend())) - 1;
  for (std::size_t i = last + 1; i-- > 0;) {
    Entry& entry = entries_[i];
    if (!entry.output->grad.empty()) {
      entry.backward();
      ++backward_steps_;
    }
    if (entry.output != loss.node()) {
      entry.output->grad.clear();
      entry.output->grad.shrink_to_fit();
    }
    entry.backward = nullptr;
    entry.inputs.clear();
  }
}

template <class T>
void BasicTape<T>::clear() {
  entries_.clear();
  backward_steps_ = 0;
  consumed_ = false;
}

template class BasicTape<float>;
template class BasicTape<double>;

}  // namespace xmodal
