// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "xmodal/errors.hpp"

namespace xmodal::losses {

NegativeMode parse_negative_mode(const std::string& text) {
  if (text == "different_class") return NegativeMode::different_class;
  if (text == "different_sample") return NegativeMode::different_sample;
  throw ConfigError("negative_mode must be different_class or different_sample, got '" + text + "'");
}

std::string to_string(NegativeMode mode) {
  return mode == NegativeMode::different_class ? "different_class" : "different_sample";
}

void LossWeights::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("alpha must lie in [0,1], got " + std::to_string(alpha));
  }
}

void PairBatch::validate() const {
  if (k < 0) throw ContractError("pair batch: k must be non-negative");
  if (negatives.size() != sample_ids.size()) throw ContractError("pair batch: one negative list per anchor");
  const auto n = static_cast<std::int64_t>(sample_ids.size());
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& neg = negatives[i];
    if (static_cast<std::int64_t>(neg.size()) != k) {
      throw ContractError("pair batch: anchor " + std::to_string(i) + " has " + std::to_string(neg.size()) +
                          " negatives, expected " + std::to_string(k));
    }
    for (auto j : neg) {
      if (j < 0 || j >= n) throw ContractError("pair batch: negative index out of range");
      if (sample_ids[j] == sample_ids[i]) {
        throw ContractError("pair batch: negative shares sample id '" + sample_ids[i] + "' with its anchor");
      }
    }
  }
}

PairBatch build_pair_batch(std::span<const std::string> sample_ids, std::span<const std::int32_t> class_ids,
                           std::int64_t k, NegativeMode mode, Rng* rng) {
  if (sample_ids.size() != class_ids.size()) throw ContractError("pair batch: sample and class lists differ");
  if (k < 0) throw ConfigError("k must be non-negative");
  const std::size_t n = sample_ids.size();
  std::vector<std::vector<std::int64_t>> candidates(n);
  std::size_t fewest = n == 0 ? 0 : std::numeric_limits<std::size_t>::max();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (sample_ids[j] == sample_ids[i]) continue;
      if (mode == NegativeMode::different_class && class_ids[j] == class_ids[i]) continue;
      candidates[i].push_back(static_cast<std::int64_t>(j));
    }
    fewest = std::min(fewest, candidates[i].size());
  }
  PairBatch batch;
  batch.sample_ids.assign(sample_ids.begin(), sample_ids.end());
  batch.k = std::min<std::int64_t>(k, static_cast<std::int64_t>(fewest));
  batch.negatives.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& c = candidates[i];
    if (rng) rng->shuffle(c.begin(), c.end());
    c.resize(static_cast<std::size_t>(batch.k));
    batch.negatives[i] = std::move(c);
  }
  return batch;
}

template <class T>
BasicTensor<T> pair_distance(BasicTape<T>& tape, const BasicTensor<T>& z_m, const BasicTensor<T>& z_a) {
  return exp(tape, cosine_similarity(tape, z_m, z_a));
}

template <class T>
BasicTensor<T> contrastive_loss(BasicTape<T>& tape, const BasicTensor<T>& z_m, const BasicTensor<T>& z_a,
                                const PairBatch& batch) {
  batch.validate();
  if (z_m.rank() != 2 || z_a.rank() != 2 || z_m.dim(0) != batch.size() || z_a.dim(0) != batch.size()) {
    throw DimensionError("contrastive loss expects [N,D] features with N = " + std::to_string(batch.size()) +
                         ", got " + shape_to_string(z_m.shape()) + " and " + shape_to_string(z_a.shape()));
  }
  if (batch.size() == 0) throw ContractError("contrastive loss: empty batch");
  if (batch.k == 0) return BasicTensor<T>::scalar(T(0));

  const std::int64_t n = batch.size();
  std::vector<BasicTensor<T>> attr(static_cast<std::size_t>(n));
  auto attr_row = [&](std::int64_t j) -> const BasicTensor<T>& {
    if (!attr[j].defined()) attr[j] = select_row(tape, z_a, j);
    return attr[j];
  };
  BasicTensor<T> total;
  for (std::int64_t i = 0; i < n; ++i) {
    const auto video = select_row(tape, z_m, i);
    const auto d_pos = pair_distance(tape, video, attr_row(i));
    auto denom = d_pos;
    for (auto j : batch.negatives[i]) denom = add(tape, denom, pair_distance(tape, video, attr_row(j)));
    const auto term = sub(tape, log(tape, denom), log(tape, d_pos));
    total = total.defined() ? add(tape, total, term) : term;
  }
  return scale(tape, total, T(1) / static_cast<T>(n));
}

template <class T>
BasicTensor<T> cross_entropy(BasicTape<T>& tape, const BasicTensor<T>& probs, std::span<const std::int32_t> labels) {
  return xmodal::cross_entropy(tape, probs, labels);
}

template <class T>
BasicTensor<T> total_loss(BasicTape<T>& tape, const BasicTensor<T>& l_theta, const BasicTensor<T>& l_phi,
                          const BasicTensor<T>& l_contrast, const LossWeights& weights) {
  weights.validate();
  for (const auto* t : {&l_theta, &l_phi, &l_contrast}) {
    if (t->numel() != 1) throw ContractError("total loss terms must be scalars");
    if (!std::isfinite(static_cast<double>(t->item()))) throw NumericError("total loss: non-finite term");
  }
  const T a = static_cast<T>(weights.alpha);
  const auto classification = scale(tape, add(tape, l_theta, l_phi), T(1) - a);
  return add(tape, classification, scale(tape, l_contrast, a));
}

#define XMODAL_INSTANTIATE_LOSSES(T)                                                                          \
  template BasicTensor<T> pair_distance(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&);       \
  template BasicTensor<T> contrastive_loss(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&,      \
                                           const PairBatch&);                                                \
  template BasicTensor<T> cross_entropy(BasicTape<T>&, const BasicTensor<T>&, std::span<const std::int32_t>); \
  template BasicTensor<T> total_loss(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&,            \
                                     const BasicTensor<T>&, const LossWeights&);

XMODAL_INSTANTIATE_LOSSES(float)
XMODAL_INSTANTIATE_LOSSES(double)

#undef XMODAL_INSTANTIATE_LOSSES

}  // namespace xmodal::losses
