// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xmodal/ops.hpp"
#include "xmodal/rng.hpp"

namespace xmodal::losses {

/// Which in-batch attribute features may serve as negatives for an anchor.
enum class NegativeMode {
  different_class,   // default: same-class attributes would be false negatives
  different_sample,  // any other sample in the batch
};

NegativeMode parse_negative_mode(const std::string& text);
std::string to_string(NegativeMode mode);

struct LossWeights {
  double alpha = 0.5;

  /// Throws ConfigError unless 0 <= alpha <= 1.
  void validate() const;
};

/// Anchor i pairs video row i with attribute row i; negatives[i] lists the
/// attribute rows paired with video row i as negatives. Every anchor has
/// exactly k negatives.
struct PairBatch {
  std::vector<std::string> sample_ids;
  std::vector<std::vector<std::int64_t>> negatives;
  std::int64_t k = 0;

  std::int64_t size() const { return static_cast<std::int64_t>(sample_ids.size()); }

  /// Throws ContractError if a negative shares the anchor's sample id, an
  /// index is out of range, or negative counts differ from k.
  void validate() const;
};

/// Builds negatives from the other rows of a batch. The effective k is
/// min(k, fewest candidates over all anchors) so it is the same for every
/// anchor. With an Rng the candidates are sampled; without one the first k
/// candidates in row order are used.
PairBatch build_pair_batch(std::span<const std::string> sample_ids, std::span<const std::int32_t> class_ids,
                           std::int64_t k, NegativeMode mode, Rng* rng = nullptr);

/// exp(cos(z_m, z_a)), in [1/e, e]. Both arguments are 1-D.
template <class T>
BasicTensor<T> pair_distance(BasicTape<T>& tape, const BasicTensor<T>& z_m, const BasicTensor<T>& z_a);

/// Mean over anchors of -log(d(x) / (d(x) + sum_k d(y_k))), where x is the
/// anchor's own video/attribute pair and y_k its negatives. z_m and z_a are
/// [N,D]. Exactly 0 when k is 0.
template <class T>
BasicTensor<T> contrastive_loss(BasicTape<T>& tape, const BasicTensor<T>& z_m, const BasicTensor<T>& z_a,
                                const PairBatch& batch);

/// Mean of -log(max(probs[i, label_i], 1e-12)) over the rows of probs [N,n].
template <class T>
BasicTensor<T> cross_entropy(BasicTape<T>& tape, const BasicTensor<T>& probs, std::span<const std::int32_t> labels);

/// (1 - alpha)(l_theta + l_phi) + alpha * l_contrast.
template <class T>
BasicTensor<T> total_loss(BasicTape<T>& tape, const BasicTensor<T>& l_theta, const BasicTensor<T>& l_phi,
                          const BasicTensor<T>& l_contrast, const LossWeights& weights);

}  // namespace xmodal::losses
