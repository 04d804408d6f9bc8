// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "xmodal/tape.hpp"
#include "xmodal/tensor.hpp"

// Differentiable tensor operations. Every op takes the tape it records on;
// nothing is recorded when recording is off or no input requires a gradient.
// All ops are explicitly instantiated for float and double.

namespace xmodal {

struct Conv3dOptions {
  std::array<int, 3> stride{1, 1, 1};   // (t, h, w)
  std::array<int, 3> padding{0, 0, 0};  // (t, h, w)
};

/// Output extents of a convolution along one axis.
std::int64_t conv_out_extent(std::int64_t in, int kernel, int stride, int pad);

/// input [N,C,T,H,W], weight [F,C,kt,kh,kw] -> [N,F,T',H',W'].
/// Lowered to matrix products; matches conv3d_direct to within float rounding.
template <class T>
BasicTensor<T> conv3d(BasicTape<T>& tape, const BasicTensor<T>& input,
                      const BasicTensor<T>& weight, const Conv3dOptions& opts);

/// Straight seven-loop convolution. Forward only; used as a reference.
template <class T>
BasicTensor<T> conv3d_direct(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                             const Conv3dOptions& opts);

/// input [N,D], weight [D,E], bias [E] -> [N,E].
template <class T>
BasicTensor<T> linear(BasicTape<T>& tape, const BasicTensor<T>& input,
                      const BasicTensor<T>& weight, const BasicTensor<T>& bias);

/// Row-wise softmax over [N,n], computed with max subtraction.
template <class T>
BasicTensor<T> softmax(BasicTape<T>& tape, const BasicTensor<T>& input);

/// Cosine of the angle between two 1-D tensors; scalar result.
/// Throws DegenerateInputError when either argument has zero norm.
template <class T>
BasicTensor<T> cosine_similarity(BasicTape<T>& tape, const BasicTensor<T>& a,
                                 const BasicTensor<T>& b);

/// [N,D1] ++ [N,D2] -> [N,D1+D2] along columns.
template <class T>
BasicTensor<T> concat(BasicTape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Columns [begin,end) of a 2-D tensor.
template <class T>
BasicTensor<T> slice_columns(BasicTape<T>& tape, const BasicTensor<T>& input, std::int64_t begin,
                             std::int64_t end);

/// Row `index` of a 2-D tensor as a 1-D tensor.
template <class T>
BasicTensor<T> select_row(BasicTape<T>& tape, const BasicTensor<T>& input, std::int64_t index);

template <class T>
BasicTensor<T> relu(BasicTape<T>& tape, const BasicTensor<T>& input);

// Elementwise binary ops require identical shapes.
template <class T>
BasicTensor<T> add(BasicTape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b);
template <class T>
BasicTensor<T> sub(BasicTape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b);
template <class T>
BasicTensor<T> mul(BasicTape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b);
/// Throws DegenerateInputError on a zero denominator.
template <class T>
BasicTensor<T> div(BasicTape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b);

template <class T>
BasicTensor<T> scale(BasicTape<T>& tape, const BasicTensor<T>& input, T factor);

/// Natural log; throws DegenerateInputError on non-positive entries.
template <class T>
BasicTensor<T> log(BasicTape<T>& tape, const BasicTensor<T>& input);
template <class T>
BasicTensor<T> exp(BasicTape<T>& tape, const BasicTensor<T>& input);

/// Sum of all entries; scalar result.
template <class T>
BasicTensor<T> sum(BasicTape<T>& tape, const BasicTensor<T>& input);
/// Mean of all entries; scalar result.
template <class T>
BasicTensor<T> mean(BasicTape<T>& tape, const BasicTensor<T>& input);
/// Mean along `axis`, which is removed from the shape.
template <class T>
BasicTensor<T> mean(BasicTape<T>& tape, const BasicTensor<T>& input, std::size_t axis);

/// [N,C,T,H,W] -> [N,C], averaging over (T,H,W).
template <class T>
BasicTensor<T> global_avg_pool(BasicTape<T>& tape, const BasicTensor<T>& input);

/// Running statistics and hyperparameters of one batch-normalization layer.
template <class T>
struct BatchNormState {
  BasicTensor<T> running_mean;
  BasicTensor<T> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  BatchNormState() = default;
  explicit BatchNormState(std::int64_t channels)
      : running_mean(Shape{channels}, T(0)), running_var(Shape{channels}, T(1)) {}
};

/// Per-channel normalization of [N,C,...]. In training mode the batch
/// statistics are used (and differentiated through) and the running
/// statistics are updated; otherwise the running statistics are used.
template <class T>
BasicTensor<T> batch_norm(BasicTape<T>& tape, const BasicTensor<T>& input,
                          const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                          BatchNormState<T>& state, bool training);

/// Rows of table [V,E] picked by `ids`; result shape is ids_shape + [E].
template <class T>
BasicTensor<T> embedding(BasicTape<T>& tape, const BasicTensor<T>& table,
                         std::span<const std::int32_t> ids, const Shape& ids_shape);

/// Mean of the embeddings of the non-pad ids in each row of an [N,L] id
/// matrix -> [N,E]. Throws DegenerateInputError for an all-pad row.
template <class T>
BasicTensor<T> embedding_bag_mean(BasicTape<T>& tape, const BasicTensor<T>& table,
                                  std::span<const std::int32_t> ids, std::int64_t row_length,
                                  std::int32_t pad_id);

/// Mean over rows of -log(max(probs[i, label_i], 1e-12)); scalar result.
template <class T>
BasicTensor<T> cross_entropy(BasicTape<T>& tape, const BasicTensor<T>& probs,
                             std::span<const std::int32_t> labels);

/// Copies `input` into a new tensor of a different shape with equal size.
template <class T>
BasicTensor<T> reshape(BasicTape<T>& tape, const BasicTensor<T>& input, Shape shape);

}  // namespace xmodal
