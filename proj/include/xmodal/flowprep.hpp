// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>

#include "xmodal/clip.hpp"
#include "xmodal/tensor.hpp"

// Clip preprocessing: spatial resize, temporal resampling, dense Farneback
// optical flow and assembly of the two-stream clip.

namespace xmodal::flow {

/// Frames [T,C,H,W] with C = 1 (gray) or 3 (RGB), values in [0,1], T >= 2.
struct FrameSequence {
  Tensor frames;
  std::optional<double> frame_rate;

  std::int64_t length() const { return frames.dim(0); }
  std::int64_t channels() const { return frames.dim(1); }
  std::int64_t height() const { return frames.dim(2); }
  std::int64_t width() const { return frames.dim(3); }
};

/// Throws ContractError when the sequence breaks its invariants.
void validate(const FrameSequence& seq);

struct FarnebackParams {
  double pyramid_scale = 0.5;
  int levels = 3;
  int window = 15;
  int iterations = 3;
  int poly_n = 5;
  double poly_sigma = 1.1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Corner-aligned bilinear resize of every frame.
FrameSequence resize_bilinear(const FrameSequence& seq, std::int64_t height, std::int64_t width);

/// Uniform temporal resampling; each output frame blends its two bracketing
/// input frames linearly.
FrameSequence resample_time(const FrameSequence& seq, std::int64_t frames_out);

/// Luminance of one frame [C,H,W] (C = 1 or 3) -> [H,W].
Tensor to_grayscale(const Tensor& frame);

/// Dense displacement [2,H,W] = (dx, dy) in pixels such that
/// next(x + dx, y + dy) ~ prev(x, y). Frames are [H,W] in [0,1]. Throws
/// DimensionError on unequal shapes and ContractError below poly_n pixels.
Tensor farneback_flow(const Tensor& prev, const Tensor& next, const FarnebackParams& params = {});

/// Flow between consecutive frames, [2,T,H,W], the final field repeated so
/// the flow clip has the same length as the input.
Tensor flow_clip(const FrameSequence& seq, const FarnebackParams& params = {});

/// Standardizes each channel of [C,...] to zero mean and unit variance over
/// everything else; a constant channel becomes all zeros. In place.
void standardize_channels(Tensor& clip);

/// RGB clip [3,T,H,W] (gray replicated) and flow clip [2,T,H,W], both
/// standardized per channel.
ClipPair clip_to_pair(const FrameSequence& seq, const FarnebackParams& params = {});

}  // namespace xmodal::flow
