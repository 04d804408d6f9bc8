// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "xmodal/tensor.hpp"

namespace xmodal {

/// One sample's two video streams plus its labels.
struct ClipPair {
  Tensor rgb;   // [3,T,H,W]
  Tensor flow;  // [2,T,H,W]
  std::string sample_id;
  int subject_id = 0;
  int class_id = 0;
  std::string au_string;
};

/// Throws DimensionError unless rgb is [3,T,H,W], flow is [2,T,H,W] with the
/// same T, H, W.
void validate_clip_pair(const ClipPair& pair);

}  // namespace xmodal
