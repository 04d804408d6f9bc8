// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "xmodal/clip.hpp"
#include "xmodal/flowprep.hpp"
#include "xmodal/manifest.hpp"
#include "xmodal/synthdata.hpp"

namespace xmodal::data {

struct PrepOptions {
  int frames = 16;
  int size = 112;
  flow::FarnebackParams farneback;

  void validate() const;
};

/// Reads a clip from an MXT1 tensor [T,C,H,W] or from a directory of PNG
/// frames taken in lexicographic file-name order. Throws IoError on
/// unreadable or inconsistent input.
flow::FrameSequence load_frames(const std::filesystem::path& path);

/// Decodes one PNG (gray, gray+alpha, RGB or RGBA; 8 or 16 bit) to [C,H,W]
/// with C = 1 or 3 and values in [0,1].
Tensor read_png(const std::filesystem::path& path);

/// Resize to size x size, resample to `frames` frames, then compute flow and
/// standardize. Flow is computed after temporal resampling.
ClipPair preprocess(const flow::FrameSequence& seq, const PrepOptions& options);

/// Copies the identifying fields of a manifest row onto a pair.
void label(ClipPair& pair, const SampleRecord& record);

/// Preprocesses in-memory synthetic samples.
std::vector<ClipPair> prepare_samples(const std::vector<synth::Sample>& samples, const PrepOptions& options,
                                      int threads = 1);

using LogFn = std::function<void(const std::string&)>;

/// Preprocesses every row of `in_dir`'s manifest into out_dir/clips/<id>.rgb.mxt
/// ([3,T,H,W]) and <id>.flow.mxt ([2,T,H,W]) and writes an updated manifest
/// to out_dir. A sample whose frames cannot be read is skipped and logged,
/// or, when `strict`, aborts with IoError.
Manifest prepare_dataset(const std::filesystem::path& in_dir, const std::filesystem::path& out_dir,
                         const PrepOptions& options, bool strict, int threads = 1, const LogFn& log = {});

/// Loads the clip pairs of a preprocessed dataset, in manifest order.
std::vector<ClipPair> load_prepared(const std::filesystem::path& dir);

}  // namespace xmodal::data
