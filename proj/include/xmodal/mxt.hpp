// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "xmodal/tensor.hpp"

// MXT1 binary tensor container:
//   bytes 0..3   "MXT1"
//   u32 LE       dtype code (0 = f32)
//   u32 LE       rank
//   rank x u64 LE extents
//   row-major payload, little-endian f32

namespace xmodal::mxt {

inline constexpr std::uint32_t kDtypeF32 = 0;

/// Size in bytes of the record write() produces for `t`.
std::uint64_t record_size(const Tensor& t);

void write(std::ostream& os, const Tensor& t);
/// Reads one record at the stream's current position. Throws IoError on a
/// bad magic, unsupported dtype, non-positive extent or truncated payload.
Tensor read(std::istream& is);

void save(const std::filesystem::path& path, const Tensor& t);
Tensor load(const std::filesystem::path& path);

/// Several records back to back; returns the byte offset of each.
std::vector<std::uint64_t> save_all(const std::filesystem::path& path, const std::vector<Tensor>& tensors);

}  // namespace xmodal::mxt
