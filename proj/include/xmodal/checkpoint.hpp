// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "xmodal/encoders.hpp"

// A checkpoint is a pair of files sharing a stem: <stem>.mxt holds MXT1
// records back to back, <stem>.json maps each tensor name to its record
// offset and shape and carries the metadata needed for an exact reload.

namespace xmodal::ckpt {

struct Entry {
  std::string name;
  std::uint64_t offset = 0;
  Shape shape;
};

struct Index {
  std::vector<Entry> entries;
  nlohmann::json meta;
};

std::filesystem::path tensor_path(const std::filesystem::path& stem);
std::filesystem::path index_path(const std::filesystem::path& stem);

/// Writes both files. Throws IoError when either cannot be written and
/// ContractError on duplicate names.
void save(const std::filesystem::path& stem, const std::vector<models::NamedTensor<float>>& tensors,
          const nlohmann::json& meta);

/// Throws IoError if the index is missing or malformed.
Index read_index(const std::filesystem::path& stem);

/// Overwrites every tensor in `targets` with the stored values of the same
/// name. Throws IoError on a missing name, a shape mismatch or a damaged
/// record; on error the targets may be partly updated.
void load_into(const std::filesystem::path& stem, const std::vector<models::NamedTensor<float>>& targets);

}  // namespace xmodal::ckpt
