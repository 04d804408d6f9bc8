// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace xmodal {

/// One manifest line. Paths are relative to the manifest's directory.
struct SampleRecord {
  std::string sample_id;
  int subject_id = 0;
  int class_id = 0;
  std::string class_name;
  std::string au;
  std::string rgb_path;
  std::string flow_path;  // empty until the sample is preprocessed
  int frames = 16;

  bool operator==(const SampleRecord&) const = default;
};

/// JSON lines, one sample per line.
struct Manifest {
  std::vector<SampleRecord> rows;

  static constexpr const char* kFileName = "manifest.jsonl";

  /// Reads `dir/manifest.jsonl`. Throws IoError on a missing file and
  /// ParseError (with the line number as position) on a malformed line.
  static Manifest load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;

  std::string to_jsonl() const;
  static Manifest from_jsonl(const std::string& text);

  int class_count() const;
  std::vector<int> subjects() const;
};

}  // namespace xmodal
