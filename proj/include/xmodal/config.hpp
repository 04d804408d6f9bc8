// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include <json.hpp>

#include "xmodal/dataset.hpp"
#include "xmodal/synthdata.hpp"
#include "xmodal/trainer.hpp"

// Command-line configuration file: a JSON object with optional sections
//   "experiment"  ExperimentConfig fields
//   "synth"       SynthSpec fields
//   "prep"        {"frames", "size"}
//   "farneback"   FarnebackParams fields
// Unknown sections and keys are rejected by name.

namespace xmodal {

struct CliConfig {
  train::ExperimentConfig experiment;
  synth::SynthSpec synth;
  data::PrepOptions prep;
};

/// Throws ConfigError naming the first unknown or ill-typed key.
CliConfig parse_config(const nlohmann::json& doc, CliConfig base = {});

/// Throws IoError when unreadable and ConfigError on invalid JSON.
CliConfig load_config_file(const std::filesystem::path& path, CliConfig base = {});

nlohmann::json to_json(const synth::SynthSpec& spec);
nlohmann::json to_json(const flow::FarnebackParams& params);

}  // namespace xmodal
