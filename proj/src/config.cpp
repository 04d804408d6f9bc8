// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/config.hpp"

#include <fstream>

#include "xmodal/errors.hpp"

namespace xmodal {

using nlohmann::json;

namespace {

template <class Fn>
void each_key(const json& section, const std::string& where, Fn&& apply) {
  if (!section.is_object()) throw ConfigError("config section '" + where + "' must be an object");
  for (const auto& [key, value] : section.items()) {
    bool known = false;
    try {
      known = apply(key, value);
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + where + "." + key + "': " + e.what());
    }
    if (!known) throw ConfigError("unknown config key '" + where + "." + key + "'");
  }
}

}  // namespace

CliConfig parse_config(const json& doc, CliConfig c) {
  if (!doc.is_object()) throw ConfigError("config file must hold a JSON object");
  for (const auto& [section, body] : doc.items()) {
    if (section == "experiment") {
      c.experiment = train::config_from_json(body, c.experiment);
    } else if (section == "synth") {
      auto& s = c.synth;
      each_key(body, section, [&](const std::string& k, const json& v) {
        if (k == "n_classes") s.n_classes = v.get<int>();
        else if (k == "samples_per_class") s.samples_per_class = v.get<int>();
        else if (k == "n_subjects") s.n_subjects = v.get<int>();
        else if (k == "frames") s.frames = v.get<int>();
        else if (k == "size") s.size = v.get<int>();
        else if (k == "motion_amplitude") s.motion_amplitude = v.get<double>();
        else if (k == "noise_sigma") s.noise_sigma = v.get<double>();
        else if (k == "seed") s.seed = v.get<std::uint64_t>();
        else return false;
        return true;
      });
    } else if (section == "prep") {
      each_key(body, section, [&](const std::string& k, const json& v) {
        if (k == "frames") c.prep.frames = v.get<int>();
        else if (k == "size") c.prep.size = v.get<int>();
        else return false;
        return true;
      });
    } else if (section == "farneback") {
      auto& f = c.prep.farneback;
      each_key(body, section, [&](const std::string& k, const json& v) {
        if (k == "pyramid_scale") f.pyramid_scale = v.get<double>();
        else if (k == "levels") f.levels = v.get<int>();
        else if (k == "window") f.window = v.get<int>();
        else if (k == "iterations") f.iterations = v.get<int>();
        else if (k == "poly_n") f.poly_n = v.get<int>();
        else if (k == "poly_sigma") f.poly_sigma = v.get<double>();
        else return false;
        return true;
      });
    } else {
      throw ConfigError("unknown config section '" + section + "'");
    }
  }
  return c;
}

CliConfig load_config_file(const std::filesystem::path& path, CliConfig base) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc, std::move(base));
}

json to_json(const synth::SynthSpec& s) {
  return {{"n_classes", s.n_classes},   {"samples_per_class", s.samples_per_class},
          {"n_subjects", s.n_subjects}, {"frames", s.frames},
          {"size", s.size},             {"motion_amplitude", s.motion_amplitude},
          {"noise_sigma", s.noise_sigma}, {"seed", s.seed}};
}

json to_json(const flow::FarnebackParams& f) {
  return {{"pyramid_scale", f.pyramid_scale}, {"levels", f.levels},   {"window", f.window},
          {"iterations", f.iterations},       {"poly_n", f.poly_n},   {"poly_sigma", f.poly_sigma}};
}

}  // namespace xmodal
