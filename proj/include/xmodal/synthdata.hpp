// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xmodal/flowprep.hpp"
#include "xmodal/manifest.hpp"

// Synthetic micro-expression clips. Each subject gets a textured face
// template; each class moves two facial zones with a short ramp-and-release
// displacement, as a micro-expression would.

namespace xmodal::synth {

enum class Zone { brow, eye, nose, cheek, mouth };
inline constexpr int kZoneCount = 5;

std::string to_string(Zone zone);

/// Zone an action unit acts on. Throws UnknownAuError for ids outside the codebook.
Zone zone_of(int au);

/// Unit displacement direction (dx, dy) of an action unit in image
/// coordinates (y down), for the left lobe of a bilateral zone.
std::array<double, 2> direction_of(int au);

/// Ellipse (centre and radii, as fractions of the frame side) of one lobe.
struct Lobe {
  double cx, cy, rx, ry;
  bool mirrored;  // right-hand lobe: horizontal motion is reflected
};
std::vector<Lobe> lobes_of(Zone zone);

struct ClassDef {
  std::string name;
  std::vector<int> aus;  // ascending
  std::vector<Zone> zones;
};

/// Number of distinct two-unit classes whose units sit in different zones.
std::int64_t max_classes();

/// Deterministic distinct AU pairs drawn from different zones. Zone pairs are
/// used up before any is repeated. Throws ConfigError when n exceeds
/// max_classes() or is below 2.
std::vector<ClassDef> class_au_table(int n_classes, std::uint64_t seed);

struct SynthSpec {
  int n_classes = 5;
  int samples_per_class = 20;
  int n_subjects = 5;
  int frames = 16;
  int size = 112;
  double motion_amplitude = 2.0;  // peak displacement in pixels
  double noise_sigma = 0.01;
  std::uint64_t seed = 0;

  /// Throws ConfigError on out-of-range fields.
  void validate() const;
  int sample_count() const { return n_classes * samples_per_class; }
};

/// Subject (1-based) of sample `index`. Samples are ordered class-major and
/// subjects are dealt round-robin, so every subject is used.
int subject_of(const SynthSpec& spec, int index);

/// Subject-seeded face texture [3,size,size] with values in [0,1].
Tensor face_template(const SynthSpec& spec, int subject_id);

/// Per-pixel displacement magnitude of `cls` at unit amplitude, [size,size];
/// nonzero only inside the class's zones.
Tensor activity_mask(const SynthSpec& spec, const ClassDef& cls);

/// Ramp-and-release intensity in [0,1] for frame t with the apex at `apex`.
double motion_profile(double t, int frames, double apex);

/// Renders sample `index` as frames [T,3,size,size].
flow::FrameSequence render_sample(const SynthSpec& spec, const std::vector<ClassDef>& classes, int index);

struct Sample {
  SampleRecord record;
  flow::FrameSequence clip;
};

/// All samples in memory; rgb_path is set to where generate() would write it.
std::vector<Sample> generate_in_memory(const SynthSpec& spec, int threads = 1);

/// Writes clips/<sample_id>.mxt ([T,3,H,W]) and manifest.jsonl under `dir`.
/// Throws IoError when the directory cannot be written.
Manifest generate(const SynthSpec& spec, const std::filesystem::path& dir, int threads = 1);

}  // namespace xmodal::synth
