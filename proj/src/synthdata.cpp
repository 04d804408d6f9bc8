// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

#include "xmodal/errors.hpp"
#include "xmodal/facs.hpp"
#include "xmodal/mxt.hpp"
#include "xmodal/parallel.hpp"
#include "xmodal/rng.hpp"

namespace xmodal::synth {

namespace {

struct AuMotion {
  int au;
  Zone zone;
  double dx, dy;
};

// Directions follow the muscle action named by each description.
constexpr AuMotion kMotions[] = {
    {1, Zone::brow, 0.3, -1.0},   {2, Zone::brow, -0.4, -1.0},  {4, Zone::brow, 0.6, 0.8},
    {5, Zone::eye, 0.0, -1.0},    {6, Zone::cheek, 0.2, -1.0},  {7, Zone::eye, 0.2, 1.0},
    {9, Zone::nose, 0.0, -1.0},   {10, Zone::mouth, 0.0, -1.0}, {11, Zone::cheek, 0.7, -0.7},
    {12, Zone::mouth, -0.8, -0.6}, {13, Zone::cheek, -1.0, 0.0}, {14, Zone::mouth, -1.0, 0.0},
    {15, Zone::mouth, -0.3, 1.0}, {16, Zone::mouth, 0.0, 1.0},  {17, Zone::mouth, 0.0, -1.0},
    {18, Zone::mouth, 1.0, 0.0},  {20, Zone::mouth, -1.0, 0.2}, {22, Zone::mouth, 1.0, -0.3},
    {23, Zone::mouth, 0.8, 0.0},  {24, Zone::mouth, 0.3, -0.8}, {25, Zone::mouth, 0.0, 0.8},
    {26, Zone::mouth, 0.0, 1.0},  {27, Zone::mouth, -0.2, 1.0}, {28, Zone::mouth, 0.0, -0.7},
    {41, Zone::eye, 0.0, 0.7},    {42, Zone::eye, 0.0, 0.9},    {43, Zone::eye, 0.0, 1.0},
    {44, Zone::eye, 0.4, 0.8},    {45, Zone::eye, -0.1, 1.0},   {46, Zone::eye, 0.1, 1.0},
};

const AuMotion& motion_of(int au) {
  for (const auto& m : kMotions) {
    if (m.au == au) return m;
  }
  throw UnknownAuError(au);
}

std::vector<int> aus_in(Zone zone) {
  std::vector<int> out;
  for (const auto& m : kMotions) {
    if (m.zone == zone) out.push_back(m.au);
  }
  return out;
}

std::string sample_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%04d", index);
  return buf;
}

SampleRecord make_record(const SynthSpec& spec, const std::vector<ClassDef>& classes, int index) {
  const auto& cls = classes[index / spec.samples_per_class];
  SampleRecord r;
  r.sample_id = sample_name(index);
  r.subject_id = subject_of(spec, index);
  r.class_id = index / spec.samples_per_class;
  r.class_name = cls.name;
  r.au = facs::format_au_string(cls.aus);
  r.rgb_path = "clips/" + r.sample_id + ".mxt";
  r.frames = spec.frames;
  return r;
}

// Flat-topped bump: close to 1 inside the ellipse, fading out over its rim.
double lobe_weight(const Lobe& lobe, double x, double y, double size) {
  const double u = (x - lobe.cx * size) / (lobe.rx * size);
  const double v = (y - lobe.cy * size) / (lobe.ry * size);
  const double w = 1.0 / (1.0 + std::exp((std::sqrt(u * u + v * v) - 1.0) * 8.0));
  return w < 0.01 ? 0.0 : w;
}

// Unit-amplitude displacement field [2,S,S] of a class.
std::vector<double> displacement_field(const ClassDef& cls, int size) {
  const std::size_t plane = static_cast<std::size_t>(size) * size;
  std::vector<double> field(2 * plane, 0.0);
  for (int au : cls.aus) {
    const auto& m = motion_of(au);
    const double norm = std::hypot(m.dx, m.dy);
    for (const auto& lobe : lobes_of(m.zone)) {
      const double dx = (lobe.mirrored ? -m.dx : m.dx) / norm;
      const double dy = m.dy / norm;
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          const double w = lobe_weight(lobe, x, y, size);
          if (w == 0.0) continue;
          field[y * size + x] += w * dx;
          field[plane + y * size + x] += w * dy;
        }
      }
    }
  }
  return field;
}

double sample_bilinear(const float* img, int size, double x, double y) {
  x = std::clamp(x, 0.0, size - 1.0);
  y = std::clamp(y, 0.0, size - 1.0);
  const int x0 = std::min(static_cast<int>(x), size - 2);
  const int y0 = std::min(static_cast<int>(y), size - 2);
  const double fx = x - x0, fy = y - y0;
  const float* r0 = img + y0 * size;
  const float* r1 = r0 + size;
  return (1 - fy) * ((1 - fx) * r0[x0] + fx * r0[x0 + 1]) + fy * ((1 - fx) * r1[x0] + fx * r1[x0 + 1]);
}

}  // namespace

std::string to_string(Zone zone) {
  switch (zone) {
    case Zone::brow: return "brow";
    case Zone::eye: return "eye";
    case Zone::nose: return "nose";
    case Zone::cheek: return "cheek";
    case Zone::mouth: return "mouth";
  }
  return "?";
}

Zone zone_of(int au) { return motion_of(au).zone; }

std::array<double, 2> direction_of(int au) {
  const auto& m = motion_of(au);
  const double norm = std::hypot(m.dx, m.dy);
  return {m.dx / norm, m.dy / norm};
}

std::vector<Lobe> lobes_of(Zone zone) {
  switch (zone) {
    case Zone::brow: return {{0.30, 0.22, 0.12, 0.07, false}, {0.70, 0.22, 0.12, 0.07, true}};
    case Zone::eye: return {{0.30, 0.40, 0.11, 0.065, false}, {0.70, 0.40, 0.11, 0.065, true}};
    case Zone::nose: return {{0.50, 0.58, 0.09, 0.10, false}};
    case Zone::cheek: return {{0.19, 0.63, 0.09, 0.10, false}, {0.81, 0.63, 0.09, 0.10, true}};
    case Zone::mouth: return {{0.37, 0.83, 0.10, 0.075, false}, {0.63, 0.83, 0.10, 0.075, true}};
  }
  return {};
}

std::int64_t max_classes() {
  std::int64_t total = 0;
  for (int a = 0; a < kZoneCount; ++a) {
    for (int b = a + 1; b < kZoneCount; ++b) {
      total += static_cast<std::int64_t>(aus_in(Zone(a)).size() * aus_in(Zone(b)).size());
    }
  }
  return total;
}

std::vector<ClassDef> class_au_table(int n_classes, std::uint64_t seed) {
  if (n_classes < 2) throw ConfigError("at least 2 classes are required");
  if (n_classes > max_classes()) {
    throw ConfigError("cannot build " + std::to_string(n_classes) + " distinct AU pairs (at most " +
                      std::to_string(max_classes()) + ")");
  }
  std::vector<std::pair<int, int>> zone_pairs;
  for (int a = 0; a < kZoneCount; ++a) {
    for (int b = a + 1; b < kZoneCount; ++b) zone_pairs.emplace_back(a, b);
  }
  Rng rng(derive_seed(seed, 0xC1A55));
  rng.shuffle(zone_pairs.begin(), zone_pairs.end());

  std::set<std::pair<int, int>> used;
  std::vector<ClassDef> classes;
  for (int c = 0; c < n_classes; ++c) {
    for (std::size_t step = 0; step < zone_pairs.size(); ++step) {
      const auto [za, zb] = zone_pairs[(c + step) % zone_pairs.size()];
      std::vector<std::pair<int, int>> options;
      for (int a : aus_in(Zone(za))) {
        for (int b : aus_in(Zone(zb))) {
          const auto key = std::minmax(a, b);
          if (!used.count(key)) options.push_back(key);
        }
      }
      if (options.empty()) continue;
      const auto pick = options[rng.below(options.size())];
      used.insert(pick);
      ClassDef def;
      def.aus = {pick.first, pick.second};
      def.zones = {zone_of(pick.first), zone_of(pick.second)};
      def.name = "class" + std::to_string(c) + "_" + to_string(def.zones[0]) + "_" + to_string(def.zones[1]);
      classes.push_back(std::move(def));
      break;
    }
  }
  return classes;
}

void SynthSpec::validate() const {
  if (n_classes < 2) throw ConfigError("synth: n_classes must be at least 2");
  if (samples_per_class < 1) throw ConfigError("synth: samples_per_class must be positive");
  if (n_subjects < 5) throw ConfigError("synth: n_subjects must be at least 5");
  if (n_subjects > sample_count()) throw ConfigError("synth: more subjects than samples");
  if (frames < 2) throw ConfigError("synth: frames must be at least 2");
  if (size < 16) throw ConfigError("synth: size must be at least 16");
  if (!(motion_amplitude > 0.0)) throw ConfigError("synth: motion_amplitude must be positive");
  if (!(noise_sigma >= 0.0)) throw ConfigError("synth: noise_sigma must be non-negative");
}

int subject_of(const SynthSpec& spec, int index) { return 1 + index % spec.n_subjects; }

Tensor face_template(const SynthSpec& spec, int subject_id) {
  const int s = spec.size;
  Rng rng(derive_seed(spec.seed, 0x5B1EC7000ULL + static_cast<std::uint64_t>(subject_id)));
  std::vector<double> gray(static_cast<std::size_t>(s) * s);
  struct Blob {
    double x, y, sigma, amp;
  };
  std::vector<Blob> blobs;
  // Dense mottled texture everywhere, so that optical flow is well posed
  // away from the moving zones too.
  const double min_sigma = std::max(1.2, 0.012 * s);
  for (int i = 0; i < 220; ++i) {
    blobs.push_back({rng.uniform(0.0, 1.0) * s, rng.uniform(0.0, 1.0) * s, rng.uniform(min_sigma, 2.2 * min_sigma),
                     rng.uniform(-0.4, 0.4)});
  }
  // Darker features give the face recognisable structure.
  for (const auto& [zone, amp] : {std::pair{Zone::brow, -0.25}, {Zone::eye, -0.3}, {Zone::mouth, -0.2}}) {
    for (const auto& lobe : lobes_of(zone)) blobs.push_back({lobe.cx * s, lobe.cy * s, lobe.ry * s * 0.6, amp});
  }
  const double tone = rng.uniform(0.5, 0.65);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      const double u = (x - 0.5 * s) / (0.42 * s), v = (y - 0.53 * s) / (0.48 * s);
      const double inside = 1.0 / (1.0 + std::exp((std::sqrt(u * u + v * v) - 1.0) * 12.0));
      double value = 0.3 + (tone - 0.3) * inside;
      for (const auto& b : blobs) {
        const double dx = x - b.x, dy = y - b.y;
        const double r2 = (dx * dx + dy * dy) / (b.sigma * b.sigma);
        if (r2 < 16.0) value += b.amp * std::exp(-0.5 * r2);
      }
      gray[y * s + x] = std::clamp(value, 0.02, 0.98);
    }
  }
  Tensor out(Shape{3, s, s});
  auto d = out.data();
  const double gain[3] = {0.95, 0.82, 0.72}, offset[3] = {0.04, 0.05, 0.06};
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < gray.size(); ++i) {
      d[c * gray.size() + i] = static_cast<float>(std::clamp(gain[c] * gray[i] + offset[c], 0.0, 1.0));
    }
  }
  return out;
}

Tensor activity_mask(const SynthSpec& spec, const ClassDef& cls) {
  const int s = spec.size;
  const auto field = displacement_field(cls, s);
  const std::size_t plane = static_cast<std::size_t>(s) * s;
  Tensor out(Shape{s, s});
  for (std::size_t i = 0; i < plane; ++i) {
    out.data()[i] = static_cast<float>(std::hypot(field[i], field[plane + i]));
  }
  return out;
}

double motion_profile(double t, int frames, double apex) {
  const double onset = 0.1 * (frames - 1), offset = 0.9 * (frames - 1);
  if (t <= onset || t >= offset) return 0.0;
  if (t <= apex) return 0.5 * (1.0 - std::cos(std::numbers::pi * (t - onset) / (apex - onset)));
  return 0.5 * (1.0 + std::cos(std::numbers::pi * (t - apex) / (offset - apex)));
}

flow::FrameSequence render_sample(const SynthSpec& spec, const std::vector<ClassDef>& classes, int index) {
  const int cls_index = index / spec.samples_per_class;
  if (index < 0 || cls_index >= static_cast<int>(classes.size())) throw ContractError("render_sample: bad index");
  const int s = spec.size;
  const std::size_t plane = static_cast<std::size_t>(s) * s;
  const Tensor face = face_template(spec, subject_of(spec, index));
  const auto field = displacement_field(classes[cls_index], s);

  Rng rng(derive_seed(spec.seed, 0x5A3D1E000ULL + static_cast<std::uint64_t>(index)));
  const double apex = (spec.frames - 1) * rng.uniform(0.4, 0.55);
  const double amplitude = spec.motion_amplitude * rng.uniform(0.85, 1.15);

  flow::FrameSequence seq;
  seq.frames = Tensor(Shape{spec.frames, 3, s, s});
  auto out = seq.frames.data();
  for (int t = 0; t < spec.frames; ++t) {
    const double a = amplitude * motion_profile(t, spec.frames, apex);
    for (int c = 0; c < 3; ++c) {
      const float* src = face.data().data() + c * plane;
      float* dst = out.data() + (static_cast<std::size_t>(t) * 3 + c) * plane;
      for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * s + x;
          const double dx = a * field[i], dy = a * field[plane + i];
          const double v = (dx == 0.0 && dy == 0.0) ? src[i] : sample_bilinear(src, s, x - dx, y - dy);
          dst[i] = static_cast<float>(v);
        }
      }
    }
    // Independent sensor noise per colour channel.
    for (int c = 0; c < 3; ++c) {
      float* dst = out.data() + (static_cast<std::size_t>(t) * 3 + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        dst[i] = static_cast<float>(std::clamp(dst[i] + spec.noise_sigma * rng.normal(), 0.0, 1.0));
      }
    }
  }
  return seq;
}

std::vector<Sample> generate_in_memory(const SynthSpec& spec, int threads) {
  spec.validate();
  const auto classes = class_au_table(spec.n_classes, spec.seed);
  std::vector<Sample> samples(static_cast<std::size_t>(spec.sample_count()));
  parallel_for(spec.sample_count(), threads, [&](std::int64_t i) {
    const int index = static_cast<int>(i);
    samples[i].record = make_record(spec, classes, index);
    samples[i].clip = render_sample(spec, classes, index);
  });
  return samples;
}

Manifest generate(const SynthSpec& spec, const std::filesystem::path& dir, int threads) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir / "clips", ec);
  if (ec) throw IoError("cannot create dataset directory " + (dir / "clips").string() + ": " + ec.message());
  const auto classes = class_au_table(spec.n_classes, spec.seed);
  Manifest manifest;
  manifest.rows.resize(static_cast<std::size_t>(spec.sample_count()));
  parallel_for(spec.sample_count(), threads, [&](std::int64_t i) {
    const int index = static_cast<int>(i);
    const auto& r = manifest.rows[i] = make_record(spec, classes, index);
    mxt::save(dir / r.rgb_path, render_sample(spec, classes, index).frames);
  });
  manifest.save(dir);
  return manifest;
}

}  // namespace xmodal::synth
