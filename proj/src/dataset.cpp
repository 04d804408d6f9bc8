// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/dataset.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <mutex>

#include "xmodal/errors.hpp"
#include "xmodal/mxt.hpp"
#include "xmodal/parallel.hpp"

namespace xmodal::data {

namespace fs = std::filesystem;

void PrepOptions::validate() const {
  if (frames < 2) throw ConfigError("prep: frames must be at least 2");
  if (size < farneback.poly_n) throw ConfigError("prep: size must be at least poly_n");
  farneback.validate();
}

Tensor read_png(const fs::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!file) throw IoError("cannot open " + path.string());
  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    throw IoError(path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng initialisation failed");
  }
  std::vector<png_byte> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;
  int channels = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("corrupt PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  pixels.resize(stride * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * stride;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  if (channels != 1 && channels != 3) throw IoError("unsupported PNG channel count in " + path.string());
  const std::int64_t h = height, w = width;
  Tensor out(Shape{channels, h, w});
  auto d = out.data();
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        d[(c * h + y) * w + x] = static_cast<float>(rows[y][x * channels + c]) / 255.0f;
      }
    }
  }
  return out;
}

flow::FrameSequence load_frames(const fs::path& path) {
  flow::FrameSequence seq;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      auto ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
      if (entry.is_regular_file() && ext == ".png") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.size() < 2) throw IoError("frame directory " + path.string() + " holds fewer than 2 PNG frames");
    std::vector<Tensor> frames;
    for (const auto& f : files) frames.push_back(read_png(f));
    const Shape first = frames.front().shape();
    for (std::size_t i = 1; i < frames.size(); ++i) {
      if (frames[i].shape() != first) throw IoError("frame " + files[i].string() + " differs in size or channels");
    }
    const auto t = static_cast<std::int64_t>(frames.size());
    seq.frames = Tensor(Shape{t, first[0], first[1], first[2]});
    const std::size_t n = frames.front().numel();
    for (std::int64_t i = 0; i < t; ++i) {
      std::copy_n(frames[i].data().begin(), n, seq.frames.data().begin() + i * n);
    }
  } else {
    seq.frames = mxt::load(path);
    if (seq.frames.rank() != 4) throw IoError(path.string() + " is not a [T,C,H,W] clip");
  }
  try {
    flow::validate(seq);
  } catch (const Error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return seq;
}

ClipPair preprocess(const flow::FrameSequence& seq, const PrepOptions& options) {
  options.validate();
  const auto resized = flow::resize_bilinear(seq, options.size, options.size);
  const auto resampled = flow::resample_time(resized, options.frames);
  return flow::clip_to_pair(resampled, options.farneback);
}

void label(ClipPair& pair, const SampleRecord& record) {
  pair.sample_id = record.sample_id;
  pair.subject_id = record.subject_id;
  pair.class_id = record.class_id;
  pair.au_string = record.au;
}

std::vector<ClipPair> prepare_samples(const std::vector<synth::Sample>& samples, const PrepOptions& options,
                                      int threads) {
  std::vector<ClipPair> out(samples.size());
  parallel_for(static_cast<std::int64_t>(samples.size()), threads, [&](std::int64_t i) {
    out[i] = preprocess(samples[i].clip, options);
    label(out[i], samples[i].record);
  });
  return out;
}

Manifest prepare_dataset(const fs::path& in_dir, const fs::path& out_dir, const PrepOptions& options, bool strict,
                         int threads, const LogFn& log) {
  options.validate();
  const Manifest in = Manifest::load(in_dir);
  std::error_code ec;
  fs::create_directories(out_dir / "clips", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "clips").string() + ": " + ec.message());

  std::vector<SampleRecord> rows(in.rows.size());
  std::vector<char> ok(in.rows.size(), 0);
  std::mutex log_mutex;
  parallel_for(static_cast<std::int64_t>(in.rows.size()), threads, [&](std::int64_t i) {
    const auto& src = in.rows[i];
    flow::FrameSequence seq;
    try {
      seq = load_frames(in_dir / src.rgb_path);
    } catch (const IoError& e) {
      if (strict) throw;
      if (log) {
        std::lock_guard lock(log_mutex);
        log("skipping " + src.sample_id + ": " + e.what());
      }
      return;
    }
    const ClipPair pair = preprocess(seq, options);
    SampleRecord r = src;
    r.rgb_path = "clips/" + src.sample_id + ".rgb.mxt";
    r.flow_path = "clips/" + src.sample_id + ".flow.mxt";
    r.frames = options.frames;
    mxt::save(out_dir / r.rgb_path, pair.rgb);
    mxt::save(out_dir / r.flow_path, pair.flow);
    rows[i] = std::move(r);
    ok[i] = 1;
  });
  Manifest out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (ok[i]) out.rows.push_back(std::move(rows[i]));
  }
  out.save(out_dir);
  return out;
}

std::vector<ClipPair> load_prepared(const fs::path& dir) {
  const Manifest m = Manifest::load(dir);
  std::vector<ClipPair> pairs;
  pairs.reserve(m.rows.size());
  for (const auto& r : m.rows) {
    if (r.flow_path.empty()) {
      throw IoError("sample " + r.sample_id + " has no flow_path; run prep on " + dir.string() + " first");
    }
    ClipPair p;
    p.rgb = mxt::load(dir / r.rgb_path);
    p.flow = mxt::load(dir / r.flow_path);
    label(p, r);
    validate_clip_pair(p);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace xmodal::data
