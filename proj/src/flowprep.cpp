// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/flowprep.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "xmodal/errors.hpp"

namespace xmodal {

void validate_clip_pair(const ClipPair& pair) {
  if (!pair.rgb.defined() || !pair.flow.defined() || pair.rgb.rank() != 4 || pair.flow.rank() != 4 ||
      pair.rgb.dim(0) != 3 || pair.flow.dim(0) != 2) {
    throw DimensionError("clip pair needs rgb [3,T,H,W] and flow [2,T,H,W]");
  }
  for (std::size_t axis = 1; axis < 4; ++axis) {
    if (pair.rgb.dim(axis) != pair.flow.dim(axis)) {
      throw DimensionError("clip pair streams disagree: rgb " + shape_to_string(pair.rgb.shape()) + ", flow " +
                           shape_to_string(pair.flow.shape()));
    }
  }
}

}  // namespace xmodal

namespace xmodal::flow {

namespace {

// Single-channel working image in double precision.
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<double> px;

  Plane() = default;
  Plane(int h, int w, double fill = 0.0) : height(h), width(w), px(static_cast<std::size_t>(h) * w, fill) {}

  double& at(int y, int x) { return px[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return px[static_cast<std::size_t>(y) * width + x]; }
  double clamped(int y, int x) const {
    return at(std::clamp(y, 0, height - 1), std::clamp(x, 0, width - 1));
  }
  double bilinear(double y, double x) const {
    x = std::clamp(x, 0.0, static_cast<double>(width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(height - 1));
    const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, width - 1), y1 = std::min(y0 + 1, height - 1);
    const double fx = x - x0, fy = y - y0;
    return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) + fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
  }
};

Plane plane_from(const Tensor& frame, double gain) {
  Plane p(static_cast<int>(frame.dim(0)), static_cast<int>(frame.dim(1)));
  auto d = frame.data();
  for (std::size_t i = 0; i < p.px.size(); ++i) p.px[i] = gain * d[i];
  return p;
}

std::vector<double> gaussian_taps(int radius, double sigma) {
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    taps[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    total += taps[i + radius];
  }
  for (auto& t : taps) t /= total;
  return taps;
}

Plane separable_filter(const Plane& src, const std::vector<double>& taps) {
  const int radius = static_cast<int>(taps.size() / 2);
  Plane tmp(src.height, src.width), out(src.height, src.width);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += taps[k + radius] * src.clamped(y + k, x);
      tmp.at(y, x) = acc;
    }
  }
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += taps[k + radius] * tmp.clamped(y, x + k);
      out.at(y, x) = acc;
    }
  }
  return out;
}

// Pixel-centre aligned bilinear resampling, used between pyramid levels.
Plane resample_plane(const Plane& src, int height, int width) {
  Plane out(height, width);
  const double sy = static_cast<double>(src.height) / height;
  const double sx = static_cast<double>(src.width) / width;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) out.at(y, x) = src.bilinear((y + 0.5) * sy - 0.5, (x + 0.5) * sx - 0.5);
  }
  return out;
}

// Local quadratic model f(x,y) ~ c + bx*x + by*y + axx*x^2 + ayy*y^2 + axy*x*y,
// fitted by Gaussian-weighted least squares around every pixel.
struct PolyExpansion {
  Plane bx, by, axx, ayy, axy;
};

std::array<std::array<double, 6>, 6> invert6(std::array<std::array<double, 6>, 6> m) {
  std::array<std::array<double, 6>, 6> inv{};
  for (int i = 0; i < 6; ++i) inv[i][i] = 1.0;
  for (int col = 0; col < 6; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 6; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
    }
    std::swap(m[col], m[pivot]);
    std::swap(inv[col], inv[pivot]);
    const double d = m[col][col];
    for (int j = 0; j < 6; ++j) {
      m[col][j] /= d;
      inv[col][j] /= d;
    }
    for (int r = 0; r < 6; ++r) {
      if (r == col) continue;
      const double f = m[r][col];
      if (f == 0.0) continue;
      for (int j = 0; j < 6; ++j) {
        m[r][j] -= f * m[col][j];
        inv[r][j] -= f * inv[col][j];
      }
    }
  }
  return inv;
}

PolyExpansion poly_expand(const Plane& img, int poly_n, double sigma) {
  const int n = poly_n / 2;
  std::vector<double> g(static_cast<std::size_t>(2 * n + 1));
  for (int i = -n; i <= n; ++i) g[i + n] = std::exp(-(i * i) / (2.0 * sigma * sigma));

  // Normal equations of the weighted fit; identical for every pixel.
  // Basis order: 1, x, y, x^2, y^2, xy.
  std::array<std::array<double, 6>, 6> gram{};
  for (int y = -n; y <= n; ++y) {
    for (int x = -n; x <= n; ++x) {
      const double w = g[x + n] * g[y + n];
      const std::array<double, 6> phi{1.0, double(x), double(y), double(x * x), double(y * y), double(x * y)};
      for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) gram[i][j] += w * phi[i] * phi[j];
      }
    }
  }
  const auto ig = invert6(gram);

  const int h = img.height, w = img.width;
  Plane v0(h, w), v1(h, w), v2(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s0 = 0, s1 = 0, s2 = 0;
      for (int k = -n; k <= n; ++k) {
        const double f = g[k + n] * img.clamped(y + k, x);
        s0 += f;
        s1 += k * f;
        s2 += k * k * f;
      }
      v0.at(y, x) = s0;
      v1.at(y, x) = s1;
      v2.at(y, x) = s2;
    }
  }
  PolyExpansion out{Plane(h, w), Plane(h, w), Plane(h, w), Plane(h, w), Plane(h, w)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::array<double, 6> m{};
      for (int k = -n; k <= n; ++k) {
        const double gk = g[k + n];
        const int xx = std::clamp(x + k, 0, w - 1);
        const double a0 = v0.at(y, xx), a1 = v1.at(y, xx), a2 = v2.at(y, xx);
        m[0] += gk * a0;
        m[1] += gk * k * a0;
        m[2] += gk * a1;
        m[3] += gk * k * k * a0;
        m[4] += gk * a2;
        m[5] += gk * k * a1;
      }
      std::array<double, 6> r{};
      for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) r[i] += ig[i][j] * m[j];
      }
      out.bx.at(y, x) = r[1];
      out.by.at(y, x) = r[2];
      out.axx.at(y, x) = r[3];
      out.ayy.at(y, x) = r[4];
      out.axy.at(y, x) = r[5];
    }
  }
  return out;
}

Plane box_filter(const Plane& src, int window) {
  const int r = window / 2;
  Plane tmp(src.height, src.width), out(src.height, src.width);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) acc += src.clamped(y + k, x);
      tmp.at(y, x) = acc;
    }
  }
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) acc += tmp.clamped(y, x + k);
      out.at(y, x) = acc;
    }
  }
  return out;
}

// One refinement of the displacement field (dx, dy) given both expansions.
void refine_flow(const PolyExpansion& e0, const PolyExpansion& e1, int window, Plane& dx, Plane& dy) {
  const int h = dx.height, w = dx.width;
  Plane g11(h, w), g12(h, w), g22(h, w), h1(h, w), h2(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double u = dx.at(y, x), v = dy.at(y, x);
      const double sx = x + u, sy = y + v;
      if (sx < 0 || sy < 0 || sx > w - 1 || sy > h - 1) continue;
      const double a11 = 0.5 * (e0.axx.at(y, x) + e1.axx.bilinear(sy, sx));
      const double a22 = 0.5 * (e0.ayy.at(y, x) + e1.ayy.bilinear(sy, sx));
      const double a12 = 0.25 * (e0.axy.at(y, x) + e1.axy.bilinear(sy, sx));
      const double db1 = -0.5 * (e1.bx.bilinear(sy, sx) - e0.bx.at(y, x)) + a11 * u + a12 * v;
      const double db2 = -0.5 * (e1.by.bilinear(sy, sx) - e0.by.at(y, x)) + a12 * u + a22 * v;
      g11.at(y, x) = a11 * a11 + a12 * a12;
      g12.at(y, x) = a12 * (a11 + a22);
      g22.at(y, x) = a12 * a12 + a22 * a22;
      h1.at(y, x) = a11 * db1 + a12 * db2;
      h2.at(y, x) = a12 * db1 + a22 * db2;
    }
  }
  g11 = box_filter(g11, window);
  g12 = box_filter(g12, window);
  g22 = box_filter(g22, window);
  h1 = box_filter(h1, window);
  h2 = box_filter(h2, window);
  // Regularized 2x2 solve; flat neighbourhoods fall back to zero motion.
  for (std::size_t i = 0; i < dx.px.size(); ++i) {
    const double idet = 1.0 / (g11.px[i] * g22.px[i] - g12.px[i] * g12.px[i] + 1e-3);
    dx.px[i] = (g22.px[i] * h1.px[i] - g12.px[i] * h2.px[i]) * idet;
    dy.px[i] = (g11.px[i] * h2.px[i] - g12.px[i] * h1.px[i]) * idet;
  }
}

void check_unit_range(const Tensor& t, const char* what) {
  for (float v : t.data()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw ContractError(std::string(what) + ": pixel values must lie in [0,1]");
  }
}

}  // namespace

void validate(const FrameSequence& seq) {
  if (!seq.frames.defined() || seq.frames.rank() != 4) throw ContractError("frame sequence must be [T,C,H,W]");
  if (seq.length() < 2) throw ContractError("frame sequence needs at least 2 frames");
  if (seq.channels() != 1 && seq.channels() != 3) throw ContractError("frame sequence must have 1 or 3 channels");
  check_unit_range(seq.frames, "frame sequence");
}

void FarnebackParams::validate() const {
  if (!(pyramid_scale > 0.0 && pyramid_scale < 1.0)) throw ConfigError("farneback.pyramid_scale must lie in (0,1)");
  if (levels < 1) throw ConfigError("farneback.levels must be >= 1");
  if (window < 1 || window % 2 == 0) throw ConfigError("farneback.window must be a positive odd integer");
  if (iterations < 1) throw ConfigError("farneback.iterations must be >= 1");
  if (poly_n < 3 || poly_n % 2 == 0) throw ConfigError("farneback.poly_n must be an odd integer >= 3");
  if (!(poly_sigma > 0.0)) throw ConfigError("farneback.poly_sigma must be positive");
}

FrameSequence resize_bilinear(const FrameSequence& seq, std::int64_t height, std::int64_t width) {
  validate(seq);
  if (height < 1 || width < 1) throw ContractError("resize target must be at least 1x1");
  const std::int64_t t = seq.length(), c = seq.channels(), h = seq.height(), w = seq.width();
  if (h == height && w == width) return FrameSequence{seq.frames.clone(), seq.frame_rate};

  auto src_coord = [](std::int64_t i, std::int64_t in, std::int64_t out) {
    if (out == 1) return (in - 1) / 2.0;
    return static_cast<double>(i) * static_cast<double>(in - 1) / static_cast<double>(out - 1);
  };
  Tensor out(Shape{t, c, height, width});
  auto src = seq.frames.data();
  auto dst = out.data();
  for (std::int64_t plane = 0; plane < t * c; ++plane) {
    const float* p = src.data() + plane * h * w;
    float* q = dst.data() + plane * height * width;
    for (std::int64_t y = 0; y < height; ++y) {
      const double sy = src_coord(y, h, height);
      const std::int64_t y0 = static_cast<std::int64_t>(sy), y1 = std::min(y0 + 1, h - 1);
      const double fy = sy - y0;
      for (std::int64_t x = 0; x < width; ++x) {
        const double sx = src_coord(x, w, width);
        const std::int64_t x0 = static_cast<std::int64_t>(sx), x1 = std::min(x0 + 1, w - 1);
        const double fx = sx - x0;
        const double v = (1 - fy) * ((1 - fx) * p[y0 * w + x0] + fx * p[y0 * w + x1]) +
                         fy * ((1 - fx) * p[y1 * w + x0] + fx * p[y1 * w + x1]);
        q[y * width + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return FrameSequence{std::move(out), seq.frame_rate};
}

FrameSequence resample_time(const FrameSequence& seq, std::int64_t frames_out) {
  validate(seq);
  if (frames_out < 2) throw ContractError("temporal resampling needs at least 2 output frames");
  const std::int64_t t = seq.length();
  const std::int64_t frame_size = seq.channels() * seq.height() * seq.width();
  Tensor out(Shape{frames_out, seq.channels(), seq.height(), seq.width()});
  auto src = seq.frames.data();
  auto dst = out.data();
  for (std::int64_t i = 0; i < frames_out; ++i) {
    const double pos = static_cast<double>(i) * static_cast<double>(t - 1) / static_cast<double>(frames_out - 1);
    const std::int64_t i0 = std::min(static_cast<std::int64_t>(pos), t - 1);
    const double frac = pos - static_cast<double>(i0);
    const float* a = src.data() + i0 * frame_size;
    float* q = dst.data() + i * frame_size;
    if (frac == 0.0 || i0 == t - 1) {
      std::copy_n(a, frame_size, q);
      continue;
    }
    const float* b = a + frame_size;
    for (std::int64_t k = 0; k < frame_size; ++k) {
      q[k] = static_cast<float>((1.0 - frac) * a[k] + frac * b[k]);
    }
  }
  std::optional<double> rate;
  if (seq.frame_rate) rate = *seq.frame_rate * static_cast<double>(frames_out - 1) / static_cast<double>(t - 1);
  return FrameSequence{std::move(out), rate};
}

Tensor to_grayscale(const Tensor& frame) {
  if (frame.rank() != 3 || (frame.dim(0) != 1 && frame.dim(0) != 3)) {
    throw DimensionError("to_grayscale expects [C,H,W] with C = 1 or 3, got " + shape_to_string(frame.shape()));
  }
  const std::int64_t hw = frame.dim(1) * frame.dim(2);
  Tensor out(Shape{frame.dim(1), frame.dim(2)});
  auto src = frame.data();
  auto dst = out.data();
  if (frame.dim(0) == 1) {
    std::copy(src.begin(), src.end(), dst.begin());
  } else {
    for (std::int64_t i = 0; i < hw; ++i) {
      dst[i] = static_cast<float>(0.299 * src[i] + 0.587 * src[hw + i] + 0.114 * src[2 * hw + i]);
    }
  }
  return out;
}

Tensor farneback_flow(const Tensor& prev, const Tensor& next, const FarnebackParams& params) {
  params.validate();
  if (prev.rank() != 2 || prev.shape() != next.shape()) {
    throw DimensionError("farneback_flow: frames must be [H,W] of equal shape");
  }
  const int h = static_cast<int>(prev.dim(0)), w = static_cast<int>(prev.dim(1));
  if (h < params.poly_n || w < params.poly_n) {
    throw ContractError("farneback_flow: frames smaller than the polynomial neighbourhood (poly_n = " +
                        std::to_string(params.poly_n) + ")");
  }
  check_unit_range(prev, "farneback_flow");
  check_unit_range(next, "farneback_flow");

  // Work in 8-bit intensity units so the solver's regularizer has its usual scale.
  const Plane base0 = plane_from(prev, 255.0);
  const Plane base1 = plane_from(next, 255.0);

  constexpr int kMinLevelSize = 16;
  int levels = 1;
  for (int k = 1; k < params.levels; ++k) {
    const double s = std::pow(params.pyramid_scale, k);
    if (std::min(h, w) * s < std::max(kMinLevelSize, params.poly_n)) break;
    ++levels;
  }

  Plane dx, dy;
  for (int k = levels - 1; k >= 0; --k) {
    const double s = std::pow(params.pyramid_scale, k);
    const int lh = k == 0 ? h : std::max(1, static_cast<int>(std::lround(h * s)));
    const int lw = k == 0 ? w : std::max(1, static_cast<int>(std::lround(w * s)));

    Plane img0 = base0, img1 = base1;
    if (k > 0) {
      const double sigma = (1.0 / s - 1.0) * 0.5;
      const int radius = std::max(1, static_cast<int>(std::lround(sigma * 2.5)));
      const auto taps = gaussian_taps(radius, sigma);
      img0 = resample_plane(separable_filter(base0, taps), lh, lw);
      img1 = resample_plane(separable_filter(base1, taps), lh, lw);
    }

    if (dx.px.empty()) {
      dx = Plane(lh, lw);
      dy = Plane(lh, lw);
    } else {
      const double fx = static_cast<double>(lw) / dx.width, fy = static_cast<double>(lh) / dx.height;
      Plane ux = resample_plane(dx, lh, lw), uy = resample_plane(dy, lh, lw);
      for (auto& v : ux.px) v *= fx;
      for (auto& v : uy.px) v *= fy;
      dx = std::move(ux);
      dy = std::move(uy);
    }

    const auto e0 = poly_expand(img0, params.poly_n, params.poly_sigma);
    const auto e1 = poly_expand(img1, params.poly_n, params.poly_sigma);
    for (int it = 0; it < params.iterations; ++it) refine_flow(e0, e1, params.window, dx, dy);
  }

  Tensor out(Shape{2, h, w});
  auto o = out.data();
  for (std::size_t i = 0; i < dx.px.size(); ++i) {
    o[i] = static_cast<float>(dx.px[i]);
    o[dx.px.size() + i] = static_cast<float>(dy.px[i]);
  }
  return out;
}

Tensor flow_clip(const FrameSequence& seq, const FarnebackParams& params) {
  validate(seq);
  const std::int64_t t = seq.length(), c = seq.channels(), h = seq.height(), w = seq.width();
  const std::int64_t frame_size = c * h * w, plane = h * w;
  auto frame = [&](std::int64_t i) {
    std::vector<float> values(seq.frames.data().begin() + i * frame_size,
                              seq.frames.data().begin() + (i + 1) * frame_size);
    return to_grayscale(Tensor(Shape{c, h, w}, std::move(values)));
  };
  Tensor out(Shape{2, t, h, w});
  auto dst = out.data();
  Tensor prev = frame(0);
  for (std::int64_t i = 0; i + 1 < t; ++i) {
    Tensor next = frame(i + 1);
    const Tensor f = farneback_flow(prev, next, params);
    for (int ch = 0; ch < 2; ++ch) {
      std::copy_n(f.data().begin() + ch * plane, plane, dst.begin() + (ch * t + i) * plane);
    }
    prev = std::move(next);
  }
  for (int ch = 0; ch < 2; ++ch) {
    std::copy_n(dst.begin() + (ch * t + t - 2) * plane, plane, dst.begin() + (ch * t + t - 1) * plane);
  }
  return out;
}

void standardize_channels(Tensor& clip) {
  if (clip.rank() < 1) throw DimensionError("standardize_channels needs a leading channel axis");
  const std::int64_t channels = clip.dim(0);
  const std::int64_t count = static_cast<std::int64_t>(clip.numel()) / channels;
  auto d = clip.data();
  for (std::int64_t c = 0; c < channels; ++c) {
    float* p = d.data() + c * count;
    double s = 0.0;
    for (std::int64_t i = 0; i < count; ++i) s += p[i];
    const double mu = s / static_cast<double>(count);
    double ss = 0.0;
    for (std::int64_t i = 0; i < count; ++i) ss += (p[i] - mu) * (p[i] - mu);
    const double sd = std::sqrt(ss / static_cast<double>(count));
    if (sd < 1e-12) {
      std::fill(p, p + count, 0.0f);
      continue;
    }
    for (std::int64_t i = 0; i < count; ++i) p[i] = static_cast<float>((p[i] - mu) / sd);
  }
}

ClipPair clip_to_pair(const FrameSequence& seq, const FarnebackParams& params) {
  validate(seq);
  const std::int64_t t = seq.length(), c = seq.channels(), h = seq.height(), w = seq.width();
  const std::int64_t plane = h * w;
  ClipPair pair;
  pair.rgb = Tensor(Shape{3, t, h, w});
  auto src = seq.frames.data();
  auto rgb = pair.rgb.data();
  for (std::int64_t ch = 0; ch < 3; ++ch) {
    const std::int64_t from = c == 3 ? ch : 0;
    for (std::int64_t i = 0; i < t; ++i) {
      std::copy_n(src.begin() + (i * c + from) * plane, plane, rgb.begin() + (ch * t + i) * plane);
    }
  }
  pair.flow = flow_clip(seq, params);
  standardize_channels(pair.rgb);
  standardize_channels(pair.flow);
  return pair;
}

}  // namespace xmodal::flow
