// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gemm.hpp"
#include "xmodal/errors.hpp"

namespace xmodal {

namespace {

template <class T>
using NodePtr = std::shared_ptr<TensorNode<T>>;

template <class T>
void ensure_finite(const BasicTensor<T>& t, const char* op) {
  for (T v : t.data()) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + " produced a non-finite value");
  }
}

template <class T>
void expect_rank(const BasicTensor<T>& t, std::size_t rank, const char* op, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                         ", got " + shape_to_string(t.shape()));
  }
}

template <class T>
void expect_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()) + " differ");
  }
}

struct ConvGeometry {
  std::int64_t n, c, t, h, w;        // input
  std::int64_t f, kt, kh, kw;        // kernel
  std::int64_t ot, oh, ow;           // output
  std::array<int, 3> stride, pad;

  std::int64_t in_plane() const { return c * t * h * w; }
  std::int64_t out_positions() const { return ot * oh * ow; }
  std::int64_t patch() const { return c * kt * kh * kw; }
};

template <class T>
ConvGeometry conv_geometry(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                           const Conv3dOptions& opts) {
  expect_rank(input, 5, "conv3d", "input");
  expect_rank(weight, 5, "conv3d", "weight");
  if (input.dim(1) != weight.dim(1)) {
    throw DimensionError("conv3d: input has " + std::to_string(input.dim(1)) +
                         " channels but kernel expects " + std::to_string(weight.dim(1)));
  }
  for (int s : opts.stride) {
    if (s < 1) throw ContractError("conv3d: stride components must be >= 1");
  }
  for (int p : opts.padding) {
    if (p < 0) throw ContractError("conv3d: padding must be non-negative");
  }
  ConvGeometry g{};
  g.n = input.dim(0);
  g.c = input.dim(1);
  g.t = input.dim(2);
  g.h = input.dim(3);
  g.w = input.dim(4);
  g.f = weight.dim(0);
  g.kt = weight.dim(2);
  g.kh = weight.dim(3);
  g.kw = weight.dim(4);
  g.stride = opts.stride;
  g.pad = opts.padding;
  g.ot = conv_out_extent(g.t, static_cast<int>(g.kt), opts.stride[0], opts.padding[0]);
  g.oh = conv_out_extent(g.h, static_cast<int>(g.kh), opts.stride[1], opts.padding[1]);
  g.ow = conv_out_extent(g.w, static_cast<int>(g.kw), opts.stride[2], opts.padding[2]);
  return g;
}

// First output index whose input coordinate w0 + o*stride is >= 0.
std::int64_t valid_begin(std::int64_t w0, int stride) {
  return w0 >= 0 ? 0 : (-w0 + stride - 1) / stride;
}

// One past the last output index whose input coordinate is < extent.
std::int64_t valid_end(std::int64_t w0, int stride, std::int64_t extent, std::int64_t outputs) {
  if (w0 >= extent) return 0;
  return std::min(outputs, (extent - 1 - w0) / stride + 1);
}

// col[K, ld]: one row per kernel tap (c, kt, kh, kw), one column per output
// voxel. `ld` lets several samples share one column matrix side by side.
template <class T>
void vol2col(const T* x, const ConvGeometry& g, T* col, std::int64_t ld) {
  const std::int64_t positions = ld;
  std::int64_t row = 0;
  for (std::int64_t c = 0; c < g.c; ++c) {
    for (std::int64_t it = 0; it < g.kt; ++it) {
      for (std::int64_t ih = 0; ih < g.kh; ++ih) {
        for (std::int64_t iw = 0; iw < g.kw; ++iw, ++row) {
          T* dst = col + row * positions;
          for (std::int64_t ot = 0; ot < g.ot; ++ot) {
            const std::int64_t t = ot * g.stride[0] - g.pad[0] + it;
            for (std::int64_t oh = 0; oh < g.oh; ++oh) {
              const std::int64_t h = oh * g.stride[1] - g.pad[1] + ih;
              T* out = dst + (ot * g.oh + oh) * g.ow;
              if (t < 0 || t >= g.t || h < 0 || h >= g.h) {
                std::fill(out, out + g.ow, T(0));
                continue;
              }
              const T* src = x + ((c * g.t + t) * g.h + h) * g.w;
              const std::int64_t w0 = iw - g.pad[2];
              const std::int64_t lo = std::min(g.ow, valid_begin(w0, g.stride[2]));
              const std::int64_t hi = std::max(lo, valid_end(w0, g.stride[2], g.w, g.ow));
              std::fill(out, out + lo, T(0));
              if (g.stride[2] == 1) {
                std::copy(src + w0 + lo, src + w0 + hi, out + lo);
              } else {
                for (std::int64_t ow = lo; ow < hi; ++ow) out[ow] = src[w0 + ow * g.stride[2]];
              }
              std::fill(out + hi, out + g.ow, T(0));
            }
          }
        }
      }
    }
  }
}

template <class T>
void col2vol(const T* col, const ConvGeometry& g, T* dx, std::int64_t ld) {
  const std::int64_t positions = ld;
  std::int64_t row = 0;
  for (std::int64_t c = 0; c < g.c; ++c) {
    for (std::int64_t it = 0; it < g.kt; ++it) {
      for (std::int64_t ih = 0; ih < g.kh; ++ih) {
        for (std::int64_t iw = 0; iw < g.kw; ++iw, ++row) {
          const T* src_row = col + row * positions;
          for (std::int64_t ot = 0; ot < g.ot; ++ot) {
            const std::int64_t t = ot * g.stride[0] - g.pad[0] + it;
            if (t < 0 || t >= g.t) continue;
            for (std::int64_t oh = 0; oh < g.oh; ++oh) {
              const std::int64_t h = oh * g.stride[1] - g.pad[1] + ih;
              if (h < 0 || h >= g.h) continue;
              const T* src = src_row + (ot * g.oh + oh) * g.ow;
              T* dst = dx + ((c * g.t + t) * g.h + h) * g.w;
              const std::int64_t w0 = iw - g.pad[2];
              const std::int64_t lo = valid_begin(w0, g.stride[2]);
              const std::int64_t hi = valid_end(w0, g.stride[2], g.w, g.ow);
              for (std::int64_t ow = lo; ow < hi; ++ow) dst[w0 + ow * g.stride[2]] += src[ow];
            }
          }
        }
      }
    }
  }
}

template <class T>
BasicTensor<T> elementwise_binary(BasicTape<T>& tape, const BasicTensor<T>& a,
                                  const BasicTensor<T>& b, const char* name, int kind) {
  expect_same_shape(a, b, name);
  BasicTensor<T> out(a.shape());
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    switch (kind) {
      case 0: o[i] = x[i] + y[i]; break;
      case 1: o[i] = x[i] - y[i]; break;
      case 2: o[i] = x[i] * y[i]; break;
      default:
        if (y[i] == T(0)) throw DegenerateInputError("div: zero denominator");
        o[i] = x[i] / y[i];
    }
  }
  ensure_finite(out, name);
  if (tape.wants({&a, &b})) {
    tape.record(name, {a.node(), b.node()}, out, [an = a.node(), bn = b.node(), on = out.node(), kind] {
      const auto& g = on->grad;
      if (an->requires_grad) {
        auto& ga = grad_of(*an);
        for (std::size_t i = 0; i < g.size(); ++i) {
          switch (kind) {
            case 0:
            case 1: ga[i] += g[i]; break;
            case 2: ga[i] += g[i] * bn->data[i]; break;
            default: ga[i] += g[i] / bn->data[i];
          }
        }
      }
      if (bn->requires_grad) {
        auto& gb = grad_of(*bn);
        for (std::size_t i = 0; i < g.size(); ++i) {
          switch (kind) {
            case 0: gb[i] += g[i]; break;
            case 1: gb[i] -= g[i]; break;
            case 2: gb[i] += g[i] * an->data[i]; break;
            default: gb[i] -= g[i] * an->data[i] / (bn->data[i] * bn->data[i]);
          }
        }
      }
    });
  }
  return out;
}

}  // namespace

std::int64_t conv_out_extent(std::int64_t in, int kernel, int stride, int pad) {
  const std::int64_t span = in + 2 * static_cast<std::int64_t>(pad) - kernel;
  if (span < 0) {
    throw DimensionError("kernel of size " + std::to_string(kernel) + " does not fit padded extent " +
                        std::to_string(in + 2 * pad));
  }
  return span / stride + 1;
}

// Samples per gemm: enough columns to keep the multiply efficient in deep
// stages where each sample has only a handful of output voxels.
std::int64_t conv_chunk(const ConvGeometry& g) {
  const std::int64_t positions = g.out_positions();
  std::int64_t chunk = std::max<std::int64_t>(1, 2048 / positions);
  const std::int64_t max_col = std::int64_t{1} << 25;
  chunk = std::min(chunk, std::max<std::int64_t>(1, max_col / (g.patch() * positions)));
  return std::min(chunk, g.n);
}

template <class T>
BasicTensor<T> conv3d(BasicTape<T>& tape, const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const Conv3dOptions& opts) {
  const ConvGeometry g = conv_geometry(input, weight, opts);
  BasicTensor<T> out(Shape{g.n, g.f, g.ot, g.oh, g.ow});
  const std::int64_t positions = g.out_positions();
  const std::int64_t patch = g.patch();
  const std::int64_t chunk = conv_chunk(g);
  std::vector<T> col(static_cast<std::size_t>(patch * positions * chunk));
  std::vector<T> staged(chunk > 1 ? static_cast<std::size_t>(g.f * positions * chunk) : 0);
  const T* x = input.data().data();
  const T* w = weight.data().data();
  T* y = out.data().data();
  for (std::int64_t n0 = 0; n0 < g.n; n0 += chunk) {
    const std::int64_t nc = std::min(chunk, g.n - n0);
    const std::int64_t ld = nc * positions;
    for (std::int64_t j = 0; j < nc; ++j) vol2col(x + (n0 + j) * g.in_plane(), g, col.data() + j * positions, ld);
    T* dst = nc > 1 ? staged.data() : y + n0 * g.f * positions;
    detail::gemm(false, false, static_cast<int>(g.f), static_cast<int>(ld), static_cast<int>(patch), T(1), w,
                 static_cast<int>(patch), col.data(), static_cast<int>(ld), T(0), dst, static_cast<int>(ld));
    if (nc > 1) {
      for (std::int64_t j = 0; j < nc; ++j) {
        for (std::int64_t f = 0; f < g.f; ++f) {
          const T* src = staged.data() + f * ld + j * positions;
          std::copy(src, src + positions, y + ((n0 + j) * g.f + f) * positions);
        }
      }
    }
  }
  col.clear();
  col.shrink_to_fit();
  ensure_finite(out, "conv3d");

  if (tape.wants({&input, &weight})) {
    tape.record("conv3d", {input.node(), weight.node()}, out,
                [xn = input.node(), wn = weight.node(), on = out.node(), g] {
                  const std::int64_t positions = g.out_positions();
                  const std::int64_t patch = g.patch();
                  const std::int64_t chunk = conv_chunk(g);
                  const int k = static_cast<int>(patch);
                  const int f = static_cast<int>(g.f);
                  std::vector<T> col(static_cast<std::size_t>(patch * positions * chunk));
                  std::vector<T> staged(chunk > 1 ? static_cast<std::size_t>(g.f * positions * chunk) : 0);
                  const T* dy = on->grad.data();
                  T* dw = wn->requires_grad ? grad_of(*wn).data() : nullptr;
                  T* dx = xn->requires_grad ? grad_of(*xn).data() : nullptr;
                  for (std::int64_t n0 = 0; n0 < g.n; n0 += chunk) {
                    const std::int64_t nc = std::min(chunk, g.n - n0);
                    const std::int64_t ld = nc * positions;
                    const int p = static_cast<int>(ld);
                    const T* dy_c = dy + n0 * g.f * positions;
                    if (nc > 1) {
                      for (std::int64_t j = 0; j < nc; ++j) {
                        for (std::int64_t ff = 0; ff < g.f; ++ff) {
                          const T* src = dy + ((n0 + j) * g.f + ff) * positions;
                          std::copy(src, src + positions, staged.data() + ff * ld + j * positions);
                        }
                      }
                      dy_c = staged.data();
                    }
                    if (dw) {
                      for (std::int64_t j = 0; j < nc; ++j) {
                        vol2col(xn->data.data() + (n0 + j) * g.in_plane(), g, col.data() + j * positions, ld);
                      }
                      detail::gemm(false, true, f, k, p, T(1), dy_c, p, col.data(), p, T(1), dw, k);
                    }
                    if (dx) {
                      detail::gemm(true, false, k, p, f, T(1), wn->data.data(), k, dy_c, p, T(0), col.data(), p);
                      for (std::int64_t j = 0; j < nc; ++j) {
                        col2vol(col.data() + j * positions, g, dx + (n0 + j) * g.in_plane(), ld);
                      }
                    }
                  }
                });
  }
  return out;
}

template <class T>
BasicTensor<T> conv3d_direct(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                             const Conv3dOptions& opts) {
  const ConvGeometry g = conv_geometry(input, weight, opts);
  BasicTensor<T> out(Shape{g.n, g.f, g.ot, g.oh, g.ow});
  auto x = input.data();
  auto w = weight.data();
  auto y = out.data();
  std::size_t idx = 0;
  for (std::int64_t n = 0; n < g.n; ++n) {
    for (std::int64_t f = 0; f < g.f; ++f) {
      for (std::int64_t ot = 0; ot < g.ot; ++ot) {
        for (std::int64_t oh = 0; oh < g.oh; ++oh) {
          for (std::int64_t ow = 0; ow < g.ow; ++ow, ++idx) {
            double acc = 0.0;
            for (std::int64_t c = 0; c < g.c; ++c) {
              for (std::int64_t it = 0; it < g.kt; ++it) {
                const std::int64_t t = ot * g.stride[0] - g.pad[0] + it;
                if (t < 0 || t >= g.t) continue;
                for (std::int64_t ih = 0; ih < g.kh; ++ih) {
                  const std::int64_t h = oh * g.stride[1] - g.pad[1] + ih;
                  if (h < 0 || h >= g.h) continue;
                  for (std::int64_t iw = 0; iw < g.kw; ++iw) {
                    const std::int64_t ww = ow * g.stride[2] - g.pad[2] + iw;
                    if (ww < 0 || ww >= g.w) continue;
                    acc += static_cast<double>(x[(((n * g.c + c) * g.t + t) * g.h + h) * g.w + ww]) *
                           static_cast<double>(w[(((f * g.c + c) * g.kt + it) * g.kh + ih) * g.kw + iw]);
                  }
                }
              }
            }
            y[idx] = static_cast<T>(acc);
          }
        }
      }
    }
  }
  return out;
}

template <class T>
BasicTensor<T> linear(BasicTape<T>& tape, const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias) {
  expect_rank(input, 2, "linear", "input");
  expect_rank(weight, 2, "linear", "weight");
  expect_rank(bias, 1, "linear", "bias");
  const std::int64_t n = input.dim(0), d = input.dim(1), e = weight.dim(1);
  if (weight.dim(0) != d || bias.dim(0) != e) {
    throw DimensionError("linear: cannot apply weight " + shape_to_string(weight.shape()) + " and bias " +
                         shape_to_string(bias.shape()) + " to input " + shape_to_string(input.shape()));
  }
  BasicTensor<T> out(Shape{n, e});
  auto y = out.data();
  for (std::int64_t i = 0; i < n; ++i) std::copy(bias.data().begin(), bias.data().end(), y.begin() + i * e);
  detail::gemm(false, false, static_cast<int>(n), static_cast<int>(e), static_cast<int>(d), T(1),
               input.data().data(), static_cast<int>(d), weight.data().data(), static_cast<int>(e), T(1),
               y.data(), static_cast<int>(e));
  ensure_finite(out, "linear");
  if (tape.wants({&input, &weight, &bias})) {
    tape.record("linear", {input.node(), weight.node(), bias.node()}, out,
                [xn = input.node(), wn = weight.node(), bn = bias.node(), on = out.node(), n, d, e] {
                  const T* dy = on->grad.data();
                  const int ni = static_cast<int>(n), di = static_cast<int>(d), ei = static_cast<int>(e);
                  if (xn->requires_grad) {
                    detail::gemm(false, true, ni, di, ei, T(1), dy, ei, wn->data.data(), ei, T(1),
                                 grad_of(*xn).data(), di);
                  }
                  if (wn->requires_grad) {
                    detail::gemm(true, false, di, ei, ni, T(1), xn->data.data(), di, dy, ei, T(1),
                                 grad_of(*wn).data(), ei);
                  }
                  if (bn->requires_grad) {
                    auto& gb = grad_of(*bn);
                    for (std::int64_t i = 0; i < n; ++i) {
                      for (std::int64_t j = 0; j < e; ++j) gb[j] += dy[i * e + j];
                    }
                  }
                });
  }
  return out;
}

template <class T>
BasicTensor<T> softmax(BasicTape<T>& tape, const BasicTensor<T>& input) {
  expect_rank(input, 2, "softmax", "input");
  const std::int64_t rows = input.dim(0), cols = input.dim(1);
  BasicTensor<T> out(input.shape());
  auto x = input.data();
  auto y = out.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const auto row = x.subspan(r * cols, cols);
    const T peak = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (std::int64_t c = 0; c < cols; ++c) total += std::exp(static_cast<double>(row[c]) - peak);
    for (std::int64_t c = 0; c < cols; ++c) {
      y[r * cols + c] = static_cast<T>(std::exp(static_cast<double>(row[c]) - peak) / total);
    }
  }
  ensure_finite(out, "softmax");
  if (tape.wants({&input})) {
    tape.record("softmax", {input.node()}, out, [xn = input.node(), on = out.node(), rows, cols] {
      const auto& g = on->grad;
      const auto& p = on->data;
      auto& gx = grad_of(*xn);
      for (std::int64_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::int64_t c = 0; c < cols; ++c) dot += static_cast<double>(g[r * cols + c]) * p[r * cols + c];
        for (std::int64_t c = 0; c < cols; ++c) {
          gx[r * cols + c] += static_cast<T>(p[r * cols + c] * (g[r * cols + c] - dot));
        }
      }
    });
  }
  return out;
}

template <class T>
BasicTensor<T> cosine_similarity(BasicTape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  expect_rank(a, 1, "cosine_similarity", "a");
  expect_same_shape(a, b, "cosine_similarity");
  double dot = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double x = a.data()[i], y = b.data()[i];
    dot += x * y;
    aa += x * x;
    bb += y * y;
  }
  if (aa == 0.0 || bb == 0.0) throw DegenerateInputError("cosine_similarity: zero-norm argument");
  const double na = std::sqrt(aa), nb = std::sqrt(bb);
  const double cosine = std::clamp(dot / (na * nb), -1.0, 1.0);
  auto out = BasicTensor<T>::scalar(static_cast<T>(cosine));
  if (tape.wants({&a, &b})) {
    tape.record("cosine_similarity", {a.node(), b.node()}, out,
                [an = a.node(), bn = b.node(), on = out.node(), na, nb, cosine] {
                  const double g = on->grad[0];
                  const double inv = 1.0 / (na * nb);
                  if (an->requires_grad) {
                    auto& ga = grad_of(*an);
                    for (std::size_t i = 0; i < ga.size(); ++i) {
                      ga[i] += static_cast<T>(g * (bn->data[i] * inv - cosine * an->data[i] / (na * na)));
                    }
                  }
                  if (bn->requires_grad) {
                    auto& gb = grad_of(*bn);
                    for (std::size_t i = 0; i < gb.size(); ++i) {
                      gb[i] += static_cast<T>(g * (an->data[i] * inv - cosine * bn->data[i] / (nb * nb)));
                    }
                  }
                });
  }
  return out;
}

template <class T>
BasicTensor<T> concat(BasicTape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  expect_rank(a, 2, "concat", "a");
  expect_rank(b, 2, "concat", "b");
  if (a.dim(0) != b.dim(0)) {
    throw DimensionError("concat: leading dimensions differ: " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
  const std::int64_t n = a.dim(0), d1 = a.dim(1), d2 = b.dim(1);
  BasicTensor<T> out(Shape{n, d1 + d2});
  auto y = out.data();
  for (std::int64_t i = 0; i < n; ++i) {
    std::copy_n(a.data().begin() + i * d1, d1, y.begin() + i * (d1 + d2));
    std::copy_n(b.data().begin() + i * d2, d2, y.begin() + i * (d1 + d2) + d1);
  }
  if (tape.wants({&a, &b})) {
    tape.record("concat", {a.node(), b.node()}, out, [an = a.node(), bn = b.node(), on = out.node(), n, d1, d2] {
      const auto& g = on->grad;
      if (an->requires_grad) {
        auto& ga = grad_of(*an);
        for (std::int64_t i = 0; i < n; ++i) {
          for (std::int64_t j = 0; j < d1; ++j) ga[i * d1 + j] += g[i * (d1 + d2) + j];
        }
      }
      if (bn->requires_grad) {
        auto& gb = grad_of(*bn);
        for (std::int64_t i = 0; i < n; ++i) {
          for (std::int64_t j = 0; j < d2; ++j) gb[i * d2 + j] += g[i * (d1 + d2) + d1 + j];
        }
      }
    });
  }
  return out;
}

template <class T>
BasicTensor<T> slice_columns(BasicTape<T>& tape, const BasicTensor<T>& input, std::int64_t begin,
                             std::int64_t end) {
  expect_rank(input, 2, "slice_columns", "input");
  const std::int64_t n = input.dim(0), d = input.dim(1);
  if (begin < 0 || end > d || begin >= end) {
    throw DimensionError("slice_columns: bad range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") for " + shape_to_string(input.shape()));
  }
  const std::int64_t width = end - begin;
  BasicTensor<T> out(Shape{n, width});
  for (std::int64_t i = 0; i < n; ++i) {
    std::copy_n(input.data().begin() + i * d + begin, width, out.data().begin() + i * width);
  }
  if (tape.wants({&input})) {
    tape.record("slice_columns", {input.node()}, out, [xn = input.node(), on = out.node(), n, d, begin, width] {
      auto& gx = grad_of(*xn);
      for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = 0; j < width; ++j) gx[i * d + begin + j] += on->grad[i * width + j];
      }
    });
  }
  return out;
}

template <class T>
BasicTensor<T> select_row(BasicTape<T>& tape, const BasicTensor<T>& input, std::int64_t index) {
  expect_rank(input, 2, "select_row", "input");
  const std::int64_t n = input.dim(0), d = input.dim(1);
  if (index < 0 || index >= n) {
    throw DimensionError("select_row: index " + std::to_string(index) + " out of range for " +
                         shape_to_string(input.shape()));
  }
  BasicTensor<T> out(Shape{d});
  std::copy_n(input.data().begin() + index * d, d, out.data().begin());
  if (tape.wants({&input})) {
    tape.record("select_row", {input.node()}, out, [xn = input.node(), on = out.node(), index, d] {
      auto& gx = grad_of(*xn);
      for (std::int64_t j = 0; j < d; ++j) gx[index * d + j] += on->grad[j];
    });
  }
  return out;
}

template <class T>
BasicTensor<T> relu(BasicTape<T>& tape, const BasicTensor<T>& input) {
  BasicTensor<T> out(input.shape());
  auto x = input.data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  if (tape.wants({&input})) {
    tape.record("relu", {input.node()}, out, [xn = input.node(), on = out.node()] {
      auto& gx = grad_of(*xn);
      const auto& g = on->grad;
      const auto& y = on->data;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (y[i] > T(0)) gx[i] += g[i];
      }
    });
  }
  return out;
}

template <class T>
BasicTensor<T> add(BasicTape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return elementwise_binary(tape, a, b, "add", 0);
}

template <class T>
BasicTensor<T> sub(BasicTape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return elementwise_binary(tape, a, b, "sub", 1);
}

template <class T>
BasicTensor<T> mul(BasicTape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return elementwise_binary(tape, a, b, "mul", 2);
}

template <class T>
BasicTensor<T> div(BasicTape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return elementwise_binary(tape, a, b, "div", 3);
}

template <class T>
BasicTensor<T> scale(BasicTape<T>& tape, const BasicTensor<T>& input, T factor) {
  BasicTensor<T> out(input.shape());
  auto x = input.data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * factor;
  ensure_finite(out, "scale");
  if (tape.wants({&input})) {
    tape.record("scale", {input.node()}, out, [xn = input.node(), on = out.node(), factor] {
      auto& gx = grad_of(*xn);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += on->grad[i] * factor;
    });
  }
  return out;
}

template <class T>
BasicTensor<T> log(BasicTape<T>& tape, const BasicTensor<T>& input) {
  BasicTensor<T> out(input.shape());
  auto x = input.data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > T(0))) throw DegenerateInputError("log: non-positive argument");
    y[i] = std::log(x[i]);
  }
  if (tape.wants({&input})) {
    tape.record("log", {input.node()}, out, [xn = input.node(), on = out.node()] {
      auto& gx = grad_of(*xn);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += on->grad[i] / xn->data[i];
    });
  }
  return out;
}

template <class T>
BasicTensor<T> exp(BasicTape<T>& tape, const BasicTensor<T>& input) {
  BasicTensor<T> out(input.shape());
  auto x = input.data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::exp(x[i]);
  ensure_finite(out, "exp");
  if (tape.wants({&input})) {
    tape.record("exp", {input.node()}, out, [xn = input.node(), on = out.node()] {
      auto& gx = grad_of(*xn);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += on->grad[i] * on->data[i];
    });
  }
  return out;
}

template <class T>
BasicTensor<T> sum(BasicTape<T>& tape, const BasicTensor<T>& input) {
  double total = 0.0;
  for (T v : input.data()) total += v;
  auto out = BasicTensor<T>::scalar(static_cast<T>(total));
  ensure_finite(out, "sum");
  if (tape.wants({&input})) {
    tape.record("sum", {input.node()}, out, [xn = input.node(), on = out.node()] {
      auto& gx = grad_of(*xn);
      const T g = on->grad[0];
      for (auto& v : gx) v += g;
    });
  }
  return out;
}

template <class T>
BasicTensor<T> mean(BasicTape<T>& tape, const BasicTensor<T>& input) {
  double total = 0.0;
  for (T v : input.data()) total += v;
  const double count = static_cast<double>(input.numel());
  auto out = BasicTensor<T>::scalar(static_cast<T>(total / count));
  if (tape.wants({&input})) {
    tape.record("mean", {input.node()}, out, [xn = input.node(), on = out.node(), count] {
      auto& gx = grad_of(*xn);
      const T g = static_cast<T>(on->grad[0] / count);
      for (auto& v : gx) v += g;
    });
  }
  return out;
}

template <class T>
BasicTensor<T> mean(BasicTape<T>& tape, const BasicTensor<T>& input, std::size_t axis) {
  if (axis >= input.rank()) {
    throw DimensionError("mean: axis " + std::to_string(axis) + " out of range for " +
                         shape_to_string(input.shape()));
  }
  const auto& shape = input.shape();
  std::int64_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::int64_t extent = shape[axis];
  Shape reduced;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) reduced.push_back(shape[i]);
  }
  BasicTensor<T> out(reduced);
  auto x = input.data();
  auto y = out.data();
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t j = 0; j < inner; ++j) {
      double acc = 0.0;
      for (std::int64_t a = 0; a < extent; ++a) acc += x[(o * extent + a) * inner + j];
      y[o * inner + j] = static_cast<T>(acc / static_cast<double>(extent));
    }
  }
  if (tape.wants({&input})) {
    tape.record("mean_axis", {input.node()}, out, [xn = input.node(), on = out.node(), outer, inner, extent] {
      auto& gx = grad_of(*xn);
      const T inv = T(1) / static_cast<T>(extent);
      for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t a = 0; a < extent; ++a) {
          for (std::int64_t j = 0; j < inner; ++j) gx[(o * extent + a) * inner + j] += on->grad[o * inner + j] * inv;
        }
      }
    });
  }
  return out;
}

template <class T>
BasicTensor<T> global_avg_pool(BasicTape<T>& tape, const BasicTensor<T>& input) {
  expect_rank(input, 5, "global_avg_pool", "input");
  const std::int64_t n = input.dim(0), c = input.dim(1);
  const std::int64_t volume = input.dim(2) * input.dim(3) * input.dim(4);
  BasicTensor<T> out(Shape{n, c});
  auto x = input.data();
  auto y = out.data();
  for (std::int64_t i = 0; i < n * c; ++i) {
    double acc = 0.0;
    for (std::int64_t v = 0; v < volume; ++v) acc += x[i * volume + v];
    y[i] = static_cast<T>(acc / static_cast<double>(volume));
  }
  if (tape.wants({&input})) {
    tape.record("global_avg_pool", {input.node()}, out, [xn = input.node(), on = out.node(), n, c, volume] {
      auto& gx = grad_of(*xn);
      for (std::int64_t i = 0; i < n * c; ++i) {
        const T g = on->grad[i] / static_cast<T>(volume);
        for (std::int64_t v = 0; v < volume; ++v) gx[i * volume + v] += g;
      }
    });
  }
  return out;
}

template <class T>
BasicTensor<T> batch_norm(BasicTape<T>& tape, const BasicTensor<T>& input, const BasicTensor<T>& gamma,
                          const BasicTensor<T>& beta, BatchNormState<T>& state, bool training) {
  if (input.rank() < 2) throw DimensionError("batch_norm: input must be at least [N,C]");
  const std::int64_t n = input.dim(0), c = input.dim(1);
  if (gamma.numel() != static_cast<std::size_t>(c) || beta.numel() != static_cast<std::size_t>(c) ||
      state.running_mean.numel() != static_cast<std::size_t>(c)) {
    throw DimensionError("batch_norm: affine parameters do not match " + std::to_string(c) + " channels");
  }
  std::int64_t spatial = 1;
  for (std::size_t i = 2; i < input.rank(); ++i) spatial *= input.dim(i);
  const std::int64_t count = n * spatial;
  if (training && count < 2) throw ContractError("batch_norm: training mode needs more than one value per channel");

  auto x = input.data();
  std::vector<T> invstd(static_cast<std::size_t>(c));
  std::vector<T> centre(static_cast<std::size_t>(c));
  for (std::int64_t ch = 0; ch < c; ++ch) {
    double mu, var;
    if (training) {
      double s = 0.0;
      for (std::int64_t i = 0; i < n; ++i) {
        const T* p = x.data() + (i * c + ch) * spatial;
        for (std::int64_t v = 0; v < spatial; ++v) s += p[v];
      }
      mu = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::int64_t i = 0; i < n; ++i) {
        const T* p = x.data() + (i * c + ch) * spatial;
        for (std::int64_t v = 0; v < spatial; ++v) {
          const double d = p[v] - mu;
          ss += d * d;
        }
      }
      var = ss / static_cast<double>(count);
      auto rm = state.running_mean.data();
      auto rv = state.running_var.data();
      const double m = state.momentum;
      rm[ch] = static_cast<T>((1.0 - m) * rm[ch] + m * mu);
      rv[ch] = static_cast<T>((1.0 - m) * rv[ch] + m * var * static_cast<double>(count) / static_cast<double>(count - 1));
    } else {
      mu = state.running_mean.data()[ch];
      var = state.running_var.data()[ch];
    }
    centre[ch] = static_cast<T>(mu);
    invstd[ch] = static_cast<T>(1.0 / std::sqrt(var + state.eps));
  }

  BasicTensor<T> out(input.shape());
  auto y = out.data();
  std::vector<T> xhat(x.size());
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const std::int64_t base = (i * c + ch) * spatial;
      const T g = gamma.data()[ch], b = beta.data()[ch];
      for (std::int64_t v = 0; v < spatial; ++v) {
        const T h = (x[base + v] - centre[ch]) * invstd[ch];
        xhat[base + v] = h;
        y[base + v] = g * h + b;
      }
    }
  }
  ensure_finite(out, "batch_norm");

  if (tape.wants({&input, &gamma, &beta})) {
    tape.record("batch_norm", {input.node(), gamma.node(), beta.node()}, out,
                [xn = input.node(), gn = gamma.node(), bn = beta.node(), on = out.node(),
                 xhat = std::move(xhat), invstd = std::move(invstd), n, c, spatial, count, training] {
                  const auto& dy = on->grad;
                  std::vector<double> sum_dy(static_cast<std::size_t>(c), 0.0);
                  std::vector<double> sum_dy_xhat(static_cast<std::size_t>(c), 0.0);
                  for (std::int64_t i = 0; i < n; ++i) {
                    for (std::int64_t ch = 0; ch < c; ++ch) {
                      const std::int64_t base = (i * c + ch) * spatial;
                      double s = 0.0, sx = 0.0;
                      for (std::int64_t v = 0; v < spatial; ++v) {
                        s += dy[base + v];
                        sx += static_cast<double>(dy[base + v]) * xhat[base + v];
                      }
                      sum_dy[ch] += s;
                      sum_dy_xhat[ch] += sx;
                    }
                  }
                  if (gn->requires_grad) {
                    auto& gg = grad_of(*gn);
                    for (std::int64_t ch = 0; ch < c; ++ch) gg[ch] += static_cast<T>(sum_dy_xhat[ch]);
                  }
                  if (bn->requires_grad) {
                    auto& gb = grad_of(*bn);
                    for (std::int64_t ch = 0; ch < c; ++ch) gb[ch] += static_cast<T>(sum_dy[ch]);
                  }
                  if (!xn->requires_grad) return;
                  auto& gx = grad_of(*xn);
                  const double inv_count = 1.0 / static_cast<double>(count);
                  for (std::int64_t i = 0; i < n; ++i) {
                    for (std::int64_t ch = 0; ch < c; ++ch) {
                      const std::int64_t base = (i * c + ch) * spatial;
                      const double k = static_cast<double>(gn->data[ch]) * invstd[ch];
                      if (training) {
                        const double mean_dy = sum_dy[ch] * inv_count;
                        const double mean_dy_xhat = sum_dy_xhat[ch] * inv_count;
                        for (std::int64_t v = 0; v < spatial; ++v) {
                          gx[base + v] += static_cast<T>(k * (dy[base + v] - mean_dy - xhat[base + v] * mean_dy_xhat));
                        }
                      } else {
                        for (std::int64_t v = 0; v < spatial; ++v) gx[base + v] += static_cast<T>(k * dy[base + v]);
                      }
                    }
                  }
                });
  }
  return out;
}

template <class T>
BasicTensor<T> embedding(BasicTape<T>& tape, const BasicTensor<T>& table, std::span<const std::int32_t> ids,
                         const Shape& ids_shape) {
  expect_rank(table, 2, "embedding", "table");
  if (static_cast<std::size_t>(shape_numel(ids_shape)) != ids.size()) {
    throw DimensionError("embedding: id shape " + shape_to_string(ids_shape) + " does not match " +
                         std::to_string(ids.size()) + " ids");
  }
  const std::int64_t vocab = table.dim(0), width = table.dim(1);
  for (auto id : ids) {
    if (id < 0 || id >= vocab) throw ContractError("embedding: id " + std::to_string(id) + " out of range");
  }
  Shape shape = ids_shape;
  shape.push_back(width);
  BasicTensor<T> out(shape);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(table.data().begin() + ids[i] * width, width, out.data().begin() + static_cast<std::int64_t>(i) * width);
  }
  if (tape.wants({&table})) {
    std::vector<std::int32_t> kept(ids.begin(), ids.end());
    tape.record("embedding", {table.node()}, out, [tn = table.node(), on = out.node(), kept = std::move(kept), width] {
      auto& gt = grad_of(*tn);
      for (std::size_t i = 0; i < kept.size(); ++i) {
        for (std::int64_t j = 0; j < width; ++j) gt[kept[i] * width + j] += on->grad[i * width + j];
      }
    });
  }
  return out;
}

template <class T>
BasicTensor<T> embedding_bag_mean(BasicTape<T>& tape, const BasicTensor<T>& table,
                                  std::span<const std::int32_t> ids, std::int64_t row_length,
                                  std::int32_t pad_id) {
  expect_rank(table, 2, "embedding_bag_mean", "table");
  if (row_length < 1 || ids.size() % static_cast<std::size_t>(row_length) != 0 || ids.empty()) {
    throw DimensionError("embedding_bag_mean: id count is not a positive multiple of the row length");
  }
  const std::int64_t vocab = table.dim(0), width = table.dim(1);
  const std::int64_t rows = static_cast<std::int64_t>(ids.size()) / row_length;
  std::vector<std::int32_t> counts(static_cast<std::size_t>(rows), 0);
  BasicTensor<T> out(Shape{rows, width});
  auto y = out.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    std::vector<double> acc(static_cast<std::size_t>(width), 0.0);
    for (std::int64_t p = 0; p < row_length; ++p) {
      const auto id = ids[r * row_length + p];
      if (id == pad_id) continue;
      if (id < 0 || id >= vocab) throw ContractError("embedding_bag_mean: id " + std::to_string(id) + " out of range");
      ++counts[r];
      for (std::int64_t j = 0; j < width; ++j) acc[j] += table.data()[id * width + j];
    }
    if (counts[r] == 0) throw DegenerateInputError("embedding_bag_mean: row " + std::to_string(r) + " is all padding");
    for (std::int64_t j = 0; j < width; ++j) y[r * width + j] = static_cast<T>(acc[j] / counts[r]);
  }
  if (tape.wants({&table})) {
    std::vector<std::int32_t> kept(ids.begin(), ids.end());
    tape.record("embedding_bag_mean", {table.node()}, out,
                [tn = table.node(), on = out.node(), kept = std::move(kept), counts = std::move(counts), rows,
                 row_length, width, pad_id] {
                  auto& gt = grad_of(*tn);
                  for (std::int64_t r = 0; r < rows; ++r) {
                    const T inv = T(1) / static_cast<T>(counts[r]);
                    for (std::int64_t p = 0; p < row_length; ++p) {
                      const auto id = kept[r * row_length + p];
                      if (id == pad_id) continue;
                      for (std::int64_t j = 0; j < width; ++j) gt[id * width + j] += on->grad[r * width + j] * inv;
                    }
                  }
                });
  }
  return out;
}

template <class T>
BasicTensor<T> cross_entropy(BasicTape<T>& tape, const BasicTensor<T>& probs,
                             std::span<const std::int32_t> labels) {
  expect_rank(probs, 2, "cross_entropy", "probs");
  const std::int64_t rows = probs.dim(0), classes = probs.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(rows) + " rows");
  }
  constexpr double floor = 1e-12;
  double total = 0.0;
  for (std::int64_t r = 0; r < rows; ++r) {
    if (labels[r] < 0 || labels[r] >= classes) {
      throw ContractError("cross_entropy: class id " + std::to_string(labels[r]) + " outside [0," +
                          std::to_string(classes) + ")");
    }
    total -= std::log(std::max(static_cast<double>(probs.data()[r * classes + labels[r]]), floor));
  }
  auto out = BasicTensor<T>::scalar(static_cast<T>(total / static_cast<double>(rows)));
  if (tape.wants({&probs})) {
    std::vector<std::int32_t> kept(labels.begin(), labels.end());
    tape.record("cross_entropy", {probs.node()}, out, [pn = probs.node(), on = out.node(), kept = std::move(kept), rows, classes] {
      auto& gp = grad_of(*pn);
      const double g = on->grad[0] / static_cast<double>(rows);
      for (std::int64_t r = 0; r < rows; ++r) {
        const std::int64_t at = r * classes + kept[r];
        const double p = pn->data[at];
        if (p > floor) gp[at] += static_cast<T>(-g / p);
      }
    });
  }
  return out;
}

template <class T>
BasicTensor<T> reshape(BasicTape<T>& tape, const BasicTensor<T>& input, Shape shape) {
  std::vector<T> values(input.data().begin(), input.data().end());
  BasicTensor<T> out(std::move(shape), std::move(values));
  if (tape.wants({&input})) {
    tape.record("reshape", {input.node()}, out, [xn = input.node(), on = out.node()] {
      auto& gx = grad_of(*xn);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += on->grad[i];
    });
  }
  return out;
}

#define XMODAL_INSTANTIATE_OPS(T)                                                                        \
  template BasicTensor<T> conv3d(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&,            \
                                 const Conv3dOptions&);                                                  \
  template BasicTensor<T> conv3d_direct(const BasicTensor<T>&, const BasicTensor<T>&,                    \
                                        const Conv3dOptions&);                                           \
  template BasicTensor<T> linear(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&,            \
                                 const BasicTensor<T>&);                                                 \
  template BasicTensor<T> softmax(BasicTape<T>&, const BasicTensor<T>&);                                 \
  template BasicTensor<T> cosine_similarity(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> concat(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&);           \
  template BasicTensor<T> slice_columns(BasicTape<T>&, const BasicTensor<T>&, std::int64_t, std::int64_t); \
  template BasicTensor<T> select_row(BasicTape<T>&, const BasicTensor<T>&, std::int64_t);                \
  template BasicTensor<T> relu(BasicTape<T>&, const BasicTensor<T>&);                                    \
  template BasicTensor<T> add(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&);              \
  template BasicTensor<T> sub(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&);              \
  template BasicTensor<T> mul(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&);              \
  template BasicTensor<T> div(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&);              \
  template BasicTensor<T> scale(BasicTape<T>&, const BasicTensor<T>&, T);                                \
  template BasicTensor<T> log(BasicTape<T>&, const BasicTensor<T>&);                                     \
  template BasicTensor<T> exp(BasicTape<T>&, const BasicTensor<T>&);                                     \
  template BasicTensor<T> sum(BasicTape<T>&, const BasicTensor<T>&);                                     \
  template BasicTensor<T> mean(BasicTape<T>&, const BasicTensor<T>&);                                    \
  template BasicTensor<T> mean(BasicTape<T>&, const BasicTensor<T>&, std::size_t);                       \
  template BasicTensor<T> global_avg_pool(BasicTape<T>&, const BasicTensor<T>&);                         \
  template BasicTensor<T> batch_norm(BasicTape<T>&, const BasicTensor<T>&, const BasicTensor<T>&,        \
                                     const BasicTensor<T>&, BatchNormState<T>&, bool);                   \
  template BasicTensor<T> embedding(BasicTape<T>&, const BasicTensor<T>&, std::span<const std::int32_t>, \
                                    const Shape&);                                                       \
  template BasicTensor<T> embedding_bag_mean(BasicTape<T>&, const BasicTensor<T>&,                       \
                                             std::span<const std::int32_t>, std::int64_t, std::int32_t); \
  template BasicTensor<T> cross_entropy(BasicTape<T>&, const BasicTensor<T>&,                            \
                                        std::span<const std::int32_t>);                                  \
  template BasicTensor<T> reshape(BasicTape<T>&, const BasicTensor<T>&, Shape);

XMODAL_INSTANTIATE_OPS(float)
XMODAL_INSTANTIATE_OPS(double)

#undef XMODAL_INSTANTIATE_OPS

}  // namespace xmodal
