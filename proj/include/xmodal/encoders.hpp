// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xmodal/clip.hpp"
#include "xmodal/ops.hpp"
#include "xmodal/rng.hpp"

// Video and attribute encoders. The video encoder runs two 3D residual
// networks, one over RGB frames and one over optical flow, and concatenates
// their 128-d embeddings. The attribute encoder embeds an attribute phrase
// into the same 256-d space. Each branch has its own softmax head.

namespace xmodal::models {

template <class T>
struct NamedTensor {
  std::string name;
  BasicTensor<T> tensor;
};

/// Stage outputs recorded by a forward pass, e.g. {"conv3_x", [N,128,4,28,28]}.
using ShapeTrace = std::vector<std::pair<std::string, Shape>>;

struct ResNet3DConfig {
  int depth = 10;
  std::array<int, 4> blocks{1, 1, 1, 1};
  std::array<int, 4> channels{64, 128, 256, 512};
  int embed_dim = 128;
  std::array<int, 3> conv1_kernel{3, 7, 7};
  // Temporal stride 2 is what turns 16 input frames into 8 at conv1.
  std::array<int, 3> conv1_stride{2, 2, 2};
  std::array<int, 3> conv1_padding{1, 3, 3};

  /// Depth 10, 18 or 34; anything else throws ConfigError.
  static ResNet3DConfig for_depth(int depth);
};

template <class T>
struct Conv3dLayer {
  BasicTensor<T> weight;  // [F,C,kt,kh,kw]
  Conv3dOptions options;

  Conv3dLayer() = default;
  Conv3dLayer(std::int64_t in, std::int64_t out, std::array<int, 3> kernel, Conv3dOptions opts, Rng& rng);
  BasicTensor<T> forward(BasicTape<T>& tape, const BasicTensor<T>& x) const;
};

template <class T>
struct BatchNormLayer {
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
  BatchNormState<T> state;

  BatchNormLayer() = default;
  explicit BatchNormLayer(std::int64_t channels);
  BasicTensor<T> forward(BasicTape<T>& tape, const BasicTensor<T>& x, bool training);
};

template <class T>
struct LinearLayer {
  BasicTensor<T> weight;  // [in,out]
  BasicTensor<T> bias;    // [out]

  LinearLayer() = default;
  LinearLayer(std::int64_t in, std::int64_t out, Rng& rng);
  BasicTensor<T> forward(BasicTape<T>& tape, const BasicTensor<T>& x) const;
};

/// Two 3x3x3 convolutions with batch norm and ReLU, plus an identity or
/// 1x1x1 projection shortcut.
template <class T>
struct ResidualBlock {
  Conv3dLayer<T> conv1, conv2;
  BatchNormLayer<T> bn1, bn2;
  bool projected = false;
  Conv3dLayer<T> shortcut;
  BatchNormLayer<T> shortcut_bn;

  ResidualBlock(std::int64_t in, std::int64_t out, int stride, Rng& rng);
  BasicTensor<T> forward(BasicTape<T>& tape, const BasicTensor<T>& x, bool training);
};

template <class T>
class BasicResNet3D {
 public:
  BasicResNet3D(const ResNet3DConfig& config, std::int64_t in_channels, std::uint64_t seed);

  /// [N,C,T,H,W] -> [N,embed_dim].
  BasicTensor<T> forward(BasicTape<T>& tape, const BasicTensor<T>& x, bool training, ShapeTrace* trace = nullptr);

  std::vector<NamedTensor<T>> parameters(const std::string& prefix) const;
  std::vector<NamedTensor<T>> buffers(const std::string& prefix) const;
  const ResNet3DConfig& config() const { return config_; }
  std::int64_t in_channels() const { return in_channels_; }

 private:
  ResNet3DConfig config_;
  std::int64_t in_channels_;
  Conv3dLayer<T> stem_;
  BatchNormLayer<T> stem_bn_;
  std::vector<std::vector<ResidualBlock<T>>> stages_;
  LinearLayer<T> fc_;
};

/// Dual-stream encoder; the streams share no parameters.
template <class T>
class BasicVideoEncoder {
 public:
  BasicVideoEncoder(const ResNet3DConfig& config, std::uint64_t seed);

  /// rgb [N,3,T,H,W], flow [N,2,T,H,W] -> z_m [N,256] = concat(z_rgb, z_flow).
  BasicTensor<T> forward(BasicTape<T>& tape, const BasicTensor<T>& rgb, const BasicTensor<T>& flow, bool training,
                         ShapeTrace* rgb_trace = nullptr, ShapeTrace* flow_trace = nullptr);

  BasicResNet3D<T>& rgb_stream() { return rgb_; }
  BasicResNet3D<T>& flow_stream() { return flow_; }
  std::int64_t output_dim() const { return 2 * static_cast<std::int64_t>(rgb_.config().embed_dim); }

  std::vector<NamedTensor<T>> parameters() const;
  std::vector<NamedTensor<T>> buffers() const;

 private:
  BasicResNet3D<T> rgb_;
  BasicResNet3D<T> flow_;
};

inline constexpr std::int64_t kTokenEmbedDim = 64;
inline constexpr std::int64_t kAttributeDim = 256;

/// Token embedding, mean over non-pad tokens, two-layer perceptron to 256-d.
template <class T>
class BasicAttributeEncoder {
 public:
  BasicAttributeEncoder(std::int64_t vocab_size, std::uint64_t seed);

  /// token ids [N, max_len] (row-major) -> z_a [N,256].
  BasicTensor<T> forward(BasicTape<T>& tape, std::span<const std::int32_t> tokens, std::int64_t max_len) const;

  std::vector<NamedTensor<T>> parameters() const;
  std::int64_t vocab_size() const { return table_.dim(0); }

 private:
  BasicTensor<T> table_;
  LinearLayer<T> hidden_;
  LinearLayer<T> out_;
};

/// Linear layer over a feature followed by a softmax.
template <class T>
class BasicClassifierHead {
 public:
  BasicClassifierHead(std::int64_t feature_dim, std::int64_t classes, std::uint64_t seed);

  BasicTensor<T> forward(BasicTape<T>& tape, const BasicTensor<T>& features) const;
  std::int64_t classes() const { return layer_.bias.dim(0); }
  LinearLayer<T>& layer() { return layer_; }

  std::vector<NamedTensor<T>> parameters(const std::string& prefix) const;

 private:
  LinearLayer<T> layer_;
};

/// What inference needs: video encoder plus its head.
template <class T>
struct BasicVideoModel {
  BasicVideoEncoder<T> encoder;
  BasicClassifierHead<T> head;

  BasicVideoModel(const ResNet3DConfig& config, std::int64_t classes, std::uint64_t seed);

  std::vector<NamedTensor<T>> parameters() const;
  /// Parameters plus batch-norm running statistics.
  std::vector<NamedTensor<T>> state() const;
};

/// Training-only text branch.
template <class T>
struct BasicAttributeModel {
  BasicAttributeEncoder<T> encoder;
  BasicClassifierHead<T> head;

  BasicAttributeModel(std::int64_t vocab_size, std::int64_t classes, std::uint64_t seed);

  std::vector<NamedTensor<T>> parameters() const;
};

using ResNet3D = BasicResNet3D<float>;
using VideoEncoder = BasicVideoEncoder<float>;
using AttributeEncoder = BasicAttributeEncoder<float>;
using ClassifierHead = BasicClassifierHead<float>;
using VideoModel = BasicVideoModel<float>;
using AttributeModel = BasicAttributeModel<float>;

/// Stacks clips into batch tensors rgb [N,3,T,H,W] and flow [N,2,T,H,W].
std::pair<Tensor, Tensor> stack_clips(std::span<const ClipPair* const> clips);

/// z_m of one clip in inference mode (running batch-norm statistics).
Tensor encode_video(const ClipPair& pair, VideoEncoder& encoder);

/// z_a of one padded token sequence.
Tensor encode_attr(std::span<const std::int32_t> tokens, const AttributeEncoder& encoder);

/// Class probabilities of one feature vector.
Tensor classify(const Tensor& feature, const ClassifierHead& head);

/// Total number of scalar parameters.
template <class T>
std::int64_t parameter_count(const std::vector<NamedTensor<T>>& params) {
  std::int64_t n = 0;
  for (const auto& p : params) n += static_cast<std::int64_t>(p.tensor.numel());
  return n;
}

/// FNV-1a over the raw bytes of every tensor, in order.
template <class T>
std::uint64_t checksum(const std::vector<NamedTensor<T>>& tensors);

}  // namespace xmodal::models
