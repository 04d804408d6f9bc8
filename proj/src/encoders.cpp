// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/encoders.hpp"

#include <cmath>
#include <cstring>

#include "xmodal/errors.hpp"

namespace xmodal::models {

namespace {

template <class T>
BasicTensor<T> uniform_tensor(Shape shape, double bound, Rng& rng) {
  BasicTensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  t.set_requires_grad();
  return t;
}

template <class T>
BasicTensor<T> constant_parameter(Shape shape, T value) {
  BasicTensor<T> t(std::move(shape), value);
  t.set_requires_grad();
  return t;
}

template <class T>
void append(std::vector<NamedTensor<T>>& out, std::vector<NamedTensor<T>> more) {
  for (auto& m : more) out.push_back(std::move(m));
}

}  // namespace

ResNet3DConfig ResNet3DConfig::for_depth(int depth) {
  ResNet3DConfig c;
  c.depth = depth;
  switch (depth) {
    case 10: c.blocks = {1, 1, 1, 1}; break;
    case 18: c.blocks = {2, 2, 2, 2}; break;
    case 34: c.blocks = {3, 4, 6, 3}; break;
    default: throw ConfigError("unsupported network depth " + std::to_string(depth) + " (expected 10, 18 or 34)");
  }
  return c;
}

template <class T>
Conv3dLayer<T>::Conv3dLayer(std::int64_t in, std::int64_t out, std::array<int, 3> kernel, Conv3dOptions opts,
                            Rng& rng)
    : options(opts) {
  const double fan_in = static_cast<double>(in) * kernel[0] * kernel[1] * kernel[2];
  weight = uniform_tensor<T>(Shape{out, in, kernel[0], kernel[1], kernel[2]}, std::sqrt(6.0 / fan_in), rng);
}

template <class T>
BasicTensor<T> Conv3dLayer<T>::forward(BasicTape<T>& tape, const BasicTensor<T>& x) const {
  return conv3d(tape, x, weight, options);
}

template <class T>
BatchNormLayer<T>::BatchNormLayer(std::int64_t channels)
    : gamma(constant_parameter<T>(Shape{channels}, T(1))),
      beta(constant_parameter<T>(Shape{channels}, T(0))),
      state(channels) {}

template <class T>
BasicTensor<T> BatchNormLayer<T>::forward(BasicTape<T>& tape, const BasicTensor<T>& x, bool training) {
  return batch_norm(tape, x, gamma, beta, state, training);
}

template <class T>
LinearLayer<T>::LinearLayer(std::int64_t in, std::int64_t out, Rng& rng)
    : weight(uniform_tensor<T>(Shape{in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng)),
      bias(constant_parameter<T>(Shape{out}, T(0))) {}

template <class T>
BasicTensor<T> LinearLayer<T>::forward(BasicTape<T>& tape, const BasicTensor<T>& x) const {
  return linear(tape, x, weight, bias);
}

template <class T>
ResidualBlock<T>::ResidualBlock(std::int64_t in, std::int64_t out, int stride, Rng& rng)
    : conv1(in, out, {3, 3, 3}, Conv3dOptions{{stride, stride, stride}, {1, 1, 1}}, rng),
      conv2(out, out, {3, 3, 3}, Conv3dOptions{{1, 1, 1}, {1, 1, 1}}, rng),
      bn1(out),
      bn2(out),
      projected(stride != 1 || in != out) {
  if (projected) {
    shortcut = Conv3dLayer<T>(in, out, {1, 1, 1}, Conv3dOptions{{stride, stride, stride}, {0, 0, 0}}, rng);
    shortcut_bn = BatchNormLayer<T>(out);
  }
}

template <class T>
BasicTensor<T> ResidualBlock<T>::forward(BasicTape<T>& tape, const BasicTensor<T>& x, bool training) {
  auto y = relu(tape, bn1.forward(tape, conv1.forward(tape, x), training));
  y = bn2.forward(tape, conv2.forward(tape, y), training);
  const auto skip = projected ? shortcut_bn.forward(tape, shortcut.forward(tape, x), training) : x;
  return relu(tape, add(tape, y, skip));
}

template <class T>
BasicResNet3D<T>::BasicResNet3D(const ResNet3DConfig& config, std::int64_t in_channels, std::uint64_t seed)
    : config_(config), in_channels_(in_channels) {
  if (config.depth != 10 && config.depth != 18 && config.depth != 34) {
    throw ConfigError("unsupported network depth " + std::to_string(config.depth));
  }
  if (in_channels < 1) throw ConfigError("input channel count must be positive");
  Rng rng(seed);
  stem_ = Conv3dLayer<T>(in_channels, config.channels[0], config.conv1_kernel,
                         Conv3dOptions{config.conv1_stride, config.conv1_padding}, rng);
  stem_bn_ = BatchNormLayer<T>(config.channels[0]);
  std::int64_t width = config.channels[0];
  for (std::size_t s = 0; s < 4; ++s) {
    std::vector<ResidualBlock<T>> stage;
    for (int b = 0; b < config.blocks[s]; ++b) {
      const int stride = (s > 0 && b == 0) ? 2 : 1;
      stage.emplace_back(width, config.channels[s], stride, rng);
      width = config.channels[s];
    }
    stages_.push_back(std::move(stage));
  }
  fc_ = LinearLayer<T>(width, config.embed_dim, rng);
}

template <class T>
BasicTensor<T> BasicResNet3D<T>::forward(BasicTape<T>& tape, const BasicTensor<T>& x, bool training,
                                         ShapeTrace* trace) {
  if (x.rank() != 5 || x.dim(1) != in_channels_) {
    throw DimensionError("resnet3d expects [N," + std::to_string(in_channels_) + ",T,H,W], got " +
                         shape_to_string(x.shape()));
  }
  auto y = relu(tape, stem_bn_.forward(tape, stem_.forward(tape, x), training));
  if (trace) trace->emplace_back("conv1", y.shape());
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    for (auto& block : stages_[s]) y = block.forward(tape, y, training);
    if (trace) trace->emplace_back("conv" + std::to_string(s + 2) + "_x", y.shape());
  }
  y = global_avg_pool(tape, y);
  if (trace) trace->emplace_back("avgpool", y.shape());
  y = fc_.forward(tape, y);
  if (trace) trace->emplace_back("fc", y.shape());
  return y;
}

template <class T>
std::vector<NamedTensor<T>> BasicResNet3D<T>::parameters(const std::string& prefix) const {
  std::vector<NamedTensor<T>> out;
  auto bn = [&](const std::string& name, const BatchNormLayer<T>& layer) {
    out.push_back({name + ".gamma", layer.gamma});
    out.push_back({name + ".beta", layer.beta});
  };
  out.push_back({prefix + ".conv1.weight", stem_.weight});
  bn(prefix + ".bn1", stem_bn_);
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    for (std::size_t b = 0; b < stages_[s].size(); ++b) {
      const auto& block = stages_[s][b];
      const std::string base = prefix + ".layer" + std::to_string(s + 1) + "." + std::to_string(b);
      out.push_back({base + ".conv1.weight", block.conv1.weight});
      bn(base + ".bn1", block.bn1);
      out.push_back({base + ".conv2.weight", block.conv2.weight});
      bn(base + ".bn2", block.bn2);
      if (block.projected) {
        out.push_back({base + ".shortcut.weight", block.shortcut.weight});
        bn(base + ".shortcut_bn", block.shortcut_bn);
      }
    }
  }
  out.push_back({prefix + ".fc.weight", fc_.weight});
  out.push_back({prefix + ".fc.bias", fc_.bias});
  return out;
}

template <class T>
std::vector<NamedTensor<T>> BasicResNet3D<T>::buffers(const std::string& prefix) const {
  std::vector<NamedTensor<T>> out;
  auto bn = [&](const std::string& name, const BatchNormLayer<T>& layer) {
    out.push_back({name + ".running_mean", layer.state.running_mean});
    out.push_back({name + ".running_var", layer.state.running_var});
  };
  bn(prefix + ".bn1", stem_bn_);
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    for (std::size_t b = 0; b < stages_[s].size(); ++b) {
      const auto& block = stages_[s][b];
      const std::string base = prefix + ".layer" + std::to_string(s + 1) + "." + std::to_string(b);
      bn(base + ".bn1", block.bn1);
      bn(base + ".bn2", block.bn2);
      if (block.projected) bn(base + ".shortcut_bn", block.shortcut_bn);
    }
  }
  return out;
}

template <class T>
BasicVideoEncoder<T>::BasicVideoEncoder(const ResNet3DConfig& config, std::uint64_t seed)
    : rgb_(config, 3, derive_seed(seed, 1)), flow_(config, 2, derive_seed(seed, 2)) {}

template <class T>
BasicTensor<T> BasicVideoEncoder<T>::forward(BasicTape<T>& tape, const BasicTensor<T>& rgb,
                                             const BasicTensor<T>& flow, bool training, ShapeTrace* rgb_trace,
                                             ShapeTrace* flow_trace) {
  if (rgb.rank() != 5 || flow.rank() != 5 || rgb.dim(0) != flow.dim(0)) {
    throw DimensionError("video encoder expects rgb [N,3,T,H,W] and flow [N,2,T,H,W], got " +
                         shape_to_string(rgb.shape()) + " and " + shape_to_string(flow.shape()));
  }
  const auto z_rgb = rgb_.forward(tape, rgb, training, rgb_trace);
  const auto z_flow = flow_.forward(tape, flow, training, flow_trace);
  return concat(tape, z_rgb, z_flow);
}

template <class T>
std::vector<NamedTensor<T>> BasicVideoEncoder<T>::parameters() const {
  auto out = rgb_.parameters("rgb");
  append(out, flow_.parameters("flow"));
  return out;
}

template <class T>
std::vector<NamedTensor<T>> BasicVideoEncoder<T>::buffers() const {
  auto out = rgb_.buffers("rgb");
  append(out, flow_.buffers("flow"));
  return out;
}

template <class T>
BasicAttributeEncoder<T>::BasicAttributeEncoder(std::int64_t vocab_size, std::uint64_t seed) {
  if (vocab_size < 2) throw ConfigError("attribute vocabulary must hold at least the pad and unknown tokens");
  Rng rng(seed);
  table_ = BasicTensor<T>(Shape{vocab_size, kTokenEmbedDim});
  for (auto& v : table_.data()) v = static_cast<T>(rng.normal());
  table_.set_requires_grad();
  hidden_ = LinearLayer<T>(kTokenEmbedDim, kAttributeDim, rng);
  out_ = LinearLayer<T>(kAttributeDim, kAttributeDim, rng);
}

template <class T>
BasicTensor<T> BasicAttributeEncoder<T>::forward(BasicTape<T>& tape, std::span<const std::int32_t> tokens,
                                                 std::int64_t max_len) const {
  // Pad id 0 matches facs::Vocabulary::kPadId.
  const auto pooled = embedding_bag_mean(tape, table_, tokens, max_len, 0);
  return out_.forward(tape, relu(tape, hidden_.forward(tape, pooled)));
}

template <class T>
std::vector<NamedTensor<T>> BasicAttributeEncoder<T>::parameters() const {
  return {{"attr.embedding", table_},
          {"attr.fc1.weight", hidden_.weight},
          {"attr.fc1.bias", hidden_.bias},
          {"attr.fc2.weight", out_.weight},
          {"attr.fc2.bias", out_.bias}};
}

template <class T>
BasicClassifierHead<T>::BasicClassifierHead(std::int64_t feature_dim, std::int64_t classes, std::uint64_t seed) {
  if (classes < 2) throw ConfigError("a classifier needs at least 2 classes");
  Rng rng(seed);
  layer_ = LinearLayer<T>(feature_dim, classes, rng);
}

template <class T>
BasicTensor<T> BasicClassifierHead<T>::forward(BasicTape<T>& tape, const BasicTensor<T>& features) const {
  return softmax(tape, layer_.forward(tape, features));
}

template <class T>
std::vector<NamedTensor<T>> BasicClassifierHead<T>::parameters(const std::string& prefix) const {
  return {{prefix + ".weight", layer_.weight}, {prefix + ".bias", layer_.bias}};
}

template <class T>
BasicVideoModel<T>::BasicVideoModel(const ResNet3DConfig& config, std::int64_t classes, std::uint64_t seed)
    : encoder(config, derive_seed(seed, 10)),
      head(2 * static_cast<std::int64_t>(config.embed_dim), classes, derive_seed(seed, 11)) {}

template <class T>
std::vector<NamedTensor<T>> BasicVideoModel<T>::parameters() const {
  auto out = encoder.parameters();
  append(out, head.parameters("video_head"));
  return out;
}

template <class T>
std::vector<NamedTensor<T>> BasicVideoModel<T>::state() const {
  auto out = parameters();
  append(out, encoder.buffers());
  return out;
}

template <class T>
BasicAttributeModel<T>::BasicAttributeModel(std::int64_t vocab_size, std::int64_t classes, std::uint64_t seed)
    : encoder(vocab_size, derive_seed(seed, 20)), head(kAttributeDim, classes, derive_seed(seed, 21)) {}

template <class T>
std::vector<NamedTensor<T>> BasicAttributeModel<T>::parameters() const {
  auto out = encoder.parameters();
  append(out, head.parameters("attr_head"));
  return out;
}

template <class T>
std::uint64_t checksum(const std::vector<NamedTensor<T>>& tensors) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& nt : tensors) {
    const auto bytes = std::as_bytes(nt.tensor.data());
    for (auto b : bytes) {
      h ^= static_cast<std::uint64_t>(b);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::pair<Tensor, Tensor> stack_clips(std::span<const ClipPair* const> clips) {
  if (clips.empty()) throw ContractError("stack_clips: no clips");
  for (const auto* c : clips) validate_clip_pair(*c);
  const auto& first = *clips.front();
  const std::int64_t n = static_cast<std::int64_t>(clips.size());
  Shape rgb_shape{n}, flow_shape{n};
  rgb_shape.insert(rgb_shape.end(), first.rgb.shape().begin(), first.rgb.shape().end());
  flow_shape.insert(flow_shape.end(), first.flow.shape().begin(), first.flow.shape().end());
  Tensor rgb(rgb_shape), flow(flow_shape);
  const std::size_t rgb_size = first.rgb.numel(), flow_size = first.flow.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& c = *clips[i];
    if (c.rgb.shape() != first.rgb.shape()) throw DimensionError("stack_clips: clips differ in shape");
    std::copy(c.rgb.data().begin(), c.rgb.data().end(), rgb.data().begin() + i * rgb_size);
    std::copy(c.flow.data().begin(), c.flow.data().end(), flow.data().begin() + i * flow_size);
  }
  return {std::move(rgb), std::move(flow)};
}

Tensor encode_video(const ClipPair& pair, VideoEncoder& encoder) {
  const ClipPair* one[] = {&pair};
  auto [rgb, flow] = stack_clips(one);
  Tape tape;
  tape.set_recording(false);
  const auto z = encoder.forward(tape, rgb, flow, false);
  return Tensor(Shape{z.dim(1)}, std::vector<float>(z.data().begin(), z.data().end()));
}

Tensor encode_attr(std::span<const std::int32_t> tokens, const AttributeEncoder& encoder) {
  Tape tape;
  tape.set_recording(false);
  const auto z = encoder.forward(tape, tokens, static_cast<std::int64_t>(tokens.size()));
  return Tensor(Shape{z.dim(1)}, std::vector<float>(z.data().begin(), z.data().end()));
}

Tensor classify(const Tensor& feature, const ClassifierHead& head) {
  if (feature.rank() != 1) throw DimensionError("classify expects a 1-D feature");
  Tape tape;
  tape.set_recording(false);
  const Tensor row(Shape{1, feature.dim(0)}, std::vector<float>(feature.data().begin(), feature.data().end()));
  const auto p = head.forward(tape, row);
  return Tensor(Shape{p.dim(1)}, std::vector<float>(p.data().begin(), p.data().end()));
}

#define XMODAL_INSTANTIATE_MODELS(T)                                   \
  template struct Conv3dLayer<T>;                                      \
  template struct BatchNormLayer<T>;                                   \
  template struct LinearLayer<T>;                                      \
  template struct ResidualBlock<T>;                                    \
  template class BasicResNet3D<T>;                                     \
  template class BasicVideoEncoder<T>;                                 \
  template class BasicAttributeEncoder<T>;                             \
  template class BasicClassifierHead<T>;                               \
  template struct BasicVideoModel<T>;                                  \
  template struct BasicAttributeModel<T>;                              \
  template std::uint64_t checksum(const std::vector<NamedTensor<T>>&);

XMODAL_INSTANTIATE_MODELS(float)
XMODAL_INSTANTIATE_MODELS(double)

#undef XMODAL_INSTANTIATE_MODELS

}  // namespace xmodal::models
