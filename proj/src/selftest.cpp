// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "xmodal/encoders.hpp"
#include "xmodal/errors.hpp"
#include "xmodal/flowprep.hpp"
#include "xmodal/losses.hpp"
#include "xmodal/ops.hpp"
#include "xmodal/rng.hpp"

namespace xmodal::selftest {

namespace {

using LossFn = std::function<TensorD(TapeD&)>;

TensorD random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  TensorD t(std::move(shape));
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

// Reduces a tensor to a scalar through fixed random weights so every output
// element contributes to the checked gradient.
TensorD project(TapeD& tape, const TensorD& y, const TensorD& weights) { return sum(tape, mul(tape, y, weights)); }

std::string format_error(double err) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "max relative error %.2e", err);
  return buf;
}

// Largest relative disagreement between the taped gradient and a central
// difference, over `probes` random coordinates of the inputs.
double worst_gradient_error(const LossFn& f, std::vector<TensorD> inputs, int probes, Rng& rng) {
  for (auto& x : inputs) x.set_requires_grad();
  std::vector<std::vector<double>> analytic;
  {
    TapeD tape;
    const auto loss = f(tape);
    tape.backward(loss);
    for (auto& x : inputs) {
      analytic.emplace_back(x.mutable_grad().begin(), x.mutable_grad().end());
      x.zero_grad();
    }
  }
  const auto eval = [&] {
    TapeD tape;
    tape.set_recording(false);
    return f(tape).item();
  };
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    const std::size_t which = static_cast<std::size_t>(p) % inputs.size();
    auto data = inputs[which].data();
    const std::size_t e = rng.below(data.size());
    const double x0 = data[e];
    const double h = 1e-6 * std::max(1.0, std::abs(x0));
    data[e] = x0 + h;
    const double up = eval();
    data[e] = x0 - h;
    const double down = eval();
    data[e] = x0;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[which][e];
    const double scale = std::max(std::abs(a), std::abs(numeric));
    if (scale < 1e-9) continue;
    worst = std::max(worst, std::abs(a - numeric) / scale);
  }
  return worst;
}

CheckResult gradient_check(const std::string& name, const LossFn& f, std::vector<TensorD> inputs, double tol,
                           const Options& options, Rng& rng) {
  const double err = worst_gradient_error(f, std::move(inputs), options.probes, rng);
  return {name, err < tol, format_error(err) + " (limit " + format_error(tol).substr(19) + ")"};
}

std::vector<CheckResult> gradient_checks(const Options& options) {
  Rng rng(derive_seed(options.seed, 1));
  std::vector<CheckResult> out;

  {
    const auto x = random_tensor({2, 2, 4, 5, 5}, rng);
    const auto w = random_tensor({3, 2, 3, 3, 3}, rng, 0.3);
    Conv3dOptions opts;
    opts.stride = {1, 2, 1};
    opts.padding = {1, 1, 0};
    TapeD probe;
    probe.set_recording(false);
    const auto proj = random_tensor(conv3d(probe, x, w, opts).shape(), rng);
    out.push_back(gradient_check(
        "grad_conv3d", [&](TapeD& t) { return project(t, conv3d(t, x, w, opts), proj); }, {x, w}, 1e-3, options, rng));
  }
  {
    const auto x = random_tensor({3, 5}, rng);
    const auto w = random_tensor({5, 4}, rng);
    const auto b = random_tensor({4}, rng);
    const auto proj = random_tensor({3, 4}, rng);
    out.push_back(gradient_check(
        "grad_linear", [&](TapeD& t) { return project(t, linear(t, x, w, b), proj); }, {x, w, b}, 1e-3, options, rng));
  }
  {
    const auto x = random_tensor({3, 2, 2, 2, 2}, rng);
    const auto gamma = random_tensor({2}, rng);
    const auto beta = random_tensor({2}, rng);
    const auto proj = random_tensor({3, 2, 2, 2, 2}, rng);
    auto state = std::make_shared<BatchNormState<double>>(2);
    out.push_back(gradient_check(
        "grad_batch_norm",
        [&](TapeD& t) { return project(t, batch_norm(t, x, gamma, beta, *state, true), proj); }, {x, gamma, beta},
        1e-3, options, rng));
  }
  {
    const auto logits = random_tensor({4, 5}, rng);
    const std::vector<std::int32_t> labels{0, 3, 1, 4};
    out.push_back(gradient_check(
        "grad_softmax_cross_entropy", [&](TapeD& t) { return cross_entropy(t, softmax(t, logits), labels); },
        {logits}, 1e-4, options, rng));
  }
  {
    const auto a = random_tensor({6}, rng);
    const auto b = random_tensor({6}, rng);
    out.push_back(gradient_check(
        "grad_cosine_similarity", [&](TapeD& t) { return cosine_similarity(t, a, b); }, {a, b}, 1e-3, options, rng));
    out.push_back(gradient_check(
        "grad_pair_distance", [&](TapeD& t) { return losses::pair_distance(t, a, b); }, {a, b}, 1e-3, options, rng));
  }
  {
    const auto zm = random_tensor({5, 6}, rng);
    const auto za = random_tensor({5, 6}, rng);
    const std::vector<std::string> ids{"a", "b", "c", "d", "e"};
    const std::vector<std::int32_t> cls{0, 1, 2, 0, 1};
    const auto batch = losses::build_pair_batch(ids, cls, 3, losses::NegativeMode::different_sample, &rng);
    out.push_back(gradient_check(
        "grad_contrastive_loss", [&](TapeD& t) { return losses::contrastive_loss(t, zm, za, batch); }, {zm, za},
        1e-4, options, rng));
  }
  return out;
}

std::vector<CheckResult> loss_identities(const Options& options) {
  std::vector<CheckResult> out;
  TapeD tape;
  tape.set_recording(false);
  const double e = std::numbers::e;

  {
    const TensorD z(Shape{3}, std::vector<double>{0.3, -1.2, 2.0});
    const TensorD neg(Shape{3}, std::vector<double>{-0.3, 1.2, -2.0});
    const TensorD x(Shape{2}, std::vector<double>{1.0, 0.0});
    const TensorD y(Shape{2}, std::vector<double>{0.0, 2.5});
    const double same = losses::pair_distance(tape, z, z).item();
    const double anti = losses::pair_distance(tape, z, neg).item();
    const double orth = losses::pair_distance(tape, x, y).item();
    const bool ok = std::abs(same - e) <= 1e-6 && std::abs(anti - 1.0 / e) <= 1e-6 && std::abs(orth - 1.0) <= 1e-6;
    char buf[128];
    std::snprintf(buf, sizeof buf, "same %.9f, antipodal %.9f, orthogonal %.9f", same, anti, orth);
    out.push_back({"loss_pair_distance_identities", ok, buf});
  }
  {
    bool ok = true;
    std::string detail;
    for (int k : {1, 2, 3, 7}) {
      const std::int64_t n = 8, d = 4;
      TensorD zm(Shape{n, d}), za(Shape{n, d});
      for (std::int64_t i = 0; i < n * d; ++i) zm.data()[i] = za.data()[i] = (i % d) + 1.0;
      std::vector<std::string> ids;
      std::vector<std::int32_t> cls;
      for (std::int64_t i = 0; i < n; ++i) {
        ids.push_back("s" + std::to_string(i));
        cls.push_back(static_cast<std::int32_t>(i));
      }
      const auto batch = losses::build_pair_batch(ids, cls, k, losses::NegativeMode::different_sample);
      const double loss = losses::contrastive_loss(tape, zm, za, batch).item();
      const double err = std::abs(loss - std::log(k + 1.0));
      ok = ok && batch.k == k && err <= 1e-6;
      detail += "k=" + std::to_string(k) + " err " + format_error(err).substr(19) + "; ";
    }
    out.push_back({"loss_equal_distances_ln_k_plus_1", ok, detail});
  }
  {
    Rng rng(derive_seed(options.seed, 2));
    const auto zm = random_tensor({4, 5}, rng);
    const auto za = random_tensor({4, 5}, rng);
    const std::vector<std::string> ids{"a", "b", "c", "d"};
    const std::vector<std::int32_t> cls{0, 1, 0, 1};
    const auto batch = losses::build_pair_batch(ids, cls, 0, losses::NegativeMode::different_class);
    const double loss = losses::contrastive_loss(tape, zm, za, batch).item();
    out.push_back({"loss_k0_is_zero", loss == 0.0, "loss " + std::to_string(loss)});
  }
  {
    Rng rng(derive_seed(options.seed, 3));
    int violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const auto n = static_cast<std::int64_t>(2 + rng.below(7));
      const std::int64_t k = 1 + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n - 1)));
      const auto zm = random_tensor({n, 8}, rng);
      const auto za = random_tensor({n, 8}, rng);
      std::vector<std::string> ids;
      std::vector<std::int32_t> cls;
      for (std::int64_t i = 0; i < n; ++i) {
        ids.push_back("s" + std::to_string(i));
        cls.push_back(static_cast<std::int32_t>(i));
      }
      const auto batch = losses::build_pair_batch(ids, cls, k, losses::NegativeMode::different_sample, &rng);
      const double loss = losses::contrastive_loss(tape, zm, za, batch).item();
      const double lo = std::log1p(k * std::exp(-2.0)), hi = std::log1p(k * std::exp(2.0));
      if (!(loss >= lo - 1e-12 && loss <= hi + 1e-12)) ++violations;
    }
    out.push_back({"loss_bounds_1000_batches", violations == 0, std::to_string(violations) + " violations"});
  }
  {
    const auto s = [](double v) { return TensorD::scalar(v); };
    const auto lt = s(0.83), lp = s(1.27), lc = s(2.05);
    const auto at = [&](double alpha) { return losses::total_loss(tape, lt, lp, lc, {alpha}).item(); };
    const double l0 = at(0.0), l1 = at(1.0), lh = at(0.5), lq = at(0.25);
    const double err = std::max(std::abs(lh - 0.5 * (l0 + l1)), std::abs(lq - (0.75 * l0 + 0.25 * l1)));
    const bool ok = err <= 1e-7 && std::abs(l0 - (0.83 + 1.27)) <= 1e-12 && std::abs(l1 - 2.05) <= 1e-12;
    char buf[64];
    std::snprintf(buf, sizeof buf, "max deviation from affine %.2e", err);
    out.push_back({"loss_total_affine_in_alpha", ok, buf});
  }
  return out;
}

std::vector<CheckResult> shape_probes(const Options& options) {
  std::vector<CheckResult> out;
  const std::vector<std::pair<std::string, Shape>> expected{
      {"conv1", {1, 64, 8, 56, 56}},   {"conv2_x", {1, 64, 8, 56, 56}}, {"conv3_x", {1, 128, 4, 28, 28}},
      {"conv4_x", {1, 256, 2, 14, 14}}, {"conv5_x", {1, 512, 1, 7, 7}}, {"avgpool", {1, 512}},
      {"fc", {1, 128}}};
  const Tensor rgb(Shape{1, 3, 16, 112, 112}, 0.1f);
  const Tensor flow(Shape{1, 2, 16, 112, 112}, -0.1f);
  for (int depth : {10, 18, 34}) {
    auto config = models::ResNet3DConfig::for_depth(depth);
    if (options.conv1_stride_fault) config.conv1_stride = *options.conv1_stride_fault;
    const std::string name = "shapes_depth" + std::to_string(depth);
    try {
      models::VideoEncoder encoder(config, options.seed);
      Tape tape;
      tape.set_recording(false);
      models::ShapeTrace rgb_trace, flow_trace;
      const auto z = encoder.forward(tape, rgb, flow, false, &rgb_trace, &flow_trace);
      const bool ok = rgb_trace == expected && flow_trace == expected && z.shape() == Shape{1, 256};
      std::string detail;
      for (const auto& [stage, shape] : rgb_trace) detail += stage + " " + shape_to_string(shape) + "; ";
      detail += "fused " + shape_to_string(z.shape());
      out.push_back({name, ok, detail});
    } catch (const Error& e) {
      out.push_back({name, false, std::string("threw: ") + e.what()});
    }
  }
  return out;
}

Tensor gaussian_blob(std::int64_t n, double cx, double cy, double sigma) {
  Tensor t(Shape{n, n});
  for (std::int64_t y = 0; y < n; ++y) {
    for (std::int64_t x = 0; x < n; ++x) {
      const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      t.data()[y * n + x] = static_cast<float>(0.1 + 0.8 * std::exp(-r2 / (2.0 * sigma * sigma)));
    }
  }
  return t;
}

// Integer shift (dx, dy) minimising the sum of squared differences between
// prev(x, y) and next(x + dx, y + dy) over the overlap.
std::pair<int, int> ssd_shift(const Tensor& prev, const Tensor& next, int radius) {
  const std::int64_t n = prev.dim(0);
  double best = std::numeric_limits<double>::infinity();
  std::pair<int, int> arg{0, 0};
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      double ssd = 0.0;
      std::int64_t count = 0;
      for (std::int64_t y = std::max<std::int64_t>(0, -dy); y < std::min(n, n - dy); ++y) {
        for (std::int64_t x = std::max<std::int64_t>(0, -dx); x < std::min(n, n - dx); ++x) {
          const double d = prev.data()[y * n + x] - next.data()[(y + dy) * n + x + dx];
          ssd += d * d;
          ++count;
        }
      }
      ssd /= static_cast<double>(count);
      if (ssd < best) {
        best = ssd;
        arg = {dx, dy};
      }
    }
  }
  return arg;
}

std::vector<CheckResult> flow_checks() {
  std::vector<CheckResult> out;
  constexpr std::int64_t n = 64;
  constexpr double sigma = 6.0, c = 32.0;
  const Tensor base = gaussian_blob(n, c, c, sigma);
  double worst = 0.0;
  bool oracle_ok = true;
  for (int axis = 0; axis < 2; ++axis) {
    for (int s : {-4, -3, -2, -1, 1, 2, 3, 4}) {
      const int dx = axis == 0 ? s : 0, dy = axis == 1 ? s : 0;
      const Tensor moved = gaussian_blob(n, c + dx, c + dy, sigma);
      oracle_ok = oracle_ok && ssd_shift(base, moved, 6) == std::pair<int, int>{dx, dy};
      const Tensor f = flow::farneback_flow(base, moved);
      double mx = 0.0, my = 0.0;
      std::int64_t count = 0;
      for (std::int64_t i = 0; i < n * n; ++i) {
        if (base.data()[i] >= 0.1 + 0.4) {
          mx += f.data()[i];
          my += f.data()[n * n + i];
          ++count;
        }
      }
      worst = std::max({worst, std::abs(mx / count - dx), std::abs(my / count - dy)});
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "worst mean error %.4f px, oracle %s", worst, oracle_ok ? "agrees" : "disagrees");
  out.push_back({"flow_blob_shifts", worst <= 0.2 && oracle_ok, buf});

  const Tensor f = flow::farneback_flow(base, base);
  float peak = 0.0f;
  for (float v : f.data()) peak = std::max(peak, std::abs(v));
  std::snprintf(buf, sizeof buf, "max |flow| %.2e px", static_cast<double>(peak));
  out.push_back({"flow_static_frames", peak < 1e-3f, buf});
  return out;
}

}  // namespace

std::vector<CheckResult> run_all(const Options& options, const ReportFn& report) {
  std::vector<CheckResult> all;
  const auto add = [&](std::vector<CheckResult> batch) {
    for (auto& r : batch) {
      if (report) report(r);
      all.push_back(std::move(r));
    }
  };
  const auto guarded = [&](const std::string& group, auto&& fn) {
    try {
      add(fn());
    } catch (const std::exception& e) {
      add({{group, false, std::string("threw: ") + e.what()}});
    }
  };
  guarded("gradients", [&] { return gradient_checks(options); });
  guarded("loss_identities", [&] { return loss_identities(options); });
  guarded("shapes", [&] { return shape_probes(options); });
  guarded("flow", [] { return flow_checks(); });
  return all;
}

}  // namespace xmodal::selftest
