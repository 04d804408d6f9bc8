// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion, tolerances fixed below.
// Exit status is 0 only when every criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "xmodal/dataset.hpp"
#include "xmodal/encoders.hpp"
#include "xmodal/errors.hpp"
#include "xmodal/facs.hpp"
#include "xmodal/flowprep.hpp"
#include "xmodal/losses.hpp"
#include "xmodal/rng.hpp"
#include "xmodal/synthdata.hpp"
#include "xmodal/trainer.hpp"

using namespace xmodal;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances.
constexpr double kGradTol = 1e-3;
constexpr double kScalarLossGradTol = 1e-4;
constexpr int kProbes = 20;
constexpr double kGradBudgetSeconds = 120.0;
constexpr double kIdentityTol = 1e-6;
constexpr double kAffineTol = 1e-7;
constexpr int kBoundBatches = 1000;
// The bounds are attained exactly (1-D features have cosines of exactly +-1),
// so comparisons allow a few ulps of rounding and nothing more.
constexpr double kBoundUlps = 4 * std::numeric_limits<double>::epsilon();
constexpr double kFlowTol = 0.2;
constexpr double kStaticFlowTol = 1e-3;
constexpr double kLearnAccuracy = 0.95;
constexpr double kLearnBudgetSeconds = 600.0;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------------------------------------------------------------- gradients

using Inputs = std::vector<TensorD>;
using Forward = std::function<TensorD(TapeD&, const Inputs&)>;

TensorD random_tensor(const Shape& shape, Rng& rng, double spread = 1.0) {
  TensorD t(shape);
  for (auto& v : t.data()) v = spread * rng.normal();
  return t;
}

// Reduces any output to a scalar with a fixed random projection.
TensorD project(TapeD& tape, const TensorD& out, const TensorD& weights) {
  if (out.numel() == 1) return out;
  return sum(tape, mul(tape, out, weights));
}

// Worst relative error over `probes` random coordinates of the inputs.
double gradient_check(const Forward& forward, Inputs inputs, Rng& rng) {
  TensorD weights;
  {
    TapeD probe;
    probe.set_recording(false);
    const auto out = forward(probe, inputs);
    weights = random_tensor(out.shape(), rng);
  }
  TapeD tape;
  for (auto& x : inputs) x.set_requires_grad();
  tape.backward(project(tape, forward(tape, inputs), weights));

  double worst = 0.0;
  for (int p = 0; p < kProbes; ++p) {
    const auto which = rng.below(inputs.size());
    const auto index = rng.below(inputs[which].numel());
    const double analytic = inputs[which].grad()[index];
    const auto f = [&](const std::vector<double>& v) {
      Inputs moved;
      for (const auto& x : inputs) moved.push_back(x.clone());
      moved[which].data()[index] = v[0];
      TapeD t;
      t.set_recording(false);
      return project(t, forward(t, moved), weights).item();
    };
    const double x0 = inputs[which].data()[index];
    const double numeric = oracle::central_difference(f, {x0}, 0, 1e-6 * std::max(1.0, std::abs(x0)));
    worst = std::max(worst, oracle::relative_error(analytic, numeric));
  }
  return worst;
}

Verdict criterion_gradients() {
  const auto t0 = Clock::now();
  Rng rng(7001);
  struct Case {
    std::string name;
    Forward forward;
    Inputs inputs;
    double tol;
  };
  std::vector<Case> cases;

  Conv3dOptions conv_opts;
  conv_opts.stride = {1, 2, 1};
  conv_opts.padding = {1, 1, 0};
  cases.push_back({"conv3d",
                   [conv_opts](TapeD& t, const Inputs& in) { return conv3d(t, in[0], in[1], conv_opts); },
                   {random_tensor({2, 2, 3, 5, 5}, rng), random_tensor({3, 2, 2, 3, 3}, rng, 0.5)},
                   kGradTol});
  cases.push_back({"linear", [](TapeD& t, const Inputs& in) { return linear(t, in[0], in[1], in[2]); },
                   {random_tensor({3, 4}, rng), random_tensor({4, 5}, rng), random_tensor({5}, rng)},
                   kGradTol});
  cases.push_back({"batch_norm",
                   [](TapeD& t, const Inputs& in) {
                     BatchNormState<double> state(3);
                     return batch_norm(t, in[0], in[1], in[2], state, true);
                   },
                   {random_tensor({4, 3, 2, 2}, rng), random_tensor({3}, rng), random_tensor({3}, rng)},
                   kGradTol});
  cases.push_back({"softmax_cross_entropy",
                   [](TapeD& t, const Inputs& in) {
                     const std::vector<std::int32_t> labels{0, 3, 1};
                     return losses::cross_entropy(t, softmax(t, in[0]), labels);
                   },
                   {random_tensor({3, 5}, rng)},
                   kScalarLossGradTol});
  cases.push_back({"cosine_similarity",
                   [](TapeD& t, const Inputs& in) { return cosine_similarity(t, in[0], in[1]); },
                   {random_tensor({6}, rng), random_tensor({6}, rng)},
                   kGradTol});
  cases.push_back({"pair_distance",
                   [](TapeD& t, const Inputs& in) { return losses::pair_distance(t, in[0], in[1]); },
                   {random_tensor({6}, rng), random_tensor({6}, rng)},
                   kScalarLossGradTol});
  losses::PairBatch batch;
  batch.sample_ids = {"a", "b", "c", "d"};
  batch.k = 3;
  batch.negatives = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
  cases.push_back({"contrastive_loss",
                   [batch](TapeD& t, const Inputs& in) { return losses::contrastive_loss(t, in[0], in[1], batch); },
                   {random_tensor({4, 6}, rng), random_tensor({4, 6}, rng)},
                   kScalarLossGradTol});

  bool ok = true;
  std::string detail;
  for (auto& c : cases) {
    const double worst = gradient_check(c.forward, c.inputs, rng);
    ok = ok && worst < c.tol;
    detail += c.name + fmt(" %.1e", worst) + (worst < c.tol ? "" : " (over)") + "; ";
  }
  const double elapsed = seconds_since(t0);
  ok = ok && elapsed < kGradBudgetSeconds;
  detail += fmt("%.0f probes each, %.1f s", kProbes, elapsed);
  return {ok, detail};
}

// ---------------------------------------------------------------- loss identities

TensorD vec(const std::vector<double>& v) { return TensorD(Shape{static_cast<std::int64_t>(v.size())}, v); }

TensorD rows(const std::vector<std::vector<double>>& r) {
  std::vector<double> flat;
  for (const auto& x : r) flat.insert(flat.end(), x.begin(), x.end());
  return TensorD(Shape{static_cast<std::int64_t>(r.size()), static_cast<std::int64_t>(r[0].size())}, flat);
}

Verdict criterion_loss_identities() {
  const double e = std::numbers::e;
  TapeD tape;
  tape.set_recording(false);
  std::vector<std::string> failures;
  const auto expect = [&](const std::string& what, double got, double want, double tol) {
    if (!(std::abs(got - want) <= tol)) failures.push_back(what + fmt(" got %.9f want %.9f", got, want));
  };
  const std::vector<double> z{0.3, -1.2, 0.8, 2.0};
  expect("d(z,z)", losses::pair_distance(tape, vec(z), vec(z)).item(), e, kIdentityTol);
  expect("d(z,-z)", losses::pair_distance(tape, vec(z), vec({-0.3, 1.2, -0.8, -2.0})).item(), 1.0 / e, kIdentityTol);
  expect("d(orthogonal)", losses::pair_distance(tape, vec({1, 1, 0, 0}), vec({1, -1, 2, 0})).item(), 1.0,
         kIdentityTol);

  for (int k : {1, 2, 3, 7}) {
    const int n = 8;
    std::vector<std::vector<double>> same(n, z);
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back("s" + std::to_string(i));
    const auto b = losses::build_pair_batch(ids, std::vector<std::int32_t>(n, 0), k,
                                            losses::NegativeMode::different_sample);
    expect("ln(k+1) k=" + std::to_string(k), losses::contrastive_loss(tape, rows(same), rows(same), b).item(),
           std::log(k + 1.0), kIdentityTol);
  }

  Rng rng(7002);
  {
    std::vector<std::vector<double>> zm(4, std::vector<double>(5)), za = zm;
    for (auto& r : zm)
      for (auto& v : r) v = rng.normal();
    for (auto& r : za)
      for (auto& v : r) v = rng.normal();
    losses::PairBatch empty;
    empty.sample_ids = {"a", "b", "c", "d"};
    empty.negatives.assign(4, {});
    if (losses::contrastive_loss(tape, rows(zm), rows(za), empty).item() != 0.0) failures.push_back("k=0 not exactly 0");
  }

  int oracle_mismatches = 0, bound_violations = 0;
  std::string first_violation;
  for (int trial = 0; trial < kBoundBatches; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(9)), d = 1 + static_cast<int>(rng.below(10));
    std::vector<std::vector<double>> zm(n, std::vector<double>(d)), za = zm;
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) {
      ids.push_back("x" + std::to_string(i));
      for (auto& v : zm[i]) v = rng.normal() * 3;
      for (auto& v : za[i]) v = rng.normal() * 3;
    }
    const auto b = losses::build_pair_batch(ids, std::vector<std::int32_t>(n, 0), 1 + static_cast<std::int64_t>(rng.below(n - 1)),
                                            losses::NegativeMode::different_sample, &rng);
    const double v = losses::contrastive_loss(tape, rows(zm), rows(za), b).item();
    const double k = static_cast<double>(b.k);
    // The same value from the scalar oracle.
    const double reference = oracle::contrastive(zm, za, b.negatives);
    if (std::abs(v - reference) > 1e-9) ++oracle_mismatches;
    const double lo = std::log1p(k * std::exp(-2.0)), hi = std::log1p(k * std::exp(2.0));
    if (v < lo * (1 - kBoundUlps) || v > hi * (1 + kBoundUlps)) {
      if (!bound_violations++) {
        first_violation = fmt("loss %.17g outside [%.17g, ", v, lo) + fmt("%.17g] with k=%.0f, ", hi, k) +
                          fmt("d=%.0f, oracle %.17g", d, reference);
      }
    }
  }
  if (oracle_mismatches) failures.push_back(std::to_string(oracle_mismatches) + " oracle mismatches");
  if (bound_violations) {
    failures.push_back(std::to_string(bound_violations) + " bound violations, first: " + first_violation);
  }

  double affine_dev = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const double lt = rng.uniform(0, 3), lp = rng.uniform(0, 3), lc = rng.uniform(0, 3);
    const auto at = [&](double a) {
      return losses::total_loss(tape, TensorD::scalar(lt), TensorD::scalar(lp), TensorD::scalar(lc), {a}).item();
    };
    const double l0 = at(0.0), l1 = at(1.0), lh = at(0.5);
    affine_dev = std::max({affine_dev, std::abs(l0 - (lt + lp)), std::abs(l1 - lc), std::abs(lh - 0.5 * (l0 + l1))});
  }
  if (affine_dev > kAffineTol) failures.push_back(fmt("affine deviation %.2e", affine_dev));

  std::string detail = failures.empty() ? fmt("all identities within 1e-6; %.0f random batches in bounds; affine deviation %.1e",
                                              kBoundBatches, affine_dev)
                                        : "";
  for (const auto& f : failures) detail += f + "; ";
  return {failures.empty(), detail};
}

// ---------------------------------------------------------------- stage shapes

Verdict criterion_stage_shapes() {
  using models::ShapeTrace;
  const ShapeTrace expected{{"conv1", {1, 64, 8, 56, 56}},   {"conv2_x", {1, 64, 8, 56, 56}},
                            {"conv3_x", {1, 128, 4, 28, 28}}, {"conv4_x", {1, 256, 2, 14, 14}},
                            {"conv5_x", {1, 512, 1, 7, 7}},   {"avgpool", {1, 512}},
                            {"fc", {1, 128}}};
  bool ok = true;
  std::string detail;
  for (int depth : {10, 18, 34}) {
    models::VideoEncoder enc(models::ResNet3DConfig::for_depth(depth), 11);
    Tape tape;
    tape.set_recording(false);
    ShapeTrace rgb_trace, flow_trace;
    const auto z = enc.forward(tape, Tensor(Shape{1, 3, 16, 112, 112}, 0.3f), Tensor(Shape{1, 2, 16, 112, 112}, -0.2f),
                               false, &rgb_trace, &flow_trace);
    const bool this_ok = rgb_trace == expected && flow_trace == expected && z.shape() == Shape{1, 256};
    ok = ok && this_ok;
    detail += "depth " + std::to_string(depth) + (this_ok ? " ok" : " MISMATCH") + "; ";
  }
  detail += "8x56x56, 8x56x56, 4x28x28, 2x14x14, 1x7x7, 128 per stream, 256 fused";
  return {ok, detail};
}

// ---------------------------------------------------------------- flow

Tensor to_tensor(const std::vector<float>& img, std::int64_t n) {
  return Tensor(Shape{n, n}, std::vector<float>(img.begin(), img.end()));
}

Verdict criterion_flow() {
  constexpr std::int64_t n = 72;
  constexpr double sigma = 7.0, cx = 35.0, cy = 37.0, base = 0.1, peak = 0.8;
  const auto prev = oracle::blob(n, cx, cy, sigma, base, peak);
  double worst = 0.0;
  bool oracle_agrees = true;
  for (int axis = 0; axis < 2; ++axis) {
    for (int s : {-4, -3, -2, -1, 1, 2, 3, 4}) {
      const int dx = axis == 0 ? s : 0, dy = axis == 1 ? s : 0;
      const auto next = oracle::blob(n, cx + dx, cy + dy, sigma, base, peak);
      const auto truth = oracle::best_shift(prev, next, n, 6);
      oracle_agrees = oracle_agrees && truth == std::pair<int, int>{dx, dy};
      const Tensor f = flow::farneback_flow(to_tensor(prev, n), to_tensor(next, n));
      double mx = 0, my = 0;
      int count = 0;
      for (std::int64_t i = 0; i < n * n; ++i) {
        if (prev[i] >= base + 0.5 * peak) {  // half-max region of the blob
          mx += f.data()[i];
          my += f.data()[n * n + i];
          ++count;
        }
      }
      worst = std::max({worst, std::abs(mx / count - truth.first), std::abs(my / count - truth.second)});
    }
  }
  Rng rng(7004);
  std::vector<float> texture(static_cast<std::size_t>(n * n));
  for (auto& v : texture) v = static_cast<float>(rng.uniform());
  double static_peak = 0.0;
  for (const auto& img : {prev, texture}) {
    const Tensor f = flow::farneback_flow(to_tensor(img, n), to_tensor(img, n));
    for (float v : f.data()) static_peak = std::max(static_peak, static_cast<double>(std::abs(v)));
  }
  const bool ok = oracle_agrees && worst <= kFlowTol && static_peak < kStaticFlowTol;
  return {ok, fmt("worst mean error %.4f px over 16 shifts, static max |flow| %.1e px", worst, static_peak) +
                  (oracle_agrees ? "; SSD oracle agrees with every shift" : "; SSD oracle DISAGREES")};
}

// ---------------------------------------------------------------- data

std::vector<ClipPair> synth_pairs(int classes, int per_class, int size, int frames, std::uint64_t seed) {
  synth::SynthSpec spec;
  spec.n_classes = classes;
  spec.samples_per_class = per_class;
  spec.n_subjects = 5;
  spec.size = size;
  spec.frames = frames;
  spec.seed = seed;
  data::PrepOptions prep;
  prep.size = size;
  prep.frames = frames;
  return data::prepare_samples(synth::generate_in_memory(spec), prep);
}

// ---------------------------------------------------------------- learnability

Verdict criterion_learnability() {
  const auto t0 = Clock::now();
  // 2 classes x 8 samples at 32 x 32, 16 frames.
  const auto data = synth_pairs(2, 8, 32, 16, 5);
  train::ExperimentConfig cfg;
  cfg.depth = 10;
  cfg.alpha = 0.5;
  cfg.k = 4;
  cfg.lr = 1e-4;
  cfg.epochs = 30;
  cfg.batch_size = 8;
  auto result = train::train(cfg, data, 2);
  const double accuracy = train::evaluate(*result.video, data);
  const auto& epochs = result.report.epochs;
  const double first = epochs.front().l_total, last = epochs.back().l_total;
  const double elapsed = seconds_since(t0);
  const bool ok = epochs.size() == 30 && accuracy >= kLearnAccuracy && last < first && elapsed < kLearnBudgetSeconds;
  return {ok, fmt("train accuracy %.3f (evaluate on the training set), L epoch 1 %.4f", accuracy, first) +
                  fmt(" -> epoch 30 %.4f, %.0f s on this machine", last, elapsed)};
}

// ---------------------------------------------------------------- harness

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    out.push_back(cells);
  }
  return out;
}

bool numeric(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    return used == s.size() && std::isfinite(v);
  } catch (...) {
    return false;
  }
}

Verdict criterion_harness() {
  const auto t0 = Clock::now();
  // 5 classes x 20 samples, reduced to 16 x 16 pixels and 8 frames so the
  // whole grid runs in minutes.
  const auto data = synth_pairs(5, 20, 16, 8, 6);
  train::ExperimentConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  cfg.k = 4;
  cfg.n_repeats = 2;
  cfg.lr = 1e-3;
  std::vector<std::string> failures;

  // Ablation: two arms, identical seeds, splits and initial weights.
  const auto ab = train::ablate(cfg, data);
  if (ab.arms.size() != 2 || ab.arms[0].label != "L_theta" || ab.arms[1].label != "L") failures.push_back("ablation arms");
  if (!ab.controlled()) failures.push_back("ablation not controlled");
  for (std::size_t r = 0; ab.arms.size() == 2 && r < ab.arms[0].result.runs.size(); ++r) {
    const auto& a = ab.arms[0].result.runs[r];
    const auto& b = ab.arms[1].result.runs[r];
    auto ca = train::to_json(a.config), cb = train::to_json(b.config);
    if (ca["loss_mode"] != "video_only" || cb["loss_mode"] != "full") failures.push_back("ablation loss modes");
    ca.erase("loss_mode");
    cb.erase("loss_mode");
    if (ca != cb) failures.push_back("ablation configs differ beyond the loss");
    if (a.init_checksum != b.init_checksum || a.test_ids != b.test_ids || a.seed != b.seed) {
      failures.push_back("ablation repeat " + std::to_string(r) + " differs in seed/split/init");
    }
  }
  const auto ab_rows = parse_csv(ab.to_csv());
  if (ab_rows.size() != 3 || ab_rows[0] != std::vector<std::string>{"arm", "mean", "std", "n", "formatted"}) {
    failures.push_back("ablation CSV shape");
  }

  // Alpha sweep.
  const auto alpha_rows = parse_csv(train::alpha_csv(train::sweep_alpha(cfg, data, {0, 0.25, 0.5, 0.75, 1})));
  bool alpha_ok = alpha_rows.size() == 6 && alpha_rows[0] == std::vector<std::string>{"alpha", "mean", "std", "n"};
  for (std::size_t i = 1; alpha_ok && i < alpha_rows.size(); ++i) {
    alpha_ok = alpha_rows[i].size() == 4 && std::all_of(alpha_rows[i].begin(), alpha_rows[i].end(), numeric) &&
               std::abs(std::stod(alpha_rows[i][0]) - 0.25 * static_cast<double>(i - 1)) < 1e-12 &&
               std::stoi(alpha_rows[i][3]) == cfg.n_repeats;
  }
  if (!alpha_ok) failures.push_back("alpha CSV incomplete");

  // Depth sweep.
  const auto depth_rows = parse_csv(train::depth_csv(train::sweep_depth(cfg, data, {10, 18, 34}, {"baseline", "full"})));
  bool depth_ok = depth_rows.size() == 7 &&
                  depth_rows[0] == std::vector<std::string>{"depth", "mode", "alpha", "mean", "std", "n"};
  std::set<std::pair<std::string, std::string>> grid;
  for (std::size_t i = 1; depth_ok && i < depth_rows.size(); ++i) {
    const auto& r = depth_rows[i];
    depth_ok = r.size() == 6 && numeric(r[0]) && numeric(r[2]) && numeric(r[3]) && numeric(r[4]) && numeric(r[5]) &&
               (r[1] != "baseline" || std::stod(r[2]) == 0.0);
    if (depth_ok) grid.insert({r[0], r[1]});
  }
  if (!depth_ok || grid.size() != 6) failures.push_back("depth CSV incomplete");

  // Forced-equal seeds give zero spread.
  const auto same = train::run_repeated(cfg, data, 5, true);
  std::set<std::uint64_t> finals;
  for (const auto& r : same.runs) finals.insert(r.final_checksum);
  if (same.runs.size() != 5 || same.std != 0.0 || finals.size() != 1) failures.push_back("forced seeds std != 0");
  const auto formatted = same.formatted();
  if (formatted.find("±0.00") == std::string::npos) failures.push_back("formatted '" + formatted + "'");

  std::string detail = failures.empty() ? "ablation controlled by checksum; alpha CSV 5 rows; depth CSV 6 rows; "
                                          "run_repeated(5) forced seeds " +
                                              formatted
                                        : "";
  for (const auto& f : failures) detail += f + "; ";
  detail += fmt(" (%.0f s)", seconds_since(t0));
  return {failures.empty(), detail};
}

// ---------------------------------------------------------------- isolation

Verdict criterion_isolation() {
  const auto data = synth_pairs(3, 6, 16, 8, 7);
  train::ExperimentConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 6;
  cfg.k = 3;
  cfg.lr = 1e-3;
  auto result = train::run_once(cfg, data);
  const fs::path dir = fs::temp_directory_path() / "xmodal_acceptance_isolation";
  fs::remove_all(dir);
  train::save_models(dir, result);

  std::vector<ClipPair> test;
  const std::set<std::string> ids(result.report.test_ids.begin(), result.report.test_ids.end());
  for (const auto& p : data)
    if (ids.count(p.sample_id)) test.push_back(p);

  const auto attr_before = models::checksum(result.attr->parameters());
  const auto in_memory = train::predict(*result.video, data);
  const auto attr_after = models::checksum(result.attr->parameters());

  const auto run_eval = [&] {
    auto model = train::load_video_model(dir);
    return std::make_pair(train::predict(*model, data), train::evaluate(*model, test));
  };
  const auto intact = run_eval();
  {
    std::ofstream os(dir / "attr.mxt", std::ios::binary | std::ios::trunc);
    os << "corrupted attribute checkpoint";
    std::ofstream(dir / "attr.json", std::ios::trunc) << "{ broken";
  }
  const auto corrupted = run_eval();
  fs::remove(dir / "attr.mxt");
  fs::remove(dir / "attr.json");
  const auto deleted = run_eval();
  fs::remove_all(dir);

  const bool ok = attr_before == attr_after && intact.first == in_memory && corrupted == intact && deleted == intact &&
                  intact.second == *result.report.test_accuracy;
  return {ok, fmt("test accuracy %.4f intact, %.4f corrupted, %.4f deleted", intact.second, corrupted.second,
                  deleted.second) +
                  "; attribute checksum " + (attr_before == attr_after ? "unchanged" : "CHANGED") + " by evaluate"};
}

// ---------------------------------------------------------------- FACS

Verdict criterion_facs() {
  const std::vector<std::pair<int, std::string>> golden = {
      {1, "Inner Brow Raiser"},     {2, "Outer Brow Raiser"},    {4, "Brow Lowerer"},
      {5, "Upper Lid Raiser"},      {6, "Check Raiser"},         {7, "Lid Tightener"},
      {9, "Nose Wrinkler"},         {10, "Upper Lip Raiser"},    {11, "Nasolabial Deepener"},
      {12, "Lip Corner Puller"},    {13, "Check Puffer"},        {14, "Dimpler"},
      {15, "Lip Corner Depressor"}, {16, "Lower Lip Depressor"}, {17, "Chin Raiser"},
      {18, "Lip Puckerer"},         {20, "Lip stretcher"},       {22, "Lip Funneler"},
      {23, "Lip Tightener"},        {24, "Lip Pressor"},         {25, "Lips part"},
      {26, "Jaw Drop"},             {27, "Mouth Stretch"},       {28, "Lip Suck"},
      {41, "Lid droop"},            {42, "Slit"},                {43, "Eyes Closed"},
      {44, "Squint"},               {45, "Blink"},               {46, "Wink"}};
  const auto book = facs::codebook();
  int matched = 0;
  for (std::size_t i = 0; i < golden.size() && i < book.size(); ++i) {
    matched += book[i].id == golden[i].first && std::string(book[i].description) == golden[i].second &&
               std::string(facs::description_of(golden[i].first)) == golden[i].second;
  }
  const auto ids = facs::parse_au_string("AU6+AU12");
  const auto phrase = facs::describe(ids);
  const bool pair_ok = ids == std::vector<int>{6, 12} && std::string(facs::description_of(6)) == "Check Raiser" &&
                       std::string(facs::description_of(12)) == "Lip Corner Puller" &&
                       phrase.text == "check raiser and lip corner puller";
  const bool ok = book.size() == 30 && matched == 30 && pair_ok;
  return {ok, std::to_string(matched) + "/30 pairs match; AU6+AU12 -> \"" + phrase.text + "\""};
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments select criteria by number, e.g. `acceptance 2 7`.
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", criterion_gradients},
      {2, "loss identities", criterion_loss_identities},
      {3, "stage output shapes", criterion_stage_shapes},
      {4, "flow accuracy", criterion_flow},
      {5, "end-to-end learnability", criterion_learnability},
      {6, "experiment harness", criterion_harness},
      {7, "inference isolation", criterion_isolation},
      {8, "FACS golden data", criterion_facs},
  };
  int failed = 0;
  int ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    ++ran;
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s criterion %d (%s): %s\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
