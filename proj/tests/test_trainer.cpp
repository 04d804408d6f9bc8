// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "oracles.hpp"
#include "xmodal/dataset.hpp"
#include "xmodal/errors.hpp"
#include "xmodal/trainer.hpp"

using namespace xmodal;
using namespace xmodal::train;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Small prepared clips: `classes` x `per_class` samples over `subjects` subjects.
std::vector<ClipPair> tiny_data(int classes, int per_class, int subjects, std::uint64_t seed = 3) {
  synth::SynthSpec spec;
  spec.n_classes = classes;
  spec.samples_per_class = per_class;
  spec.n_subjects = subjects;
  spec.frames = 4;
  spec.size = 16;
  spec.seed = seed;
  data::PrepOptions prep;
  prep.frames = 4;
  prep.size = 16;
  return data::prepare_samples(synth::generate_in_memory(spec), prep);
}

ExperimentConfig quick() {
  ExperimentConfig c;
  c.epochs = 1;
  c.batch_size = 4;
  c.k = 2;
  c.n_repeats = 2;
  c.lr = 1e-3;
  return c;
}

const std::vector<ClipPair>& shared_data() {
  static const auto data = tiny_data(2, 5, 5);
  return data;
}

}  // namespace

TEST_CASE("subject split") {
  const auto& data = shared_data();
  const auto split = split_by_subject(data, 3, 2, 17);
  CHECK(split.train_subjects.size() == 3);
  CHECK(split.test_subjects.size() == 2);
  std::set<int> train_s(split.train_subjects.begin(), split.train_subjects.end());
  for (int s : split.test_subjects) CHECK_FALSE(train_s.count(s));
  CHECK(split.train.size() + split.test.size() == data.size());
  for (auto i : split.train) CHECK(train_s.count(data[i].subject_id));
  for (auto i : split.test) CHECK_FALSE(train_s.count(data[i].subject_id));
  const auto again = split_by_subject(data, 3, 2, 17);
  CHECK(again.train == split.train);
  CHECK(again.test_subjects == split.test_subjects);

  // Rounding goes toward train and leaves at least one test subject.
  const auto seven = tiny_data(2, 7, 7);
  CHECK(split_by_subject(seven, 3, 2, 0).train_subjects.size() == 5);  // ceil(4.2)
  CHECK(split_by_subject(seven, 100, 1, 0).test_subjects.size() == 1);

  std::vector<ClipPair> four(data.begin(), data.end());
  std::erase_if(four, [](const ClipPair& p) { return p.subject_id == 5; });
  CHECK_THROWS_AS(split_by_subject(four, 3, 2, 0), ConfigError);
}

TEST_CASE("experiment config") {
  const auto d = ExperimentConfig::desk();
  CHECK(d.epochs == 30);
  CHECK(d.batch_size == 8);
  CHECK(d.lr == 1e-4);
  CHECK(d.n_repeats == 5);
  CHECK(d.train_fraction() == doctest::Approx(0.6));
  const auto p = ExperimentConfig::full_scale();
  CHECK(p.epochs == 200);
  CHECK(p.batch_size == 32);

  const auto c = config_from_json(json{{"alpha", 0.25}, {"split_ratio", "4:1"}, {"negative_mode", "different_sample"}});
  CHECK(c.alpha == 0.25);
  CHECK(c.split_train == 4);
  CHECK(c.split_test == 1);
  CHECK(c.negative_mode == losses::NegativeMode::different_sample);
  CHECK(config_from_json(to_json(c)).alpha == 0.25);
  CHECK(to_json(config_from_json(to_json(c))) == to_json(c));
  try {
    config_from_json(json{{"learning_rate", 0.1}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("learning_rate") != std::string::npos);
  }
  CHECK_THROWS_AS(config_from_json(json{{"alpha", "high"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"split_ratio", "3-2"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"alpha", 1.5}}).validate(), ConfigError);
  ExperimentConfig bad;
  bad.depth = 50;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.n_repeats = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(parse_loss_mode("video_only") == LossMode::video_only);
  CHECK_THROWS_AS(parse_loss_mode("text_only"), ConfigError);
}

TEST_CASE("training is deterministic and reports every loss") {
  const auto& data = shared_data();
  auto cfg = quick();
  cfg.epochs = 2;
  const auto a = train::train(cfg, data, 2);
  const auto b = train::train(cfg, data, 2);
  CHECK(a.report.final_checksum == b.report.final_checksum);
  CHECK(a.report.init_checksum == b.report.init_checksum);
  CHECK(a.report.to_json() == b.report.to_json());
  CHECK(a.report.final_checksum != a.report.init_checksum);
  REQUIRE(a.report.epochs.size() == 2);
  // 10 samples in batches of 4: 4, 4, 2.
  CHECK(a.report.epochs[0].steps == 3);
  CHECK(a.report.total_steps == 6);
  for (const auto& e : a.report.epochs) {
    CHECK(e.l_theta > 0);
    CHECK(e.l_phi > 0);
    CHECK(e.l_contrast > 0);
    CHECK(e.l_total == doctest::Approx(0.5 * (e.l_theta + e.l_phi) + 0.5 * e.l_contrast).epsilon(1e-5));
    CHECK(e.train_accuracy >= 0.0);
    CHECK(e.train_accuracy <= 1.0);
  }
  const json j = a.report.to_json();
  for (const char* key : {"L_theta", "L_phi", "L_theta_phi", "L", "steps", "train_accuracy"}) {
    CHECK(j["epochs"][0].contains(key));
  }
  CHECK(j["config"]["alpha"] == 0.5);

  auto other = cfg;
  other.seed = 1;
  CHECK(train::train(other, data, 2).report.final_checksum != a.report.final_checksum);
}

TEST_CASE("a trailing single-sample batch is merged") {
  const auto data = tiny_data(3, 3, 5);  // 9 samples
  auto cfg = quick();
  const auto r = train::train(cfg, data, 3);
  // 4, 4, 1 becomes 4, 5.
  CHECK(r.report.total_steps == 2);
}

TEST_CASE("alpha = 0 gives the contrastive term no weight") {
  const auto& data = shared_data();
  auto full = quick();
  full.alpha = 0.0;
  auto video = full;
  video.loss_mode = LossMode::video_only;
  const auto a = train::train(full, data, 2);
  const auto b = train::train(video, data, 2);
  CHECK(b.attr == nullptr);
  CHECK(a.attr != nullptr);
  // The contrastive term is still recorded.
  CHECK(a.report.epochs[0].l_contrast > 0);
  CHECK(b.report.epochs[0].l_contrast == 0);
  CHECK(b.report.epochs[0].l_phi == 0);
  // Video parameters see only L_theta in both runs.
  CHECK(a.report.final_checksum == b.report.final_checksum);
  CHECK(a.report.epochs[0].l_theta == b.report.epochs[0].l_theta);
}

TEST_CASE("non-finite values abort with a diagnostic") {
  // Copies of a pair share storage, so poison a clone.
  auto data = shared_data();
  data[0].rgb = data[0].rgb.clone();
  data[0].rgb.data()[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    train::train(quick(), data, 2);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string what = e.what();
    CHECK(what.find("epoch 1 step ") != std::string::npos);
    CHECK(what.find("conv3d") != std::string::npos);
  }
  CHECK(std::isfinite(shared_data()[0].rgb.data()[0]));

  // Overflowing weights are caught at the first non-finite activation.
  auto blow_up = quick();
  blow_up.lr = 1e30;
  blow_up.epochs = 3;
  try {
    train::train(blow_up, shared_data(), 2);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string what = e.what();
    INFO(what);
    CHECK(what.find("epoch ") != std::string::npos);
    CHECK(what.find(" step ") != std::string::npos);
  }
}

TEST_CASE("evaluation uses the video branch only") {
  const auto data = tiny_data(5, 8, 5, 8);
  auto cfg = quick();
  auto result = train::train(cfg, std::span(data).first(10), 5);
  const auto attr_before = models::checksum(result.attr->parameters());
  const auto video_before = models::checksum(result.video->state());
  const double acc = evaluate(*result.video, data, 2);
  CHECK(models::checksum(result.attr->parameters()) == attr_before);
  CHECK(models::checksum(result.video->state()) == video_before);
  CHECK(evaluate(*result.video, data, 1) == acc);
  const auto preds = predict(*result.video, data, 3);
  CHECK(preds == predict(*result.video, data, 1));
  CHECK_THROWS_AS(evaluate(*result.video, std::span<const ClipPair>{}), ContractError);
  CHECK(class_count(data) == 5);

  // An untrained model scores near chance on 40 balanced samples.
  models::ResNet3DConfig rc;
  rc.depth = 10;
  models::VideoModel fresh(rc, 5, 99);
  const double chance = evaluate(fresh, data);
  const auto [lo, hi] = oracle::binomial_interval_99(0.2, static_cast<std::int64_t>(data.size()));
  INFO("untrained accuracy " << chance);
  CHECK(chance >= lo);
  CHECK(chance <= hi);
}

TEST_CASE("checkpoints reload the video model without the attribute files") {
  const auto& data = shared_data();
  auto result = train::train(quick(), data, 2);
  const fs::path dir = fs::temp_directory_path() / "xmodal_trainer_ckpt";
  fs::remove_all(dir);
  save_models(dir, result);
  CHECK(fs::exists(dir / "video.mxt"));
  CHECK(fs::exists(dir / "attr.mxt"));
  const auto expected = predict(*result.video, data);
  fs::remove(dir / "attr.mxt");
  fs::remove(dir / "attr.json");
  auto loaded = load_video_model(dir);
  CHECK(models::checksum(loaded->state()) == models::checksum(result.video->state()));
  CHECK(predict(*loaded, data) == expected);
  fs::remove(dir / "video.mxt");
  CHECK_THROWS_AS(load_video_model(dir), IoError);
  fs::remove_all(dir);
}

TEST_CASE("repeated runs, sweeps and the ablation") {
  const auto data = tiny_data(2, 5, 5);
  auto cfg = quick();

  const auto same = run_repeated(cfg, data, 2, true);
  REQUIRE(same.runs.size() == 2);
  CHECK(same.std == 0.0);
  CHECK(same.runs[0].final_checksum == same.runs[1].final_checksum);
  const auto varied = run_repeated(cfg, data, 2, false);
  CHECK(varied.runs[0].seed == 0);
  CHECK(varied.runs[1].seed == 1);
  CHECK_THROWS_AS(run_repeated(cfg, data, 1), ConfigError);
  for (const auto& r : varied.runs) {
    REQUIRE(r.test_accuracy.has_value());
    CHECK(*r.test_accuracy >= 0.0);
    CHECK(*r.test_accuracy <= 1.0);
    std::set<std::string> train_ids(r.train_ids.begin(), r.train_ids.end());
    for (const auto& id : r.test_ids) CHECK_FALSE(train_ids.count(id));
  }

  RepeatedResult fmt;
  fmt.mean = 0.7782;
  fmt.std = 0.0365;
  CHECK(fmt.formatted() == "77.82±3.65");

  const auto alpha_rows = sweep_alpha(cfg, data, {0.75, 0.0, 0.25});
  REQUIRE(alpha_rows.size() == 3);
  CHECK(alpha_rows[0].alpha == 0.0);
  CHECK(alpha_rows[2].alpha == 0.75);
  const auto csv = alpha_csv(alpha_rows);
  CHECK(csv.rfind("alpha,mean,std,n\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK_THROWS_AS(sweep_alpha(cfg, data, {0.5, 0.5}), ConfigError);
  CHECK_THROWS_AS(sweep_alpha(cfg, data, {1.5}), ConfigError);

  const auto depth_rows = sweep_depth(cfg, data, {10}, {"baseline", "full"});
  REQUIRE(depth_rows.size() == 2);
  CHECK(depth_rows[0].mode == "baseline");
  CHECK(depth_rows[0].alpha == 0.0);
  CHECK(depth_rows[1].alpha == cfg.alpha);
  CHECK(depth_csv(depth_rows).rfind("depth,mode,alpha,mean,std,n\n", 0) == 0);
  CHECK_THROWS_AS(sweep_depth(cfg, data, {10}, {"text"}), ConfigError);

  const auto ab = ablate(cfg, data);
  REQUIRE(ab.arms.size() == 2);
  CHECK(ab.arms[0].label == "L_theta");
  CHECK(ab.arms[1].label == "L");
  CHECK(ab.controlled());
  CHECK(ab.arms[0].result.runs[0].test_ids == ab.arms[1].result.runs[0].test_ids);
  CHECK(ab.footer.find("66.74") != std::string::npos);
  CHECK(ab.footer.find("77.82") != std::string::npos);
  const auto ab_csv = ab.to_csv();
  CHECK(ab_csv.rfind("arm,mean,std,n,formatted\n", 0) == 0);
  CHECK(ab_csv.find("\nL_theta,") != std::string::npos);
  CHECK(ab_csv.find("\nL,") != std::string::npos);
}

TEST_CASE("adam moves parameters against the gradient with bias correction") {
  Tensor w(Shape{2}, std::vector<float>{1.0f, -1.0f});
  w.set_requires_grad();
  Tensor untouched(Shape{1}, std::vector<float>{5.0f});
  untouched.set_requires_grad();
  Adam adam({{"w", w}, {"u", untouched}}, 0.1);
  Tape tape;
  tape.backward(sum(tape, mul(tape, w, w)));
  adam.step();
  // The first bias-corrected step has magnitude lr in each coordinate.
  CHECK(w.data()[0] == doctest::Approx(0.9f).epsilon(1e-5));
  CHECK(w.data()[1] == doctest::Approx(-0.9f).epsilon(1e-5));
  CHECK(untouched.data()[0] == 5.0f);
  CHECK_FALSE(w.has_grad());
  CHECK(adam.steps() == 1);
}
