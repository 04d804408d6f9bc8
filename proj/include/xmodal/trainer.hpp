// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "xmodal/clip.hpp"
#include "xmodal/encoders.hpp"
#include "xmodal/losses.hpp"

// Training protocol: subject-disjoint split, joint optimisation of the video
// and attribute branches, video-only evaluation, and the repeated-run,
// sweep and ablation harnesses built on top of them.

namespace xmodal::train {

enum class LossMode {
  full,        // classification losses of both branches plus the contrastive term
  video_only,  // video classification loss alone; the attribute branch is not built
};

LossMode parse_loss_mode(const std::string& text);
std::string to_string(LossMode mode);

struct ExperimentConfig {
  int depth = 10;
  double alpha = 0.5;
  int k = 8;
  double lr = 1e-4;
  int epochs = 30;
  int batch_size = 8;
  int split_train = 3;  // subjects are divided split_train : split_test
  int split_test = 2;
  int n_repeats = 5;
  std::uint64_t seed = 0;
  losses::NegativeMode negative_mode = losses::NegativeMode::different_class;
  LossMode loss_mode = LossMode::full;
  int max_tokens = 16;

  /// Small-machine defaults (30 epochs, batch 8).
  static ExperimentConfig desk();
  /// Full-scale values: 200 epochs, batch 32.
  static ExperimentConfig full_scale();

  double train_fraction() const { return static_cast<double>(split_train) / (split_train + split_test); }

  /// Throws ConfigError naming the first out-of-range field.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Applies the keys present in `j` on top of `base`. Unknown keys and
/// ill-typed values throw ConfigError naming the key. "split_ratio" is a
/// string such as "3:2".
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});

struct Split {
  std::vector<std::size_t> train;  // indices into the dataset, ascending
  std::vector<std::size_t> test;
  std::vector<int> train_subjects;  // ascending
  std::vector<int> test_subjects;
};

/// Shuffles the distinct subjects with `seed` and gives the first
/// ceil(n * train / (train + test)) of them, capped at n - 1, to the train
/// side. Throws ConfigError with fewer than 5 subjects.
Split split_by_subject(std::span<const ClipPair> data, int split_train, int split_test, std::uint64_t seed);

struct EpochRecord {
  int epoch = 0;             // 1-based
  std::int64_t steps = 0;    // optimiser steps completed at the end of this epoch
  double l_theta = 0.0;      // video classification loss
  double l_phi = 0.0;        // attribute classification loss
  double l_contrast = 0.0;   // cross-modal contrastive loss
  double l_total = 0.0;      // weighted objective that was minimised
  double train_accuracy = 0.0;  // argmax hits in the training forward passes
};

struct RunReport {
  ExperimentConfig config;
  std::uint64_t seed = 0;
  int n_classes = 0;
  std::vector<EpochRecord> epochs;
  std::int64_t total_steps = 0;
  std::optional<double> train_accuracy;  // evaluate() on the training set after the last epoch
  std::optional<double> test_accuracy;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  std::uint64_t init_checksum = 0;   // video model parameters before the first step
  std::uint64_t final_checksum = 0;  // video model state after the last step

  nlohmann::json to_json() const;
};

/// Bias-corrected adaptive-moment optimiser over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<models::NamedTensor<float>> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  /// Applies one update from the accumulated gradients, then clears them.
  /// Parameters without a gradient are left untouched.
  void step();
  std::int64_t steps() const { return t_; }

 private:
  std::vector<models::NamedTensor<float>> params_;
  std::vector<std::vector<float>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

struct TrainResult {
  std::unique_ptr<models::VideoModel> video;
  std::unique_ptr<models::AttributeModel> attr;  // null in video_only mode
  RunReport report;
};

/// Trains on every sample of `train_set`. Batches take classes round-robin
/// so in-batch negatives exist for each anchor; a trailing batch of one
/// sample is merged into its predecessor. Throws NumericError naming the
/// epoch, step and loss components when a loss turns non-finite, or the
/// epoch and step when an activation does first.
TrainResult train(const ExperimentConfig& config, std::span<const ClipPair> train_set, int n_classes);

/// Argmax class of each clip from the video branch in inference mode.
/// Clips are processed in fixed groups of 8, in parallel over groups.
std::vector<int> predict(models::VideoModel& model, std::span<const ClipPair> clips, int threads = 1);

/// Fraction of clips whose predicted class equals class_id. Only the video
/// model is consulted. Throws ContractError on an empty set.
double evaluate(models::VideoModel& model, std::span<const ClipPair> clips, int threads = 1);

/// Number of classes implied by the labels (largest class_id + 1).
int class_count(std::span<const ClipPair> data);

/// Split with the config seed, train, evaluate on both sides.
TrainResult run_once(const ExperimentConfig& config, std::span<const ClipPair> data, int threads = 1);

struct RepeatedResult {
  std::vector<RunReport> runs;
  double mean = 0.0;  // test accuracy
  double std = 0.0;   // sample standard deviation

  /// Percentages with two decimals, e.g. "77.82±3.65".
  std::string formatted() const;
};

/// n runs seeded config.seed, config.seed + 1, ...; every seed equals
/// config.seed when `same_seed`. Throws ConfigError when n < 2.
RepeatedResult run_repeated(const ExperimentConfig& config, std::span<const ClipPair> data, int n,
                            bool same_seed = false, int threads = 1);

struct AlphaRow {
  double alpha;
  RepeatedResult result;
};

/// One run_repeated per alpha, rows in ascending alpha order. Alphas must lie
/// in [0,1] and be distinct.
std::vector<AlphaRow> sweep_alpha(const ExperimentConfig& config, std::span<const ClipPair> data,
                                  std::vector<double> alphas, int threads = 1);
/// Header "alpha,mean,std,n"; accuracies as fractions.
std::string alpha_csv(const std::vector<AlphaRow>& rows);

struct DepthRow {
  int depth;
  std::string mode;  // "baseline" or "full"
  double alpha;      // 0 for baseline rows
  RepeatedResult result;
};

/// Baseline rows train the video branch alone with alpha recorded as 0; full
/// rows use the configured alpha.
std::vector<DepthRow> sweep_depth(const ExperimentConfig& config, std::span<const ClipPair> data,
                                  const std::vector<int>& depths, const std::vector<std::string>& modes,
                                  int threads = 1);
/// Header "depth,mode,alpha,mean,std,n".
std::string depth_csv(const std::vector<DepthRow>& rows);

struct AblationArm {
  std::string label;  // "L_theta" or "L"
  RepeatedResult result;
};

struct AblationReport {
  std::vector<AblationArm> arms;
  std::string footer;

  std::string to_csv() const;
  /// True when both arms used the same seeds, splits and initial weights.
  bool controlled() const;
};

/// Two arms over identical seeds and splits: video classification loss only
/// ("L_theta") and the full weighted objective ("L").
AblationReport ablate(const ExperimentConfig& config, std::span<const ClipPair> data, int threads = 1);

/// Writes <dir>/video.{mxt,json} and, when present, <dir>/attr.{mxt,json}.
void save_models(const std::filesystem::path& dir, const TrainResult& result);

/// Rebuilds the video model from <dir>/video.*; the attribute files are
/// never opened.
std::unique_ptr<models::VideoModel> load_video_model(const std::filesystem::path& dir);

}  // namespace xmodal::train
