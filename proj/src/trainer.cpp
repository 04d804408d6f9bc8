// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "xmodal/checkpoint.hpp"
#include "xmodal/errors.hpp"
#include "xmodal/facs.hpp"
#include "xmodal/ops.hpp"
#include "xmodal/parallel.hpp"
#include "xmodal/rng.hpp"

namespace xmodal::train {

using nlohmann::json;
using models::NamedTensor;

namespace {

// Seed streams, one per independent source of randomness in a run.
constexpr std::uint64_t kVideoInit = 1;
constexpr std::uint64_t kAttrInit = 2;
constexpr std::uint64_t kBatchOrder = 3;
constexpr std::uint64_t kNegatives = 4;
constexpr std::uint64_t kSplit = 5;

constexpr std::int64_t kEvalGroup = 8;

double sample_std(const std::vector<double>& xs, double mean) {
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace

LossMode parse_loss_mode(const std::string& text) {
  if (text == "full") return LossMode::full;
  if (text == "video_only") return LossMode::video_only;
  throw ConfigError("unknown loss_mode '" + text + "' (expected full or video_only)");
}

std::string to_string(LossMode mode) { return mode == LossMode::full ? "full" : "video_only"; }

ExperimentConfig ExperimentConfig::desk() { return ExperimentConfig{}; }

ExperimentConfig ExperimentConfig::full_scale() {
  ExperimentConfig c;
  c.epochs = 200;
  c.batch_size = 32;
  return c;
}

void ExperimentConfig::validate() const {
  if (depth != 10 && depth != 18 && depth != 34) throw ConfigError("depth must be 10, 18 or 34");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0,1]");
  if (k < 0) throw ConfigError("k must be non-negative");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive and finite");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (split_train < 1 || split_test < 1) throw ConfigError("split_ratio parts must be positive");
  if (n_repeats < 2) throw ConfigError("n_repeats must be at least 2");
  if (max_tokens < 1) throw ConfigError("max_tokens must be positive");
}

json to_json(const ExperimentConfig& c) {
  return {{"depth", c.depth},
          {"alpha", c.alpha},
          {"k", c.k},
          {"lr", c.lr},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"split_ratio", std::to_string(c.split_train) + ":" + std::to_string(c.split_test)},
          {"n_repeats", c.n_repeats},
          {"seed", c.seed},
          {"negative_mode", losses::to_string(c.negative_mode)},
          {"loss_mode", to_string(c.loss_mode)},
          {"max_tokens", c.max_tokens}};
}

ExperimentConfig config_from_json(const json& j, ExperimentConfig c) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "depth") c.depth = value.get<int>();
      else if (key == "alpha") c.alpha = value.get<double>();
      else if (key == "k") c.k = value.get<int>();
      else if (key == "lr") c.lr = value.get<double>();
      else if (key == "epochs") c.epochs = value.get<int>();
      else if (key == "batch_size") c.batch_size = value.get<int>();
      else if (key == "n_repeats") c.n_repeats = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "negative_mode") c.negative_mode = losses::parse_negative_mode(value.get<std::string>());
      else if (key == "loss_mode") c.loss_mode = parse_loss_mode(value.get<std::string>());
      else if (key == "max_tokens") c.max_tokens = value.get<int>();
      else if (key == "split_ratio") {
        const auto text = value.get<std::string>();
        int a = 0, b = 0;
        char colon = 0;
        std::istringstream is(text);
        if (!(is >> a >> colon >> b) || colon != ':' || !is.eof()) {
          throw ConfigError("split_ratio must look like \"3:2\", got \"" + text + "\"");
        }
        c.split_train = a;
        c.split_test = b;
      } else {
        throw ConfigError("unknown experiment key '" + key + "'");
      }
    } catch (const json::exception& e) {
      throw ConfigError("experiment key '" + key + "': " + e.what());
    }
  }
  return c;
}

Split split_by_subject(std::span<const ClipPair> data, int split_train, int split_test, std::uint64_t seed) {
  if (split_train < 1 || split_test < 1) throw ConfigError("split_ratio parts must be positive");
  std::set<int> distinct;
  for (const auto& p : data) distinct.insert(p.subject_id);
  if (distinct.size() < 5) {
    throw ConfigError("subject-disjoint split needs at least 5 subjects, found " + std::to_string(distinct.size()));
  }
  std::vector<int> subjects(distinct.begin(), distinct.end());
  Rng rng(seed);
  rng.shuffle(subjects.begin(), subjects.end());
  const auto n = static_cast<std::int64_t>(subjects.size());
  // Integer ceiling of n * a / (a + b): rounding goes toward the train side.
  const std::int64_t wanted = (n * split_train + split_train + split_test - 1) / (split_train + split_test);
  const std::int64_t n_train = std::clamp<std::int64_t>(wanted, 1, n - 1);

  Split s;
  s.train_subjects.assign(subjects.begin(), subjects.begin() + n_train);
  s.test_subjects.assign(subjects.begin() + n_train, subjects.end());
  std::sort(s.train_subjects.begin(), s.train_subjects.end());
  std::sort(s.test_subjects.begin(), s.test_subjects.end());
  const std::set<int> train_set(s.train_subjects.begin(), s.train_subjects.end());
  for (std::size_t i = 0; i < data.size(); ++i) {
    (train_set.count(data[i].subject_id) ? s.train : s.test).push_back(i);
  }
  return s;
}

json RunReport::to_json() const {
  json epochs_json = json::array();
  for (const auto& e : epochs) {
    epochs_json.push_back({{"epoch", e.epoch},
                           {"steps", e.steps},
                           {"L_theta", e.l_theta},
                           {"L_phi", e.l_phi},
                           {"L_theta_phi", e.l_contrast},
                           {"L", e.l_total},
                           {"train_accuracy", e.train_accuracy}});
  }
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"config", train::to_json(config)},
          {"seed", seed},
          {"n_classes", n_classes},
          {"epochs", epochs_json},
          {"total_epochs", static_cast<int>(epochs.size())},
          {"total_steps", total_steps},
          {"train_accuracy", opt(train_accuracy)},
          {"test_accuracy", opt(test_accuracy)},
          {"train_ids", train_ids},
          {"test_ids", test_ids},
          {"init_checksum", init_checksum},
          {"final_checksum", final_checksum}};
}

Adam::Adam(std::vector<NamedTensor<float>> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0f);
    v_.emplace_back(p.tensor.numel(), 0.0f);
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const auto b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i].tensor;
    if (!p.has_grad()) continue;
    const auto g = p.grad();
    auto w = p.data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (1.0f - b1) * g[j];
      v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      w[j] -= static_cast<float>(lr_ * m_hat / (std::sqrt(v_hat) + eps_));
    }
    p.zero_grad();
  }
}

int class_count(std::span<const ClipPair> data) {
  int n = 0;
  for (const auto& p : data) n = std::max(n, p.class_id + 1);
  return n;
}

namespace {

std::vector<std::vector<std::size_t>> make_batches(std::span<const ClipPair> data, int n_classes, int batch_size,
                                                   Rng& rng) {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data[i].class_id].push_back(i);
  for (auto& c : by_class) rng.shuffle(c.begin(), c.end());

  std::vector<std::size_t> order;
  order.reserve(data.size());
  std::vector<std::size_t> cursor(by_class.size(), 0);
  while (order.size() < data.size()) {
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      if (cursor[c] < by_class[c].size()) order.push_back(by_class[c][cursor[c]++]);
    }
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(order.size(), i + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  // Batch norm needs more than one sample per batch.
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

std::vector<std::int32_t> tokens_for(const ClipPair& pair, const facs::Vocabulary& vocab, int max_tokens) {
  if (pair.au_string.empty()) throw ContractError("sample " + pair.sample_id + " has no AU label");
  const auto phrase = facs::describe(facs::parse_au_string(pair.au_string));
  return facs::tokenize(phrase, vocab, static_cast<std::size_t>(max_tokens));
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

TrainResult train(const ExperimentConfig& config, std::span<const ClipPair> train_set, int n_classes) {
  config.validate();
  if (train_set.size() < 2) throw ContractError("training needs at least 2 samples");
  if (n_classes < 2) throw ConfigError("training needs at least 2 classes");
  for (const auto& p : train_set) {
    validate_clip_pair(p);
    if (p.class_id < 0 || p.class_id >= n_classes) {
      throw ContractError("sample " + p.sample_id + " has class_id outside [0," + std::to_string(n_classes) + ")");
    }
  }
  const bool full = config.loss_mode == LossMode::full;
  const auto vocab = facs::Vocabulary::from_codebook();
  const auto model_config = models::ResNet3DConfig::for_depth(config.depth);

  TrainResult result;
  result.video = std::make_unique<models::VideoModel>(model_config, n_classes, derive_seed(config.seed, kVideoInit));
  auto params = result.video->parameters();
  std::vector<std::vector<std::int32_t>> tokens;
  if (full) {
    result.attr = std::make_unique<models::AttributeModel>(static_cast<std::int64_t>(vocab.size()), n_classes,
                                                           derive_seed(config.seed, kAttrInit));
    const auto attr_params = result.attr->parameters();
    params.insert(params.end(), attr_params.begin(), attr_params.end());
    tokens.reserve(train_set.size());
    for (const auto& p : train_set) tokens.push_back(tokens_for(p, vocab, config.max_tokens));
  }

  RunReport& report = result.report;
  report.config = config;
  report.seed = config.seed;
  report.n_classes = n_classes;
  report.init_checksum = models::checksum(result.video->parameters());
  for (const auto& p : train_set) report.train_ids.push_back(p.sample_id);

  Adam adam(params, config.lr);
  Rng batch_rng(derive_seed(config.seed, kBatchOrder));
  Rng negative_rng(derive_seed(config.seed, kNegatives));
  const losses::LossWeights weights{config.alpha};

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto batches = make_batches(train_set, n_classes, config.batch_size, batch_rng);
    EpochRecord rec;
    rec.epoch = epoch;
    std::int64_t seen = 0, hits = 0;
    for (const auto& batch : batches) {
      const auto n = static_cast<std::int64_t>(batch.size());
      std::vector<const ClipPair*> clips;
      std::vector<std::int32_t> labels;
      std::vector<std::string> ids;
      for (auto i : batch) {
        clips.push_back(&train_set[i]);
        labels.push_back(train_set[i].class_id);
        ids.push_back(train_set[i].sample_id);
      }
      const auto [rgb, flow] = models::stack_clips(clips);

      const std::string where = "epoch " + std::to_string(epoch) + " step " + std::to_string(adam.steps() + 1);
      Tape tape;
      Tensor p_v, l_theta, l_phi = Tensor::scalar(0.0f), l_contrast = Tensor::scalar(0.0f);
      try {
        const auto z_m = result.video->encoder.forward(tape, rgb, flow, true);
        p_v = result.video->head.forward(tape, z_m);
        l_theta = losses::cross_entropy(tape, p_v, labels);
        if (full) {
          std::vector<std::int32_t> flat;
          flat.reserve(batch.size() * static_cast<std::size_t>(config.max_tokens));
          for (auto i : batch) flat.insert(flat.end(), tokens[i].begin(), tokens[i].end());
          const auto z_a = result.attr->encoder.forward(tape, flat, config.max_tokens);
          const auto p_a = result.attr->head.forward(tape, z_a);
          l_phi = losses::cross_entropy(tape, p_a, labels);
          const auto pairs = losses::build_pair_batch(ids, labels, config.k, config.negative_mode, &negative_rng);
          l_contrast = losses::contrastive_loss(tape, z_m, z_a, pairs);
        }
      } catch (const NumericError& e) {
        // A non-finite activation stops the forward pass before any loss exists.
        throw NumericError("non-finite value at " + where + " before the losses were formed: " + e.what());
      }
      const double lt = l_theta.item(), lp = l_phi.item(), lc = l_contrast.item();
      if (!std::isfinite(lt) || !std::isfinite(lp) || !std::isfinite(lc)) {
        throw NumericError("non-finite loss at " + where + ": L_theta=" + fmt(lt) + " L_phi=" + fmt(lp) +
                           " L_theta_phi=" + fmt(lc));
      }
      const Tensor l_total = full ? losses::total_loss(tape, l_theta, l_phi, l_contrast, weights) : l_theta;
      tape.backward(l_total);
      adam.step();

      const auto probs = p_v.data();
      for (std::int64_t r = 0; r < n; ++r) {
        const auto row = probs.subspan(static_cast<std::size_t>(r * n_classes), static_cast<std::size_t>(n_classes));
        const auto arg = std::max_element(row.begin(), row.end()) - row.begin();
        hits += arg == labels[static_cast<std::size_t>(r)];
      }
      seen += n;
      rec.l_theta += lt * static_cast<double>(n);
      rec.l_phi += lp * static_cast<double>(n);
      rec.l_contrast += lc * static_cast<double>(n);
      rec.l_total += static_cast<double>(l_total.item()) * static_cast<double>(n);
    }
    rec.l_theta /= static_cast<double>(seen);
    rec.l_phi /= static_cast<double>(seen);
    rec.l_contrast /= static_cast<double>(seen);
    rec.l_total /= static_cast<double>(seen);
    rec.train_accuracy = static_cast<double>(hits) / static_cast<double>(seen);
    rec.steps = adam.steps();
    report.epochs.push_back(rec);
  }
  report.total_steps = adam.steps();
  report.final_checksum = models::checksum(result.video->state());
  return result;
}

std::vector<int> predict(models::VideoModel& model, std::span<const ClipPair> clips, int threads) {
  const auto n = static_cast<std::int64_t>(clips.size());
  std::vector<int> out(clips.size(), -1);
  const std::int64_t groups = (n + kEvalGroup - 1) / kEvalGroup;
  parallel_for(groups, threads, [&](std::int64_t g) {
    const std::int64_t begin = g * kEvalGroup, end = std::min(n, begin + kEvalGroup);
    std::vector<const ClipPair*> group;
    for (std::int64_t i = begin; i < end; ++i) group.push_back(&clips[static_cast<std::size_t>(i)]);
    const auto [rgb, flow] = models::stack_clips(group);
    Tape tape;
    tape.set_recording(false);
    const auto z = model.encoder.forward(tape, rgb, flow, false);
    const auto p = model.head.forward(tape, z);
    const auto classes = p.dim(1);
    const auto probs = p.data();
    for (std::int64_t i = begin; i < end; ++i) {
      const auto row = probs.subspan(static_cast<std::size_t>((i - begin) * classes), static_cast<std::size_t>(classes));
      out[static_cast<std::size_t>(i)] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
  });
  return out;
}

double evaluate(models::VideoModel& model, std::span<const ClipPair> clips, int threads) {
  if (clips.empty()) throw ContractError("evaluate needs a non-empty test set");
  const auto predicted = predict(model, clips, threads);
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < clips.size(); ++i) hits += predicted[i] == clips[i].class_id;
  return static_cast<double>(hits) / static_cast<double>(clips.size());
}

TrainResult run_once(const ExperimentConfig& config, std::span<const ClipPair> data, int threads) {
  config.validate();
  const int n_classes = class_count(data);
  const Split split =
      split_by_subject(data, config.split_train, config.split_test, derive_seed(config.seed, kSplit));
  if (split.test.empty()) throw ContractError("split left no test samples");
  std::vector<ClipPair> train_side, test_side;
  for (auto i : split.train) train_side.push_back(data[i]);
  for (auto i : split.test) test_side.push_back(data[i]);

  TrainResult result = train(config, train_side, n_classes);
  result.report.train_accuracy = evaluate(*result.video, train_side, threads);
  result.report.test_accuracy = evaluate(*result.video, test_side, threads);
  for (const auto& p : test_side) result.report.test_ids.push_back(p.sample_id);
  return result;
}

std::string RepeatedResult::formatted() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f±%.2f", 100.0 * mean, 100.0 * std);
  return buf;
}

RepeatedResult run_repeated(const ExperimentConfig& config, std::span<const ClipPair> data, int n, bool same_seed,
                            int threads) {
  if (n < 2) throw ConfigError("run_repeated needs at least 2 runs");
  RepeatedResult out;
  std::vector<double> acc;
  for (int i = 0; i < n; ++i) {
    ExperimentConfig c = config;
    c.seed = same_seed ? config.seed : config.seed + static_cast<std::uint64_t>(i);
    auto run = run_once(c, data, threads);
    acc.push_back(*run.report.test_accuracy);
    out.runs.push_back(std::move(run.report));
  }
  out.mean = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(n);
  out.std = sample_std(acc, out.mean);
  return out;
}

std::vector<AlphaRow> sweep_alpha(const ExperimentConfig& config, std::span<const ClipPair> data,
                                  std::vector<double> alphas, int threads) {
  if (alphas.empty()) throw ConfigError("sweep_alpha needs at least one alpha");
  std::sort(alphas.begin(), alphas.end());
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (!(alphas[i] >= 0.0 && alphas[i] <= 1.0)) throw ConfigError("alpha " + fmt(alphas[i]) + " outside [0,1]");
    if (i > 0 && alphas[i] == alphas[i - 1]) throw ConfigError("alpha " + fmt(alphas[i]) + " listed twice");
  }
  std::vector<AlphaRow> rows;
  for (double a : alphas) {
    ExperimentConfig c = config;
    c.alpha = a;
    c.loss_mode = LossMode::full;
    rows.push_back({a, run_repeated(c, data, config.n_repeats, false, threads)});
  }
  return rows;
}

std::string alpha_csv(const std::vector<AlphaRow>& rows) {
  std::ostringstream os;
  os << "alpha,mean,std,n\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.4f,%.6f,%.6f,%zu\n", r.alpha, r.result.mean, r.result.std, r.result.runs.size());
    os << buf;
  }
  return os.str();
}

std::vector<DepthRow> sweep_depth(const ExperimentConfig& config, std::span<const ClipPair> data,
                                  const std::vector<int>& depths, const std::vector<std::string>& modes,
                                  int threads) {
  if (depths.empty() || modes.empty()) throw ConfigError("sweep_depth needs depths and modes");
  for (const auto& m : modes) {
    if (m != "baseline" && m != "full") throw ConfigError("unknown sweep mode '" + m + "' (expected baseline or full)");
  }
  for (int d : depths) models::ResNet3DConfig::for_depth(d);
  std::vector<DepthRow> rows;
  for (int d : depths) {
    for (const auto& m : modes) {
      ExperimentConfig c = config;
      c.depth = d;
      if (m == "baseline") {
        c.alpha = 0.0;
        c.loss_mode = LossMode::video_only;
      } else {
        c.loss_mode = LossMode::full;
      }
      rows.push_back({d, m, c.alpha, run_repeated(c, data, config.n_repeats, false, threads)});
    }
  }
  return rows;
}

std::string depth_csv(const std::vector<DepthRow>& rows) {
  std::ostringstream os;
  os << "depth,mode,alpha,mean,std,n\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.4f,%.6f,%.6f,%zu\n", r.depth, r.mode.c_str(), r.alpha, r.result.mean,
                  r.result.std, r.result.runs.size());
    os << buf;
  }
  return os.str();
}

AblationReport ablate(const ExperimentConfig& config, std::span<const ClipPair> data, int threads) {
  config.validate();
  AblationReport report;
  ExperimentConfig video_only = config;
  video_only.loss_mode = LossMode::video_only;
  ExperimentConfig full = config;
  full.loss_mode = LossMode::full;
  report.arms.push_back({"L_theta", run_repeated(video_only, data, config.n_repeats, false, threads)});
  report.arms.push_back({"L", run_repeated(full, data, config.n_repeats, false, threads)});
  report.footer =
      "# full-scale published reference, not reproducible at desk scale: L_theta 66.74, L 77.82 (percent)";
  return report;
}

bool AblationReport::controlled() const {
  if (arms.size() != 2) return false;
  const auto& a = arms[0].result.runs;
  const auto& b = arms[1].result.runs;
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].seed != b[i].seed || a[i].train_ids != b[i].train_ids || a[i].test_ids != b[i].test_ids ||
        a[i].init_checksum != b[i].init_checksum) {
      return false;
    }
  }
  return true;
}

std::string AblationReport::to_csv() const {
  std::ostringstream os;
  os << "arm,mean,std,n,formatted\n";
  for (const auto& arm : arms) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%zu,%s\n", arm.label.c_str(), arm.result.mean, arm.result.std,
                  arm.result.runs.size(), arm.result.formatted().c_str());
    os << buf;
  }
  os << footer << '\n';
  return os.str();
}

void save_models(const std::filesystem::path& dir, const TrainResult& result) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const auto& r = result.report;
  const json meta = {{"config", to_json(r.config)}, {"seed", r.seed}, {"n_classes", r.n_classes}};
  ckpt::save(dir / "video", result.video->state(), meta);
  if (result.attr) {
    json attr_meta = meta;
    attr_meta["vocab_size"] = result.attr->encoder.vocab_size();
    ckpt::save(dir / "attr", result.attr->parameters(), attr_meta);
  }
}

std::unique_ptr<models::VideoModel> load_video_model(const std::filesystem::path& dir) {
  const auto index = ckpt::read_index(dir / "video");
  ExperimentConfig config;
  int n_classes = 0;
  std::uint64_t seed = 0;
  try {
    config = config_from_json(index.meta.at("config"));
    n_classes = index.meta.at("n_classes").get<int>();
    seed = index.meta.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw IoError("checkpoint metadata in " + dir.string() + " is incomplete: " + e.what());
  } catch (const ConfigError& e) {
    throw IoError("checkpoint metadata in " + dir.string() + " is invalid: " + e.what());
  }
  auto model = std::make_unique<models::VideoModel>(models::ResNet3DConfig::for_depth(config.depth), n_classes,
                                                    derive_seed(seed, kVideoInit));
  ckpt::load_into(dir / "video", model->state());
  return model;
}

}  // namespace xmodal::train
