// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

// xmodal: synthetic data, preprocessing, training, evaluation, experiment
// sweeps and self-verification behind one command.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "xmodal/config.hpp"
#include "xmodal/errors.hpp"
#include "xmodal/selftest.hpp"
#include "xmodal/threads.hpp"

namespace {

using namespace xmodal;
namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kNumeric = 3 };

// Flags that override ExperimentConfig fields when given.
struct ExperimentFlags {
  std::optional<int> depth, k, epochs, batch_size, repeats;
  std::optional<double> alpha, lr;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> negative_mode, loss_mode, split_ratio;

  void attach(CLI::App* app) {
    app->add_option("--depth", depth, "ResNet depth: 10, 18 or 34");
    app->add_option("--alpha", alpha, "weight of the contrastive term, in [0,1]");
    app->add_option("--k", k, "negatives per anchor");
    app->add_option("--lr", lr, "learning rate");
    app->add_option("--epochs", epochs, "training epochs");
    app->add_option("--batch-size", batch_size, "samples per step");
    app->add_option("--repeats", repeats, "runs per reported mean and std");
    app->add_option("--seed", seed, "experiment seed");
    app->add_option("--negative-mode", negative_mode, "different_class or different_sample");
    app->add_option("--loss-mode", loss_mode, "full or video_only");
    app->add_option("--split-ratio", split_ratio, "train:test subject ratio, e.g. 3:2");
  }

  train::ExperimentConfig apply(train::ExperimentConfig c) const {
    json j = json::object();
    if (depth) j["depth"] = *depth;
    if (k) j["k"] = *k;
    if (epochs) j["epochs"] = *epochs;
    if (batch_size) j["batch_size"] = *batch_size;
    if (repeats) j["n_repeats"] = *repeats;
    if (alpha) j["alpha"] = *alpha;
    if (lr) j["lr"] = *lr;
    if (seed) j["seed"] = *seed;
    if (negative_mode) j["negative_mode"] = *negative_mode;
    if (loss_mode) j["loss_mode"] = *loss_mode;
    if (split_ratio) j["split_ratio"] = *split_ratio;
    c = train::config_from_json(j, c);
    c.validate();
    return c;
  }
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  const fs::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    if (ec) throw IoError("cannot create " + p.parent_path().string() + ": " + ec.message());
  }
  std::ofstream os(p, std::ios::trunc);
  if (!os) throw IoError("cannot open " + p.string() + " for writing");
  os << text;
  if (!os) throw IoError("write failed for " + p.string());
}

template <class T>
std::vector<T> parse_list(const std::string& text, const std::string& flag) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !(is >> std::ws).eof()) throw ConfigError(flag + ": cannot parse '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(flag + " needs at least one value");
  return out;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

void log_line(const std::string& line) { std::cerr << "xmodal: " << line << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Micro-expression recognition with cross-modal contrastive training"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<int> threads_flag;
  app.add_option("--config", config_path, "JSON config file (sections experiment, synth, prep, farneback)")
      ->check(CLI::ExistingFile);
  app.add_option("--threads", threads_flag, "worker threads (default: $XMODAL_THREADS, else 1)");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_out, synth_spec;
  std::optional<int> s_classes, s_per_class, s_subjects, s_frames, s_size;
  std::optional<double> s_amplitude, s_noise;
  std::optional<std::uint64_t> s_seed;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--spec", synth_spec, "JSON file of generator fields; flags below override it")
      ->check(CLI::ExistingFile);
  synth->add_option("--classes", s_classes, "number of classes");
  synth->add_option("--per-class", s_per_class, "samples per class");
  synth->add_option("--subjects", s_subjects, "number of subjects (at least 5)");
  synth->add_option("--frames", s_frames, "frames per clip");
  synth->add_option("--size", s_size, "frame side in pixels");
  synth->add_option("--amplitude", s_amplitude, "peak displacement in pixels");
  synth->add_option("--noise", s_noise, "Gaussian noise sigma");
  synth->add_option("--seed", s_seed, "generator seed");

  // prep
  auto* prep = app.add_subcommand("prep", "resize, resample and compute optical flow");
  std::string prep_in, prep_out;
  std::optional<int> p_frames, p_size;
  bool strict = false;
  prep->add_option("--in", prep_in, "dataset directory holding manifest.jsonl")->required();
  prep->add_option("--out", prep_out, "output directory")->required();
  prep->add_option("--frames", p_frames, "frames per clip after resampling (default 16)");
  prep->add_option("--size", p_size, "frame side after resizing (default 112)");
  prep->add_flag("--strict", strict, "fail on the first unreadable sample instead of skipping it");

  // train
  auto* train_cmd = app.add_subcommand("train", "train on a subject-disjoint split and evaluate");
  std::string train_data, train_out;
  ExperimentFlags train_flags;
  train_cmd->add_option("--data", train_data, "prepared dataset directory")->required();
  train_cmd->add_option("--out", train_out, "run directory for report.json and checkpoints")->required();
  train_flags.attach(train_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained video model");
  std::string eval_model, eval_data, eval_split = "test", eval_out;
  eval_cmd->add_option("--model", eval_model, "run directory written by train")->required();
  eval_cmd->add_option("--data", eval_data, "prepared dataset directory")->required();
  eval_cmd->add_option("--split", eval_split, "test, train (ids from the run's report.json) or all")
      ->check(CLI::IsMember({"test", "train", "all"}));
  eval_cmd->add_option("--out", eval_out, "write the result JSON here instead of stdout");

  // sweep-alpha
  auto* sweep_alpha = app.add_subcommand("sweep-alpha", "repeated runs over contrastive weights");
  std::string sa_data, sa_out, sa_alphas = "0,0.25,0.5,0.75,1";
  ExperimentFlags sa_flags;
  sweep_alpha->add_option("--data", sa_data, "prepared dataset directory")->required();
  sweep_alpha->add_option("--alphas", sa_alphas, "comma-separated weights in [0,1]");
  sweep_alpha->add_option("--out", sa_out, "CSV path (default stdout)");
  sa_flags.attach(sweep_alpha);

  // sweep-depth
  auto* sweep_depth = app.add_subcommand("sweep-depth", "repeated runs over depths, baseline and full");
  std::string sd_data, sd_out, sd_depths = "10,18,34", sd_modes = "baseline,full";
  ExperimentFlags sd_flags;
  sweep_depth->add_option("--data", sd_data, "prepared dataset directory")->required();
  sweep_depth->add_option("--depths", sd_depths, "comma-separated depths");
  sweep_depth->add_option("--modes", sd_modes, "comma-separated modes: baseline, full");
  sweep_depth->add_option("--out", sd_out, "CSV path (default stdout)");
  sd_flags.attach(sweep_depth);

  // ablate
  auto* ablate = app.add_subcommand("ablate", "video loss alone against the full objective");
  std::string ab_data, ab_out;
  ExperimentFlags ab_flags;
  ablate->add_option("--data", ab_data, "prepared dataset directory")->required();
  ablate->add_option("--out", ab_out, "CSV path (default stdout)");
  ab_flags.attach(ablate);

  // selftest
  auto* selftest = app.add_subcommand("selftest", "gradient, loss, shape and flow checks");
  std::string fault_stride;
  selftest->add_option("--fault-conv1-stride", fault_stride, "test hook: probe with this stem stride, e.g. 1,2,2")
      ->group("Test hooks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    CliConfig cfg;
    if (!config_path.empty()) cfg = load_config_file(config_path);
    const int threads = resolve_threads(threads_flag);

    if (*synth) {
      if (!synth_spec.empty()) {
        std::ifstream is(synth_spec);
        if (!is) throw IoError("cannot open " + synth_spec);
        json doc;
        try {
          doc = json::parse(is);
        } catch (const json::exception& e) {
          throw ConfigError(synth_spec + ": " + e.what());
        }
        cfg = parse_config(json{{"synth", doc}}, cfg);
      }
      auto& s = cfg.synth;
      if (s_classes) s.n_classes = *s_classes;
      if (s_per_class) s.samples_per_class = *s_per_class;
      if (s_subjects) s.n_subjects = *s_subjects;
      if (s_frames) s.frames = *s_frames;
      if (s_size) s.size = *s_size;
      if (s_amplitude) s.motion_amplitude = *s_amplitude;
      if (s_noise) s.noise_sigma = *s_noise;
      if (s_seed) s.seed = *s_seed;
      const auto m = synth::generate(s, synth_out, threads);
      std::cout << "wrote " << m.rows.size() << " samples to " << synth_out << '\n';
      return kOk;
    }

    if (*prep) {
      if (p_frames) cfg.prep.frames = *p_frames;
      if (p_size) cfg.prep.size = *p_size;
      const auto m = data::prepare_dataset(prep_in, prep_out, cfg.prep, strict, threads, log_line);
      std::cout << "prepared " << m.rows.size() << " clip pairs in " << prep_out << '\n';
      return kOk;
    }

    if (*train_cmd) {
      const auto config = train_flags.apply(cfg.experiment);
      const auto data = data::load_prepared(train_data);
      const auto result = train::run_once(config, data, threads);
      train::save_models(train_out, result);
      write_text((fs::path(train_out) / "report.json").string(), result.report.to_json().dump(2) + "\n");
      std::printf("test accuracy %.4f over %zu samples\n", *result.report.test_accuracy,
                  result.report.test_ids.size());
      return kOk;
    }

    if (*eval_cmd) {
      const auto data = data::load_prepared(eval_data);
      std::vector<ClipPair> chosen;
      if (eval_split == "all") {
        chosen = data;
      } else {
        const fs::path report_path = fs::path(eval_model) / "report.json";
        std::ifstream is(report_path);
        if (!is) throw IoError("cannot open " + report_path.string() + " (needed for --split " + eval_split + ")");
        const json report = json::parse(is);
        const auto ids = report.at(eval_split + "_ids").get<std::vector<std::string>>();
        const std::set<std::string> wanted(ids.begin(), ids.end());
        for (const auto& p : data) {
          if (wanted.count(p.sample_id)) chosen.push_back(p);
        }
        if (chosen.size() != wanted.size()) throw IoError("dataset lacks some samples listed in " + report_path.string());
      }
      auto model = train::load_video_model(eval_model);
      const double acc = train::evaluate(*model, chosen, threads);
      const json out = {{"split", eval_split}, {"n", chosen.size()}, {"accuracy", acc}};
      write_text(eval_out, out.dump(2) + "\n");
      return kOk;
    }

    if (*sweep_alpha) {
      const auto config = sa_flags.apply(cfg.experiment);
      const auto data = data::load_prepared(sa_data);
      const auto rows = train::sweep_alpha(config, data, parse_list<double>(sa_alphas, "--alphas"), threads);
      write_text(sa_out, train::alpha_csv(rows));
      return kOk;
    }

    if (*sweep_depth) {
      const auto config = sd_flags.apply(cfg.experiment);
      const auto data = data::load_prepared(sd_data);
      const auto rows = train::sweep_depth(config, data, parse_list<int>(sd_depths, "--depths"),
                                           split_words(sd_modes), threads);
      write_text(sd_out, train::depth_csv(rows));
      return kOk;
    }

    if (*ablate) {
      const auto config = ab_flags.apply(cfg.experiment);
      const auto data = data::load_prepared(ab_data);
      const auto report = train::ablate(config, data, threads);
      write_text(ab_out, report.to_csv());
      return kOk;
    }

    if (*selftest) {
      selftest::Options options;
      if (!fault_stride.empty()) {
        const auto s = parse_list<int>(fault_stride, "--fault-conv1-stride");
        if (s.size() != 3) throw ConfigError("--fault-conv1-stride needs three values");
        options.conv1_stride_fault = std::array<int, 3>{s[0], s[1], s[2]};
      }
      const auto results = selftest::run_all(options, [](const selftest::CheckResult& r) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << std::endl;
      });
      std::vector<std::string> failed;
      for (const auto& r : results) {
        if (!r.passed) failed.push_back(r.name);
      }
      if (failed.empty()) {
        std::cout << "selftest: all " << results.size() << " checks passed\n";
        return kOk;
      }
      std::cerr << "selftest: failed checks:";
      for (const auto& name : failed) std::cerr << ' ' << name;
      std::cerr << '\n';
      return kFailure;
    }
  } catch (const ConfigError& e) {
    log_line(std::string("config error: ") + e.what());
    return kConfig;
  } catch (const NumericError& e) {
    log_line(std::string("numeric error: ") + e.what());
    return kNumeric;
  } catch (const std::exception& e) {
    log_line(std::string("error: ") + e.what());
    return kFailure;
  }
  return kFailure;
}
