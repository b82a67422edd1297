// Copyright 2026 The influxcl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Manifest-driven pipelines: generate or load a task, train a scorer, score
// and bucket the training set, then retrain under each requested regime and
// write every artifact under one run directory.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "influxcl/autocl.hpp"
#include "influxcl/influence.hpp"
#include "influxcl/tasks.hpp"
#include "influxcl/trainer.hpp"

namespace influxcl {

struct TaskConfig {
  std::string kind = "clusters";  // clusters | bow
  std::size_t n_train = 2000;
  std::size_t n_dev = 500;
  std::size_t n_test = 1000;
  int num_classes = 2;
  Eigen::Index dim = 2;          // clusters
  double separation = 6.0;       // clusters
  std::size_t vocab_size = 200;  // bow
  double noise = 0.0;            // fraction of train labels flipped
  std::uint64_t seed = 0;
  // When all three are set the splits are loaded instead of generated.
  std::optional<std::filesystem::path> train_path;
  std::optional<std::filesystem::path> dev_path;
  std::optional<std::filesystem::path> test_path;
};

struct TaskData {
  Dataset train;
  Dataset dev;
  Dataset test;
  NoiseReport noise;
};

TaskData make_task(const TaskConfig& cfg);

enum class RegimeKind { baseline, filter, autocl };

std::string to_string(RegimeKind k);
RegimeKind regime_kind_from_string(const std::string& s);

struct Regime {
  RegimeKind kind = RegimeKind::baseline;
  double pct = 0.0;  // filter
  BanditConfig bandit;  // autocl
  RewardKind reward = RewardKind::cosine;

  // Directory name, e.g. "baseline", "filter_10", "autocl_k10_exp3s_cosine".
  std::string name() const;
};

struct Seeds {
  std::uint64_t init = 0;
  std::uint64_t order = 0;
  std::uint64_t score = 0;
};

struct RunManifest {
  TaskConfig task;
  std::vector<Eigen::Index> hidden_widths{32};
  Activation activation = Activation::tanh;
  TrainConfig train;
  ScoreConfig score;
  std::vector<Regime> regimes{Regime{}};
  Seeds seeds;
  std::filesystem::path output_dir;  // required by run_experiment

  // Missing keys keep their defaults; unknown keys are a ConfigError.
  static RunManifest from_json(const std::string& text);
  // Canonical form: sorted keys, every field present.
  std::string to_json() const;
  std::string config_hash() const;

  // Throws ConfigError on inconsistent values and MissingInputError when a
  // referenced data file does not exist.
  void validate() const;

  ModelSpec model_spec(const TaskData& data) const;
  TrainConfig train_config() const;
  ScoreConfig score_config() const;
  bool needs_scores() const;
};

struct RegimeOutcome {
  std::string name;
  std::size_t train_size = 0;
  EvalResult test;
  // Test metrics at a quarter of the run, when steps >= 4.
  std::optional<EvalResult> test_at_quarter;
};

struct ExperimentReport {
  std::string config_hash;
  std::optional<ScoreTable> scores;
  std::vector<RegimeOutcome> regimes;
};

// Runs the pipeline on prepared data. When `out_dir` is given every artifact
// is written beneath it.
ExperimentReport run_pipeline(const RunManifest& m, const TaskData& data,
                              const std::filesystem::path* out_dir = nullptr);

// make_task + run_pipeline into m.output_dir:
//   manifest.json, scores.csv,
//   <regime>/{eval.json, metrics.csv, filter_manifest.json, buckets.csv,
//   policy_log.csv}
// and a final .complete marker. Outputs contain no timestamps, so a rerun of
// the same manifest rewrites identical bytes.
ExperimentReport run_experiment(const RunManifest& m);

// Serializers shared with the CLI.
std::string eval_to_json(const RegimeOutcome& r, const std::string& config_hash);
std::string metrics_to_csv(const std::vector<MetricRow>& trace);
// {kept_ids, dropped_ids, pct, config_hash}; `all_ids` minus `kept_ids` is
// the dropped set.
std::string filter_manifest_json(const std::vector<std::int64_t>& all_ids,
                                 const std::vector<std::int64_t>& kept_ids,
                                 double pct, const std::string& config_hash);

inline constexpr const char* kCompleteMarker = ".complete";

}  // namespace influxcl
