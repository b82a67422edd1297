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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "influxcl/influence.hpp"
#include "influxcl/trainer.hpp"

namespace influxcl {

// Spearman rank correlation over the shared ids, mid-ranks for ties.
double spearman(const ScoreTable& a, const ScoreTable& b);

// 100 * |topA n topB| / |topA| where each top set holds the
// ceil(n * (100 - percentile) / 100) highest-scored ids.
double overlap_at_percentile(const ScoreTable& a, const ScoreTable& b,
                             double percentile = 90.0);

// Percentage of examples where exactly one of the two models is right.
double churn(const std::vector<int>& preds_a, const std::vector<int>& preds_b,
             const std::vector<int>& gold);

struct StabilityReport {
  double spearman = 0.0;
  double overlap90 = 0.0;
  double churn = 0.0;
  std::size_t n = 0;
  std::string config_a;  // JSON descriptors of the two runs
  std::string config_b;

  std::string to_json() const;
};

// Differences applied to the baseline run; unset fields keep the baseline.
struct Variation {
  std::optional<std::size_t> batch_size;
  std::optional<std::uint64_t> order_seed;
  std::optional<std::uint64_t> init_seed;
  std::optional<double> width_factor;
  std::optional<int> depth_delta;

  bool empty() const {
    return !batch_size && !order_seed && !init_seed && !width_factor && !depth_delta;
  }
};

struct StabilityTask {
  Dataset train;
  Dataset dev;
  Dataset test;
  ModelSpec spec;
  TrainConfig train_config;
  ScoreConfig score;
};

struct RunSetup {
  ModelSpec spec;
  TrainConfig train;

  std::string to_json() const;
};

RunSetup apply_variation(const ModelSpec& spec, const TrainConfig& cfg,
                         const Variation& v);

// Trains the baseline and the varied run, scores the training set under both
// with the same influence config, and compares rankings plus test churn.
StabilityReport stability_experiment(const StabilityTask& task,
                                     const Variation& variation);

}  // namespace influxcl
