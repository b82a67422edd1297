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
#include <variant>
#include <vector>

#include "influxcl/autocl.hpp"
#include "influxcl/diffcore.hpp"
#include "influxcl/ranking.hpp"
#include "influxcl/tasks.hpp"

namespace influxcl {

enum class Optimizer { sgd, sgd_momentum, adam };

std::string to_string(Optimizer o);
Optimizer optimizer_from_string(const std::string& s);

struct TrainConfig {
  std::int64_t steps = 2000;
  std::size_t batch_size = 32;
  double learning_rate = 0.1;
  Optimizer optimizer = Optimizer::sgd;
  double momentum = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::vector<std::int64_t> checkpoint_steps;
  std::uint64_t init_seed = 0;
  std::uint64_t order_seed = 0;
  // Metric trace cadence in steps; 0 records only the final step.
  std::int64_t eval_every = 0;

  void validate(std::size_t train_size) const;
};

// `count` checkpoint steps spread evenly over the run, always ending at
// `steps` (e.g. 3 of 3000 -> 1000, 2000, 3000).
std::vector<std::int64_t> spaced_checkpoints(std::int64_t steps, int count);

inline constexpr double kDivergenceThreshold = 1e6;

struct EvalResult {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> f1_per_class;
  double loss = 0.0;
};

struct MetricRow {
  std::int64_t step = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double dev_accuracy = 0.0;
};

enum class RewardKind { pgnorm, cosine };

std::string to_string(RewardKind r);
RewardKind reward_kind_from_string(const std::string& s);

struct UniformSampler {};

// Each step the bandit picks a bucket and the batch is drawn uniformly from
// it. pgnorm compares the loss of the training batch before and after the
// step; cosine compares the training gradient with the gradient of a dev
// batch resampled every step.
struct BucketScheduledSampler {
  BucketAssignment assignment;
  BanditConfig bandit;
  RewardKind reward = RewardKind::cosine;
  ScalerConfig scaler;
  std::size_t reward_batch_size = 0;  // 0: same as training batch size
};

using Sampler = std::variant<UniformSampler, BucketScheduledSampler>;

struct TrainResult {
  ParamVector params;
  std::vector<Checkpoint> checkpoints;
  std::vector<MetricRow> trace;
  std::optional<PolicyLog> policy_log;
  std::optional<BanditState> bandit;
};

// Deterministic in (init_seed, order_seed). The bandit and the reward batches
// draw from their own streams derived from order_seed, so a single-bucket
// schedule sees exactly the batches of uniform training.
TrainResult train(const ModelSpec& spec, const Dataset& train_set,
                  const Dataset& dev_set, const TrainConfig& cfg,
                  const Sampler& sampler = UniformSampler{});

EvalResult evaluate(const ModelSpec& spec, const ParamVector& params,
                    const Dataset& ds);

EvalResult evaluate_predictions(const std::vector<int>& predicted,
                                const std::vector<int>& gold, int num_classes);

// Trains on the members of one bucket only and evaluates on `held_out`.
EvalResult train_on_bucket(const ModelSpec& spec, const Dataset& train_set,
                           const Dataset& held_out,
                           const BucketAssignment& assignment, int bucket,
                           const TrainConfig& cfg);

}  // namespace influxcl
