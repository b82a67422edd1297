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

// Adversarial multi-armed bandits (EXP3 / EXP3S) choosing which data bucket
// feeds each training step, plus the learning-progress rewards and the
// adaptive rescaling that keeps them inside [0, 1].

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "influxcl/rng.hpp"

namespace influxcl {

enum class BanditVariant { exp3, exp3s };

std::string to_string(BanditVariant v);
BanditVariant bandit_variant_from_string(const std::string& s);

struct BanditConfig {
  int K = 10;
  double gamma = 0.01;
  double eta = 0.001;
  BanditVariant variant = BanditVariant::exp3s;
  double alpha = 1e-4;  // EXP3S weight sharing; ignored by EXP3
};

struct BanditState {
  int K = 0;
  std::vector<double> weights;
  double gamma = 0.0;
  double eta = 0.0;
  BanditVariant variant = BanditVariant::exp3;
  double alpha = 0.0;
  std::int64_t step = 0;

  static BanditState create(const BanditConfig& cfg);
};

// p_a = (1 - gamma) w_a / sum(w) + gamma / K.
std::vector<double> policy(const BanditState& state);

int sample_arm(const BanditState& state, Rng& rng);

// Importance-weighted exponential update of the chosen arm, EXP3S weight
// sharing when enabled, then renormalization of the weights to mean 1.
BanditState update(BanditState state, int arm, double scaled_reward);

// 1 - after / before.
double pgnorm_reward(double loss_before, double loss_after);

// Cosine similarity; 0 when either vector is zero.
double cosine_reward(const Eigen::VectorXd& train_grad,
                     const Eigen::VectorXd& reward_grad);

struct ScalerConfig {
  std::size_t capacity = 1000;
  double lo_q = 0.10;
  double hi_q = 0.90;
  std::size_t min_samples = 20;
};

// Maps raw rewards into [0, 1] against quantiles of a sliding window of
// recent raw rewards.
class RewardScaler {
 public:
  explicit RewardScaler(const ScalerConfig& cfg = {});

  double scale(double raw) const;
  void observe(double raw);

  std::size_t size() const { return window_.size(); }
  // Linear-interpolated empirical quantile of the window.
  double quantile(double q) const;

 private:
  ScalerConfig cfg_;
  std::deque<double> window_;
};

struct PolicyLogRow {
  std::int64_t step = 0;
  int arm = 0;
  std::vector<double> policy;
  double reward_raw = 0.0;
  double reward_scaled = 0.0;

  bool operator==(const PolicyLogRow&) const = default;
};

struct PolicyLog {
  int K = 0;
  std::vector<PolicyLogRow> rows;

  bool operator==(const PolicyLog&) const = default;
};

// Best fixed arm's cumulative reward minus the reward collected by the
// logged choices; per_arm_rewards is T x K with row t the reward vector at
// log row t.
double regret_estimate(const PolicyLog& log,
                       const Eigen::MatrixXd& per_arm_rewards);

}  // namespace influxcl
