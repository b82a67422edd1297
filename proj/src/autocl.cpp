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

#include "influxcl/autocl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "influxcl/errors.hpp"

namespace influxcl {

std::string to_string(BanditVariant v) {
  return v == BanditVariant::exp3 ? "exp3" : "exp3s";
}

BanditVariant bandit_variant_from_string(const std::string& s) {
  if (s == "exp3") return BanditVariant::exp3;
  if (s == "exp3s") return BanditVariant::exp3s;
  throw ArgumentError("unknown bandit variant '" + s + "'");
}

BanditState BanditState::create(const BanditConfig& cfg) {
  if (cfg.K < 1) throw ArgumentError("bandit needs at least one arm");
  if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0)) {
    throw ArgumentError("gamma must be in [0, 1]");
  }
  if (!(cfg.eta > 0.0)) throw ArgumentError("eta must be > 0");
  if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0)) {
    throw ArgumentError("alpha must be in [0, 1]");
  }
  BanditState s;
  s.K = cfg.K;
  s.weights.assign(static_cast<std::size_t>(cfg.K), 1.0);
  s.gamma = cfg.gamma;
  s.eta = cfg.eta;
  s.variant = cfg.variant;
  s.alpha = cfg.alpha;
  return s;
}

std::vector<double> policy(const BanditState& state) {
  const double total =
      std::accumulate(state.weights.begin(), state.weights.end(), 0.0);
  const double floor = state.gamma / static_cast<double>(state.K);
  std::vector<double> p(state.weights.size());
  for (std::size_t a = 0; a < p.size(); ++a) {
    p[a] = (1.0 - state.gamma) * state.weights[a] / total + floor;
  }
  return p;
}

int sample_arm(const BanditState& state, Rng& rng) {
  if (state.K == 1) return 0;
  const std::vector<double> p = policy(state);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (int a = 0; a < state.K; ++a) {
    acc += p[static_cast<std::size_t>(a)];
    if (u < acc) return a;
  }
  return state.K - 1;
}

BanditState update(BanditState state, int arm, double scaled_reward) {
  if (!(scaled_reward >= 0.0 && scaled_reward <= 1.0)) {
    throw ArgumentError("bandit reward must be in [0, 1]");
  }
  if (arm < 0 || arm >= state.K) throw ArgumentError("arm out of range");
  const auto K = static_cast<double>(state.K);
  const double p = policy(state)[static_cast<std::size_t>(arm)];
  const double estimate = scaled_reward / p;
  state.weights[static_cast<std::size_t>(arm)] *= std::exp(state.eta * estimate / K);

  if (state.variant == BanditVariant::exp3s && state.K > 1) {
    const double total =
        std::accumulate(state.weights.begin(), state.weights.end(), 0.0);
    const double share = state.alpha / (K - 1.0);
    std::vector<double> mixed(state.weights.size());
    for (std::size_t a = 0; a < mixed.size(); ++a) {
      mixed[a] = (1.0 - state.alpha) * state.weights[a] +
                 share * (total - state.weights[a]);
    }
    state.weights = std::move(mixed);
  }

  const double mean =
      std::accumulate(state.weights.begin(), state.weights.end(), 0.0) / K;
  for (auto& w : state.weights) w /= mean;
  ++state.step;
  return state;
}

double pgnorm_reward(double loss_before, double loss_after) {
  if (!(loss_before > 0.0)) throw ArgumentError("pgnorm: loss_before must be > 0");
  return 1.0 - loss_after / loss_before;
}

double cosine_reward(const Eigen::VectorXd& train_grad,
                     const Eigen::VectorXd& reward_grad) {
  if (train_grad.size() != reward_grad.size()) {
    throw ShapeError("cosine reward: gradient sizes differ");
  }
  const double na = train_grad.norm();
  const double nb = reward_grad.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(train_grad.dot(reward_grad) / (na * nb), -1.0, 1.0);
}

RewardScaler::RewardScaler(const ScalerConfig& cfg) : cfg_(cfg) {
  if (cfg.capacity < 1) throw ArgumentError("scaler capacity must be >= 1");
  if (!(cfg.lo_q >= 0.0 && cfg.lo_q < cfg.hi_q && cfg.hi_q <= 1.0)) {
    throw ArgumentError("scaler quantiles must satisfy 0 <= lo < hi <= 1");
  }
}

double RewardScaler::quantile(double q) const {
  if (window_.empty()) throw ArgumentError("quantile of empty window");
  std::vector<double> v(window_.begin(), window_.end());
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double RewardScaler::scale(double raw) const {
  if (window_.size() < cfg_.min_samples) {
    return std::clamp((raw + 1.0) / 2.0, 0.0, 1.0);
  }
  const double lo = quantile(cfg_.lo_q);
  const double hi = quantile(cfg_.hi_q);
  if (hi <= lo) return 0.5;
  return std::clamp((raw - lo) / (hi - lo), 0.0, 1.0);
}

void RewardScaler::observe(double raw) {
  window_.push_back(raw);
  if (window_.size() > cfg_.capacity) window_.pop_front();
}

double regret_estimate(const PolicyLog& log,
                       const Eigen::MatrixXd& per_arm_rewards) {
  if (per_arm_rewards.rows() != static_cast<Eigen::Index>(log.rows.size())) {
    throw ShapeError("regret: reward matrix rows must match log rows");
  }
  if (log.rows.empty()) return 0.0;
  double obtained = 0.0;
  for (std::size_t t = 0; t < log.rows.size(); ++t) {
    const int arm = log.rows[t].arm;
    if (arm < 0 || arm >= per_arm_rewards.cols()) {
      throw ShapeError("regret: logged arm outside reward matrix");
    }
    obtained += per_arm_rewards(static_cast<Eigen::Index>(t), arm);
  }
  return per_arm_rewards.colwise().sum().maxCoeff() - obtained;
}

}  // namespace influxcl
