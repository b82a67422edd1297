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

#include "influxcl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "influxcl/errors.hpp"
#include "influxcl/rng.hpp"

namespace influxcl {

std::string to_string(Optimizer o) {
  switch (o) {
    case Optimizer::sgd: return "sgd";
    case Optimizer::sgd_momentum: return "sgd_momentum";
    case Optimizer::adam: return "adam";
  }
  return "sgd";
}

Optimizer optimizer_from_string(const std::string& s) {
  if (s == "sgd") return Optimizer::sgd;
  if (s == "sgd_momentum") return Optimizer::sgd_momentum;
  if (s == "adam") return Optimizer::adam;
  throw ArgumentError("unknown optimizer '" + s + "'");
}

std::string to_string(RewardKind r) {
  return r == RewardKind::pgnorm ? "pgnorm" : "cosine";
}

RewardKind reward_kind_from_string(const std::string& s) {
  if (s == "pgnorm") return RewardKind::pgnorm;
  if (s == "cosine") return RewardKind::cosine;
  throw ArgumentError("unknown reward '" + s + "'");
}

void TrainConfig::validate(std::size_t train_size) const {
  if (steps < 0) throw ArgumentError("steps must be >= 0");
  if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
  if (batch_size > train_size) {
    throw ArgumentError("batch_size " + std::to_string(batch_size) +
                        " exceeds training set size " +
                        std::to_string(train_size));
  }
  if (!(learning_rate > 0.0)) throw ArgumentError("learning_rate must be > 0");
  for (auto s : checkpoint_steps) {
    if (s < 1 || s > steps) {
      throw ArgumentError("checkpoint step " + std::to_string(s) +
                          " outside [1, steps]");
    }
  }
  if (eval_every < 0) throw ArgumentError("eval_every must be >= 0");
}

std::vector<std::int64_t> spaced_checkpoints(std::int64_t steps, int count) {
  std::vector<std::int64_t> out;
  if (steps < 1 || count < 1) return out;
  for (int i = 1; i <= count; ++i) {
    const std::int64_t s = std::max<std::int64_t>(1, steps * i / count);
    if (out.empty() || out.back() != s) out.push_back(s);
  }
  return out;
}

namespace {

class OptimizerState {
 public:
  OptimizerState(const TrainConfig& cfg, Eigen::Index dim) : cfg_(cfg) {
    if (cfg.optimizer != Optimizer::sgd) m_ = Eigen::VectorXd::Zero(dim);
    if (cfg.optimizer == Optimizer::adam) v_ = Eigen::VectorXd::Zero(dim);
  }

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& g) {
    ++t_;
    switch (cfg_.optimizer) {
      case Optimizer::sgd:
        params.noalias() -= cfg_.learning_rate * g;
        break;
      case Optimizer::sgd_momentum:
        m_ = cfg_.momentum * m_ + g;
        params.noalias() -= cfg_.learning_rate * m_;
        break;
      case Optimizer::adam: {
        m_ = cfg_.adam_beta1 * m_ + (1.0 - cfg_.adam_beta1) * g;
        v_ = cfg_.adam_beta2 * v_ + (1.0 - cfg_.adam_beta2) * g.cwiseProduct(g);
        const double c1 = 1.0 - std::pow(cfg_.adam_beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.adam_beta2, static_cast<double>(t_));
        params.array() -= cfg_.learning_rate * (m_.array() / c1) /
                          ((v_.array() / c2).sqrt() + cfg_.adam_epsilon);
        break;
      }
    }
  }

 private:
  const TrainConfig& cfg_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  std::int64_t t_ = 0;
};

std::vector<std::size_t> draw_rows(const std::vector<std::size_t>& pool,
                                   std::size_t count, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<std::size_t> rows(count);
  for (auto& r : rows) r = pool[pick(rng)];
  return rows;
}

}  // namespace

TrainResult train(const ModelSpec& spec, const Dataset& train_set,
                  const Dataset& dev_set, const TrainConfig& cfg,
                  const Sampler& sampler) {
  spec.validate();
  if (train_set.size() == 0) throw ArgumentError("empty training set");
  cfg.validate(train_set.size());
  if (train_set.feature_dim() != spec.input_dim) {
    throw ShapeError("training features do not match model input_dim");
  }

  const auto* scheduled = std::get_if<BucketScheduledSampler>(&sampler);
  if (scheduled && scheduled->reward == RewardKind::cosine && dev_set.size() == 0) {
    throw ArgumentError("cosine reward needs a non-empty dev set");
  }

  TrainResult result;
  result.params = init_params(spec, cfg.init_seed);
  Eigen::VectorXd& theta = result.params.values;
  const LayerMask all = LayerMask::resolve(LayerSelector::all, result.params.layout);

  std::vector<std::size_t> everything(train_set.size());
  std::iota(everything.begin(), everything.end(), std::size_t{0});

  // Bucket pools in canonical row order.
  std::vector<std::vector<std::size_t>> pools;
  std::optional<BanditState> bandit;
  std::optional<RewardScaler> scaler;
  Rng bandit_rng = make_rng(cfg.order_seed, stream::kBandit);
  Rng reward_rng = make_rng(cfg.order_seed, stream::kRewardBatch);
  std::vector<std::size_t> dev_rows(dev_set.size());
  std::iota(dev_rows.begin(), dev_rows.end(), std::size_t{0});
  if (scheduled) {
    const auto& a = scheduled->assignment;
    BanditConfig bc = scheduled->bandit;
    bc.K = a.K;
    pools.assign(static_cast<std::size_t>(a.K), {});
    for (std::size_t row = 0; row < train_set.size(); ++row) {
      auto it = a.bucket_of.find(train_set.examples[row].id);
      if (it == a.bucket_of.end()) {
        throw ArgumentError("example " + std::to_string(train_set.examples[row].id) +
                            " has no bucket");
      }
      if (it->second < 0 || it->second >= a.K) {
        throw ArgumentError("bucket index out of range");
      }
      pools[static_cast<std::size_t>(it->second)].push_back(row);
    }
    for (int b = 0; b < a.K; ++b) {
      if (pools[static_cast<std::size_t>(b)].empty()) {
        throw ArgumentError("bucket " + std::to_string(b) + " is empty");
      }
    }
    bandit = BanditState::create(bc);
    scaler.emplace(scheduled->scaler);
    result.policy_log = PolicyLog{a.K, {}};
  }

  Rng order_rng = make_rng(cfg.order_seed, stream::kOrder);
  OptimizerState opt(cfg, theta.size());
  std::vector<std::int64_t> ckpt_steps = cfg.checkpoint_steps;
  std::sort(ckpt_steps.begin(), ckpt_steps.end());
  ckpt_steps.erase(std::unique(ckpt_steps.begin(), ckpt_steps.end()), ckpt_steps.end());
  auto next_ckpt = ckpt_steps.begin();

  for (std::int64_t step = 1; step <= cfg.steps; ++step) {
    int arm = 0;
    std::vector<double> p;
    const std::vector<std::size_t>* pool = &everything;
    if (bandit) {
      p = policy(*bandit);
      arm = sample_arm(*bandit, bandit_rng);
      pool = &pools[static_cast<std::size_t>(arm)];
    }
    const Batch batch = to_batch(train_set, draw_rows(*pool, cfg.batch_size, order_rng));
    LossAndGrad lg = loss_and_grad(spec, result.params, batch, all);
    if (!std::isfinite(lg.loss) || lg.loss > kDivergenceThreshold) {
      throw DivergenceError("training diverged at step " + std::to_string(step) +
                            ": loss " + std::to_string(lg.loss));
    }

    Eigen::VectorXd dev_grad;
    if (bandit && scheduled->reward == RewardKind::cosine) {
      const std::size_t n = scheduled->reward_batch_size > 0
                                ? scheduled->reward_batch_size
                                : cfg.batch_size;
      const Batch dev_batch = to_batch(dev_set, draw_rows(dev_rows, n, reward_rng));
      dev_grad = grad(spec, result.params, dev_batch, all);
    }

    opt.step(theta, lg.grad);

    if (bandit) {
      double raw = 0.0;
      if (scheduled->reward == RewardKind::pgnorm) {
        raw = lg.loss > 0.0
                  ? pgnorm_reward(lg.loss, forward_loss(spec, result.params, batch).loss)
                  : 0.0;
      } else {
        raw = cosine_reward(lg.grad, dev_grad);
      }
      const double scaled = scaler->scale(raw);
      scaler->observe(raw);
      result.policy_log->rows.push_back({step, arm, std::move(p), raw, scaled});
      *bandit = update(std::move(*bandit), arm, scaled);
    }

    const bool at_ckpt = next_ckpt != ckpt_steps.end() && *next_ckpt == step;
    const bool at_trace =
        step == cfg.steps || (cfg.eval_every > 0 && step % cfg.eval_every == 0);
    if (at_ckpt || at_trace) {
      MetricRow row{step, lg.loss, 0.0, 0.0};
      if (dev_set.size() > 0) {
        const EvalResult ev = evaluate(spec, result.params, dev_set);
        row.dev_loss = ev.loss;
        row.dev_accuracy = ev.accuracy;
      }
      if (at_trace) result.trace.push_back(row);
      if (at_ckpt) {
        result.checkpoints.push_back(
            {step, result.params, row.train_loss, row.dev_loss, row.dev_accuracy});
        ++next_ckpt;
      }
    }
  }
  result.bandit = bandit;
  return result;
}

EvalResult evaluate_predictions(const std::vector<int>& predicted,
                                const std::vector<int>& gold, int num_classes) {
  if (predicted.size() != gold.size()) {
    throw ShapeError("prediction and label counts differ");
  }
  if (gold.empty()) throw ArgumentError("cannot evaluate an empty dataset");
  const auto C = static_cast<std::size_t>(num_classes);
  std::vector<std::size_t> tp(C, 0), fp(C, 0), fn(C, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto g = static_cast<std::size_t>(gold[i]);
    const auto p = static_cast<std::size_t>(predicted[i]);
    if (g >= C || p >= C) throw ShapeError("class index out of range");
    if (g == p) {
      ++correct;
      ++tp[g];
    } else {
      ++fp[p];
      ++fn[g];
    }
  }
  EvalResult r;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());
  r.f1_per_class.resize(C);
  for (std::size_t c = 0; c < C; ++c) {
    const std::size_t denom = 2 * tp[c] + fp[c] + fn[c];
    r.f1_per_class[c] = denom == 0 ? 0.0
                                   : 2.0 * static_cast<double>(tp[c]) /
                                         static_cast<double>(denom);
  }
  r.macro_f1 = std::accumulate(r.f1_per_class.begin(), r.f1_per_class.end(), 0.0) /
               static_cast<double>(C);
  return r;
}

EvalResult evaluate(const ModelSpec& spec, const ParamVector& params,
                    const Dataset& ds) {
  const Batch b = to_batch(ds);
  const LossResult lr = forward_loss(spec, params, b);
  std::vector<int> pred(b.labels.size());
  for (Eigen::Index i = 0; i < lr.logits.rows(); ++i) {
    Eigen::Index arg = 0;
    lr.logits.row(i).maxCoeff(&arg);
    pred[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  EvalResult r = evaluate_predictions(pred, b.labels, static_cast<int>(spec.num_classes));
  r.loss = lr.loss;
  return r;
}

EvalResult train_on_bucket(const ModelSpec& spec, const Dataset& train_set,
                           const Dataset& held_out,
                           const BucketAssignment& assignment, int bucket,
                           const TrainConfig& cfg) {
  if (bucket < 0 || bucket >= assignment.K) {
    throw ArgumentError("bucket index out of range");
  }
  const auto ids = assignment.members(bucket);
  if (ids.empty()) throw ArgumentError("bucket " + std::to_string(bucket) + " is empty");
  const Dataset subset = train_set.select(ids);
  const TrainResult tr = train(spec, subset, Dataset{}, cfg);
  return evaluate(spec, tr.params, held_out);
}

}  // namespace influxcl
