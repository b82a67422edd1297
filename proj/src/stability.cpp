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

#include "influxcl/stability.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <set>

#include "json.hpp"

#include "influxcl/errors.hpp"
#include "influxcl/io.hpp"
#include "influxcl/ranking.hpp"

namespace influxcl {

namespace {

void require_same_ids(const ScoreTable& a, const ScoreTable& b) {
  if (a.entries.size() != b.entries.size()) {
    throw ArgumentError("score tables cover different numbers of ids");
  }
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    if (a.entries[i].id != b.entries[i].id) {
      throw ArgumentError("score tables cover different ids");
    }
  }
}

// 1-based ranks by ascending score, ties share their mean rank.
Eigen::VectorXd mid_ranks(const ScoreTable& t) {
  const std::size_t n = t.entries.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return t.entries[x].score < t.entries[y].score;
  });
  Eigen::VectorXd r(static_cast<Eigen::Index>(n));
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && t.entries[order[j + 1]].score == t.entries[order[i]].score) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r(static_cast<Eigen::Index>(order[k])) = mid;
    i = j + 1;
  }
  return r;
}

std::set<std::int64_t> top_set(const ScoreTable& t, std::size_t k) {
  const Ranking r = rank(t);
  return {r.ordered_ids.begin(), r.ordered_ids.begin() + static_cast<std::ptrdiff_t>(k)};
}

}  // namespace

double spearman(const ScoreTable& a, const ScoreTable& b) {
  require_same_ids(a, b);
  if (a.entries.size() < 2) throw ArgumentError("spearman needs n >= 2");
  const Eigen::VectorXd ra = mid_ranks(a);
  const Eigen::VectorXd rb = mid_ranks(b);
  const Eigen::ArrayXd da = ra.array() - ra.mean();
  const Eigen::ArrayXd db = rb.array() - rb.mean();
  const double va = (da * da).sum();
  const double vb = (db * db).sum();
  if (va == 0.0 || vb == 0.0) {
    throw UndefinedError("spearman undefined: constant ranks");
  }
  return (da * db).sum() / std::sqrt(va * vb);
}

double overlap_at_percentile(const ScoreTable& a, const ScoreTable& b,
                             double percentile) {
  require_same_ids(a, b);
  if (!(percentile >= 0.0 && percentile < 100.0)) {
    throw ArgumentError("percentile must be in [0, 100)");
  }
  if (a.entries.empty()) throw ArgumentError("overlap of empty tables");
  const std::size_t k = top_count(a.entries.size(), 100.0 - percentile);
  const auto ta = top_set(a, k);
  const auto tb = top_set(b, k);
  std::size_t common = 0;
  for (auto id : ta) common += tb.count(id);
  return 100.0 * static_cast<double>(common) / static_cast<double>(ta.size());
}

double churn(const std::vector<int>& preds_a, const std::vector<int>& preds_b,
             const std::vector<int>& gold) {
  if (preds_a.size() != gold.size() || preds_b.size() != gold.size()) {
    throw ShapeError("churn: prediction and label counts differ");
  }
  if (gold.empty()) throw ArgumentError("churn of empty prediction sets");
  std::size_t disagree = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool a_ok = preds_a[i] == gold[i];
    const bool b_ok = preds_b[i] == gold[i];
    disagree += a_ok != b_ok;
  }
  return 100.0 * static_cast<double>(disagree) / static_cast<double>(gold.size());
}

std::string StabilityReport::to_json() const {
  nlohmann::json j;
  j["spearman"] = spearman;
  j["overlap90"] = overlap90;
  j["churn"] = churn;
  j["n"] = n;
  j["config_a"] = nlohmann::json::parse(config_a.empty() ? "null" : config_a);
  j["config_b"] = nlohmann::json::parse(config_b.empty() ? "null" : config_b);
  return j.dump(2);
}

std::string RunSetup::to_json() const {
  nlohmann::json j;
  j["spec"] = nlohmann::json::parse(model_spec_to_json(spec));
  j["batch_size"] = train.batch_size;
  j["steps"] = train.steps;
  j["learning_rate"] = train.learning_rate;
  j["optimizer"] = influxcl::to_string(train.optimizer);
  j["init_seed"] = train.init_seed;
  j["order_seed"] = train.order_seed;
  return j.dump();
}

RunSetup apply_variation(const ModelSpec& spec, const TrainConfig& cfg,
                         const Variation& v) {
  RunSetup r{spec, cfg};
  if (v.batch_size) r.train.batch_size = *v.batch_size;
  if (v.order_seed) r.train.order_seed = *v.order_seed;
  if (v.init_seed) r.train.init_seed = *v.init_seed;
  if (v.width_factor) {
    if (!(*v.width_factor > 0.0)) throw ArgumentError("width factor must be > 0");
    for (auto& w : r.spec.hidden_widths) {
      w = std::max<Eigen::Index>(
          1, static_cast<Eigen::Index>(std::lround(static_cast<double>(w) * *v.width_factor)));
    }
  }
  if (v.depth_delta) {
    const auto depth = static_cast<int>(r.spec.hidden_widths.size()) + *v.depth_delta;
    if (depth < 1) throw ArgumentError("depth variation removes every hidden layer");
    r.spec.hidden_widths.resize(static_cast<std::size_t>(depth),
                                r.spec.hidden_widths.back());
  }
  return r;
}

StabilityReport stability_experiment(const StabilityTask& task,
                                     const Variation& variation) {
  const RunSetup base{task.spec, task.train_config};
  const RunSetup varied = apply_variation(task.spec, task.train_config, variation);

  auto run = [&](const RunSetup& setup) {
    TrainConfig cfg = setup.train;
    if (cfg.steps > 0 && std::find(cfg.checkpoint_steps.begin(), cfg.checkpoint_steps.end(),
                                   cfg.steps) == cfg.checkpoint_steps.end()) {
      cfg.checkpoint_steps.push_back(cfg.steps);
    }
    TrainResult tr = train(setup.spec, task.train, task.dev, cfg);
    if (tr.checkpoints.empty()) tr.checkpoints.push_back({0, tr.params});
    ScoreTable scores = score_dataset(task.score, setup.spec, tr.checkpoints, task.train);
    std::vector<int> preds = predict(setup.spec, tr.params, to_batch(task.test).features);
    return std::make_pair(std::move(scores), std::move(preds));
  };

  auto fa = std::async(std::launch::async, run, std::cref(base));
  auto rb = run(varied);
  auto ra = fa.get();

  std::vector<int> gold;
  for (const auto& e : task.test.examples) gold.push_back(e.label);

  StabilityReport rep;
  rep.spearman = spearman(ra.first, rb.first);
  rep.overlap90 = overlap_at_percentile(ra.first, rb.first, 90.0);
  rep.churn = churn(ra.second, rb.second, gold);
  rep.n = ra.first.size();
  rep.config_a = base.to_json();
  rep.config_b = varied.to_json();
  return rep;
}

}  // namespace influxcl
