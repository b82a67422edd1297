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

#include "influxcl/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "influxcl/errors.hpp"

namespace influxcl {

std::vector<std::int64_t> BucketAssignment::members(int bucket) const {
  std::vector<std::int64_t> out;
  for (const auto& [id, b] : bucket_of) {
    if (b == bucket) out.push_back(id);
  }
  return out;
}

std::vector<std::size_t> BucketAssignment::sizes() const {
  std::vector<std::size_t> out(static_cast<std::size_t>(K), 0);
  for (const auto& [id, b] : bucket_of) ++out[static_cast<std::size_t>(b)];
  return out;
}

Ranking rank(const ScoreTable& scores) {
  std::vector<ScoreEntry> e = scores.entries;
  std::sort(e.begin(), e.end(), [](const ScoreEntry& a, const ScoreEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  Ranking r;
  r.ordered_ids.reserve(e.size());
  for (const auto& x : e) r.ordered_ids.push_back(x.id);
  return r;
}

std::size_t top_count(std::size_t n, double pct) {
  // Guard against 2000 * 10 / 100 landing a hair above an integer.
  const double raw = static_cast<double>(n) * pct / 100.0;
  const double rounded = std::round(raw);
  const double k = std::abs(raw - rounded) < 1e-9 ? rounded : std::ceil(raw);
  return std::min(n, static_cast<std::size_t>(k));
}

Dataset percentile_filter(const Dataset& ds, const Ranking& ranking,
                          double drop_top_pct) {
  if (!(drop_top_pct >= 0.0 && drop_top_pct < 100.0)) {
    throw ArgumentError("filter percentage must be in [0, 100)");
  }
  if (ranking.ordered_ids.size() != ds.size()) {
    throw ArgumentError("ranking does not cover the dataset");
  }
  const std::size_t drop = top_count(ds.size(), drop_top_pct);
  const std::set<std::int64_t> dropped(ranking.ordered_ids.begin(),
                                       ranking.ordered_ids.begin() + drop);
  Dataset out;
  out.num_classes = ds.num_classes;
  out.split = ds.split;
  for (const auto& e : ds.examples) {
    if (!dropped.count(e.id)) out.examples.push_back(e);
  }
  if (out.size() + drop != ds.size()) {
    throw ArgumentError("ranking ids do not match dataset ids");
  }
  return out;
}

BucketAssignment quantile_buckets(const Ranking& ranking, int K,
                                  const ScoreTable* scores) {
  const std::size_t n = ranking.ordered_ids.size();
  if (K < 1 || static_cast<std::size_t>(K) > n) {
    throw ArgumentError("bucket count must be in [1, n]");
  }
  BucketAssignment a;
  a.K = K;
  const std::size_t base = n / static_cast<std::size_t>(K);
  const std::size_t extra = n % static_cast<std::size_t>(K);
  // Walk the ascending order: reverse of the ranking.
  std::size_t pos = 0;
  for (int b = 0; b < K; ++b) {
    const std::size_t size = base + (static_cast<std::size_t>(b) < extra ? 1 : 0);
    for (std::size_t k = 0; k < size; ++k, ++pos) {
      const std::int64_t id = ranking.ordered_ids[n - 1 - pos];
      a.bucket_of[id] = b;
      if (k == 0 && b > 0 && scores) a.boundaries.push_back(scores->at(id));
    }
  }
  return a;
}

double recall_at_top(const ScoreTable& scores, const NoiseReport& noise,
                     double pct) {
  if (noise.flipped_ids.empty()) throw ArgumentError("recall: empty noise set");
  if (!(pct >= 0.0 && pct <= 100.0)) {
    throw ArgumentError("recall: percentage must be in [0, 100]");
  }
  const Ranking r = rank(scores);
  const std::size_t k = top_count(r.ordered_ids.size(), pct);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < k; ++i) hit += noise.flipped_ids.count(r.ordered_ids[i]);
  return static_cast<double>(hit) / static_cast<double>(noise.flipped_ids.size());
}

std::vector<std::size_t> bucket_histogram(const BucketAssignment& a,
                                          const std::vector<std::int64_t>& subset) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(a.K), 0);
  for (auto id : subset) {
    auto it = a.bucket_of.find(id);
    if (it == a.bucket_of.end()) {
      throw ArgumentError("id " + std::to_string(id) + " has no bucket");
    }
    ++counts[static_cast<std::size_t>(it->second)];
  }
  return counts;
}

}  // namespace influxcl
