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

#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"

#include "influxcl/errors.hpp"
#include "influxcl/ranking.hpp"

using namespace influxcl;

namespace {

ScoreTable table(const std::vector<std::pair<std::int64_t, double>>& rows) {
  ScoreTable t;
  for (auto [id, s] : rows) t.entries.push_back({id, s});
  t.canonicalize();
  return t;
}

// Scores drawn from a small set so ties are common.
ScoreTable random_table(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> s(0, 9);
  ScoreTable t;
  for (std::size_t i = 0; i < n; ++i) t.entries.push_back({static_cast<std::int64_t>(i * 3 + 1), s(rng) * 0.5});
  t.canonicalize();
  return t;
}

Dataset ids_dataset(const ScoreTable& t) {
  Dataset ds;
  for (const auto& e : t.entries) {
    Example x;
    x.id = e.id;
    x.features = Eigen::VectorXd::Zero(1);
    ds.examples.push_back(x);
  }
  return ds;
}

}  // namespace

TEST_CASE("rank orders by score then id") {
  CHECK(rank(table({{1, 0.5}, {2, 0.9}})).ordered_ids == std::vector<std::int64_t>{2, 1});
  CHECK(rank(table({{5, 1.0}, {2, 1.0}, {9, 1.0}})).ordered_ids ==
        std::vector<std::int64_t>{2, 5, 9});

  const ScoreTable t = random_table(200, 3);
  // Brute force: repeatedly pull the best remaining entry.
  std::vector<ScoreEntry> left = t.entries;
  std::vector<std::int64_t> want;
  while (!left.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < left.size(); ++i) {
      if (left[i].score > left[best].score ||
          (left[i].score == left[best].score && left[i].id < left[best].id)) {
        best = i;
      }
    }
    want.push_back(left[best].id);
    left.erase(left.begin() + static_cast<std::ptrdiff_t>(best));
  }
  CHECK(rank(t).ordered_ids == want);

  ScoreTable shuffled = t;
  std::mt19937_64 rng(1);
  std::shuffle(shuffled.entries.begin(), shuffled.entries.end(), rng);
  CHECK(rank(shuffled).ordered_ids == want);
}

TEST_CASE("top_count rounds up without float artefacts") {
  CHECK(top_count(2000, 10) == 200);
  CHECK(top_count(2000, 30) == 600);
  CHECK(top_count(10, 25) == 3);
  CHECK(top_count(7, 0) == 0);
  CHECK(top_count(7, 100) == 7);
  CHECK(top_count(3, 10) == 1);
}

TEST_CASE("percentile filter") {
  const ScoreTable t = random_table(2000, 5);
  const Dataset ds = ids_dataset(t);
  const Ranking r = rank(t);
  CHECK(percentile_filter(ds, r, 0.0) == ds);
  const Dataset kept = percentile_filter(ds, r, 10.0);
  CHECK(kept.size() == 1800);
  std::set<std::int64_t> dropped;
  for (const auto& e : ds.examples) dropped.insert(e.id);
  for (const auto& e : kept.examples) dropped.erase(e.id);
  CHECK(dropped == std::set<std::int64_t>(r.ordered_ids.begin(), r.ordered_ids.begin() + 200));
  CHECK(std::is_sorted(kept.examples.begin(), kept.examples.end(),
                       [](const Example& a, const Example& b) { return a.id < b.id; }));
  // Nesting.
  std::vector<std::int64_t> prev = ds.ids();
  for (double pct : {1.0, 5.0, 12.5, 30.0, 99.0}) {
    const auto now = percentile_filter(ds, r, pct).ids();
    CHECK(std::includes(prev.begin(), prev.end(), now.begin(), now.end()));
    prev = now;
  }
  CHECK_THROWS_AS(percentile_filter(ds, r, 100.0), ArgumentError);
  CHECK_THROWS_AS(percentile_filter(ds, r, -1.0), ArgumentError);
}

TEST_CASE("quantile buckets") {
  auto sizes = [](std::size_t n, int K) {
    ScoreTable t;
    for (std::size_t i = 0; i < n; ++i) t.entries.push_back({static_cast<std::int64_t>(i), static_cast<double>(i)});
    return quantile_buckets(rank(t), K).sizes();
  };
  CHECK(sizes(10, 5) == std::vector<std::size_t>{2, 2, 2, 2, 2});
  CHECK(sizes(11, 5) == std::vector<std::size_t>{3, 2, 2, 2, 2});
  CHECK(sizes(13, 5) == std::vector<std::size_t>{3, 3, 3, 2, 2});
  CHECK(sizes(4, 1) == std::vector<std::size_t>{4});

  const ScoreTable t = random_table(997, 2);
  const BucketAssignment a = quantile_buckets(rank(t), 10, &t);
  CHECK(a.bucket_of.size() == 997);
  const auto sz = a.sizes();
  CHECK(*std::max_element(sz.begin(), sz.end()) - *std::min_element(sz.begin(), sz.end()) <= 1);
  // Higher buckets never hold lower scores, and boundaries mark the cut.
  for (int b = 1; b < a.K; ++b) {
    double lo_max = -1e300, hi_min = 1e300;
    for (auto id : a.members(b - 1)) lo_max = std::max(lo_max, t.at(id));
    for (auto id : a.members(b)) hi_min = std::min(hi_min, t.at(id));
    CHECK(lo_max <= hi_min);
  }
  REQUIRE(a.boundaries.size() == 9);
  const Ranking r = rank(t);
  CHECK(a.bucket_of.at(r.ordered_ids.front()) == 9);
  CHECK(a.bucket_of.at(r.ordered_ids.back()) == 0);
  CHECK_THROWS_AS(quantile_buckets(r, 0), ArgumentError);
  CHECK_THROWS_AS(quantile_buckets(r, 998), ArgumentError);
}

TEST_CASE("bucket refinement") {
  const ScoreTable t = random_table(600, 8);
  const Ranking r = rank(t);
  for (auto [K, m] : std::vector<std::pair<int, int>>{{5, 2}, {4, 3}, {10, 6}}) {
    const BucketAssignment coarse = quantile_buckets(r, K);
    const BucketAssignment fine = quantile_buckets(r, K * m);
    for (const auto& [id, b] : fine.bucket_of) CHECK(coarse.bucket_of.at(id) == b / m);
  }
}

TEST_CASE("recall at top") {
  const ScoreTable t = table({{0, 0.1}, {1, 0.9}, {2, 0.8}, {3, 0.2}, {4, 0.3},
                              {5, 0.4}, {6, 0.5}, {7, 0.6}, {8, 0.7}, {9, 0.05}});
  NoiseReport top{{1, 2}, 0.2};
  CHECK(recall_at_top(t, top, 20) == 1.0);
  NoiseReport mixed{{1, 9}, 0.2};
  CHECK(recall_at_top(t, mixed, 10) == 0.5);
  CHECK(recall_at_top(t, mixed, 90) == 0.5);
  CHECK(recall_at_top(t, mixed, 100) == 1.0);
  CHECK_THROWS_AS(recall_at_top(t, NoiseReport{}, 10), ArgumentError);
}

TEST_CASE("bucket histogram") {
  const ScoreTable t = random_table(300, 4);
  const BucketAssignment a = quantile_buckets(rank(t), 7);
  CHECK(bucket_histogram(a, {}) == std::vector<std::size_t>(7, 0));
  CHECK(bucket_histogram(a, ids_dataset(t).ids()) == a.sizes());
  std::mt19937_64 rng(2);
  std::vector<std::int64_t> subset;
  for (const auto& e : t.entries) {
    if (rng() % 3 == 0) subset.push_back(e.id);
  }
  std::vector<std::size_t> want(7, 0);
  for (auto id : subset) {
    for (int b = 0; b < 7; ++b) {
      const auto m = a.members(b);
      if (std::find(m.begin(), m.end(), id) != m.end()) ++want[static_cast<std::size_t>(b)];
    }
  }
  CHECK(bucket_histogram(a, subset) == want);
  CHECK_THROWS_AS(bucket_histogram(a, {2}), ArgumentError);
}
