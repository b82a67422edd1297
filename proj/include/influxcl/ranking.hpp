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
#include <map>
#include <vector>

#include "influxcl/influence.hpp"
#include "influxcl/tasks.hpp"

namespace influxcl {

// Ids by descending score, ties by ascending id.
struct Ranking {
  std::vector<std::int64_t> ordered_ids;
};

// Bucket 0 holds the lowest scores, bucket K-1 the highest.
struct BucketAssignment {
  int K = 0;
  std::map<std::int64_t, int> bucket_of;
  // boundaries[b-1] is the smallest score inside bucket b, for b in [1, K).
  std::vector<double> boundaries;

  std::vector<std::int64_t> members(int bucket) const;
  std::vector<std::size_t> sizes() const;
};

Ranking rank(const ScoreTable& scores);

// Number of ids in the top `pct` percent of n: ceil(n * pct / 100).
std::size_t top_count(std::size_t n, double pct);

// Drops the ceil(n * pct / 100) highest-ranked examples.
Dataset percentile_filter(const Dataset& ds, const Ranking& ranking,
                          double drop_top_pct);

// K contiguous groups of the ascending-score order; when n % K != 0 the
// lower buckets get the extra element.
BucketAssignment quantile_buckets(const Ranking& ranking, int K,
                                  const ScoreTable* scores = nullptr);

// Fraction of flipped ids found among the top pct percent.
double recall_at_top(const ScoreTable& scores, const NoiseReport& noise,
                     double pct);

std::vector<std::size_t> bucket_histogram(const BucketAssignment& a,
                                          const std::vector<std::int64_t>& subset);

}  // namespace influxcl
