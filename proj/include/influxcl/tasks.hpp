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
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "influxcl/diffcore.hpp"

namespace influxcl {

struct Example {
  std::int64_t id = 0;
  Eigen::VectorXd features;
  int label = 0;
  std::optional<bool> noisy;  // ground truth, evaluation only
  std::optional<std::vector<std::string>> tokens;

  bool operator==(const Example& o) const {
    return id == o.id && label == o.label && noisy == o.noisy &&
           tokens == o.tokens && features.size() == o.features.size() &&
           features == o.features;
  }
};

enum class Split { train, dev, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct Dataset {
  std::vector<Example> examples;  // ascending id
  int num_classes = 2;
  Split split = Split::train;

  std::size_t size() const { return examples.size(); }
  Eigen::Index feature_dim() const {
    return examples.empty() ? 0 : examples.front().features.size();
  }
  // Throws DataError-style ArgumentError on duplicate ids, bad labels or
  // ragged features; sorts into canonical id order.
  void canonicalize();
  // Subset in canonical order; unknown ids are an ArgumentError.
  Dataset select(const std::vector<std::int64_t>& ids) const;
  std::vector<std::int64_t> ids() const;
  const Example& by_id(std::int64_t id) const;

  bool operator==(const Dataset&) const = default;
};

// Packs dataset rows into a Batch (rows in the given order).
Batch to_batch(const Dataset& ds);
Batch to_batch(const Dataset& ds, const std::vector<std::size_t>& rows);

struct NoiseReport {
  std::set<std::int64_t> flipped_ids;
  double fraction = 0.0;
};

// Class-balanced isotropic unit-variance clusters whose means are
// `separation` apart. Two classes sit at +-separation/2 on the first axis;
// C > 2 classes sit at (separation / sqrt 2) e_c and need dim >= C.
Dataset gen_gaussian_clusters(std::size_t n, int num_classes, Eigen::Index dim,
                              double separation, std::uint64_t seed,
                              Split split = Split::train);

// Bag-of-words text. Every class mixes a shared Zipf background with a boosted
// block of topic words; token counts are uniform in [min_len, max_len].
// Features are counts divided by the token count.
struct BowOptions {
  std::size_t min_len = 4;
  std::size_t max_len = 24;
  double topic_boost = 2.0;
};

Dataset gen_bow_text(std::size_t n, std::size_t vocab_size, int num_classes,
                     std::uint64_t seed, Split split = Split::train,
                     const BowOptions& opts = {});

// Unnormalized class-conditional unigram weights used by gen_bow_text.
std::vector<double> bow_class_weights(std::size_t vocab_size, int num_classes,
                                      int label, double topic_boost = 2.0);
std::string bow_token(std::size_t index);

// Flips round(fraction * n) uniformly chosen labels to a uniformly chosen
// different class and marks them noisy; all other examples are copied with
// noisy = false.
std::pair<Dataset, NoiseReport> inject_label_noise(const Dataset& ds,
                                                   double fraction,
                                                   std::uint64_t seed);

NoiseReport noise_report_from(const Dataset& ds);

// JSONL: {"id", "features", "label", "noisy"?, "tokens"?} per line.
Dataset load_jsonl(const std::filesystem::path& path, int num_classes = 0,
                   Split split = Split::train);
void save_jsonl(const Dataset& ds, const std::filesystem::path& path);

// ----------------------------------------------------------------------------
// Difficulty signals

double signal_length(const Example& ex);

// Token frequencies of a corpus, built once and then read-only.
class CorpusStats {
 public:
  static CorpusStats from(const Dataset& corpus);
  static CorpusStats from_sentences(
      const std::vector<std::vector<std::string>>& sentences);

  std::size_t total() const { return total_; }
  std::size_t vocab_size() const { return counts_.size(); }
  std::size_t count(const std::string& token) const;

  // Relative frequency for seen tokens; unseen tokens get the add-one mass
  // 1 / (total + vocab_size).
  double probability(const std::string& token) const;

  // -sum_k log p(w_k).
  double rarity(const std::vector<std::string>& tokens) const;

 private:
  std::unordered_map<std::string, std::size_t> counts_;
  std::size_t total_ = 0;
};

double signal_word_rarity(const Dataset& corpus, const Example& ex);

const std::unordered_set<std::string>& default_stopwords();
// One stopword per line; blank lines and '#' comments skipped.
std::unordered_set<std::string> load_stopwords(
    const std::filesystem::path& path);

// |q without stopwords  intersect  c| / |q without stopwords|, set semantics.
double signal_lexical_overlap(const std::vector<std::string>& query,
                              const std::vector<std::string>& context,
                              const std::unordered_set<std::string>& stopwords =
                                  default_stopwords());

}  // namespace influxcl
