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

#include "influxcl/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "json.hpp"

#include "influxcl/errors.hpp"
#include "influxcl/rng.hpp"

namespace influxcl {

using nlohmann::json;

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  throw ArgumentError("unknown split '" + s + "'");
}

void Dataset::canonicalize() {
  std::sort(examples.begin(), examples.end(),
            [](const Example& a, const Example& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& e = examples[i];
    if (i > 0 && examples[i - 1].id == e.id) {
      throw ArgumentError("duplicate example id " + std::to_string(e.id));
    }
    if (e.label < 0 || e.label >= num_classes) {
      throw ArgumentError("example " + std::to_string(e.id) + " has label " +
                          std::to_string(e.label) + " outside [0, " +
                          std::to_string(num_classes) + ")");
    }
    if (e.features.size() != examples.front().features.size()) {
      throw ArgumentError("example " + std::to_string(e.id) +
                          " has inconsistent feature dimension");
    }
  }
}

std::vector<std::int64_t> Dataset::ids() const {
  std::vector<std::int64_t> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.id);
  return out;
}

const Example& Dataset::by_id(std::int64_t id) const {
  auto it = std::lower_bound(
      examples.begin(), examples.end(), id,
      [](const Example& e, std::int64_t v) { return e.id < v; });
  if (it == examples.end() || it->id != id) {
    throw ArgumentError("unknown example id " + std::to_string(id));
  }
  return *it;
}

Dataset Dataset::select(const std::vector<std::int64_t>& ids) const {
  Dataset out;
  out.num_classes = num_classes;
  out.split = split;
  out.examples.reserve(ids.size());
  for (auto id : ids) out.examples.push_back(by_id(id));
  out.canonicalize();
  return out;
}

Batch to_batch(const Dataset& ds, const std::vector<std::size_t>& rows) {
  Batch b;
  b.features.resize(static_cast<Eigen::Index>(rows.size()), ds.feature_dim());
  b.labels.reserve(rows.size());
  b.example_ids.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Example& e = ds.examples.at(rows[r]);
    b.features.row(static_cast<Eigen::Index>(r)) = e.features.transpose();
    b.labels.push_back(e.label);
    b.example_ids.push_back(e.id);
  }
  return b;
}

Batch to_batch(const Dataset& ds) {
  std::vector<std::size_t> rows(ds.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return to_batch(ds, rows);
}

Dataset gen_gaussian_clusters(std::size_t n, int num_classes, Eigen::Index dim,
                              double separation, std::uint64_t seed,
                              Split split) {
  if (num_classes < 2) throw ArgumentError("need at least 2 classes");
  if (n < static_cast<std::size_t>(num_classes)) {
    throw ArgumentError("n must be >= num_classes");
  }
  if (dim < 1) throw ArgumentError("dim must be >= 1");
  if (!(separation > 0.0)) throw ArgumentError("separation must be > 0");
  if (num_classes > 2 && dim < num_classes) {
    throw ArgumentError("clusters with C > 2 classes need dim >= C");
  }

  std::vector<Eigen::VectorXd> means(num_classes, Eigen::VectorXd::Zero(dim));
  if (num_classes == 2) {
    means[0](0) = -separation / 2.0;
    means[1](0) = separation / 2.0;
  } else {
    for (int c = 0; c < num_classes; ++c) means[c](c) = separation / std::sqrt(2.0);
  }

  Rng rng = make_rng(seed, stream::kData);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset ds;
  ds.num_classes = num_classes;
  ds.split = split;
  ds.examples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Example e;
    e.id = static_cast<std::int64_t>(i);
    e.label = static_cast<int>(i % static_cast<std::size_t>(num_classes));
    e.features = means[e.label];
    for (Eigen::Index k = 0; k < dim; ++k) e.features(k) += normal(rng);
    ds.examples.push_back(std::move(e));
  }
  return ds;
}

std::string bow_token(std::size_t index) { return "w" + std::to_string(index); }

std::vector<double> bow_class_weights(std::size_t vocab_size, int num_classes,
                                      int label, double topic_boost) {
  const std::size_t C = static_cast<std::size_t>(num_classes);
  const std::size_t block = (vocab_size - C) / C;
  const std::size_t start = C + static_cast<std::size_t>(label) * block;
  std::vector<double> w(vocab_size);
  for (std::size_t j = 0; j < vocab_size; ++j) {
    w[j] = 1.0 / static_cast<double>(j + 1);
    if (j >= start && j < start + block) {
      w[j] += topic_boost / static_cast<double>(1 + j - start);
    }
  }
  return w;
}

Dataset gen_bow_text(std::size_t n, std::size_t vocab_size, int num_classes,
                     std::uint64_t seed, Split split, const BowOptions& opts) {
  if (num_classes < 2) throw ArgumentError("need at least 2 classes");
  if (vocab_size < 10) throw ArgumentError("vocab_size must be >= 10");
  if (vocab_size < 2 * static_cast<std::size_t>(num_classes)) {
    throw ArgumentError("vocab_size must be >= 2 * num_classes");
  }
  if (n < static_cast<std::size_t>(num_classes)) {
    throw ArgumentError("n must be >= num_classes");
  }
  if (opts.min_len < 1 || opts.max_len < opts.min_len) {
    throw ArgumentError("invalid token length range");
  }

  std::vector<std::discrete_distribution<std::size_t>> word_dist;
  for (int c = 0; c < num_classes; ++c) {
    auto w = bow_class_weights(vocab_size, num_classes, c, opts.topic_boost);
    word_dist.emplace_back(w.begin(), w.end());
  }
  Rng rng = make_rng(seed, stream::kData);
  std::uniform_int_distribution<std::size_t> len_dist(opts.min_len,
                                                      opts.max_len);
  Dataset ds;
  ds.num_classes = num_classes;
  ds.split = split;
  ds.examples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Example e;
    e.id = static_cast<std::int64_t>(i);
    e.label = static_cast<int>(i % static_cast<std::size_t>(num_classes));
    const std::size_t len = len_dist(rng);
    e.features = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vocab_size));
    std::vector<std::string> tokens;
    tokens.reserve(len);
    for (std::size_t k = 0; k < len; ++k) {
      const std::size_t w = word_dist[e.label](rng);
      tokens.push_back(bow_token(w));
      e.features(static_cast<Eigen::Index>(w)) += 1.0;
    }
    e.features /= static_cast<double>(len);
    e.tokens = std::move(tokens);
    ds.examples.push_back(std::move(e));
  }
  return ds;
}

std::pair<Dataset, NoiseReport> inject_label_noise(const Dataset& ds,
                                                   double fraction,
                                                   std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ArgumentError("noise fraction must be in (0, 1)");
  }
  if (ds.num_classes < 2) throw ArgumentError("need at least 2 classes");
  const std::size_t n = ds.size();
  const auto k = static_cast<std::size_t>(std::llround(fraction * n));

  Rng rng = make_rng(seed, stream::kNoise);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates: the first k entries are a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<std::size_t> chosen(idx.begin(), idx.begin() + k);
  std::sort(chosen.begin(), chosen.end());

  Dataset out = ds;
  for (auto& e : out.examples) e.noisy = false;
  NoiseReport report;
  report.fraction = fraction;
  std::uniform_int_distribution<int> other(0, ds.num_classes - 2);
  for (auto row : chosen) {
    Example& e = out.examples[row];
    const int r = other(rng);
    e.label = r < e.label ? r : r + 1;
    e.noisy = true;
    report.flipped_ids.insert(e.id);
  }
  return {std::move(out), std::move(report)};
}

NoiseReport noise_report_from(const Dataset& ds) {
  NoiseReport r;
  for (const auto& e : ds.examples) {
    if (e.noisy.value_or(false)) r.flipped_ids.insert(e.id);
  }
  r.fraction = ds.size() == 0 ? 0.0
                              : static_cast<double>(r.flipped_ids.size()) /
                                    static_cast<double>(ds.size());
  return r;
}

namespace {

Example parse_example(const std::string& line, std::size_t lineno) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), lineno);
  }
  if (!j.is_object()) throw ParseError("record is not an object", lineno);
  auto require = [&](const char* key) -> const json& {
    auto it = j.find(key);
    if (it == j.end()) {
      throw ParseError(std::string("missing field '") + key + "'", lineno);
    }
    return *it;
  };
  Example e;
  const json& id = require("id");
  const json& label = require("label");
  const json& features = require("features");
  if (!id.is_number_integer()) throw ParseError("'id' must be an integer", lineno);
  if (!label.is_number_integer()) {
    throw ParseError("'label' must be an integer", lineno);
  }
  if (!features.is_array()) {
    throw ParseError("'features' must be an array", lineno);
  }
  e.id = id.get<std::int64_t>();
  e.label = label.get<int>();
  e.features.resize(static_cast<Eigen::Index>(features.size()));
  for (std::size_t k = 0; k < features.size(); ++k) {
    if (!features[k].is_number()) {
      throw ParseError("'features' must hold numbers", lineno);
    }
    e.features(static_cast<Eigen::Index>(k)) = features[k].get<double>();
  }
  if (auto it = j.find("noisy"); it != j.end() && !it->is_null()) {
    if (!it->is_boolean()) throw ParseError("'noisy' must be a bool", lineno);
    e.noisy = it->get<bool>();
  }
  if (auto it = j.find("tokens"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw ParseError("'tokens' must be an array", lineno);
    std::vector<std::string> toks;
    for (const auto& t : *it) {
      if (!t.is_string()) throw ParseError("'tokens' must hold strings", lineno);
      toks.push_back(t.get<std::string>());
    }
    e.tokens = std::move(toks);
  }
  return e;
}

}  // namespace

Dataset load_jsonl(const std::filesystem::path& path, int num_classes,
                   Split split) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open dataset " + path.string());
  Dataset ds;
  ds.split = split;
  std::string line;
  std::size_t lineno = 0;
  int max_label = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Example e = parse_example(line, lineno);
    if (e.label < 0) throw ParseError("negative label", lineno);
    max_label = std::max(max_label, e.label);
    ds.examples.push_back(std::move(e));
  }
  ds.num_classes = num_classes > 0 ? num_classes : std::max(2, max_label + 1);
  ds.canonicalize();
  return ds;
}

void save_jsonl(const Dataset& ds, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& e : ds.examples) {
    json j;
    j["id"] = e.id;
    j["label"] = e.label;
    j["features"] = std::vector<double>(e.features.data(),
                                        e.features.data() + e.features.size());
    if (e.noisy) j["noisy"] = *e.noisy;
    if (e.tokens) j["tokens"] = *e.tokens;
    out << j.dump() << '\n';
  }
}

double signal_length(const Example& ex) {
  if (ex.tokens) return static_cast<double>(ex.tokens->size());
  return static_cast<double>((ex.features.array() != 0.0).count());
}

CorpusStats CorpusStats::from_sentences(
    const std::vector<std::vector<std::string>>& sentences) {
  CorpusStats s;
  for (const auto& sent : sentences) {
    for (const auto& tok : sent) {
      ++s.counts_[tok];
      ++s.total_;
    }
  }
  return s;
}

CorpusStats CorpusStats::from(const Dataset& corpus) {
  CorpusStats s;
  for (const auto& e : corpus.examples) {
    if (!e.tokens) continue;
    for (const auto& tok : *e.tokens) {
      ++s.counts_[tok];
      ++s.total_;
    }
  }
  return s;
}

std::size_t CorpusStats::count(const std::string& token) const {
  auto it = counts_.find(token);
  return it == counts_.end() ? 0 : it->second;
}

double CorpusStats::probability(const std::string& token) const {
  const std::size_t c = count(token);
  if (c > 0) return static_cast<double>(c) / static_cast<double>(total_);
  return 1.0 / static_cast<double>(total_ + counts_.size() + (total_ == 0));
}

double CorpusStats::rarity(const std::vector<std::string>& tokens) const {
  double d = 0.0;
  for (const auto& tok : tokens) d -= std::log(probability(tok));
  return d;
}

double signal_word_rarity(const Dataset& corpus, const Example& ex) {
  if (!ex.tokens) return 0.0;
  return CorpusStats::from(corpus).rarity(*ex.tokens);
}

const std::unordered_set<std::string>& default_stopwords() {
  static const std::unordered_set<std::string> words = {
      "a",    "an",   "and",  "are",  "as",   "at",    "be",   "by",
      "did",  "do",   "does", "for",  "from", "had",   "has",  "have",
      "he",   "her",  "his",  "i",    "in",   "is",    "it",   "its",
      "of",   "on",   "or",   "she",  "that", "the",   "their", "them",
      "they", "this", "to",   "was",  "were", "which", "with", "you"};
  return words;
}

std::unordered_set<std::string> load_stopwords(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open stopword list " + path.string());
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    auto e = line.find_last_not_of(" \t\r");
    words.insert(line.substr(b, e - b + 1));
  }
  return words;
}

double signal_lexical_overlap(const std::vector<std::string>& query,
                              const std::vector<std::string>& context,
                              const std::unordered_set<std::string>& stopwords) {
  std::set<std::string> q;
  for (const auto& t : query) {
    if (!stopwords.count(t)) q.insert(t);
  }
  if (q.empty()) {
    throw UndefinedError("lexical overlap undefined: query has only stopwords");
  }
  const std::set<std::string> c(context.begin(), context.end());
  std::size_t hit = 0;
  for (const auto& t : q) hit += c.count(t);
  return static_cast<double>(hit) / static_cast<double>(q.size());
}

}  // namespace influxcl
