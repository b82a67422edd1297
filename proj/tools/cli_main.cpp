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

// influxcl command-line entry point.
//
// Every subcommand accepts --manifest FILE; values in the manifest replace
// the built-in defaults and explicit flags replace both.

#include <cstdlib>
#include <deque>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "influxcl/errors.hpp"
#include "influxcl/experiment.hpp"
#include "influxcl/io.hpp"
#include "influxcl/ranking.hpp"
#include "influxcl/stability.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace influxcl;

namespace {

enum ExitCode {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kInvalidConfig = 3,
  kMissingInput = 4,
  kParse = 5,
  kRunExists = 6,
  kDiverged = 7,
};

class RunExistsError : public Error {
 public:
  using Error::Error;
};

fs::path runs_root() {
  const char* env = std::getenv("INFLUXCL_RUNS_DIR");
  return env && *env ? fs::path(env) : fs::path("runs");
}

// Stages flag values on a scratch manifest and copies over only the ones the
// user actually passed.
class Overlay {
 public:
  template <typename Get>
  CLI::Option* add(CLI::App* app, const std::string& name, Get get,
                   const std::string& desc) {
    auto& slot = get(staged_);
    CLI::Option* opt = app->add_option(name, slot, desc)->capture_default_str();
    copies_.push_back({opt, [this, get](RunManifest& dst) { get(dst) = get(staged_); }});
    return opt;
  }

  CLI::Option* add_choice(CLI::App* app, const std::string& name,
                          std::string default_value, std::vector<std::string> choices,
                          std::function<void(RunManifest&, const std::string&)> set,
                          const std::string& desc) {
    strings_.push_back(std::move(default_value));
    std::string* slot = &strings_.back();
    CLI::Option* opt = app->add_option(name, *slot, desc)
                           ->capture_default_str()
                           ->check(CLI::IsMember(std::move(choices)));
    copies_.push_back({opt, [slot, set](RunManifest& dst) { set(dst, *slot); }});
    return opt;
  }

  void apply(RunManifest& dst) const {
    for (const auto& [opt, copy] : copies_) {
      if (opt->count() > 0) copy(dst);
    }
  }

 private:
  RunManifest staged_;
  std::deque<std::string> strings_;
  std::vector<std::pair<CLI::Option*, std::function<void(RunManifest&)>>> copies_;
};

struct Common {
  std::string manifest;
  std::string out;
  bool force = false;
  Overlay overlay;
};

void add_common(CLI::App* app, Common& c, const std::string& out_desc) {
  app->add_option("--manifest", c.manifest, "JSON manifest supplying defaults");
  app->add_option("--out", c.out, out_desc);
  app->add_flag("--force", c.force, "overwrite a completed output");
}

void add_task_flags(CLI::App* app, Overlay& o) {
  o.add_choice(app, "--task", "clusters", {"clusters", "bow"},
               [](RunManifest& m, const std::string& v) { m.task.kind = v; },
               "synthetic task");
  o.add(app, "--n", [](RunManifest& m) -> auto& { return m.task.n_train; },
        "training examples");
  o.add(app, "--n-dev", [](RunManifest& m) -> auto& { return m.task.n_dev; },
        "dev examples");
  o.add(app, "--n-test", [](RunManifest& m) -> auto& { return m.task.n_test; },
        "test examples");
  o.add(app, "--classes", [](RunManifest& m) -> auto& { return m.task.num_classes; },
        "number of classes");
  o.add(app, "--dim", [](RunManifest& m) -> auto& { return m.task.dim; },
        "feature dimension (clusters)");
  o.add(app, "--separation", [](RunManifest& m) -> auto& { return m.task.separation; },
        "distance between class means (clusters)");
  o.add(app, "--vocab", [](RunManifest& m) -> auto& { return m.task.vocab_size; },
        "vocabulary size (bow)");
  o.add(app, "--noise", [](RunManifest& m) -> auto& { return m.task.noise; },
        "fraction of training labels flipped");
  o.add(app, "--seed", [](RunManifest& m) -> auto& { return m.task.seed; },
        "data seed");
}

void add_model_flags(CLI::App* app, Overlay& o) {
  o.add(app, "--hidden", [](RunManifest& m) -> auto& { return m.hidden_widths; },
        "hidden layer widths")
      ->delimiter(',');
  o.add_choice(app, "--activation", "tanh", {"tanh", "relu"},
               [](RunManifest& m, const std::string& v) {
                 m.activation = activation_from_string(v);
               },
               "hidden activation");
}

void add_train_flags(CLI::App* app, Overlay& o) {
  o.add(app, "--steps", [](RunManifest& m) -> auto& { return m.train.steps; },
        "optimizer steps");
  o.add(app, "--batch-size", [](RunManifest& m) -> auto& { return m.train.batch_size; },
        "mini-batch size");
  o.add(app, "--lr", [](RunManifest& m) -> auto& { return m.train.learning_rate; },
        "learning rate");
  o.add_choice(app, "--optimizer", "sgd", {"sgd", "sgd_momentum", "adam"},
               [](RunManifest& m, const std::string& v) {
                 m.train.optimizer = optimizer_from_string(v);
               },
               "optimizer");
  o.add(app, "--momentum", [](RunManifest& m) -> auto& { return m.train.momentum; },
        "momentum coefficient (sgd_momentum)");
  o.add(app, "--eval-every", [](RunManifest& m) -> auto& { return m.train.eval_every; },
        "metric trace cadence; 0 traces the final step only");
  o.add(app, "--init-seed", [](RunManifest& m) -> auto& { return m.seeds.init; },
        "model initialization seed");
  o.add(app, "--order-seed", [](RunManifest& m) -> auto& { return m.seeds.order; },
        "data ordering seed");
}

void add_score_flags(CLI::App* app, Overlay& o) {
  o.add_choice(app, "--method", "abif", {"abif", "tracin", "length", "rarity"},
               [](RunManifest& m, const std::string& v) {
                 m.score.method = score_method_from_string(v);
               },
               "scoring method");
  o.add_choice(app, "--mask", "last", {"first", "last", "all"},
               [](RunManifest& m, const std::string& v) {
                 m.score.abif.mask = m.score.tracin.mask = selector_from_string(v);
               },
               "layers entering gradients and HVPs");
  o.add(app, "--eigenvectors", [](RunManifest& m) -> auto& { return m.score.abif.top_k; },
        "ABIF eigenvectors kept");
  o.add(app, "--iterations", [](RunManifest& m) -> auto& { return m.score.abif.n_iters; },
        "ABIF Arnoldi iterations");
  o.add(app, "--hvp-examples",
        [](RunManifest& m) -> auto& { return m.score.abif.hvp_examples; },
        "ABIF examples in the HVP batch");
  o.add(app, "--projection-dim",
        [](RunManifest& m) -> auto& { return m.score.tracin.projection_dim; },
        "TracIn projection size; 0 disables");
  o.add(app, "--num-checkpoints",
        [](RunManifest& m) -> auto& { return m.score.tracin.num_checkpoints; },
        "TracIn checkpoints");
  o.add(app, "--score-seed", [](RunManifest& m) -> auto& { return m.seeds.score; },
        "scoring seed");
}

void add_bandit_flags(CLI::App* app, Overlay& o) {
  // The regime list holds a single autocl entry for the bandit subcommand.
  auto regime = [](RunManifest& m) -> Regime& {
    if (m.regimes.size() != 1 || m.regimes[0].kind != RegimeKind::autocl) {
      Regime r;
      r.kind = RegimeKind::autocl;
      m.regimes = {r};
    }
    return m.regimes[0];
  };
  o.add_choice(app, "--variant", "exp3s", {"exp3", "exp3s"},
               [regime](RunManifest& m, const std::string& v) {
                 regime(m).bandit.variant = bandit_variant_from_string(v);
               },
               "bandit algorithm");
  o.add_choice(app, "--reward", "cosine", {"cosine", "pgnorm"},
               [regime](RunManifest& m, const std::string& v) {
                 regime(m).reward = reward_kind_from_string(v);
               },
               "learning-progress reward");
  o.add(app, "--gamma", [regime](RunManifest& m) -> auto& { return regime(m).bandit.gamma; },
        "exploration rate");
  o.add(app, "--eta", [regime](RunManifest& m) -> auto& { return regime(m).bandit.eta; },
        "bandit learning rate");
  o.add(app, "--alpha", [regime](RunManifest& m) -> auto& { return regime(m).bandit.alpha; },
        "EXP3S weight sharing");
  o.add(app, "--K", [regime](RunManifest& m) -> auto& { return regime(m).bandit.K; },
        "number of buckets when bucketing from --scores");
}

RunManifest resolve(const Common& c) {
  RunManifest m;
  if (!c.manifest.empty()) {
    if (!fs::exists(c.manifest)) throw MissingInputError("manifest not found: " + c.manifest);
    m = RunManifest::from_json(read_text_file(c.manifest));
  }
  c.overlay.apply(m);
  return m;
}

// A directory output: refuses to reuse a completed one unless forced.
fs::path claim_dir(const Common& c, const std::string& kind, const std::string& hash) {
  const fs::path dir = c.out.empty() ? runs_root() / (kind + "-" + hash) : fs::path(c.out);
  if (fs::exists(dir / kCompleteMarker)) {
    if (!c.force) {
      throw RunExistsError("completed run at " + dir.string() + "; pass --force to redo it");
    }
    fs::remove(dir / kCompleteMarker);
  }
  fs::create_directories(dir);
  return dir;
}

void mark_complete(const fs::path& dir, const std::string& hash) {
  write_text_file(dir / kCompleteMarker, hash + "\n");
}

// A single-file output.
fs::path claim_file(const Common& c, const fs::path& fallback) {
  const fs::path path = c.out.empty() ? fallback : fs::path(c.out);
  if (fs::exists(path) && !c.force) {
    throw RunExistsError(path.string() + " exists; pass --force to overwrite it");
  }
  return path;
}

void require_file(const fs::path& p) {
  if (!fs::exists(p)) throw MissingInputError("not found: " + p.string());
}

// Points the manifest at a gen-data directory.
void use_data_dir(RunManifest& m, const std::string& dir) {
  if (dir.empty()) return;
  const fs::path d(dir);
  const fs::path meta = d / "task.json";
  require_file(meta);
  try {
    m.task.num_classes = json::parse(read_text_file(meta)).at("num_classes").get<int>();
  } catch (const json::exception& e) {
    throw ParseError("bad " + meta.string() + ": " + e.what());
  }
  for (const char* f : {"train.jsonl", "dev.jsonl", "test.jsonl"}) require_file(d / f);
  m.task.train_path = d / "train.jsonl";
  m.task.dev_path = d / "dev.jsonl";
  m.task.test_path = d / "test.jsonl";
}

std::string hash_of(const json& j) { return stable_hash(j.dump()); }

// ---------------------------------------------------------------------------

struct GenData {
  Common c;
};

int run_gen_data(GenData& g) {
  RunManifest m = resolve(g.c);
  if (m.task.train_path) throw ConfigError("gen-data generates data; drop the *_path keys");
  m.validate();
  const json task = json::parse(m.to_json())["task"];
  const std::string hash = hash_of(task);
  const fs::path dir = claim_dir(g.c, "data", hash);
  const TaskData d = make_task(m.task);
  save_jsonl(d.train, dir / "train.jsonl");
  save_jsonl(d.dev, dir / "dev.jsonl");
  save_jsonl(d.test, dir / "test.jsonl");
  json meta = task;
  meta["noisy_count"] = d.noise.flipped_ids.size();
  write_text_file(dir / "task.json", meta.dump(2) + "\n");
  mark_complete(dir, hash);
  std::cout << dir.string() << "\n";
  return kOk;
}

struct TrainCmd {
  Common c;
  std::string data;
  int checkpoints = 3;
  std::vector<std::int64_t> checkpoint_steps;
};

std::string checkpoint_name(std::int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%08lld.json", static_cast<long long>(step));
  return buf;
}

int run_train(TrainCmd& t) {
  RunManifest m = resolve(t.c);
  use_data_dir(m, t.data);
  m.validate();
  const TaskData d = make_task(m.task);
  const ModelSpec spec = m.model_spec(d);
  TrainConfig cfg = m.train_config();
  cfg.checkpoint_steps = t.checkpoint_steps.empty()
                             ? spaced_checkpoints(cfg.steps, t.checkpoints)
                             : t.checkpoint_steps;
  json desc = json::parse(m.to_json());
  desc.erase("regimes");
  desc.erase("influence");
  desc.erase("output_dir");
  desc["checkpoint_steps"] = cfg.checkpoint_steps;
  const std::string hash = hash_of(desc);
  const fs::path dir = claim_dir(t.c, "train", hash);

  const TrainResult tr = train(spec, d.train, d.dev, cfg);
  fs::remove_all(dir / "checkpoints");
  for (const auto& ck : tr.checkpoints) {
    write_checkpoint(spec, ck, dir / "checkpoints" / checkpoint_name(ck.step));
  }
  write_text_file(dir / "metrics.csv", metrics_to_csv(tr.trace));
  RegimeOutcome o{"baseline", d.train.size(), evaluate(spec, tr.params, d.test), {}};
  write_text_file(dir / "eval.json", eval_to_json(o, hash));
  desc["spec"] = json::parse(model_spec_to_json(spec));
  if (!t.data.empty()) desc["data"] = fs::absolute(t.data).lexically_normal().generic_string();
  write_text_file(dir / "run.json", desc.dump(2) + "\n");
  mark_complete(dir, hash);
  std::cout << dir.string() << "\n";
  return kOk;
}

std::vector<Checkpoint> load_checkpoints(const fs::path& run, ModelSpec& spec) {
  const fs::path dir = run / "checkpoints";
  std::vector<Checkpoint> out;
  if (fs::is_directory(dir)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.push_back(read_checkpoint(f, &spec));
  }
  if (out.empty()) throw MissingInputError("no checkpoints under " + run.string());
  std::sort(out.begin(), out.end(),
            [](const Checkpoint& a, const Checkpoint& b) { return a.step < b.step; });
  return out;
}

struct ScoreCmd {
  Common c;
  std::string run;
  std::string data;
};

int run_score(ScoreCmd& s) {
  RunManifest m = resolve(s.c);
  const ScoreConfig sc = m.score_config();
  const bool needs_model = sc.method == ScoreMethod::abif || sc.method == ScoreMethod::tracin;
  std::vector<Checkpoint> ckpts;
  ModelSpec spec;
  std::string data = s.data;
  if (needs_model) {
    if (s.run.empty()) throw MissingInputError("--run with checkpoints is required");
    ckpts = load_checkpoints(s.run, spec);
    if (data.empty() && fs::exists(fs::path(s.run) / "run.json")) {
      const json r = json::parse(read_text_file(fs::path(s.run) / "run.json"));
      if (r.contains("data")) data = r["data"].get<std::string>();
    }
  }
  use_data_dir(m, data);
  m.validate();
  const TaskData d = make_task(m.task);
  if (needs_model && spec.input_dim != d.train.feature_dim()) {
    throw ConfigError("checkpoints do not match the data's feature dimension");
  }
  const fs::path fallback =
      (s.run.empty() ? runs_root() : fs::path(s.run)) /
      ("scores_" + to_string(sc.method) + "_" + to_string(sc.mask()) + ".csv");
  const fs::path out = claim_file(s.c, fallback);
  const ScoreTable table = score_dataset(sc, spec, ckpts, d.train);
  write_scores_csv(table, out);
  std::cout << out.string() << "\n";
  return kOk;
}

struct StabilityCmd {
  Common c;
  std::string data;
  std::optional<std::size_t> batch_size;
  std::optional<std::uint64_t> order_seed;
  std::optional<std::uint64_t> init_seed;
  std::optional<double> width_factor;
  std::optional<int> depth_delta;
  int checkpoints = 3;
};

int run_stability(StabilityCmd& s) {
  RunManifest m = resolve(s.c);
  use_data_dir(m, s.data);
  m.validate();
  TaskData d = make_task(m.task);
  StabilityTask task{d.train, d.dev, d.test, m.model_spec(d), m.train_config(),
                     m.score_config()};
  task.train_config.checkpoint_steps =
      spaced_checkpoints(task.train_config.steps, s.checkpoints);
  Variation v{s.batch_size, s.order_seed, s.init_seed, s.width_factor, s.depth_delta};
  json desc = json::parse(m.to_json());
  desc.erase("regimes");
  desc.erase("output_dir");
  const fs::path out = claim_file(s.c, runs_root() / ("stability-" + hash_of(desc) + ".json"));
  const StabilityReport r = stability_experiment(task, v);
  write_text_file(out, r.to_json() + "\n");
  std::cout << out.string() << "\n";
  return kOk;
}

struct FilterCmd {
  Common c;
  std::string scores;
  double pct = 10.0;
};

int run_filter(FilterCmd& f) {
  require_file(f.scores);
  if (f.pct < 0.0 || f.pct > 100.0) throw ConfigError("--pct must lie in [0, 100]");
  const ScoreTable t = read_scores_csv(f.scores);
  const Ranking r = rank(t);
  const std::size_t drop = top_count(r.ordered_ids.size(), f.pct);
  std::vector<std::int64_t> kept(r.ordered_ids.begin() + static_cast<std::ptrdiff_t>(drop),
                                 r.ordered_ids.end());
  std::sort(kept.begin(), kept.end());
  std::vector<std::int64_t> all;
  for (const auto& e : t.entries) all.push_back(e.id);
  const fs::path fallback = fs::path(f.scores).parent_path() /
                            ("filter_" + format_double(f.pct) + ".json");
  const fs::path out = claim_file(f.c, fallback);
  write_text_file(out, filter_manifest_json(all, kept, f.pct, t.config_hash));
  std::cout << out.string() << "\n";
  return kOk;
}

struct BucketsCmd {
  Common c;
  std::string scores;
  int K = 10;
};

int run_buckets(BucketsCmd& b) {
  require_file(b.scores);
  if (b.K < 1) throw ConfigError("--K must be >= 1");
  const ScoreTable t = read_scores_csv(b.scores);
  const BucketAssignment a = quantile_buckets(rank(t), b.K, &t);
  const fs::path out = claim_file(
      b.c, fs::path(b.scores).parent_path() / ("buckets_k" + std::to_string(b.K) + ".csv"));
  write_buckets_csv(a, out);
  std::cout << out.string() << "\n";
  return kOk;
}

struct AutoclCmd {
  Common c;
  std::string data;
  std::string buckets;
  std::string scores;
};

int run_autocl(AutoclCmd& a) {
  RunManifest m = resolve(a.c);
  use_data_dir(m, a.data);
  if (m.regimes.size() != 1 || m.regimes[0].kind != RegimeKind::autocl) {
    Regime r;
    r.kind = RegimeKind::autocl;
    m.regimes = {r};
  }
  m.validate();
  Regime& g = m.regimes[0];
  BucketAssignment assignment;
  if (!a.buckets.empty()) {
    require_file(a.buckets);
    assignment = read_buckets_csv(a.buckets);
    g.bandit.K = assignment.K;
  } else if (!a.scores.empty()) {
    require_file(a.scores);
    const ScoreTable t = read_scores_csv(a.scores);
    assignment = quantile_buckets(rank(t), g.bandit.K, &t);
  } else {
    throw MissingInputError("--buckets or --scores is required");
  }
  const TaskData d = make_task(m.task);
  const ModelSpec spec = m.model_spec(d);
  TrainConfig cfg = m.train_config();
  if (cfg.steps / 4 >= 1) cfg.checkpoint_steps = {cfg.steps / 4};

  json desc = json::parse(m.to_json());
  desc.erase("influence");
  desc.erase("output_dir");
  std::string bucket_text;
  for (const auto& [id, b] : assignment.bucket_of) {
    bucket_text += std::to_string(id) + ':' + std::to_string(b) + ';';
  }
  desc["buckets"] = stable_hash(bucket_text);
  const std::string hash = hash_of(desc);
  const fs::path dir = claim_dir(a.c, "autocl", hash);

  BucketScheduledSampler sampler;
  sampler.assignment = assignment;
  sampler.bandit = g.bandit;
  sampler.reward = g.reward;
  const TrainResult tr = train(spec, d.train, d.dev, cfg, sampler);
  RegimeOutcome o{g.name(), d.train.size(), evaluate(spec, tr.params, d.test), {}};
  if (!tr.checkpoints.empty()) {
    o.test_at_quarter = evaluate(spec, tr.checkpoints.front().params, d.test);
  }
  write_buckets_csv(assignment, dir / "buckets.csv");
  write_policy_log_csv(*tr.policy_log, dir / "policy_log.csv");
  write_text_file(dir / "metrics.csv", metrics_to_csv(tr.trace));
  write_text_file(dir / "eval.json", eval_to_json(o, hash));
  write_text_file(dir / "manifest.json", m.to_json() + "\n");
  mark_complete(dir, hash);
  std::cout << dir.string() << "\n";
  return kOk;
}

struct ReportCmd {
  Common c;
  std::string run;
  std::string data;
  std::int64_t window = 100;
};

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& p) {
  std::istringstream in(read_text_file(p));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    rows.push_back(std::move(f));
  }
  return rows;
}

// The run's own layout: either an experiment directory with one
// subdirectory per regime, or a single autocl/train directory.
std::vector<std::pair<std::string, fs::path>> regime_dirs(const fs::path& run) {
  std::vector<std::pair<std::string, fs::path>> out;
  if (fs::exists(run / "eval.json")) out.push_back({run.filename().string(), run});
  std::vector<fs::path> subs;
  for (const auto& e : fs::directory_iterator(run)) {
    if (e.is_directory() && fs::exists(e.path() / "eval.json")) subs.push_back(e.path());
  }
  std::sort(subs.begin(), subs.end());
  for (const auto& s : subs) out.push_back({s.filename().string(), s});
  return out;
}

int run_report(ReportCmd& r) {
  if (r.run.empty()) throw MissingInputError("--run is required");
  const fs::path run(r.run);
  if (!fs::is_directory(run)) throw MissingInputError("not a directory: " + r.run);
  if (r.window < 1) throw ConfigError("--window must be >= 1");
  const auto regimes = regime_dirs(run);
  if (regimes.empty()) throw MissingInputError("no eval.json under " + r.run);
  const fs::path out = r.c.out.empty() ? run / "report" : fs::path(r.c.out);
  if (fs::exists(out / kCompleteMarker) && !r.c.force) {
    throw RunExistsError("report exists at " + out.string() + "; pass --force to redo it");
  }
  fs::remove(out / kCompleteMarker);

  std::string table = "regime,train_size,accuracy,macro_f1,loss,accuracy_at_quarter\n";
  for (const auto& [name, dir] : regimes) {
    const json e = json::parse(read_text_file(dir / "eval.json"));
    const json& t = e.at("test");
    table += name + ',' + std::to_string(e.at("train_size").get<std::size_t>()) + ',' +
             format_double(t.at("accuracy").get<double>()) + ',' +
             format_double(t.at("macro_f1").get<double>()) + ',' +
             format_double(t.at("loss").get<double>()) + ',';
    if (!e.at("test_at_quarter").is_null()) {
      table += format_double(e["test_at_quarter"].at("accuracy").get<double>());
    }
    table += '\n';
  }
  write_text_file(out / "eval_comparison.csv", table);

  // Mean policy over consecutive windows of steps.
  std::string policy;
  for (const auto& [name, dir] : regimes) {
    if (!fs::exists(dir / "policy_log.csv")) continue;
    const auto rows = read_csv_rows(dir / "policy_log.csv");
    const std::size_t K = rows.front().size() - 4;
    if (policy.empty()) {
      policy = "regime,step";
      for (std::size_t a = 0; a < K; ++a) policy += ",p" + std::to_string(a);
      policy += '\n';
    }
    std::vector<double> acc(K, 0.0);
    std::int64_t count = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      for (std::size_t a = 0; a < K; ++a) acc[a] += std::stod(rows[i][4 + a]);
      ++count;
      const std::int64_t step = std::stoll(rows[i][0]);
      if (step % r.window == 0 || i + 1 == rows.size()) {
        policy += name + ',' + std::to_string(step);
        for (auto& v : acc) {
          policy += ',' + format_double(v / static_cast<double>(count));
          v = 0.0;
        }
        policy += '\n';
        count = 0;
      }
    }
  }
  if (!policy.empty()) write_text_file(out / "policy_over_time.csv", policy);

  // Noise share of every bucket, when ground truth is available.
  std::optional<TaskData> data;
  if (!r.data.empty()) {
    RunManifest m;
    use_data_dir(m, r.data);
    data = make_task(m.task);
  } else if (fs::exists(run / "manifest.json")) {
    const RunManifest m = RunManifest::from_json(read_text_file(run / "manifest.json"));
    data = make_task(m.task);
  }
  if (data) {
    std::string hist = "regime,bucket,size,noisy,noisy_fraction\n";
    bool any = false;
    for (const auto& [name, dir] : regimes) {
      if (!fs::exists(dir / "buckets.csv")) continue;
      any = true;
      const BucketAssignment a = read_buckets_csv(dir / "buckets.csv");
      const std::vector<std::int64_t> noisy(data->noise.flipped_ids.begin(),
                                            data->noise.flipped_ids.end());
      const auto counts = bucket_histogram(a, noisy);
      const auto sizes = a.sizes();
      for (int b = 0; b < a.K; ++b) {
        const auto i = static_cast<std::size_t>(b);
        hist += name + ',' + std::to_string(b) + ',' + std::to_string(sizes[i]) + ',' +
                std::to_string(counts[i]) + ',' +
                format_double(sizes[i] ? static_cast<double>(counts[i]) /
                                             static_cast<double>(sizes[i])
                                       : 0.0) +
                '\n';
      }
    }
    if (any) write_text_file(out / "noise_by_bucket.csv", hist);
  }
  mark_complete(out, "report");
  std::cout << out.string() << "\n";
  return kOk;
}

struct RunCmd {
  Common c;
};

int run_run(RunCmd& r) {
  RunManifest m = resolve(r.c);
  if (!r.c.out.empty()) {
    m.output_dir = r.c.out;
  } else if (m.output_dir.empty()) {
    m.output_dir = runs_root() / ("experiment-" + m.config_hash());
  } else if (m.output_dir.is_relative() && std::getenv("INFLUXCL_RUNS_DIR")) {
    m.output_dir = runs_root() / m.output_dir;
  }
  m.validate();
  if (fs::exists(m.output_dir / kCompleteMarker)) {
    if (!r.c.force) {
      throw RunExistsError("completed run at " + m.output_dir.string() +
                           "; pass --force to redo it");
    }
    fs::remove(m.output_dir / kCompleteMarker);
  }
  run_experiment(m);
  std::cout << m.output_dir.string() << "\n";
  return kOk;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    if (ch == '\n') {
      out += "\\n";
      continue;
    }
    out += ch;
  }
  return out + "\"";
}

int fail(int code, const std::string& name, const std::string& msg) {
  std::cerr << "error: code=" << name << " exit=" << code << " msg=" << quote(msg) << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"influxcl: influence scoring and bandit curricula for small classifiers"};
  app.require_subcommand(1);

  GenData gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic task with label noise");
  add_common(gen_cmd, gen.c, "output directory");
  add_task_flags(gen_cmd, gen.c.overlay);

  TrainCmd tr;
  auto* train_cmd = app.add_subcommand("train", "train a model and save checkpoints");
  add_common(train_cmd, tr.c, "output run directory");
  train_cmd->add_option("--data", tr.data, "gen-data directory");
  add_task_flags(train_cmd, tr.c.overlay);
  add_model_flags(train_cmd, tr.c.overlay);
  add_train_flags(train_cmd, tr.c.overlay);
  train_cmd->add_option("--checkpoints", tr.checkpoints, "evenly spaced checkpoints")
      ->capture_default_str();
  train_cmd->add_option("--checkpoint-steps", tr.checkpoint_steps, "explicit checkpoint steps")
      ->delimiter(',');

  ScoreCmd sc;
  auto* score_cmd = app.add_subcommand("score", "score training examples");
  add_common(score_cmd, sc.c, "score CSV path");
  score_cmd->add_option("--run", sc.run, "train run directory holding checkpoints");
  score_cmd->add_option("--data", sc.data, "gen-data directory");
  add_task_flags(score_cmd, sc.c.overlay);
  add_score_flags(score_cmd, sc.c.overlay);

  StabilityCmd st;
  auto* stab_cmd = app.add_subcommand("stability", "compare scores across two training runs");
  add_common(stab_cmd, st.c, "report JSON path");
  stab_cmd->add_option("--data", st.data, "gen-data directory");
  add_task_flags(stab_cmd, st.c.overlay);
  add_model_flags(stab_cmd, st.c.overlay);
  add_train_flags(stab_cmd, st.c.overlay);
  add_score_flags(stab_cmd, st.c.overlay);
  stab_cmd->add_option("--checkpoints", st.checkpoints, "checkpoints per run")
      ->capture_default_str();
  stab_cmd->add_option("--vary-batch-size", st.batch_size, "batch size of the second run");
  stab_cmd->add_option("--vary-order-seed", st.order_seed, "order seed of the second run");
  stab_cmd->add_option("--vary-init-seed", st.init_seed, "init seed of the second run");
  stab_cmd->add_option("--vary-width-factor", st.width_factor,
                       "hidden width multiplier of the second run");
  stab_cmd->add_option("--vary-depth-delta", st.depth_delta,
                       "hidden layers added to the second run");

  FilterCmd fl;
  auto* filter_cmd = app.add_subcommand("filter", "drop the top-scored percentile");
  add_common(filter_cmd, fl.c, "filter manifest path");
  filter_cmd->add_option("--scores", fl.scores, "score CSV")->required();
  filter_cmd->add_option("--pct", fl.pct, "percent of examples to drop")->capture_default_str();

  BucketsCmd bk;
  auto* buckets_cmd = app.add_subcommand("buckets", "split scores into quantile buckets");
  add_common(buckets_cmd, bk.c, "bucket CSV path");
  buckets_cmd->add_option("--scores", bk.scores, "score CSV")->required();
  buckets_cmd->add_option("--K", bk.K, "number of buckets")->capture_default_str();

  AutoclCmd ac;
  auto* autocl_cmd = app.add_subcommand("autocl", "train with a bandit-scheduled curriculum");
  add_common(autocl_cmd, ac.c, "output run directory");
  autocl_cmd->add_option("--data", ac.data, "gen-data directory");
  autocl_cmd->add_option("--buckets", ac.buckets, "bucket CSV");
  autocl_cmd->add_option("--scores", ac.scores, "score CSV, bucketed with --K");
  add_task_flags(autocl_cmd, ac.c.overlay);
  add_model_flags(autocl_cmd, ac.c.overlay);
  add_train_flags(autocl_cmd, ac.c.overlay);
  add_bandit_flags(autocl_cmd, ac.c.overlay);

  ReportCmd rp;
  auto* report_cmd = app.add_subcommand("report", "write plot-ready CSVs for a run");
  add_common(report_cmd, rp.c, "report directory");
  report_cmd->add_option("--run", rp.run, "run directory");
  report_cmd->add_option("--data", rp.data, "gen-data directory with noise labels");
  report_cmd->add_option("--window", rp.window, "steps per policy average")
      ->capture_default_str();

  RunCmd rn;
  auto* run_cmd = app.add_subcommand("run", "run a full manifest end to end");
  add_common(run_cmd, rn.c, "output run directory");
  add_task_flags(run_cmd, rn.c.overlay);
  add_model_flags(run_cmd, rn.c.overlay);
  add_train_flags(run_cmd, rn.c.overlay);
  add_score_flags(run_cmd, rn.c.overlay);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail(kUsage, "usage", e.what());
  }

  try {
    if (*gen_cmd) return run_gen_data(gen);
    if (*train_cmd) return run_train(tr);
    if (*score_cmd) return run_score(sc);
    if (*stab_cmd) return run_stability(st);
    if (*filter_cmd) return run_filter(fl);
    if (*buckets_cmd) return run_buckets(bk);
    if (*autocl_cmd) return run_autocl(ac);
    if (*report_cmd) return run_report(rp);
    if (*run_cmd) return run_run(rn);
  } catch (const ConfigError& e) {
    return fail(kInvalidConfig, "invalid_config", e.what());
  } catch (const ArgumentError& e) {
    return fail(kInvalidConfig, "invalid_config", e.what());
  } catch (const MissingInputError& e) {
    return fail(kMissingInput, "missing_input", e.what());
  } catch (const ParseError& e) {
    return fail(kParse, "parse_error", e.what());
  } catch (const RunExistsError& e) {
    return fail(kRunExists, "run_exists", e.what());
  } catch (const DivergenceError& e) {
    return fail(kDiverged, "diverged", e.what());
  } catch (const std::exception& e) {
    return fail(kFailure, "failure", e.what());
  }
  return kFailure;
}
