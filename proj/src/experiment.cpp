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

#include "influxcl/experiment.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"

#include "influxcl/errors.hpp"
#include "influxcl/io.hpp"
#include "influxcl/ranking.hpp"

namespace influxcl {

using nlohmann::json;

TaskData make_task(const TaskConfig& cfg) {
  TaskData d;
  if (cfg.train_path || cfg.dev_path || cfg.test_path) {
    if (!(cfg.train_path && cfg.dev_path && cfg.test_path)) {
      throw ConfigError("train_path, dev_path and test_path must be given together");
    }
    d.train = load_jsonl(*cfg.train_path, cfg.num_classes, Split::train);
    d.dev = load_jsonl(*cfg.dev_path, cfg.num_classes, Split::dev);
    d.test = load_jsonl(*cfg.test_path, cfg.num_classes, Split::test);
    d.noise = noise_report_from(d.train);
    return d;
  }
  // Each split draws from its own seed so that resizing one leaves the
  // others untouched.
  const std::uint64_t base = mix_seed(cfg.seed, stream::kData);
  auto gen = [&](std::size_t n, std::uint64_t s, Split split) {
    if (cfg.kind == "clusters") {
      return gen_gaussian_clusters(n, cfg.num_classes, cfg.dim, cfg.separation, s, split);
    }
    if (cfg.kind == "bow") return gen_bow_text(n, cfg.vocab_size, cfg.num_classes, s, split);
    throw ConfigError("unknown task kind '" + cfg.kind + "'");
  };
  Dataset clean = gen(cfg.n_train, mix_seed(base, 1), Split::train);
  d.dev = gen(cfg.n_dev, mix_seed(base, 2), Split::dev);
  d.test = gen(cfg.n_test, mix_seed(base, 3), Split::test);
  if (cfg.noise > 0.0) {
    auto [noisy, report] = inject_label_noise(clean, cfg.noise, mix_seed(base, 4));
    d.train = std::move(noisy);
    d.noise = std::move(report);
  } else {
    for (auto& e : clean.examples) e.noisy = false;
    d.train = std::move(clean);
  }
  return d;
}

std::string to_string(RegimeKind k) {
  switch (k) {
    case RegimeKind::baseline: return "baseline";
    case RegimeKind::filter: return "filter";
    case RegimeKind::autocl: return "autocl";
  }
  return "baseline";
}

RegimeKind regime_kind_from_string(const std::string& s) {
  if (s == "baseline") return RegimeKind::baseline;
  if (s == "filter") return RegimeKind::filter;
  if (s == "autocl") return RegimeKind::autocl;
  throw ConfigError("unknown regime '" + s + "'");
}

std::string Regime::name() const {
  switch (kind) {
    case RegimeKind::baseline: return "baseline";
    case RegimeKind::filter: {
      std::string p = format_double(pct);
      if (p.ends_with(".0")) p.resize(p.size() - 2);
      for (auto& c : p) {
        if (c == '.') c = 'p';
      }
      return "filter_" + p;
    }
    case RegimeKind::autocl:
      return "autocl_k" + std::to_string(bandit.K) + "_" + to_string(bandit.variant) +
             "_" + to_string(reward);
  }
  return "baseline";
}

namespace {

template <typename T>
struct is_optional : std::false_type {};
template <typename T>
struct is_optional<std::optional<T>> : std::true_type {};

// Reads keys out of one JSON object and rejects any it was not asked about.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (is_optional<T>::value) {
        if (!it->is_null()) out = it->get<typename T::value_type>();
      } else {
        out = it->get<T>();
      }
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + " has the wrong type");
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ConfigError("unknown key " + where_ + "." + it.key());
      }
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <typename Enum, typename Parse>
void get_enum(ObjectReader& r, const char* key, Enum& out, Parse parse) {
  std::optional<std::string> s;
  r.get(key, s);
  if (!s) return;
  try {
    out = parse(*s);
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
}

void get_path(ObjectReader& r, const char* key,
              std::optional<std::filesystem::path>& out) {
  std::optional<std::string> s;
  r.get(key, s);
  if (s) out = *s;
}

json path_json(const std::optional<std::filesystem::path>& p) {
  return p ? json(p->generic_string()) : json(nullptr);
}

}  // namespace

RunManifest RunManifest::from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  RunManifest m;
  ObjectReader r(root, "manifest");

  if (const json* t = r.sub("task")) {
    ObjectReader tr(*t, "task");
    tr.get("kind", m.task.kind);
    tr.get("n_train", m.task.n_train);
    tr.get("n_dev", m.task.n_dev);
    tr.get("n_test", m.task.n_test);
    tr.get("num_classes", m.task.num_classes);
    tr.get("dim", m.task.dim);
    tr.get("separation", m.task.separation);
    tr.get("vocab_size", m.task.vocab_size);
    tr.get("noise", m.task.noise);
    tr.get("seed", m.task.seed);
    get_path(tr, "train_path", m.task.train_path);
    get_path(tr, "dev_path", m.task.dev_path);
    get_path(tr, "test_path", m.task.test_path);
    tr.finish();
  }
  if (const json* t = r.sub("model")) {
    ObjectReader mr(*t, "model");
    mr.get("hidden_widths", m.hidden_widths);
    get_enum(mr, "activation", m.activation, activation_from_string);
    mr.finish();
  }
  if (const json* t = r.sub("train")) {
    ObjectReader tr(*t, "train");
    tr.get("steps", m.train.steps);
    tr.get("batch_size", m.train.batch_size);
    tr.get("learning_rate", m.train.learning_rate);
    get_enum(tr, "optimizer", m.train.optimizer, optimizer_from_string);
    tr.get("momentum", m.train.momentum);
    tr.get("eval_every", m.train.eval_every);
    tr.finish();
  }
  if (const json* t = r.sub("influence")) {
    ObjectReader ir(*t, "influence");
    get_enum(ir, "method", m.score.method, score_method_from_string);
    LayerSelector mask = m.score.abif.mask;
    get_enum(ir, "mask", mask, selector_from_string);
    m.score.abif.mask = m.score.tracin.mask = mask;
    ir.get("eigenvectors", m.score.abif.top_k);
    ir.get("iterations", m.score.abif.n_iters);
    ir.get("hvp_examples", m.score.abif.hvp_examples);
    ir.get("projection_dim", m.score.tracin.projection_dim);
    ir.get("num_checkpoints", m.score.tracin.num_checkpoints);
    ir.finish();
  }
  if (const json* t = r.sub("regimes")) {
    if (!t->is_array()) throw ConfigError("regimes must be an array");
    m.regimes.clear();
    for (const auto& item : *t) {
      ObjectReader rr(item, "regimes[]");
      Regime g;
      std::string kind = "baseline";
      rr.get("kind", kind);
      g.kind = regime_kind_from_string(kind);
      rr.get("pct", g.pct);
      rr.get("K", g.bandit.K);
      get_enum(rr, "variant", g.bandit.variant, bandit_variant_from_string);
      get_enum(rr, "reward", g.reward, reward_kind_from_string);
      rr.get("gamma", g.bandit.gamma);
      rr.get("eta", g.bandit.eta);
      rr.get("alpha", g.bandit.alpha);
      rr.finish();
      m.regimes.push_back(g);
    }
  }
  if (const json* t = r.sub("seeds")) {
    ObjectReader sr(*t, "seeds");
    sr.get("init", m.seeds.init);
    sr.get("order", m.seeds.order);
    sr.get("score", m.seeds.score);
    sr.finish();
  }
  std::optional<std::string> out;
  r.get("output_dir", out);
  if (out) m.output_dir = *out;
  r.finish();
  return m;
}

std::string RunManifest::to_json() const {
  json j;
  j["task"] = {{"kind", task.kind},
               {"n_train", task.n_train},
               {"n_dev", task.n_dev},
               {"n_test", task.n_test},
               {"num_classes", task.num_classes},
               {"dim", task.dim},
               {"separation", task.separation},
               {"vocab_size", task.vocab_size},
               {"noise", task.noise},
               {"seed", task.seed},
               {"train_path", path_json(task.train_path)},
               {"dev_path", path_json(task.dev_path)},
               {"test_path", path_json(task.test_path)}};
  j["model"] = {{"hidden_widths", hidden_widths}, {"activation", to_string(activation)}};
  j["train"] = {{"steps", train.steps},
                {"batch_size", train.batch_size},
                {"learning_rate", train.learning_rate},
                {"optimizer", to_string(train.optimizer)},
                {"momentum", train.momentum},
                {"eval_every", train.eval_every}};
  j["influence"] = {{"method", to_string(score.method)},
                    {"mask", to_string(score.mask())},
                    {"eigenvectors", score.abif.top_k},
                    {"iterations", score.abif.n_iters},
                    {"hvp_examples", score.abif.hvp_examples},
                    {"projection_dim", score.tracin.projection_dim},
                    {"num_checkpoints", score.tracin.num_checkpoints}};
  json regs = json::array();
  for (const auto& g : regimes) {
    json e = {{"kind", to_string(g.kind)}};
    if (g.kind == RegimeKind::filter) e["pct"] = g.pct;
    if (g.kind == RegimeKind::autocl) {
      e["K"] = g.bandit.K;
      e["variant"] = to_string(g.bandit.variant);
      e["reward"] = to_string(g.reward);
      e["gamma"] = g.bandit.gamma;
      e["eta"] = g.bandit.eta;
      e["alpha"] = g.bandit.alpha;
    }
    regs.push_back(e);
  }
  j["regimes"] = regs;
  j["seeds"] = {{"init", seeds.init}, {"order", seeds.order}, {"score", seeds.score}};
  j["output_dir"] = output_dir.generic_string();
  return j.dump(2);
}

std::string RunManifest::config_hash() const {
  // The output location does not change what is computed.
  json j = json::parse(to_json());
  j.erase("output_dir");
  return stable_hash(j.dump());
}

void RunManifest::validate() const {
  for (const auto* p : {&task.train_path, &task.dev_path, &task.test_path}) {
    if (*p && !std::filesystem::exists(**p)) {
      throw MissingInputError("data file not found: " + (*p)->string());
    }
  }
  if (!task.train_path) {
    if (task.kind != "clusters" && task.kind != "bow") {
      throw ConfigError("unknown task kind '" + task.kind + "'");
    }
    if (task.n_train == 0 || task.n_dev == 0 || task.n_test == 0) {
      throw ConfigError("task split sizes must be positive");
    }
    if (task.num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (task.noise < 0.0 || task.noise >= 1.0) throw ConfigError("noise must lie in [0, 1)");
    if (task.kind == "clusters" && task.num_classes > 2 && task.dim < task.num_classes) {
      throw ConfigError("clusters with more than two classes need dim >= num_classes");
    }
  }
  if (hidden_widths.empty()) throw ConfigError("model needs at least one hidden layer");
  for (auto w : hidden_widths) {
    if (w < 1) throw ConfigError("hidden widths must be positive");
  }
  if (train.steps < 0 || train.batch_size < 1 || !(train.learning_rate > 0.0)) {
    throw ConfigError("invalid train settings");
  }
  if (regimes.empty()) throw ConfigError("at least one regime is required");
  std::set<std::string> names;
  for (const auto& g : regimes) {
    if (!names.insert(g.name()).second) throw ConfigError("duplicate regime " + g.name());
    if (g.kind == RegimeKind::filter && (g.pct < 0.0 || g.pct >= 100.0)) {
      throw ConfigError("filter pct must lie in [0, 100)");
    }
    if (g.kind == RegimeKind::autocl) {
      if (g.bandit.K < 1) throw ConfigError("autocl K must be >= 1");
      if (g.bandit.gamma <= 0.0 || g.bandit.gamma > 1.0) {
        throw ConfigError("gamma must lie in (0, 1]");
      }
      if (!(g.bandit.eta > 0.0)) throw ConfigError("eta must be > 0");
    }
  }
  if (score.method == ScoreMethod::abif && (score.abif.top_k < 1 || score.abif.n_iters < 1)) {
    throw ConfigError("eigenvectors and iterations must be >= 1");
  }
  if (score.method == ScoreMethod::tracin && score.tracin.num_checkpoints < 1) {
    throw ConfigError("num_checkpoints must be >= 1");
  }
}

ModelSpec RunManifest::model_spec(const TaskData& data) const {
  ModelSpec s;
  s.input_dim = data.train.feature_dim();
  s.hidden_widths = hidden_widths;
  s.num_classes = data.train.num_classes;
  s.activation = activation;
  return s;
}

TrainConfig RunManifest::train_config() const {
  TrainConfig c = train;
  c.init_seed = seeds.init;
  c.order_seed = seeds.order;
  c.checkpoint_steps.clear();
  return c;
}

ScoreConfig RunManifest::score_config() const {
  ScoreConfig c = score;
  c.abif.seed = seeds.score;
  c.tracin.seed = seeds.score;
  return c;
}

bool RunManifest::needs_scores() const {
  for (const auto& g : regimes) {
    if (g.kind != RegimeKind::baseline) return true;
  }
  return false;
}

namespace {

json eval_json(const EvalResult& e) {
  return {{"accuracy", e.accuracy},
          {"macro_f1", e.macro_f1},
          {"f1_per_class", e.f1_per_class},
          {"loss", e.loss}};
}

}  // namespace

std::string eval_to_json(const RegimeOutcome& r, const std::string& config_hash) {
  json j;
  j["regime"] = r.name;
  j["train_size"] = r.train_size;
  j["test"] = eval_json(r.test);
  j["test_at_quarter"] = r.test_at_quarter ? eval_json(*r.test_at_quarter) : json(nullptr);
  j["config_hash"] = config_hash;
  return j.dump(2) + "\n";
}

std::string metrics_to_csv(const std::vector<MetricRow>& trace) {
  std::string out = "step,train_loss,dev_loss,dev_acc\n";
  for (const auto& r : trace) {
    out += std::to_string(r.step) + ',' + format_double(r.train_loss) + ',' +
           format_double(r.dev_loss) + ',' + format_double(r.dev_accuracy) + '\n';
  }
  return out;
}

std::string filter_manifest_json(const std::vector<std::int64_t>& all_ids,
                                 const std::vector<std::int64_t>& kept_ids,
                                 double pct, const std::string& config_hash) {
  const std::set<std::int64_t> keep(kept_ids.begin(), kept_ids.end());
  std::vector<std::int64_t> dropped;
  for (auto id : all_ids) {
    if (!keep.count(id)) dropped.push_back(id);
  }
  json j;
  j["kept_ids"] = kept_ids;
  j["dropped_ids"] = dropped;
  j["pct"] = pct;
  j["config_hash"] = config_hash;
  return j.dump() + "\n";
}

ExperimentReport run_pipeline(const RunManifest& m, const TaskData& data,
                              const std::filesystem::path* out_dir) {
  m.validate();
  ExperimentReport report;
  report.config_hash = m.config_hash();
  const ModelSpec spec = m.model_spec(data);
  const TrainConfig base_cfg = m.train_config();

  if (out_dir) write_text_file(*out_dir / "manifest.json", m.to_json() + "\n");

  if (m.needs_scores()) {
    const ScoreConfig sc = m.score_config();
    std::vector<Checkpoint> ckpts;
    if (sc.method == ScoreMethod::abif || sc.method == ScoreMethod::tracin) {
      TrainConfig scorer_cfg = base_cfg;
      const int count =
          sc.method == ScoreMethod::tracin ? sc.tracin.num_checkpoints : 1;
      scorer_cfg.checkpoint_steps = spaced_checkpoints(scorer_cfg.steps, count);
      TrainResult tr = train(spec, data.train, data.dev, scorer_cfg);
      ckpts = std::move(tr.checkpoints);
      if (ckpts.empty()) ckpts.push_back({0, tr.params, 0.0, 0.0, 0.0});
    }
    report.scores = score_dataset(sc, spec, ckpts, data.train);
    if (out_dir) write_scores_csv(*report.scores, *out_dir / "scores.csv");
  }

  for (const Regime& g : m.regimes) {
    RegimeOutcome outcome;
    outcome.name = g.name();
    TrainConfig cfg = base_cfg;
    const std::int64_t quarter = cfg.steps / 4;
    if (quarter >= 1) cfg.checkpoint_steps = {quarter};

    const std::filesystem::path dir = out_dir ? *out_dir / outcome.name : "";
    Dataset train_set = data.train;
    Sampler sampler = UniformSampler{};
    if (g.kind == RegimeKind::filter) {
      train_set = percentile_filter(data.train, rank(*report.scores), g.pct);
      if (out_dir) {
        write_text_file(dir / "filter_manifest.json",
                        filter_manifest_json(data.train.ids(), train_set.ids(), g.pct,
                                             report.scores->config_hash));
      }
    } else if (g.kind == RegimeKind::autocl) {
      BucketScheduledSampler s;
      s.assignment = quantile_buckets(rank(*report.scores), g.bandit.K, &*report.scores);
      s.bandit = g.bandit;
      s.reward = g.reward;
      if (out_dir) write_buckets_csv(s.assignment, dir / "buckets.csv");
      sampler = std::move(s);
    }
    outcome.train_size = train_set.size();
    const TrainResult tr = train(spec, train_set, data.dev, cfg, sampler);
    outcome.test = evaluate(spec, tr.params, data.test);
    if (!tr.checkpoints.empty()) {
      outcome.test_at_quarter = evaluate(spec, tr.checkpoints.front().params, data.test);
    }
    if (out_dir) {
      write_text_file(dir / "metrics.csv", metrics_to_csv(tr.trace));
      if (tr.policy_log) write_policy_log_csv(*tr.policy_log, dir / "policy_log.csv");
      write_text_file(dir / "eval.json", eval_to_json(outcome, report.config_hash));
    }
    report.regimes.push_back(std::move(outcome));
  }
  return report;
}

ExperimentReport run_experiment(const RunManifest& m) {
  m.validate();
  if (m.output_dir.empty()) throw ConfigError("output_dir is required");
  const TaskData data = make_task(m.task);
  ExperimentReport report = run_pipeline(m, data, &m.output_dir);
  write_text_file(m.output_dir / kCompleteMarker, report.config_hash + "\n");
  return report;
}

}  // namespace influxcl
