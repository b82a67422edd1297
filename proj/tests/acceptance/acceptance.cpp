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

// Acceptance suite: one PASS/FAIL line per criterion. Criteria listed in
// kExpectedFailures are known not to hold at desk scale; they still print
// FAIL, and the process only exits nonzero when an outcome differs from the
// expectation.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles.hpp"

#include "influxcl/autocl.hpp"
#include "influxcl/experiment.hpp"
#include "influxcl/influence.hpp"
#include "influxcl/ranking.hpp"
#include "influxcl/stability.hpp"
#include "influxcl/tasks.hpp"
#include "influxcl/trainer.hpp"

using namespace influxcl;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const std::set<int> kExpectedFailures = {6};

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

Batch random_batch(Eigen::Index n, Eigen::Index dim, int classes, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> label(0, classes - 1);
  Batch b;
  b.features.resize(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    b.example_ids.push_back(i);
    b.labels.push_back(label(rng));
    for (Eigen::Index j = 0; j < dim; ++j) b.features(i, j) = normal(rng);
  }
  return b;
}

ParamVector perturbed_params(const ModelSpec& spec, std::uint64_t seed) {
  ParamVector p = init_params(spec, seed);
  Rng rng = make_rng(seed, 1);
  std::normal_distribution<double> normal(0.0, 0.3);
  for (Eigen::Index i = 0; i < p.values.size(); ++i) p.values(i) += normal(rng);
  return p;
}

// 1 ------------------------------------------------------------------------

Verdict differentiation() {
  const std::vector<ModelSpec> specs = {
      {2, {3}, 2, Activation::tanh},     {3, {4, 3}, 3, Activation::tanh},
      {4, {5}, 4, Activation::relu},     {2, {6, 4, 3}, 2, Activation::tanh},
      {5, {3, 3}, 3, Activation::relu},  {3, {8}, 5, Activation::tanh}};
  double worst_g = 0.0, worst_h = 0.0;
  std::uint64_t seed = 0;
  for (const auto& spec : specs) {
    const ParamVector p = perturbed_params(spec, 100 + seed);
    const Batch b = random_batch(7, spec.input_dim, static_cast<int>(spec.num_classes), 200 + seed);
    const LayerMask all = LayerMask::resolve(LayerSelector::all, p.layout);
    const VectorXd g = grad(spec, p, b, all);
    const VectorXd fd = oracle::fd_gradient(
        [&](const VectorXd& t) { return oracle::mean_loss(spec, t, b); }, p.values, 1e-4);
    worst_g = std::max(worst_g, oracle::rel_err(g, fd));

    Rng rng = make_rng(300 + seed);
    std::normal_distribution<double> normal;
    VectorXd v(p.values.size());
    for (auto& x : v) x = normal(rng);
    const VectorXd hv = hvp(spec, p, b, v, all);
    ParamVector plus = p, minus = p;
    plus.values += 1e-4 * v;
    minus.values -= 1e-4 * v;
    const VectorXd fdh = (grad(spec, plus, b, all) - grad(spec, minus, b, all)) / 2e-4;
    worst_h = std::max(worst_h, oracle::rel_err(hv, fdh));
    ++seed;
  }
  return {worst_g < 1e-4 && worst_h < 1e-3,
          fmt("%zu triples, gradient rel err %.2e, HVP rel err %.2e", specs.size(), worst_g, worst_h)};
}

// 2 ------------------------------------------------------------------------

Verdict abif_exactness() {
  // The output layer of a fixed feature map is a linear-softmax model.
  const ModelSpec spec{3, {9}, 4, Activation::tanh};
  const ParamVector p = perturbed_params(spec, 7);
  Dataset ds;
  const Batch b = random_batch(200, 3, 4, 8);
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    Example e;
    e.id = i;
    e.features = b.features.row(i).transpose();
    e.label = b.labels[static_cast<std::size_t>(i)];
    ds.examples.push_back(e);
  }
  const MatrixXd H = oracle::output_layer_hessian(spec, p.values, b);
  const Eigen::Index dim = H.rows();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(H);
  const VectorXd& l = es.eigenvalues();
  const double tol = 1e-10 * l.cwiseAbs().maxCoeff();
  MatrixXd pinv = MatrixXd::Zero(dim, dim);
  std::vector<double> exact;
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (l(i) > tol) {
      pinv += es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose() / l(i);
      exact.push_back(l(i));
    }
  }
  std::sort(exact.begin(), exact.end(), std::greater<>());

  AbifConfig cfg;
  cfg.mask = LayerSelector::last;
  cfg.n_iters = static_cast<int>(dim);
  cfg.top_k = static_cast<int>(dim);
  cfg.hvp_examples = ds.size();
  const ProjectionOperator proj = fit_abif(spec, p, ds, cfg);
  double eig_err = proj.rank() == static_cast<Eigen::Index>(exact.size()) ? 0.0 : 1.0;
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(proj.rank(), exact.size()); ++i) {
    eig_err = std::max(eig_err, std::abs(proj.eigenvalues(i) - exact[static_cast<std::size_t>(i)]) /
                                    exact[static_cast<std::size_t>(i)]);
  }
  const ScoreTable t = score_abif(spec, p, ds, proj);
  double score_err = 0.0;
  for (const auto& e : ds.examples) {
    const VectorXd g = oracle::output_layer_grad(spec, p.values, e.features, e.label);
    const double want = g.dot(pinv * g);
    score_err = std::max(score_err, std::abs(t.at(e.id) - want) / want);
  }
  return {eig_err < 1e-5 && score_err < 1e-5,
          fmt("dim %lld, %zu nonzero eigenvalues, eigenvalue rel err %.2e, score rel err %.2e",
              static_cast<long long>(dim), exact.size(), eig_err, score_err)};
}

// 3 ------------------------------------------------------------------------

Verdict tracin_degenerate() {
  const ModelSpec spec{4, {6, 5}, 3, Activation::tanh};
  const ParamVector p = perturbed_params(spec, 11);
  const Dataset ds = gen_gaussian_clusters(100, 3, 4, 2.0, 12);
  TracinConfig cfg;
  cfg.projection_dim = 0;
  cfg.num_checkpoints = 1;
  double worst = 0.0;
  const std::vector<ParamVector> ck{p};
  for (auto sel : {LayerSelector::all, LayerSelector::last, LayerSelector::first}) {
    cfg.mask = sel;
    const ScoreTable t = score_tracin(spec, ck, ds, cfg);
    const LayerMask m = LayerMask::resolve(sel, p.layout);
    for (const auto& e : ds.examples) {
      const double want = sel == LayerSelector::last
                              ? oracle::output_layer_grad(spec, p.values, e.features, e.label).squaredNorm()
                              : grad(spec, p, to_batch(ds.select({e.id})), m).squaredNorm();
      worst = std::max(worst, std::abs(t.at(e.id) - want) / want);
    }
  }
  return {worst <= 1e-12, fmt("max rel err %.2e over 3 masks", worst)};
}

// 4 ------------------------------------------------------------------------

Verdict noise_recall() {
  std::vector<double> r10, r20, r30;
  bool monotone = true;
  for (std::uint64_t s = 0; s < 3; ++s) {
    auto [tr, noise] = inject_label_noise(gen_gaussian_clusters(2000, 2, 2, 6.0, 100 + s), 0.1, 200 + s);
    const ModelSpec spec{2, {32}, 2, Activation::tanh};
    TrainConfig c;
    c.steps = 2000;
    c.init_seed = s;
    c.order_seed = s;
    const TrainResult r = train(spec, tr, tr, c);
    ScoreConfig sc;
    const std::vector<Checkpoint> ck{{c.steps, r.params, 0, 0, 0}};
    const ScoreTable t = score_dataset(sc, spec, ck, tr);
    r10.push_back(recall_at_top(t, noise, 10));
    r20.push_back(recall_at_top(t, noise, 20));
    r30.push_back(recall_at_top(t, noise, 30));
    monotone = monotone && r10.back() <= r20.back() && r20.back() <= r30.back();
  }
  return {mean(r30) >= 0.8 && mean(r30) >= mean(r10) && monotone,
          fmt("mean recall@10/20/30 = %.3f/%.3f/%.3f, per-seed monotone %s", mean(r10), mean(r20),
              mean(r30), monotone ? "yes" : "no")};
}

// 5, 6 ---------------------------------------------------------------------

// Four overlapping classes so that runs disagree on some test points.
StabilityTask stability_task(std::uint64_t s) {
  StabilityTask t;
  t.train = inject_label_noise(gen_gaussian_clusters(2000, 4, 4, 3.0, 100 + s), 0.1, 200 + s).first;
  t.dev = gen_gaussian_clusters(500, 4, 4, 3.0, 400 + s, Split::dev);
  t.test = gen_gaussian_clusters(1000, 4, 4, 3.0, 300 + s, Split::test);
  t.spec = {4, {32}, 4, Activation::tanh};
  t.train_config.steps = 2000;
  t.train_config.init_seed = s;
  t.train_config.order_seed = s;
  return t;
}

Verdict stability() {
  std::ostringstream d;
  bool ok = true;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const StabilityTask t = stability_task(s);
    Variation v;
    v.batch_size = 64;
    v.order_seed = s + 50;
    v.init_seed = s + 50;
    const StabilityReport varied = stability_experiment(t, v);
    const StabilityReport same = stability_experiment(t, Variation{});
    ok = ok && varied.spearman >= 0.7 && same.spearman == 1.0 && same.churn == 0.0;
    d << fmt("%sseed %llu: spearman %.3f (identical %.3f, churn %.1f)", s ? "; " : "",
             static_cast<unsigned long long>(s), varied.spearman, same.spearman, same.churn);
  }
  return {ok, d.str()};
}

Verdict capacity() {
  std::vector<double> seed_churn, seed_sp, wide_churn, wide_sp;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const StabilityTask t = stability_task(s);
    Variation seed;
    seed.init_seed = s + 50;
    seed.order_seed = s + 50;
    Variation wide;
    wide.width_factor = 2.0;
    const StabilityReport a = stability_experiment(t, seed);
    const StabilityReport b = stability_experiment(t, wide);
    seed_churn.push_back(a.churn);
    seed_sp.push_back(a.spearman);
    wide_churn.push_back(b.churn);
    wide_sp.push_back(b.spearman);
  }
  return {mean(wide_churn) > mean(seed_churn) && mean(wide_sp) < mean(seed_sp),
          fmt("churn seed-only %.2f vs width-doubled %.2f, spearman %.3f vs %.3f",
              mean(seed_churn), mean(wide_churn), mean(seed_sp), mean(wide_sp))};
}

// 7 ------------------------------------------------------------------------

Verdict churn_example() {
  std::vector<int> gold(100, 1), a(100, 1), b(100, 1);
  for (int i = 0; i < 9; ++i) b[static_cast<std::size_t>(i)] = 0;
  for (int i = 9; i < 19; ++i) a[static_cast<std::size_t>(i)] = 0;
  const double c = churn(a, b, gold);
  return {c == 19.0, fmt("churn %.17g%%", c)};
}

// 8 ------------------------------------------------------------------------

Verdict bandit() {
  int found = 0;
  bool floor_ok = true;
  for (std::uint64_t s = 0; s < 10; ++s) {
    BanditConfig c;
    c.K = 10;
    c.gamma = 0.01;
    c.eta = 0.001;
    c.variant = BanditVariant::exp3;
    BanditState st = BanditState::create(c);
    Rng rng = make_rng(s, stream::kBandit);
    Rng env = make_rng(s, stream::kData);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int best = static_cast<int>(s % 10);
    for (int t = 0; t < 20000; ++t) {
      const auto p = policy(st);
      floor_ok = floor_ok && *std::min_element(p.begin(), p.end()) >= c.gamma / c.K - 1e-15;
      const int a = sample_arm(st, rng);
      const double r = u(env) < (a == best ? 0.7 : 0.5) ? 1.0 : 0.0;
      st = update(st, a, r);
    }
    const auto p = policy(st);
    found += std::max_element(p.begin(), p.end()) - p.begin() == best;
  }

  // Same rewards and sampler stream for both variants.
  bool identical = true;
  BanditConfig c3;
  c3.K = 10;
  c3.variant = BanditVariant::exp3;
  BanditConfig c3s = c3;
  c3s.variant = BanditVariant::exp3s;
  c3s.alpha = 0.0;
  BanditState a = BanditState::create(c3), b = BanditState::create(c3s);
  Rng ra = make_rng(1), rb = make_rng(1), env = make_rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 20000 && identical; ++t) {
    const int xa = sample_arm(a, ra), xb = sample_arm(b, rb);
    const double r = u(env);
    identical = xa == xb && policy(a) == policy(b);
    a = update(a, xa, r);
    b = update(b, xb, r);
  }
  return {found >= 9 && floor_ok && identical,
          fmt("best arm found in %d/10 seeds, floor held %s, exp3s(alpha=0) identical %s", found,
              floor_ok ? "yes" : "no", identical ? "yes" : "no")};
}

// 9, 11 --------------------------------------------------------------------

// High-dimensional clusters with few examples and a wide model: a regime in
// which label noise is memorized and hurts test accuracy.
RunManifest autocl_manifest(std::uint64_t s, double noise) {
  RunManifest m;
  m.task.num_classes = 4;
  m.task.dim = 20;
  m.task.separation = 4.0;
  m.task.noise = noise;
  m.task.n_train = 1000;
  m.task.seed = s;
  m.hidden_widths = {128};
  m.train.steps = 4000;
  m.seeds = {s, s, s};
  Regime a;
  a.kind = RegimeKind::autocl;
  a.bandit.K = 10;
  a.bandit.eta = 0.1;
  m.regimes = {Regime{}, a};
  return m;
}

Verdict autocl_vs_filter() {
  std::vector<double> base, autocl;
  std::vector<std::vector<double>> filters(4);
  const double pcts[] = {5, 10, 20, 30};
  for (std::uint64_t s = 0; s < 3; ++s) {
    RunManifest m = autocl_manifest(s, 0.3);
    for (double p : pcts) {
      Regime f;
      f.kind = RegimeKind::filter;
      f.pct = p;
      m.regimes.push_back(f);
    }
    const ExperimentReport r = run_pipeline(m, make_task(m.task));
    base.push_back(r.regimes[0].test.accuracy);
    autocl.push_back(r.regimes[1].test.accuracy);
    for (std::size_t i = 0; i < 4; ++i) filters[i].push_back(r.regimes[2 + i].test.accuracy);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < 4; ++i) {
    if (mean(filters[i]) > mean(filters[best])) best = i;
  }
  return {mean(autocl) >= mean(base) && mean(autocl) >= mean(filters[best]) - 0.005,
          fmt("accuracy autocl %.4f, baseline %.4f, best filter (%g%%) %.4f", mean(autocl),
              mean(base), pcts[best], mean(filters[best]))};
}

Verdict clean_null() {
  std::vector<double> base, autocl;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const RunManifest m = autocl_manifest(s, 0.0);
    const ExperimentReport r = run_pipeline(m, make_task(m.task));
    base.push_back(r.regimes[0].test.accuracy);
    autocl.push_back(r.regimes[1].test.accuracy);
  }
  const double diff = mean(autocl) - mean(base);
  return {std::abs(diff) <= 0.005,
          fmt("accuracy autocl %.4f, baseline %.4f, difference %+.2f points", mean(autocl),
              mean(base), 100.0 * diff)};
}

// 10 -----------------------------------------------------------------------

Verdict bucket_isolation() {
  std::ostringstream d;
  bool ok = true;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const ModelSpec spec{4, {32}, 4, Activation::tanh};
    const Dataset tr =
        inject_label_noise(gen_gaussian_clusters(2000, 4, 4, 4.0, 100 + s), 0.03, 200 + s).first;
    const Dataset te = gen_gaussian_clusters(1000, 4, 4, 4.0, 300 + s, Split::test);
    TrainConfig c;
    c.steps = 2000;
    c.init_seed = s;
    c.order_seed = s;
    const TrainResult scorer = train(spec, tr, te, c);
    const std::vector<Checkpoint> ck{{c.steps, scorer.params, 0, 0, 0}};
    const ScoreTable t = score_dataset(ScoreConfig{}, spec, ck, tr);
    const BucketAssignment a = quantile_buckets(rank(t), 5);
    c.steps = 1000;
    std::vector<double> acc;
    for (int b = 0; b < a.K; ++b) acc.push_back(train_on_bucket(spec, tr, te, a, b, c).accuracy);
    std::vector<double> sorted = acc;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    ok = ok && acc.back() < median && acc.back() > 0.25;
    d << fmt("%sseed %llu: top %.3f, median %.3f", s ? "; " : "",
             static_cast<unsigned long long>(s), acc.back(), median);
  }
  return {ok, d.str() + " (chance 0.25)"};
}

// 12 -----------------------------------------------------------------------

Verdict signals() {
  const Dataset corpus = gen_bow_text(1000, 200, 4, 5);
  std::vector<std::string> all;
  for (const auto& e : corpus.examples) all.insert(all.end(), e.tokens->begin(), e.tokens->end());
  std::vector<std::string> vocab = all;
  std::sort(vocab.begin(), vocab.end());
  vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
  const auto brute_p = [&](const std::string& w) {
    const auto n = static_cast<double>(std::count(all.begin(), all.end(), w));
    const double total = static_cast<double>(all.size());
    return n > 0 ? n / total : 1.0 / (total + static_cast<double>(vocab.size()));
  };
  double rarity_err = 0.0, overlap_err = 0.0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    Example e = corpus.examples[i];
    if (i % 100 == 0) e.tokens->push_back("unseen_token");
    double want = 0.0;
    for (const auto& w : *e.tokens) want -= std::log(brute_p(w));
    rarity_err = std::max(rarity_err, std::abs(signal_word_rarity(corpus, e) - want) / want);

    const auto& q = *corpus.examples[i].tokens;
    const auto& ctx = *corpus.examples[(i + 1) % corpus.size()].tokens;
    std::vector<std::string> uq;
    for (const auto& w : q) {
      if (!default_stopwords().count(w) && std::find(uq.begin(), uq.end(), w) == uq.end()) {
        uq.push_back(w);
      }
    }
    if (uq.empty()) continue;
    double hit = 0.0;
    for (const auto& w : uq) hit += std::find(ctx.begin(), ctx.end(), w) != ctx.end();
    overlap_err = std::max(overlap_err,
                           std::abs(signal_lexical_overlap(q, ctx) - hit / static_cast<double>(uq.size())));
  }

  std::vector<double> base, autocl;
  for (std::uint64_t s = 0; s < 5; ++s) {
    RunManifest m;
    m.task.kind = "bow";
    m.task.num_classes = 4;
    m.task.seed = s;
    m.seeds = {s, s, s};
    m.score.method = ScoreMethod::length;
    Regime a;
    a.kind = RegimeKind::autocl;
    a.bandit.K = 10;
    a.bandit.eta = 0.1;
    m.regimes = {Regime{}, a};
    const ExperimentReport r = run_pipeline(m, make_task(m.task));
    base.push_back(r.regimes[0].test.accuracy);
    autocl.push_back(r.regimes[1].test.accuracy);
  }
  const double gain = mean(autocl) - mean(base);
  const double sd = sample_sd(base);
  return {rarity_err <= 1e-12 && overlap_err <= 1e-12 && gain <= sd,
          fmt("rarity err %.1e, overlap err %.1e; length-bucket gain %+.2f points vs seed sd %.2f",
              rarity_err, overlap_err, 100.0 * gain, 100.0 * sd)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Verdict()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "differentiation oracle", differentiation},
      {2, "ABIF exactness on a linear-softmax model", abif_exactness},
      {3, "TracIn single checkpoint equals squared gradient norm", tracin_degenerate},
      {4, "synthetic-noise recall", noise_recall},
      {5, "score stability under training changes", stability},
      {6, "capacity sensitivity", capacity},
      {7, "churn worked example", churn_example},
      {8, "bandit sanity", bandit},
      {9, "AutoCL versus filtering on noisy data", autocl_vs_filter},
      {10, "per-bucket isolation", bucket_isolation},
      {11, "clean-data null result", clean_null},
      {12, "difficulty signals", signals},
  };
  int unexpected = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool expected_fail = kExpectedFailures.count(c.id) > 0;
    if (v.pass == expected_fail) ++unexpected;
    std::printf("%s %2d %s: %s [%.1fs]%s\n", v.pass ? "PASS" : "FAIL", c.id, c.name,
                v.detail.c_str(), secs,
                expected_fail ? (v.pass ? " (unexpected pass)" : " (known desk-scale failure)") : "");
    std::fflush(stdout);
  }
  return unexpected == 0 ? 0 : 1;
}
