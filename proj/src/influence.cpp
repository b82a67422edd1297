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

#include "influxcl/influence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "influxcl/errors.hpp"
#include "influxcl/io.hpp"
#include "influxcl/rng.hpp"

namespace influxcl {

ArnoldiResult arnoldi(const LinearOperator& op, Eigen::Index dim, int n_iters,
                      std::uint64_t seed) {
  if (dim < 1) throw ArgumentError("arnoldi: dim must be >= 1");
  if (n_iters < 1 || n_iters > dim) {
    throw ArgumentError("arnoldi: n_iters must be in [1, dim]");
  }
  Rng rng = make_rng(seed, stream::kArnoldiStart);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd start(dim);
  for (Eigen::Index i = 0; i < dim; ++i) start(i) = normal(rng);
  start.normalize();

  std::vector<Eigen::VectorXd> q{start};
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n_iters + 1, n_iters);
  ArnoldiResult r;
  r.seed = seed;
  for (int j = 0; j < n_iters; ++j) {
    Eigen::VectorXd w = op(q[j]);
    if (w.size() != dim) throw ShapeError("arnoldi: operator changed dimension");
    // Classical Gram-Schmidt applied twice keeps the basis orthogonal to
    // working precision.
    for (int pass = 0; pass < 2; ++pass) {
      for (int i = 0; i <= j; ++i) {
        const double c = q[i].dot(w);
        h(i, j) += c;
        w -= c * q[i];
      }
    }
    const double beta = w.norm();
    h(j + 1, j) = beta;
    r.steps = j + 1;
    r.residual_norm = beta;
    if (beta < kBreakdownTolerance) {
      r.breakdown = true;
      break;
    }
    q.push_back(w / beta);
  }

  const int m = r.steps;
  r.hessenberg = h.topLeftCorner(m, m);
  r.basis.resize(static_cast<Eigen::Index>(q.size()), dim);
  for (std::size_t i = 0; i < q.size(); ++i) {
    r.basis.row(static_cast<Eigen::Index>(i)) = q[i].transpose();
  }
  return r;
}

ProjectionOperator distill(const ArnoldiResult& ar, int top_k) {
  if (top_k < 1) throw ArgumentError("distill: top_k must be >= 1");
  const int m = ar.steps;
  if (m < 1 || ar.hessenberg.rows() != m || ar.basis.rows() < m) {
    throw ShapeError("distill: inconsistent Arnoldi result");
  }
  const Eigen::MatrixXd sym =
      0.5 * (ar.hessenberg + ar.hessenberg.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) {
    throw Error("distill: eigendecomposition failed");
  }
  const Eigen::VectorXd& lambda = es.eigenvalues();
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(lambda(a)) > std::abs(lambda(b));
  });
  const double largest = std::abs(lambda(order.front()));
  std::vector<int> keep;
  for (int idx : order) {
    if (static_cast<int>(keep.size()) == top_k) break;
    if (largest == 0.0 || std::abs(lambda(idx)) <= kZeroEigenvalueRelTol * largest) {
      break;
    }
    keep.push_back(idx);
  }
  if (keep.empty()) throw UndefinedError("distill: operator has no nonzero Ritz values");

  const Eigen::MatrixXd qm = ar.basis.topRows(m);
  ProjectionOperator p;
  p.eigenvalues.resize(static_cast<Eigen::Index>(keep.size()));
  p.eigen_rows.resize(static_cast<Eigen::Index>(keep.size()), ar.basis.cols());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    p.eigenvalues(kk) = lambda(keep[k]);
    Eigen::VectorXd ritz = qm.transpose() * es.eigenvectors().col(keep[k]);
    p.eigen_rows.row(kk) = ritz.normalized().transpose();
  }
  p.source.n_iters = static_cast<int>(ar.hessenberg.cols());
  p.source.steps = m;
  p.source.breakdown = ar.breakdown;
  p.source.requested_top_k = top_k;
  p.source.seed = ar.seed;
  return p;
}

double abif_self_influence(const ProjectionOperator& proj,
                           const Eigen::VectorXd& masked_grad) {
  if (masked_grad.size() != proj.eigen_rows.cols()) {
    throw ShapeError("abif: gradient has " + std::to_string(masked_grad.size()) +
                     " coordinates, projection expects " +
                     std::to_string(proj.eigen_rows.cols()));
  }
  const Eigen::VectorXd c = proj.eigen_rows * masked_grad;
  return (c.array().square() / proj.eigenvalues.array()).sum();
}

GaussianProjection::GaussianProjection(Eigen::Index dim_in,
                                       Eigen::Index dim_out,
                                       std::uint64_t seed)
    : dim_in_(dim_in), dim_out_(dim_out), seed_(seed) {
  if (dim_out < 1 || dim_in < 1 || dim_out > dim_in) {
    throw ArgumentError("gaussian projection needs 1 <= dim_out <= dim_in");
  }
}

Eigen::MatrixXd GaussianProjection::materialize() const {
  Rng rng = make_rng(seed_, stream::kProjection);
  std::normal_distribution<double> normal(
      0.0, 1.0 / std::sqrt(static_cast<double>(dim_out_)));
  Eigen::MatrixXd m(dim_out_, dim_in_);
  for (Eigen::Index r = 0; r < dim_out_; ++r) {
    for (Eigen::Index c = 0; c < dim_in_; ++c) m(r, c) = normal(rng);
  }
  return m;
}

Eigen::VectorXd GaussianProjection::apply(const Eigen::VectorXd& v) const {
  if (v.size() != dim_in_) throw ShapeError("projection: wrong input size");
  Rng rng = make_rng(seed_, stream::kProjection);
  std::normal_distribution<double> normal(
      0.0, 1.0 / std::sqrt(static_cast<double>(dim_out_)));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim_out_);
  for (Eigen::Index r = 0; r < dim_out_; ++r) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < dim_in_; ++c) acc += normal(rng) * v(c);
    out(r) = acc;
  }
  return out;
}

double tracin_self_influence(std::span<const ParamVector> checkpoints,
                             const ModelSpec& spec, const Example& ex,
                             LayerSelector selector,
                             const std::optional<GaussianProjection>& proj) {
  if (checkpoints.empty()) throw ArgumentError("tracin: no checkpoints");
  Dataset one;
  one.num_classes = static_cast<int>(spec.num_classes);
  one.examples = {ex};
  const Batch b = to_batch(one);
  double total = 0.0;
  for (const auto& params : checkpoints) {
    const LayerMask mask = LayerMask::resolve(selector, params.layout);
    Eigen::VectorXd g = mask.gather(grad(spec, params, b, mask));
    if (proj) g = proj->apply(g);
    total += g.squaredNorm();
  }
  return total / static_cast<double>(checkpoints.size());
}

std::vector<Checkpoint> select_checkpoints(std::span<const Checkpoint> all,
                                           int count) {
  if (count < 1) throw ArgumentError("need at least one checkpoint");
  if (all.empty()) throw ArgumentError("no checkpoints to select from");
  const auto n = static_cast<int>(all.size());
  if (count >= n) return {all.begin(), all.end()};
  std::vector<Checkpoint> out;
  if (count == 1) {
    out.push_back(all.back());
    return out;
  }
  int last = -1;
  for (int i = 0; i < count; ++i) {
    int idx = static_cast<int>(std::lround(static_cast<double>(i) * (n - 1) /
                                           static_cast<double>(count - 1)));
    idx = std::max(idx, last + 1);
    out.push_back(all[static_cast<std::size_t>(idx)]);
    last = idx;
  }
  return out;
}

std::string to_string(ScoreMethod m) {
  switch (m) {
    case ScoreMethod::abif: return "abif";
    case ScoreMethod::tracin: return "tracin";
    case ScoreMethod::length: return "length";
    case ScoreMethod::rarity: return "rarity";
  }
  return "abif";
}

ScoreMethod score_method_from_string(const std::string& s) {
  if (s == "abif") return ScoreMethod::abif;
  if (s == "tracin") return ScoreMethod::tracin;
  if (s == "length") return ScoreMethod::length;
  if (s == "rarity") return ScoreMethod::rarity;
  throw ArgumentError("unknown score method '" + s + "'");
}

std::string ScoreConfig::to_json() const {
  nlohmann::json j;
  j["method"] = influxcl::to_string(method);
  if (method == ScoreMethod::abif) {
    j["mask"] = influxcl::to_string(abif.mask);
    j["top_k"] = abif.top_k;
    j["n_iters"] = abif.n_iters;
    j["hvp_examples"] = abif.hvp_examples;
    j["seed"] = abif.seed;
  } else if (method == ScoreMethod::tracin) {
    j["mask"] = influxcl::to_string(tracin.mask);
    j["projection_dim"] = tracin.projection_dim;
    j["num_checkpoints"] = tracin.num_checkpoints;
    j["seed"] = tracin.seed;
  }
  return j.dump();
}

std::string ScoreConfig::config_hash() const { return stable_hash(to_json()); }

double ScoreTable::at(std::int64_t id) const {
  auto it = std::lower_bound(
      entries.begin(), entries.end(), id,
      [](const ScoreEntry& e, std::int64_t v) { return e.id < v; });
  if (it == entries.end() || it->id != id) {
    throw ArgumentError("no score for id " + std::to_string(id));
  }
  return it->score;
}

void ScoreTable::canonicalize() {
  std::sort(entries.begin(), entries.end(),
            [](const ScoreEntry& a, const ScoreEntry& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i > 0 && entries[i - 1].id == entries[i].id) {
      throw ArgumentError("duplicate score id " + std::to_string(entries[i].id));
    }
    if (!std::isfinite(entries[i].score)) {
      throw ArgumentError("non-finite score for id " +
                          std::to_string(entries[i].id));
    }
  }
}

namespace {

constexpr std::size_t kScoreChunk = 256;

// Calls fn(row, masked_gradient) for every example of ds at `params`.
template <typename Fn>
void for_each_masked_grad(const ModelSpec& spec, const ParamVector& params,
                          const Dataset& ds, const LayerMask& mask, Fn&& fn) {
  for (std::size_t start = 0; start < ds.size(); start += kScoreChunk) {
    const std::size_t end = std::min(ds.size(), start + kScoreChunk);
    std::vector<std::size_t> rows(end - start);
    std::iota(rows.begin(), rows.end(), start);
    const auto grads = per_example_grads(spec, params, to_batch(ds, rows), mask);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      fn(rows[k], mask.gather(grads[k]));
    }
  }
}

}  // namespace

ProjectionOperator fit_abif(const ModelSpec& spec, const ParamVector& params,
                            const Dataset& train, const AbifConfig& cfg) {
  if (train.size() == 0) throw ArgumentError("abif: empty training set");
  const LayerMask mask = LayerMask::resolve(cfg.mask, params.layout);

  std::vector<std::size_t> rows(train.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (cfg.hvp_examples > 0 && rows.size() > cfg.hvp_examples) {
    Rng rng = make_rng(cfg.seed, stream::kHvpSubsample);
    for (std::size_t i = 0; i < cfg.hvp_examples; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, rows.size() - 1);
      std::swap(rows[i], rows[pick(rng)]);
    }
    rows.resize(cfg.hvp_examples);
    std::sort(rows.begin(), rows.end());
  }
  const Batch batch = to_batch(train, rows);
  LinearOperator op = [&](const Eigen::VectorXd& v) {
    return mask.gather(hvp(spec, params, batch, mask.scatter(v), mask));
  };
  const Eigen::Index dim = mask.masked_dim();
  const int iters = static_cast<int>(std::min<Eigen::Index>(cfg.n_iters, dim));
  ProjectionOperator p = distill(arnoldi(op, dim, iters, cfg.seed), cfg.top_k);
  p.mask = mask;
  p.source.n_iters = cfg.n_iters;
  return p;
}

ScoreTable score_abif(const ModelSpec& spec, const ParamVector& params,
                      const Dataset& ds, const ProjectionOperator& proj) {
  if (!proj.mask) throw ArgumentError("abif: projection has no layer mask");
  const LayerMask& mask = *proj.mask;
  ScoreTable t;
  t.method = ScoreMethod::abif;
  t.mask = mask.selector();
  t.entries.resize(ds.size());
  for_each_masked_grad(spec, params, ds, mask,
                       [&](std::size_t row, const Eigen::VectorXd& g) {
                         t.entries[row] = {ds.examples[row].id,
                                           abif_self_influence(proj, g)};
                       });
  t.canonicalize();
  return t;
}

ScoreTable score_tracin(const ModelSpec& spec,
                        std::span<const ParamVector> checkpoints,
                        const Dataset& ds, const TracinConfig& cfg) {
  if (checkpoints.empty()) throw ArgumentError("tracin: no checkpoints");
  const LayerMask mask = LayerMask::resolve(cfg.mask, checkpoints.front().layout);
  std::optional<Eigen::MatrixXd> sketch;
  if (cfg.projection_dim > 0 && cfg.projection_dim < mask.masked_dim()) {
    sketch = GaussianProjection(mask.masked_dim(), cfg.projection_dim, cfg.seed)
                 .materialize();
  }
  std::vector<double> acc(ds.size(), 0.0);
  for (const auto& params : checkpoints) {
    for_each_masked_grad(spec, params, ds, mask,
                         [&](std::size_t row, const Eigen::VectorXd& g) {
                           acc[row] += sketch ? (*sketch * g).squaredNorm()
                                              : g.squaredNorm();
                         });
  }
  ScoreTable t;
  t.method = ScoreMethod::tracin;
  t.mask = cfg.mask;
  t.entries.resize(ds.size());
  for (std::size_t row = 0; row < ds.size(); ++row) {
    t.entries[row] = {ds.examples[row].id,
                      acc[row] / static_cast<double>(checkpoints.size())};
  }
  t.canonicalize();
  return t;
}

ScoreTable score_dataset(const ScoreConfig& cfg, const ModelSpec& spec,
                         std::span<const Checkpoint> checkpoints,
                         const Dataset& ds) {
  ScoreTable t;
  switch (cfg.method) {
    case ScoreMethod::abif: {
      if (checkpoints.empty()) throw ArgumentError("abif: no checkpoints");
      const Checkpoint& last = checkpoints.back();
      ProjectionOperator proj = fit_abif(spec, last.params, ds, cfg.abif);
      proj.source.checkpoint_step = last.step;
      t = score_abif(spec, last.params, ds, proj);
      break;
    }
    case ScoreMethod::tracin: {
      std::vector<ParamVector> params;
      for (const auto& c : select_checkpoints(checkpoints, cfg.tracin.num_checkpoints)) {
        params.push_back(c.params);
      }
      t = score_tracin(spec, params, ds, cfg.tracin);
      break;
    }
    case ScoreMethod::length:
    case ScoreMethod::rarity:
      t = score_signal(cfg.method, ds);
      break;
  }
  t.config_hash = cfg.config_hash();
  return t;
}

ScoreTable score_signal(ScoreMethod method, const Dataset& ds) {
  ScoreTable t;
  t.method = method;
  t.mask = LayerSelector::all;
  t.entries.reserve(ds.size());
  if (method == ScoreMethod::length) {
    for (const auto& e : ds.examples) t.entries.push_back({e.id, signal_length(e)});
  } else if (method == ScoreMethod::rarity) {
    const CorpusStats stats = CorpusStats::from(ds);
    for (const auto& e : ds.examples) {
      t.entries.push_back({e.id, e.tokens ? stats.rarity(*e.tokens) : 0.0});
    }
  } else {
    throw ArgumentError("score_signal: not a difficulty signal");
  }
  t.canonicalize();
  return t;
}

}  // namespace influxcl
