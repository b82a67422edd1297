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

// Self-influence scoring.
//
// ABIF: Arnoldi iteration on the (masked) loss Hessian builds a Krylov basis
// and a small Hessenberg matrix; its dominant Ritz pairs form a projection
// under which the inverse Hessian is diagonal, and the self-influence of an
// example with gradient g is sum_i (r_i . g)^2 / lambda_i.
//
// TracIn: (1/C) sum_c |P g_c|^2 over C checkpoints, with P the identity or a
// Gaussian random projection.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "influxcl/diffcore.hpp"
#include "influxcl/tasks.hpp"

namespace influxcl {

using LinearOperator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct ArnoldiResult {
  Eigen::MatrixXd hessenberg;  // m x m
  Eigen::MatrixXd basis;       // rows are orthonormal Krylov vectors
  double residual_norm = 0.0;  // norm of the last unnormalized residual
  int steps = 0;               // m
  bool breakdown = false;      // stopped early: invariant subspace found
  std::uint64_t seed = 0;
};

inline constexpr double kBreakdownTolerance = 1e-12;

// Arnoldi with full re-orthogonalization from a seed-determined random unit
// start vector. Requires 1 <= n_iters <= dim. On breakdown the basis holds
// only the `steps` vectors spanning the invariant subspace; otherwise it
// holds steps + 1 rows.
ArnoldiResult arnoldi(const LinearOperator& op, Eigen::Index dim, int n_iters,
                      std::uint64_t seed);

struct ProjectionMetadata {
  int n_iters = 0;
  int steps = 0;
  bool breakdown = false;
  int requested_top_k = 0;
  std::uint64_t seed = 0;
  std::int64_t checkpoint_step = -1;
};

struct ProjectionOperator {
  Eigen::VectorXd eigenvalues;  // |lambda| descending, none zero
  Eigen::MatrixXd eigen_rows;   // k x masked_dim, orthonormal rows
  std::optional<LayerMask> mask;
  ProjectionMetadata source;

  Eigen::Index rank() const { return eigenvalues.size(); }
};

// Ritz pairs whose |lambda| falls below this fraction of the largest are
// treated as zero and dropped.
inline constexpr double kZeroEigenvalueRelTol = 1e-10;

// Eigendecomposes the symmetrized Hessenberg matrix and keeps the top_k Ritz
// pairs by |lambda|, mapped back through the basis and renormalized.
ProjectionOperator distill(const ArnoldiResult& arnoldi, int top_k);

double abif_self_influence(const ProjectionOperator& proj,
                           const Eigen::VectorXd& masked_grad);

// Dense Gaussian sketch with N(0, 1/dim_out) entries. The matrix is
// regenerated from the seed on demand and never kept on the object.
class GaussianProjection {
 public:
  GaussianProjection(Eigen::Index dim_in, Eigen::Index dim_out,
                     std::uint64_t seed);

  Eigen::Index dim_in() const { return dim_in_; }
  Eigen::Index dim_out() const { return dim_out_; }
  std::uint64_t seed() const { return seed_; }

  Eigen::MatrixXd materialize() const;
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;

 private:
  Eigen::Index dim_in_;
  Eigen::Index dim_out_;
  std::uint64_t seed_;
};

double tracin_self_influence(std::span<const ParamVector> checkpoints,
                             const ModelSpec& spec, const Example& ex,
                             LayerSelector mask,
                             const std::optional<GaussianProjection>& proj);

// Picks `count` checkpoints evenly spread by position: for three, the
// earliest, middle and final ones. Input must be ordered by step.
std::vector<Checkpoint> select_checkpoints(std::span<const Checkpoint> all,
                                           int count);

enum class ScoreMethod { abif, tracin, length, rarity };

std::string to_string(ScoreMethod m);
ScoreMethod score_method_from_string(const std::string& s);

struct AbifConfig {
  LayerSelector mask = LayerSelector::last;
  int top_k = 30;
  int n_iters = 60;
  std::size_t hvp_examples = 512;
  std::uint64_t seed = 0;
};

struct TracinConfig {
  LayerSelector mask = LayerSelector::last;
  Eigen::Index projection_dim = 1024;  // 0 disables projection
  int num_checkpoints = 3;
  std::uint64_t seed = 0;
};

struct ScoreConfig {
  ScoreMethod method = ScoreMethod::abif;
  AbifConfig abif;
  TracinConfig tracin;

  LayerSelector mask() const {
    return method == ScoreMethod::tracin ? tracin.mask : abif.mask;
  }
  // Stable hex digest of the canonical JSON form.
  std::string config_hash() const;
  std::string to_json() const;
};

struct ScoreEntry {
  std::int64_t id = 0;
  double score = 0.0;
};

struct ScoreTable {
  ScoreMethod method = ScoreMethod::abif;
  LayerSelector mask = LayerSelector::last;
  std::vector<ScoreEntry> entries;  // ascending id, one per example
  std::string config_hash;

  std::size_t size() const { return entries.size(); }
  double at(std::int64_t id) const;
  // Sorts by id; throws on duplicate ids or non-finite scores.
  void canonicalize();
};

// Builds the ABIF projection at `params` from a seed-chosen subsample of the
// training set used as the fixed HVP batch.
ProjectionOperator fit_abif(const ModelSpec& spec, const ParamVector& params,
                            const Dataset& train, const AbifConfig& cfg);

ScoreTable score_abif(const ModelSpec& spec, const ParamVector& params,
                      const Dataset& ds, const ProjectionOperator& proj);

ScoreTable score_tracin(const ModelSpec& spec,
                        std::span<const ParamVector> checkpoints,
                        const Dataset& ds, const TracinConfig& cfg);

// ABIF uses the final entry of `checkpoints`; TracIn selects
// cfg.tracin.num_checkpoints of them.
ScoreTable score_dataset(const ScoreConfig& cfg, const ModelSpec& spec,
                         std::span<const Checkpoint> checkpoints,
                         const Dataset& ds);

// Difficulty-signal score tables (token length, word rarity against the
// dataset itself).
ScoreTable score_signal(ScoreMethod method, const Dataset& ds);

}  // namespace influxcl
