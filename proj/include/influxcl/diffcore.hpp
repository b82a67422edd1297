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

// Reverse-mode differentiation for small MLP classifiers.
//
// The model is a stack of dense layers [in -> h1 -> ... -> hk -> out] with a
// pointwise activation after every hidden layer and softmax cross-entropy on
// the output logits. All parameters live in one flat ParamVector; each dense
// layer owns a contiguous slice holding its row-major weight matrix
// [out x in] followed by its bias [out].
//
// Hessian-vector products use Pearlmutter's R-operator: the forward pass and
// the backward pass are differentiated once more along the direction v, so
// the Hessian is never materialized.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace influxcl {

enum class Activation { tanh, relu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct ModelSpec {
  Eigen::Index input_dim = 0;
  std::vector<Eigen::Index> hidden_widths;
  Eigen::Index num_classes = 2;
  Activation activation = Activation::tanh;

  // Throws ArgumentError unless there is at least one hidden layer and
  // num_classes >= 2.
  void validate() const;

  std::size_t num_layers() const { return hidden_widths.size() + 1; }
  Eigen::Index fan_in(std::size_t layer) const;
  Eigen::Index fan_out(std::size_t layer) const;
  Eigen::Index param_count() const;

  bool operator==(const ModelSpec&) const = default;
};

struct LayerSlice {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index length = 0;

  bool operator==(const LayerSlice&) const = default;
};

using Layout = std::vector<LayerSlice>;

// Layer names are "dense_0" .. "dense_{L-1}" in forward order.
Layout layout_for(const ModelSpec& spec);

// Checks the Layout invariants: contiguous, disjoint, unique names, and the
// lengths summing to `total`.
void check_layout(const Layout& layout, Eigen::Index total);

struct ParamVector {
  Eigen::VectorXd values;
  Layout layout;

  const LayerSlice& slice(const std::string& name) const;
  bool operator==(const ParamVector& o) const {
    return layout == o.layout && values.size() == o.values.size() &&
           values == o.values;
  }
};

// A training snapshot: parameters tagged with the step they were saved at.
struct Checkpoint {
  std::int64_t step = 0;
  ParamVector params;
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double dev_accuracy = 0.0;
};

enum class LayerSelector { first, last, all };

std::string to_string(LayerSelector s);
LayerSelector selector_from_string(const std::string& s);

// Which layers participate in gradients and HVPs. For the MLP `first` is the
// first hidden dense layer and `last` the output layer (weights + bias each).
class LayerMask {
 public:
  static LayerMask resolve(LayerSelector selector, const Layout& layout);

  LayerSelector selector() const { return selector_; }
  const std::vector<std::string>& layers() const { return layers_; }
  bool contains(const std::string& layer) const;

  // Total coordinates covered by the mask.
  Eigen::Index masked_dim() const { return masked_dim_; }
  Eigen::Index full_dim() const { return full_dim_; }

  // Full vector -> packed masked coordinates (layout order).
  Eigen::VectorXd gather(const Eigen::VectorXd& full) const;
  // Packed masked coordinates -> full vector, zero elsewhere.
  Eigen::VectorXd scatter(const Eigen::VectorXd& masked) const;
  // Zeroes every coordinate outside the mask in place.
  void apply(Eigen::VectorXd& full) const;

 private:
  LayerSelector selector_ = LayerSelector::all;
  std::vector<std::string> layers_;
  std::vector<LayerSlice> slices_;
  Eigen::Index masked_dim_ = 0;
  Eigen::Index full_dim_ = 0;
};

struct Batch {
  std::vector<std::int64_t> example_ids;
  Eigen::MatrixXd features;  // n x input_dim
  std::vector<int> labels;

  Eigen::Index size() const { return features.rows(); }
};

// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

struct LossResult {
  double loss = 0.0;
  Eigen::MatrixXd logits;  // n x num_classes
};

// Mean softmax cross-entropy over the batch.
LossResult forward_loss(const ModelSpec& spec, const ParamVector& params,
                        const Batch& batch);

// Gradient of the mean loss; coordinates outside `mask` are exactly zero.
Eigen::VectorXd grad(const ModelSpec& spec, const ParamVector& params,
                     const Batch& batch, const LayerMask& mask);

struct LossAndGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

// forward_loss and grad from a single forward pass.
LossAndGrad loss_and_grad(const ModelSpec& spec, const ParamVector& params,
                          const Batch& batch, const LayerMask& mask);

// H v for the Hessian of the mean loss restricted to `mask`. Components of v
// outside the mask are ignored and the result is zero there.
Eigen::VectorXd hvp(const ModelSpec& spec, const ParamVector& params,
                    const Batch& batch, const Eigen::VectorXd& v,
                    const LayerMask& mask);

// One full-length gradient per example, each equal to grad() on the
// singleton batch holding that example.
std::vector<Eigen::VectorXd> per_example_grads(const ModelSpec& spec,
                                               const ParamVector& params,
                                               const Batch& batch,
                                               const LayerMask& mask);

// argmax over logits, lowest class index on ties.
std::vector<int> predict(const ModelSpec& spec, const ParamVector& params,
                         const Eigen::MatrixXd& features);

}  // namespace influxcl
