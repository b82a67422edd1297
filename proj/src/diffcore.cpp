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

#include "influxcl/diffcore.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "influxcl/errors.hpp"
#include "influxcl/rng.hpp"

namespace influxcl {

namespace {

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeights = Eigen::Map<const RowMajorMatrix>;
using Weights = Eigen::Map<RowMajorMatrix>;

ConstWeights weights_of(const ModelSpec& spec, const Eigen::VectorXd& values,
                        const LayerSlice& s, std::size_t layer) {
  return ConstWeights(values.data() + s.offset, spec.fan_out(layer),
                      spec.fan_in(layer));
}

Eigen::VectorXd bias_of(const ModelSpec& spec, const Eigen::VectorXd& values,
                        const LayerSlice& s, std::size_t layer) {
  const Eigen::Index in = spec.fan_in(layer);
  const Eigen::Index out = spec.fan_out(layer);
  return values.segment(s.offset + in * out, out);
}

void check_inputs(const ModelSpec& spec, const ParamVector& params,
                  const Batch& batch) {
  spec.validate();
  if (params.values.size() != spec.param_count()) {
    throw ShapeError("parameter vector has " +
                     std::to_string(params.values.size()) +
                     " values, spec needs " +
                     std::to_string(spec.param_count()));
  }
  if (params.layout != layout_for(spec)) {
    throw ShapeError("parameter layout does not match model spec");
  }
  if (batch.features.rows() < 1) throw ShapeError("empty batch");
  if (batch.features.cols() != spec.input_dim) {
    throw ShapeError("batch has " + std::to_string(batch.features.cols()) +
                     " features, spec needs " +
                     std::to_string(spec.input_dim));
  }
  if (static_cast<Eigen::Index>(batch.labels.size()) != batch.features.rows()) {
    throw ShapeError("label count does not match feature rows");
  }
  for (int y : batch.labels) {
    if (y < 0 || y >= spec.num_classes) {
      throw ShapeError("label " + std::to_string(y) + " out of range");
    }
  }
}

// Activations of every layer for one forward pass. pre[l] is the
// pre-activation of dense layer l, post[l] its input (post[0] = features).
struct Tape {
  std::vector<Eigen::MatrixXd> pre;
  std::vector<Eigen::MatrixXd> post;
  Eigen::MatrixXd probs;
  Eigen::VectorXd example_loss;
};

void activate(Activation a, const Eigen::MatrixXd& z, Eigen::MatrixXd& out) {
  if (a == Activation::tanh) {
    out = z.array().tanh().matrix();
  } else {
    out = z.cwiseMax(0.0);
  }
}

// First derivative of the activation given pre- and post-activation values.
Eigen::MatrixXd activation_d1(Activation a, const Eigen::MatrixXd& z,
                              const Eigen::MatrixXd& h) {
  if (a == Activation::tanh) return (1.0 - h.array().square()).matrix();
  return (z.array() > 0.0).cast<double>().matrix();
}

Eigen::MatrixXd activation_d2(Activation a, const Eigen::MatrixXd& z,
                              const Eigen::MatrixXd& h) {
  if (a == Activation::tanh) {
    return (-2.0 * h.array() * (1.0 - h.array().square())).matrix();
  }
  return Eigen::MatrixXd::Zero(z.rows(), z.cols());
}

Tape run_forward(const ModelSpec& spec, const ParamVector& params,
                 const Batch& batch) {
  const std::size_t L = spec.num_layers();
  Tape t;
  t.pre.resize(L);
  t.post.resize(L + 1);
  t.post[0] = batch.features;
  for (std::size_t l = 0; l < L; ++l) {
    const auto& s = params.layout[l];
    auto w = weights_of(spec, params.values, s, l);
    Eigen::VectorXd b = bias_of(spec, params.values, s, l);
    t.pre[l] = t.post[l] * w.transpose();
    t.pre[l].rowwise() += b.transpose();
    if (l + 1 < L) activate(spec.activation, t.pre[l], t.post[l + 1]);
  }
  const Eigen::MatrixXd& logits = t.pre[L - 1];
  const Eigen::Index n = logits.rows();
  t.probs.resize(n, logits.cols());
  t.example_loss.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = logits.row(i).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(i).array() - m).exp().matrix();
    const double sum = e.sum();
    t.probs.row(i) = e / sum;
    t.example_loss(i) = m + std::log(sum) - logits(i, batch.labels[i]);
  }
  return t;
}

Eigen::MatrixXd output_delta(const Tape& t, const Batch& batch, double scale) {
  Eigen::MatrixXd d = t.probs;
  for (Eigen::Index i = 0; i < d.rows(); ++i) d(i, batch.labels[i]) -= 1.0;
  return d * scale;
}

std::size_t lowest_masked_layer(const ParamVector& params,
                                const LayerMask& mask) {
  for (std::size_t l = 0; l < params.layout.size(); ++l) {
    if (mask.contains(params.layout[l].name)) return l;
  }
  return params.layout.size();
}

// Backpropagates the output delta and calls sink(layer, delta, input) for
// every masked layer; delta is the per-row gradient w.r.t. pre-activation.
template <typename Sink>
void backprop(const ModelSpec& spec, const ParamVector& params,
              const LayerMask& mask, const Tape& t, Eigen::MatrixXd delta,
              Sink&& sink) {
  const std::size_t L = spec.num_layers();
  const std::size_t stop = lowest_masked_layer(params, mask);
  for (std::size_t l = L; l-- > 0;) {
    if (mask.contains(params.layout[l].name)) sink(l, delta, t.post[l]);
    if (l == 0 || l <= stop) break;
    auto w = weights_of(spec, params.values, params.layout[l], l);
    Eigen::MatrixXd d_post = delta * w;
    delta = d_post.cwiseProduct(
        activation_d1(spec.activation, t.pre[l - 1], t.post[l]));
  }
}

}  // namespace

std::string to_string(Activation a) {
  return a == Activation::tanh ? "tanh" : "relu";
}

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  throw ArgumentError("unknown activation '" + s + "'");
}

void ModelSpec::validate() const {
  if (input_dim < 1) throw ArgumentError("input_dim must be >= 1");
  if (hidden_widths.empty()) {
    throw ArgumentError("model needs at least one hidden layer");
  }
  for (auto w : hidden_widths) {
    if (w < 1) throw ArgumentError("hidden widths must be >= 1");
  }
  if (num_classes < 2) throw ArgumentError("num_classes must be >= 2");
}

Eigen::Index ModelSpec::fan_in(std::size_t layer) const {
  return layer == 0 ? input_dim : hidden_widths[layer - 1];
}

Eigen::Index ModelSpec::fan_out(std::size_t layer) const {
  return layer < hidden_widths.size() ? hidden_widths[layer] : num_classes;
}

Eigen::Index ModelSpec::param_count() const {
  Eigen::Index total = 0;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    total += fan_out(l) * (fan_in(l) + 1);
  }
  return total;
}

Layout layout_for(const ModelSpec& spec) {
  Layout layout;
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const Eigen::Index len = spec.fan_out(l) * (spec.fan_in(l) + 1);
    layout.push_back({"dense_" + std::to_string(l), offset, len});
    offset += len;
  }
  return layout;
}

void check_layout(const Layout& layout, Eigen::Index total) {
  std::set<std::string> names;
  Eigen::Index expect = 0;
  for (const auto& s : layout) {
    if (!names.insert(s.name).second) {
      throw ShapeError("duplicate layer name '" + s.name + "'");
    }
    if (s.offset != expect || s.length < 0) {
      throw ShapeError("layer '" + s.name + "' is not contiguous");
    }
    expect += s.length;
  }
  if (expect != total) {
    throw ShapeError("layout covers " + std::to_string(expect) +
                     " values, vector has " + std::to_string(total));
  }
}

const LayerSlice& ParamVector::slice(const std::string& name) const {
  for (const auto& s : layout) {
    if (s.name == name) return s;
  }
  throw ArgumentError("no layer named '" + name + "'");
}

std::string to_string(LayerSelector s) {
  switch (s) {
    case LayerSelector::first: return "first";
    case LayerSelector::last: return "last";
    case LayerSelector::all: return "all";
  }
  return "all";
}

LayerSelector selector_from_string(const std::string& s) {
  if (s == "first") return LayerSelector::first;
  if (s == "last") return LayerSelector::last;
  if (s == "all") return LayerSelector::all;
  throw ArgumentError("unknown layer selector '" + s + "'");
}

LayerMask LayerMask::resolve(LayerSelector selector, const Layout& layout) {
  if (layout.empty()) throw ArgumentError("cannot mask an empty layout");
  LayerMask m;
  m.selector_ = selector;
  switch (selector) {
    case LayerSelector::first: m.slices_ = {layout.front()}; break;
    case LayerSelector::last: m.slices_ = {layout.back()}; break;
    case LayerSelector::all: m.slices_ = layout; break;
  }
  for (const auto& s : m.slices_) {
    m.layers_.push_back(s.name);
    m.masked_dim_ += s.length;
  }
  m.full_dim_ = layout.back().offset + layout.back().length;
  return m;
}

bool LayerMask::contains(const std::string& layer) const {
  return std::find(layers_.begin(), layers_.end(), layer) != layers_.end();
}

Eigen::VectorXd LayerMask::gather(const Eigen::VectorXd& full) const {
  if (full.size() != full_dim_) throw ShapeError("gather: wrong vector size");
  Eigen::VectorXd out(masked_dim_);
  Eigen::Index pos = 0;
  for (const auto& s : slices_) {
    out.segment(pos, s.length) = full.segment(s.offset, s.length);
    pos += s.length;
  }
  return out;
}

Eigen::VectorXd LayerMask::scatter(const Eigen::VectorXd& masked) const {
  if (masked.size() != masked_dim_) {
    throw ShapeError("scatter: wrong vector size");
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(full_dim_);
  Eigen::Index pos = 0;
  for (const auto& s : slices_) {
    out.segment(s.offset, s.length) = masked.segment(pos, s.length);
    pos += s.length;
  }
  return out;
}

void LayerMask::apply(Eigen::VectorXd& full) const {
  if (full.size() != full_dim_) throw ShapeError("mask: wrong vector size");
  full = scatter(gather(full));
}

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamVector p;
  p.layout = layout_for(spec);
  p.values = Eigen::VectorXd::Zero(spec.param_count());
  Rng rng = make_rng(seed, stream::kInit);
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const Eigen::Index in = spec.fan_in(l);
    const Eigen::Index out = spec.fan_out(l);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    const Eigen::Index off = p.layout[l].offset;
    for (Eigen::Index k = 0; k < in * out; ++k) p.values(off + k) = dist(rng);
  }
  return p;
}

LossResult forward_loss(const ModelSpec& spec, const ParamVector& params,
                        const Batch& batch) {
  check_inputs(spec, params, batch);
  Tape t = run_forward(spec, params, batch);
  LossResult r;
  r.loss = t.example_loss.mean();
  r.logits = std::move(t.pre.back());
  return r;
}

Eigen::VectorXd grad(const ModelSpec& spec, const ParamVector& params,
                     const Batch& batch, const LayerMask& mask) {
  return loss_and_grad(spec, params, batch, mask).grad;
}

LossAndGrad loss_and_grad(const ModelSpec& spec, const ParamVector& params,
                          const Batch& batch, const LayerMask& mask) {
  check_inputs(spec, params, batch);
  Tape t = run_forward(spec, params, batch);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(params.values.size());
  const double scale = 1.0 / static_cast<double>(batch.size());
  backprop(spec, params, mask, t, output_delta(t, batch, scale),
           [&](std::size_t l, const Eigen::MatrixXd& delta,
               const Eigen::MatrixXd& input) {
             const auto& s = params.layout[l];
             const Eigen::Index in = spec.fan_in(l);
             const Eigen::Index out = spec.fan_out(l);
             Weights gw(g.data() + s.offset, out, in);
             gw = delta.transpose() * input;
             g.segment(s.offset + in * out, out) = delta.colwise().sum();
           });
  return {t.example_loss.mean(), std::move(g)};
}

std::vector<Eigen::VectorXd> per_example_grads(const ModelSpec& spec,
                                               const ParamVector& params,
                                               const Batch& batch,
                                               const LayerMask& mask) {
  check_inputs(spec, params, batch);
  Tape t = run_forward(spec, params, batch);
  const Eigen::Index n = batch.size();
  std::vector<Eigen::VectorXd> out(
      n, Eigen::VectorXd::Zero(params.values.size()));
  backprop(spec, params, mask, t, output_delta(t, batch, 1.0),
           [&](std::size_t l, const Eigen::MatrixXd& delta,
               const Eigen::MatrixXd& input) {
             const auto& s = params.layout[l];
             const Eigen::Index in = spec.fan_in(l);
             const Eigen::Index width = spec.fan_out(l);
             for (Eigen::Index i = 0; i < n; ++i) {
               Weights gw(out[i].data() + s.offset, width, in);
               gw = delta.row(i).transpose() * input.row(i);
               out[i].segment(s.offset + in * width, width) =
                   delta.row(i).transpose();
             }
           });
  return out;
}

Eigen::VectorXd hvp(const ModelSpec& spec, const ParamVector& params,
                    const Batch& batch, const Eigen::VectorXd& v,
                    const LayerMask& mask) {
  check_inputs(spec, params, batch);
  if (v.size() != params.values.size()) {
    throw ShapeError("hvp direction has wrong length");
  }
  Eigen::VectorXd dir = v;
  mask.apply(dir);

  const std::size_t L = spec.num_layers();
  const Eigen::Index n = batch.size();
  Tape t = run_forward(spec, params, batch);

  // Forward R-pass: directional derivatives of every pre-activation.
  std::vector<Eigen::MatrixXd> r_pre(L);
  Eigen::MatrixXd r_post = Eigen::MatrixXd::Zero(n, spec.input_dim);
  for (std::size_t l = 0; l < L; ++l) {
    const auto& s = params.layout[l];
    auto w = weights_of(spec, params.values, s, l);
    auto dw = weights_of(spec, dir, s, l);
    Eigen::VectorXd db = bias_of(spec, dir, s, l);
    r_pre[l] = r_post * w.transpose() + t.post[l] * dw.transpose();
    r_pre[l].rowwise() += db.transpose();
    if (l + 1 < L) {
      r_post = activation_d1(spec.activation, t.pre[l], t.post[l + 1])
                   .cwiseProduct(r_pre[l]);
    }
  }

  // Softmax Jacobian applied to R(logits).
  const double scale = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd delta = output_delta(t, batch, scale);
  Eigen::MatrixXd r_delta(n, spec.num_classes);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double dot = t.probs.row(i).dot(r_pre[L - 1].row(i));
    r_delta.row(i) = t.probs.row(i).array() *
                     (r_pre[L - 1].row(i).array() - dot) * scale;
  }

  // Backward R-pass.
  Eigen::VectorXd hv = Eigen::VectorXd::Zero(params.values.size());
  const std::size_t stop = lowest_masked_layer(params, mask);
  for (std::size_t l = L; l-- > 0;) {
    const auto& s = params.layout[l];
    const Eigen::Index in = spec.fan_in(l);
    const Eigen::Index out = spec.fan_out(l);
    if (mask.contains(s.name)) {
      // R{h_prev} for the layer input; zero for the raw features.
      Eigen::MatrixXd r_input = Eigen::MatrixXd::Zero(n, in);
      if (l > 0) {
        r_input = activation_d1(spec.activation, t.pre[l - 1], t.post[l])
                      .cwiseProduct(r_pre[l - 1]);
      }
      Weights hw(hv.data() + s.offset, out, in);
      hw = r_delta.transpose() * t.post[l] + delta.transpose() * r_input;
      hv.segment(s.offset + in * out, out) = r_delta.colwise().sum();
    }
    if (l == 0 || l <= stop) break;
    auto w = weights_of(spec, params.values, s, l);
    auto dw = weights_of(spec, dir, s, l);
    Eigen::MatrixXd d_post = delta * w;
    Eigen::MatrixXd r_d_post = r_delta * w + delta * dw;
    const Eigen::MatrixXd d1 =
        activation_d1(spec.activation, t.pre[l - 1], t.post[l]);
    const Eigen::MatrixXd d2 =
        activation_d2(spec.activation, t.pre[l - 1], t.post[l]);
    delta = d_post.cwiseProduct(d1);
    r_delta = r_d_post.cwiseProduct(d1) +
              d_post.cwiseProduct(d2).cwiseProduct(r_pre[l - 1]);
  }
  return hv;
}

std::vector<int> predict(const ModelSpec& spec, const ParamVector& params,
                         const Eigen::MatrixXd& features) {
  Batch b;
  b.features = features;
  b.labels.assign(features.rows(), 0);
  const LossResult r = forward_loss(spec, params, b);
  std::vector<int> out(features.rows());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    Eigen::Index arg = 0;
    r.logits.row(i).maxCoeff(&arg);
    out[i] = static_cast<int>(arg);
  }
  return out;
}

}  // namespace influxcl
