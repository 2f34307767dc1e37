//
// Copyright 2026 The SMS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "sms/nn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sms/error.hpp"

namespace sms {
namespace {

constexpr double kLogFloor = 1e-12;

double activate(Activation a, double z) {
  switch (a) {
    case Activation::relu:
      return z > 0.0 ? z : 0.0;
    case Activation::sigmoid:
      return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                      : std::exp(z) / (1.0 + std::exp(z));
    case Activation::identity:
      return z;
  }
  return z;
}

// Derivative expressed through the activation output.
double activate_grad(Activation a, double out) {
  switch (a) {
    case Activation::relu:
      return out > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid:
      return out * (1.0 - out);
    case Activation::identity:
      return 1.0;
  }
  return 1.0;
}

// out = act(x W^T + b)
Tensor dense_forward(const DenseLayer& layer, const Tensor& x) {
  const std::size_t batch = x.rows();
  const std::size_t in = layer.in_dim();
  const std::size_t out = layer.out_dim();
  Tensor y = Tensor::matrix(batch, out);
  const double* w = layer.weights.values().data();
  const double* b = layer.bias.values().data();
  for (std::size_t r = 0; r < batch; ++r) {
    const double* xr = x.values().data() + r * in;
    double* yr = y.values().data() + r * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = w + o * in;
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += wo[i] * xr[i];
      yr[o] = activate(layer.activation, acc + b[o]);
    }
  }
  return y;
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::sigmoid:
      return "sigmoid";
    case Activation::identity:
      return "identity";
  }
  return "unknown";
}

std::vector<LayerSpec> chain(std::span<const std::size_t> widths,
                             Activation hidden, Activation output) {
  std::vector<LayerSpec> specs;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const bool last = i + 2 == widths.size();
    specs.push_back({widths[i], widths[i + 1], last ? output : hidden});
  }
  return specs;
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    if (layer.weights.rank() != 2 || layer.bias.size() != layer.out_dim()) {
      throw DimensionError("layer " + std::to_string(l) + ": weights " +
                           layer.weights.shape_string() + " and bias " +
                           layer.bias.shape_string() + " disagree");
    }
    if (l > 0 && layers_[l - 1].out_dim() != layer.in_dim()) {
      throw DimensionError("layer " + std::to_string(l) + " expects " +
                           std::to_string(layer.in_dim()) +
                           " inputs but layer " + std::to_string(l - 1) +
                           " produces " + std::to_string(layers_[l - 1].out_dim()));
    }
  }
}

Mlp Mlp::glorot(std::span<const LayerSpec> specs, Rng& rng) {
  std::vector<DenseLayer> layers;
  layers.reserve(specs.size());
  for (const LayerSpec& s : specs) {
    if (s.in == 0 || s.out == 0) throw ParameterError("layer with zero width");
    DenseLayer layer;
    layer.weights = Tensor::matrix(s.out, s.in);
    layer.bias = Tensor({s.out}, 0.0);
    layer.activation = s.activation;
    const double limit = std::sqrt(6.0 / static_cast<double>(s.in + s.out));
    for (double& w : layer.weights.values()) w = rng.uniform(-limit, limit);
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

void Mlp::check_input(const Tensor& batch) const {
  if (layers_.empty()) throw StateError("forward on an empty network");
  if (batch.rank() != 2 || batch.cols() != layers_.front().in_dim()) {
    throw DimensionError("layer 0 expects " +
                         std::to_string(layers_.front().in_dim()) +
                         " input columns, got batch " + batch.shape_string());
  }
}

Tensor Mlp::forward(const Tensor& batch) {
  check_input(batch);
  cache_.inputs.clear();
  cache_.outputs.clear();
  Tensor x = batch;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Tensor y = dense_forward(layers_[l], x);
    require_finite(y, "dense forward");
    cache_.inputs.push_back(std::move(x));
    cache_.outputs.push_back(y);
    x = std::move(y);
  }
  cache_.valid = true;
  return x;
}

Tensor Mlp::infer(const Tensor& batch) const {
  check_input(batch);
  Tensor x = dense_forward(layers_.front(), batch);
  for (std::size_t l = 1; l < layers_.size(); ++l) x = dense_forward(layers_[l], x);
  require_finite(x, "dense inference");
  return x;
}

Tensor Mlp::backward(const Tensor& out_grad) {
  if (!cache_.valid) throw StateError("backward called without a preceding forward");
  const Tensor& last = cache_.outputs.back();
  if (out_grad.shape() != last.shape()) {
    throw DimensionError("backward: output gradient " + out_grad.shape_string() +
                         " does not match network output " + last.shape_string());
  }
  Tensor delta = out_grad;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    DenseLayer& layer = layers_[l];
    const Tensor& x = cache_.inputs[l];
    const Tensor& y = cache_.outputs[l];
    const std::size_t batch = x.rows();
    const std::size_t in = layer.in_dim();
    const std::size_t out = layer.out_dim();

    // delta <- delta * act'(z)
    for (std::size_t k = 0; k < delta.size(); ++k) {
      delta[k] *= activate_grad(layer.activation, y[k]);
    }

    std::span<double> gw = layer.weights.grad();
    std::span<double> gb = layer.bias.grad();
    const double* w = layer.weights.values().data();
    Tensor dx = Tensor::matrix(batch, in);
    for (std::size_t r = 0; r < batch; ++r) {
      const double* xr = x.values().data() + r * in;
      double* dxr = dx.values().data() + r * in;
      for (std::size_t o = 0; o < out; ++o) {
        const double g = delta[r * out + o];
        if (g == 0.0) continue;
        gb[o] += g;
        double* gwo = gw.data() + o * in;
        const double* wo = w + o * in;
        for (std::size_t i = 0; i < in; ++i) {
          gwo[i] += g * xr[i];
          dxr[i] += g * wo[i];
        }
      }
    }
    delta = std::move(dx);
  }
  cache_.valid = false;
  require_finite(delta, "dense backward");
  return delta;
}

void Mlp::zero_grad() {
  for (DenseLayer& layer : layers_) {
    layer.weights.zero_grad();
    layer.bias.zero_grad();
  }
}

void Mlp::sgd_step(double learning_rate) {
  for (DenseLayer& layer : layers_) {
    sms::sgd_step(layer.weights.values(), layer.weights.grad(), learning_rate);
    sms::sgd_step(layer.bias.values(), layer.bias.grad(), learning_rate);
  }
}

std::size_t Mlp::input_dim() const {
  return layers_.empty() ? 0 : layers_.front().in_dim();
}

std::size_t Mlp::output_dim() const {
  return layers_.empty() ? 0 : layers_.back().out_dim();
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& layer : layers_) n += layer.weights.size() + layer.bias.size();
  return n;
}

std::vector<Tensor*> Mlp::parameters() {
  std::vector<Tensor*> out;
  for (DenseLayer& layer : layers_) {
    out.push_back(&layer.weights);
    out.push_back(&layer.bias);
  }
  return out;
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t l = 0; l < a.layers_.size(); ++l) {
    const DenseLayer& x = a.layers_[l];
    const DenseLayer& y = b.layers_[l];
    if (x.activation != y.activation || !(x.weights == y.weights) ||
        !(x.bias == y.bias)) {
      return false;
    }
  }
  return true;
}

Tensor softmax(const Tensor& logits) {
  Tensor p = logits;
  const std::size_t cols = logits.cols();
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    std::span<double> row = p.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (std::size_t c = 0; c < cols; ++c) row[c] /= sum;
  }
  return p;
}

LossResult cross_entropy_loss(const Tensor& logits, std::span<const int> labels) {
  const std::size_t batch = logits.rows();
  const std::size_t classes = logits.cols();
  if (logits.rank() != 2 || batch == 0) {
    throw InputError("cross_entropy_loss needs a non-empty B x C logits matrix");
  }
  if (labels.size() != batch) {
    throw DimensionError("cross_entropy_loss: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(batch) + " rows");
  }
  LossResult result;
  result.grad = softmax(logits);
  const double inv_b = 1.0 / static_cast<double>(batch);
  double total = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw InputError("label " + std::to_string(y) + " at row " +
                       std::to_string(r) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
    std::span<double> g = result.grad.row(r);
    total -= std::log(std::max(g[static_cast<std::size_t>(y)], kLogFloor));
    g[static_cast<std::size_t>(y)] -= 1.0;
    for (double& v : g) v *= inv_b;
  }
  result.loss = total * inv_b;
  if (!std::isfinite(result.loss)) throw NumericalError("cross-entropy loss is not finite");
  return result;
}

LossResult mse_loss(const Tensor& prediction, const Tensor& target) {
  if (prediction.shape() != target.shape()) {
    throw DimensionError("mse_loss: prediction " + prediction.shape_string() +
                         " vs target " + target.shape_string());
  }
  LossResult result;
  result.grad = Tensor(prediction.shape());
  const std::size_t n = prediction.size();
  if (n == 0) return result;
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double diff = prediction[k] - target[k];
    total += diff * diff;
    result.grad[k] = 2.0 * diff * inv_n;
  }
  result.loss = total * inv_n;
  if (!std::isfinite(result.loss)) throw NumericalError("mse loss is not finite");
  return result;
}

void sgd_step(std::span<double> params, std::span<double> grads,
              double learning_rate) {
  if (params.size() != grads.size()) {
    throw DimensionError("sgd_step: parameter/gradient length mismatch");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    params[k] -= learning_rate * grads[k];
    grads[k] = 0.0;
  }
}

void SgdConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ParameterError("learning rate must be positive");
  }
  if (batch_size < 1) throw ParameterError("batch size must be >= 1");
  if (epochs < 1) throw ParameterError("epochs must be >= 1");
}

std::vector<std::size_t> argmax_rows(const Tensor& scores) {
  std::vector<std::size_t> out(scores.rows());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    auto row = scores.row(r);
    out[r] = static_cast<std::size_t>(
        std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

GradCheckReport finite_diff_check(std::span<Tensor* const> params,
                                  const std::function<double()>& loss_value,
                                  const std::function<void()>& analytic,
                                  double h, double tol) {
  if (!(h > 0.0) || h > 1e-3) throw ParameterError("finite-difference step must lie in (0, 1e-3]");
  for (Tensor* p : params) p->zero_grad();
  analytic();
  std::vector<std::vector<double>> grads;
  grads.reserve(params.size());
  for (Tensor* p : params) {
    auto g = p->grad();
    grads.emplace_back(g.begin(), g.end());
  }

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = *params[pi];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double saved = p[k];
      p[k] = saved + h;
      const double up = loss_value();
      p[k] = saved - h;
      const double down = loss_value();
      p[k] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = grads[pi][k];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-5});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        std::ostringstream os;
        os << "param " << pi << " [" << k << "] analytic=" << a
           << " numeric=" << numeric;
        report.worst = os.str();
      }
    }
  }
  for (Tensor* p : params) p->zero_grad();
  report.passed = report.max_rel_error <= tol;
  return report;
}

GradCheckReport finite_diff_check(Mlp& mlp, const Tensor& batch,
                                  const LossFn& loss, double h, double tol) {
  auto params = mlp.parameters();
  return finite_diff_check(
      params, [&] { return loss(mlp.infer(batch)).loss; },
      [&] {
        Tensor out = mlp.forward(batch);
        mlp.backward(loss(out).grad);
      },
      h, tol);
}

}  // namespace sms
