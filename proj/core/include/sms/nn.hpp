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

#ifndef SMS_NN_HPP_
#define SMS_NN_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sms/rng.hpp"
#include "sms/tensor.hpp"

namespace sms {

enum class Activation : std::uint8_t { relu = 0, sigmoid = 1, identity = 2 };

std::string_view to_string(Activation a);

struct DenseLayer {
  Tensor weights;  // [out x in]
  Tensor bias;     // [out]
  Activation activation = Activation::identity;

  std::size_t in_dim() const { return weights.cols(); }
  std::size_t out_dim() const { return weights.rows(); }
};

struct LayerSpec {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::relu;
};

// Builds specs for a chain of widths: `hidden` activation between layers and
// `output` on the last one. widths = {4, 8, 2} gives two layers.
std::vector<LayerSpec> chain(std::span<const std::size_t> widths,
                             Activation hidden, Activation output);

// Fully-connected feed-forward network. forward() caches per-layer inputs,
// pre-activations and outputs for the following backward(); infer() is the
// cache-free, read-only variant used for evaluation.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);

  // Uniform Glorot init in +-sqrt(6 / (in + out)), biases zero.
  static Mlp glorot(std::span<const LayerSpec> specs, Rng& rng);

  Tensor forward(const Tensor& batch);
  Tensor infer(const Tensor& batch) const;

  // Accumulates parameter gradients (+=) for the batch seen by the last
  // forward() and returns d loss / d input. Consumes the cache.
  Tensor backward(const Tensor& out_grad);

  void zero_grad();
  // theta <- theta - lr * grad for every parameter, then clears the grads.
  void sgd_step(double learning_rate);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;
  bool empty() const { return layers_.empty(); }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  // Weights and biases of every layer, in layer order (weights first).
  std::vector<Tensor*> parameters();

  friend bool operator==(const Mlp& a, const Mlp& b);

 private:
  struct Cache {
    std::vector<Tensor> inputs;
    std::vector<Tensor> outputs;
    bool valid = false;
  };

  void check_input(const Tensor& batch) const;

  std::vector<DenseLayer> layers_;
  Cache cache_;
};

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // d loss / d prediction, same shape as the prediction
};

// Row-wise softmax with max subtraction.
Tensor softmax(const Tensor& logits);

// Mean over the batch of -log softmax(logits)[label]. Log arguments are
// floored at 1e-12.
LossResult cross_entropy_loss(const Tensor& logits, std::span<const int> labels);

// Mean over all B*d elements of the squared difference.
LossResult mse_loss(const Tensor& prediction, const Tensor& target);

// theta <- theta - lr * grad, then grad <- 0.
void sgd_step(std::span<double> params, std::span<double> grads,
              double learning_rate);

struct SgdConfig {
  double learning_rate = 0.05;
  std::size_t batch_size = 16;
  int epochs = 50;
  std::uint64_t rng_seed = 0;

  // Throws ParameterError unless lr > 0, batch >= 1 and epochs >= 1.
  void validate() const;
};

std::vector<std::size_t> argmax_rows(const Tensor& scores);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "param <p> [<i>]" of the largest error
  bool passed = false;
};

// Generic central-difference check. `loss_value` must evaluate the loss at the
// current parameter values; `analytic` must leave d loss / d param in every
// tensor's grad buffer. Relative error is |a - n| / max(|a|, |n|, 1e-5).
GradCheckReport finite_diff_check(std::span<Tensor* const> params,
                                  const std::function<double()>& loss_value,
                                  const std::function<void()>& analytic,
                                  double h = 1e-6, double tol = 1e-4);

using LossFn = std::function<LossResult(const Tensor& output)>;

// Checks mlp.backward() against central differences of loss(mlp(batch)).
GradCheckReport finite_diff_check(Mlp& mlp, const Tensor& batch,
                                  const LossFn& loss, double h = 1e-6,
                                  double tol = 1e-4);

}  // namespace sms

#endif  // SMS_NN_HPP_
