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

#ifndef SMS_JOINT_TRAINING_HPP_
#define SMS_JOINT_TRAINING_HPP_

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sms/datasets.hpp"
#include "sms/nn.hpp"

namespace sms {

// Widths of the hidden layers of each part. The encoder ends in the latent
// layer (relu); the classifier ends in C identity logits; the decoder ends
// in d sigmoid outputs.
struct ModelTopology {
  std::vector<std::size_t> encoder_hidden = {128};
  std::size_t latent = 64;
  std::vector<std::size_t> classifier_hidden = {32};
  std::vector<std::size_t> decoder_hidden = {128};
};

struct ModelOutputs {
  Tensor logits;  // [B x C]
  Tensor recon;   // [B x d]; empty without a decoder
};

// Shared encoder feeding a classifier head and a reconstruction head. A model
// without a decoder is the primary-task-only baseline.
class SeededModel {
 public:
  Mlp encoder;
  Mlp classifier;
  Mlp decoder;

  static SeededModel create(std::size_t input_dim, std::size_t classes,
                            const ModelTopology& topology, Rng& rng,
                            bool with_decoder = true);

  bool has_decoder() const { return !decoder.empty(); }
  std::size_t input_dim() const { return encoder.input_dim(); }
  std::size_t classes() const { return classifier.output_dim(); }

  // One encoder pass feeding both heads; caches for backward().
  ModelOutputs forward(const Tensor& batch);
  ModelOutputs infer(const Tensor& batch) const;
  Tensor logits(const Tensor& batch) const;
  Tensor reconstruct(const Tensor& batch) const;

  // Back-propagates both head gradients into the shared encoder. An empty
  // recon_grad skips the decoder.
  void backward(const Tensor& logits_grad, const Tensor& recon_grad);
  void zero_grad();
  void sgd_step(double learning_rate);
  std::vector<Tensor*> parameters();

  friend bool operator==(const SeededModel& a, const SeededModel& b) {
    return a.encoder == b.encoder && a.classifier == b.classifier &&
           a.decoder == b.decoder;
  }
};

struct JointWeights {
  double alpha_p = 1.0;
  double alpha_s = 1.0;

  // alphas >= 0 and alpha_p + alpha_s > 0.
  void validate() const;
};

struct JointLoss {
  double total = 0.0;
  double primary = 0.0;
  double self = 0.0;
  Tensor logits_grad;  // alpha_p * d CE / d logits
  Tensor recon_grad;   // alpha_s * d MSE / d recon (empty when no recon)
};

// total = alpha_p * cross_entropy(logits, labels) + alpha_s * mse(recon, inputs).
// An empty recon contributes nothing.
JointLoss joint_loss(const Tensor& logits, std::span<const int> labels,
                     const Tensor& recon, const Tensor& inputs,
                     const JointWeights& w);

struct TrainReport {
  std::vector<double> primary_loss;  // per epoch, sample-weighted mean
  std::vector<double> self_loss;     // empty for primary-only training
  std::vector<double> epoch_seconds;
  double batch_seconds = 0.0;        // mean over the warm timing window
  std::size_t total_batches = 0;
  double running_time = 0.0;         // batch_seconds * total_batches
  double test_accuracy = -1.0;       // -1 when no test set was given
  int epochs = 0;
};

std::string report_csv(const TrainReport& report);

using EpochHook = std::function<void(int epoch, const SeededModel& model)>;

struct TrainOptions {
  ModelTopology topology;
  const Dataset* test = nullptr;
  EpochHook on_epoch;
};

// E epochs of shuffled minibatch SGD on the joint loss. The reconstruction
// target is the (possibly seeded) input itself.
std::pair<SeededModel, TrainReport> train_joint(const Dataset& train,
                                                const SgdConfig& cfg,
                                                const JointWeights& w,
                                                const TrainOptions& options = {});

// Same loop with alpha_s = 0 and no decoder head.
std::pair<SeededModel, TrainReport> train_primary_only(
    const Dataset& train, const SgdConfig& cfg, const TrainOptions& options = {});

// Runs `epochs` more epochs on an existing model (shared by training and the
// unlearning routines). Appends to `report` when given.
void fit(SeededModel& model, const Dataset& train, const SgdConfig& cfg,
         const JointWeights& w, TrainReport* report = nullptr,
         const TrainOptions& options = {});

std::vector<std::size_t> predict(const SeededModel& model, const Tensor& inputs);
double accuracy(const SeededModel& model, const Dataset& ds);

// Writes <prefix>_encoder.bin, <prefix>_classifier.bin, <prefix>_decoder.bin
// (when present) and <prefix>_manifest.json holding their SHA-256 hashes.
// Returns the written paths, manifest last.
std::vector<std::filesystem::path> save_model(const SeededModel& model,
                                              const std::filesystem::path& dir,
                                              const std::string& prefix);
// Loads a model saved by save_model, verifying every hash.
SeededModel load_model(const std::filesystem::path& dir, const std::string& prefix);

// SHA-256 over the concatenated checkpoint encodings of all parts.
std::string model_hash(const SeededModel& model);

}  // namespace sms

#endif  // SMS_JOINT_TRAINING_HPP_
