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

#include "sms/joint_training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <sstream>

#include "sms/error.hpp"
#include "sms/io.hpp"

namespace sms {
namespace {

constexpr std::size_t kWarmupBatches = 5;
constexpr std::size_t kTimedBatches = 20;
constexpr std::size_t kEvalChunk = 256;

std::vector<std::size_t> widths(std::size_t in, const std::vector<std::size_t>& hidden,
                                std::size_t out) {
  std::vector<std::size_t> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

}  // namespace

SeededModel SeededModel::create(std::size_t input_dim, std::size_t classes,
                                const ModelTopology& topology, Rng& rng,
                                bool with_decoder) {
  SeededModel m;
  const auto enc = widths(input_dim, topology.encoder_hidden, topology.latent);
  const auto cls = widths(topology.latent, topology.classifier_hidden, classes);
  m.encoder = Mlp::glorot(chain(enc, Activation::relu, Activation::relu), rng);
  m.classifier = Mlp::glorot(chain(cls, Activation::relu, Activation::identity), rng);
  if (with_decoder) {
    const auto dec = widths(topology.latent, topology.decoder_hidden, input_dim);
    m.decoder = Mlp::glorot(chain(dec, Activation::relu, Activation::sigmoid), rng);
  }
  return m;
}

ModelOutputs SeededModel::forward(const Tensor& batch) {
  Tensor z = encoder.forward(batch);
  ModelOutputs out;
  out.logits = classifier.forward(z);
  if (has_decoder()) out.recon = decoder.forward(z);
  return out;
}

ModelOutputs SeededModel::infer(const Tensor& batch) const {
  Tensor z = encoder.infer(batch);
  ModelOutputs out;
  out.logits = classifier.infer(z);
  if (has_decoder()) out.recon = decoder.infer(z);
  return out;
}

Tensor SeededModel::logits(const Tensor& batch) const {
  return classifier.infer(encoder.infer(batch));
}

Tensor SeededModel::reconstruct(const Tensor& batch) const {
  if (!has_decoder()) throw StateError("model has no reconstruction head");
  return decoder.infer(encoder.infer(batch));
}

void SeededModel::backward(const Tensor& logits_grad, const Tensor& recon_grad) {
  Tensor dz = classifier.backward(logits_grad);
  if (!recon_grad.empty()) {
    if (!has_decoder()) throw StateError("reconstruction gradient without a decoder");
    Tensor dz_rec = decoder.backward(recon_grad);
    for (std::size_t k = 0; k < dz.size(); ++k) dz[k] += dz_rec[k];
  }
  encoder.backward(dz);
}

void SeededModel::zero_grad() {
  encoder.zero_grad();
  classifier.zero_grad();
  if (has_decoder()) decoder.zero_grad();
}

void SeededModel::sgd_step(double learning_rate) {
  encoder.sgd_step(learning_rate);
  classifier.sgd_step(learning_rate);
  if (has_decoder()) decoder.sgd_step(learning_rate);
}

std::vector<Tensor*> SeededModel::parameters() {
  std::vector<Tensor*> out = encoder.parameters();
  for (Tensor* p : classifier.parameters()) out.push_back(p);
  for (Tensor* p : decoder.parameters()) out.push_back(p);
  return out;
}

void JointWeights::validate() const {
  if (!(alpha_p >= 0.0) || !(alpha_s >= 0.0) || !(alpha_p + alpha_s > 0.0)) {
    throw ParameterError("joint weights need alpha_p, alpha_s >= 0 with a positive sum");
  }
}

JointLoss joint_loss(const Tensor& logits, std::span<const int> labels,
                     const Tensor& recon, const Tensor& inputs,
                     const JointWeights& w) {
  JointLoss out;
  LossResult ce = cross_entropy_loss(logits, labels);
  out.primary = ce.loss;
  out.logits_grad = std::move(ce.grad);
  for (double& g : out.logits_grad.values()) g *= w.alpha_p;
  if (!recon.empty()) {
    LossResult mse = mse_loss(recon, inputs);
    out.self = mse.loss;
    out.recon_grad = std::move(mse.grad);
    for (double& g : out.recon_grad.values()) g *= w.alpha_s;
  }
  out.total = w.alpha_p * out.primary + w.alpha_s * out.self;
  return out;
}

std::string report_csv(const TrainReport& report) {
  std::ostringstream os;
  os << "epoch,primary_loss,self_loss,seconds\n";
  char buf[128];
  for (std::size_t e = 0; e < report.primary_loss.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g,", e + 1, report.primary_loss[e]);
    os << buf;
    if (e < report.self_loss.size()) {
      std::snprintf(buf, sizeof buf, "%.10g", report.self_loss[e]);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, ",%.6f\n",
                  e < report.epoch_seconds.size() ? report.epoch_seconds[e] : 0.0);
    os << buf;
  }
  return os.str();
}

void fit(SeededModel& model, const Dataset& train, const SgdConfig& cfg,
         const JointWeights& w, TrainReport* report, const TrainOptions& options) {
  cfg.validate();
  w.validate();
  if (train.empty()) throw InputError("training set is empty");
  if (train.dim() != model.input_dim()) {
    throw DimensionError("model expects " + std::to_string(model.input_dim()) +
                         " inputs, dataset has " + std::to_string(train.dim()));
  }
  using Clock = std::chrono::steady_clock;
  const bool with_self = model.has_decoder() && w.alpha_s > 0.0;
  Rng rng(derive_seed(cfg.rng_seed, "shuffle"));
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t batches_per_epoch = (train.size() + cfg.batch_size - 1) / cfg.batch_size;

  std::size_t batch_counter = report ? report->total_batches : 0;
  double timed_sum = 0.0;
  std::size_t timed_n = 0;
  std::vector<int> labels;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    rng.shuffle(order);
    double primary_sum = 0.0;
    double self_sum = 0.0;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      const auto batch_start = Clock::now();
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(train.size(), lo + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + lo, hi - lo);
      Tensor x = gather_rows(train.images, idx);
      labels.clear();
      for (std::size_t i : idx) labels.push_back(train.labels[i]);
      try {
        ModelOutputs out = model.forward(x);
        if (!with_self) out.recon = Tensor();
        JointLoss loss = joint_loss(out.logits, labels, out.recon, x, w);
        model.backward(loss.logits_grad, loss.recon_grad);
        model.sgd_step(cfg.learning_rate);
        primary_sum += loss.primary * static_cast<double>(idx.size());
        self_sum += loss.self * static_cast<double>(idx.size());
      } catch (const NumericalError& e) {
        throw TrainingError(std::string("training diverged in epoch ") +
                                std::to_string(epoch) + ": " + e.what(),
                            epoch);
      }
      const double secs = std::chrono::duration<double>(Clock::now() - batch_start).count();
      if (batch_counter >= kWarmupBatches && timed_n < kTimedBatches) {
        timed_sum += secs;
        ++timed_n;
      }
      ++batch_counter;
    }
    const double n = static_cast<double>(train.size());
    if (report) {
      report->primary_loss.push_back(primary_sum / n);
      if (with_self) report->self_loss.push_back(self_sum / n);
      report->epoch_seconds.push_back(
          std::chrono::duration<double>(Clock::now() - epoch_start).count());
      ++report->epochs;
    }
    if (options.on_epoch) options.on_epoch(epoch, model);
  }
  if (report) {
    report->total_batches = batch_counter;
    if (timed_n > 0) report->batch_seconds = timed_sum / static_cast<double>(timed_n);
    report->running_time = report->batch_seconds * static_cast<double>(report->total_batches);
    if (options.test) report->test_accuracy = accuracy(model, *options.test);
  }
}

std::pair<SeededModel, TrainReport> train_joint(const Dataset& train,
                                                const SgdConfig& cfg,
                                                const JointWeights& w,
                                                const TrainOptions& options) {
  cfg.validate();
  w.validate();
  if (train.empty()) throw InputError("training set is empty");
  Rng init(derive_seed(cfg.rng_seed, "init"));
  SeededModel model = SeededModel::create(train.dim(),
                                          static_cast<std::size_t>(train.class_count),
                                          options.topology, init, true);
  TrainReport report;
  fit(model, train, cfg, w, &report, options);
  return {std::move(model), std::move(report)};
}

std::pair<SeededModel, TrainReport> train_primary_only(const Dataset& train,
                                                       const SgdConfig& cfg,
                                                       const TrainOptions& options) {
  cfg.validate();
  if (train.empty()) throw InputError("training set is empty");
  Rng init(derive_seed(cfg.rng_seed, "init"));
  SeededModel model = SeededModel::create(train.dim(),
                                          static_cast<std::size_t>(train.class_count),
                                          options.topology, init, false);
  TrainReport report;
  fit(model, train, cfg, JointWeights{1.0, 0.0}, &report, options);
  return {std::move(model), std::move(report)};
}

std::vector<std::size_t> predict(const SeededModel& model, const Tensor& inputs) {
  std::vector<std::size_t> out;
  out.reserve(inputs.rows());
  std::vector<std::size_t> idx;
  for (std::size_t lo = 0; lo < inputs.rows(); lo += kEvalChunk) {
    const std::size_t hi = std::min(inputs.rows(), lo + kEvalChunk);
    idx.clear();
    for (std::size_t i = lo; i < hi; ++i) idx.push_back(i);
    const auto pred = argmax_rows(model.logits(gather_rows(inputs, idx)));
    out.insert(out.end(), pred.begin(), pred.end());
  }
  return out;
}

double accuracy(const SeededModel& model, const Dataset& ds) {
  if (ds.empty()) return 0.0;
  const auto pred = predict(model, ds.images);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (static_cast<int>(pred[i]) == ds.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

std::vector<std::filesystem::path> save_model(const SeededModel& model,
                                              const std::filesystem::path& dir,
                                              const std::string& prefix) {
  std::vector<std::filesystem::path> written;
  nlohmann::ordered_json manifest;
  auto put = [&](const Mlp& part, const std::string& name) {
    const std::string bytes = encode_mlp(part);
    const std::filesystem::path path = dir / (prefix + "_" + name + ".bin");
    write_file(path, bytes);
    manifest["parts"][name] = {{"file", path.filename().string()},
                               {"sha256", sha256_hex(bytes)}};
    written.push_back(path);
  };
  put(model.encoder, "encoder");
  put(model.classifier, "classifier");
  if (model.has_decoder()) put(model.decoder, "decoder");
  const std::filesystem::path mpath = dir / (prefix + "_manifest.json");
  write_file(mpath, manifest.dump(2) + "\n");
  written.push_back(mpath);
  return written;
}

SeededModel load_model(const std::filesystem::path& dir, const std::string& prefix) {
  const std::filesystem::path mpath = dir / (prefix + "_manifest.json");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(mpath));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(mpath.string() + ": " + e.what(), 0);
  }
  auto get = [&](const std::string& name) -> Mlp {
    if (!manifest["parts"].contains(name)) return Mlp();
    const auto& entry = manifest["parts"][name];
    const std::string bytes = read_file(dir / entry["file"].get<std::string>());
    if (sha256_hex(bytes) != entry["sha256"].get<std::string>()) {
      throw IntegrityError("checkpoint " + entry["file"].get<std::string>() +
                           " does not match its recorded hash");
    }
    return decode_mlp(bytes);
  };
  SeededModel m;
  m.encoder = get("encoder");
  m.classifier = get("classifier");
  m.decoder = get("decoder");
  if (m.encoder.empty() || m.classifier.empty()) {
    throw FormatError(mpath.string() + ": missing encoder or classifier", 0);
  }
  return m;
}

std::string model_hash(const SeededModel& model) {
  std::string bytes = encode_mlp(model.encoder);
  bytes += encode_mlp(model.classifier);
  if (model.has_decoder()) bytes += encode_mlp(model.decoder);
  return sha256_hex(bytes);
}

}  // namespace sms
