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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "sms/datasets.hpp"
#include "sms/error.hpp"
#include "sms/io.hpp"
#include "sms/joint_training.hpp"
#include "sms/rng.hpp"

namespace sms {
namespace {

namespace fs = std::filesystem;

ModelTopology tiny_topology() {
  ModelTopology t;
  t.encoder_hidden = {12};
  t.latent = 8;
  t.classifier_hidden = {6};
  t.decoder_hidden = {12};
  return t;
}

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t = Tensor::matrix(r, c);
  for (double& v : t.values()) v = rng.uniform();
  return t;
}

TEST(SeededModel, DefaultTopologyShapes) {
  Rng rng(1);
  const SeededModel m = SeededModel::create(144, 10, {}, rng);
  EXPECT_EQ(m.input_dim(), 144u);
  EXPECT_EQ(m.classes(), 10u);
  EXPECT_EQ(m.encoder.output_dim(), 64u);
  EXPECT_EQ(m.decoder.output_dim(), 144u);
  const ModelOutputs o = m.infer(Tensor::matrix(3, 144, 0.5));
  EXPECT_EQ(o.logits.cols(), 10u);
  ASSERT_EQ(o.recon.cols(), 144u);
  for (double v : o.recon.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(SeededModel, PrimaryOnlyHasNoDecoder) {
  Rng rng(1);
  const SeededModel m = SeededModel::create(16, 3, tiny_topology(), rng, false);
  EXPECT_FALSE(m.has_decoder());
  EXPECT_TRUE(m.infer(Tensor::matrix(2, 16)).recon.empty());
}

TEST(JointLoss, CombinesWeightedTerms) {
  const Tensor logits = Tensor::matrix(1, 2, {0.0, 0.0});
  const std::vector<int> y = {1};
  const Tensor recon = Tensor::matrix(1, 2, {1.0, 0.0});
  const Tensor x = Tensor::matrix(1, 2, {0.0, 0.0});
  const JointLoss l = joint_loss(logits, y, recon, x, {2.0, 3.0});
  EXPECT_NEAR(l.primary, std::log(2.0), 1e-12);
  EXPECT_DOUBLE_EQ(l.self, 0.5);
  EXPECT_NEAR(l.total, 2.0 * std::log(2.0) + 1.5, 1e-12);
}

TEST(JointLoss, GradientsScaleLinearlyWithAlphas) {
  const Tensor logits = random_matrix(4, 3, 1);
  const std::vector<int> y = {0, 2, 1, 1};
  const Tensor recon = random_matrix(4, 5, 2);
  const Tensor x = random_matrix(4, 5, 3);
  const JointLoss base = joint_loss(logits, y, recon, x, {1.0, 1.0});
  for (double a : {0.5, 2.0, 7.0}) {
    const JointLoss l = joint_loss(logits, y, recon, x, {a, 3.0 * a});
    for (std::size_t i = 0; i < base.logits_grad.size(); ++i) {
      EXPECT_NEAR(l.logits_grad[i], a * base.logits_grad[i], 1e-12);
    }
    for (std::size_t i = 0; i < base.recon_grad.size(); ++i) {
      EXPECT_NEAR(l.recon_grad[i], 3.0 * a * base.recon_grad[i], 1e-12);
    }
  }
}

TEST(JointLoss, ZeroSelfWeightIsPlainCrossEntropy) {
  const Tensor logits = random_matrix(3, 4, 4);
  const std::vector<int> y = {0, 1, 3};
  const JointLoss l = joint_loss(logits, y, random_matrix(3, 6, 5), random_matrix(3, 6, 6),
                                 {1.0, 0.0});
  EXPECT_DOUBLE_EQ(l.total, cross_entropy_loss(logits, y).loss);
}

TEST(JointWeights, ValidateRejectsNegativeAndZeroSum) {
  EXPECT_THROW((JointWeights{-1.0, 1.0}.validate()), ParameterError);
  EXPECT_THROW((JointWeights{0.0, 0.0}.validate()), ParameterError);
  EXPECT_NO_THROW((JointWeights{0.0, 1.0}.validate()));
}

TEST(SeededModel, JointBackwardMatchesFiniteDifferences) {
  Rng rng(7);
  SeededModel m = SeededModel::create(10, 3, tiny_topology(), rng);
  const Tensor x = random_matrix(5, 10, 8);
  const std::vector<int> y = {0, 1, 2, 0, 1};
  const JointWeights w{1.0, 4.0};
  auto params = m.parameters();
  const auto g = finite_diff_check(
      params,
      [&] {
        const ModelOutputs o = m.infer(x);
        return joint_loss(o.logits, y, o.recon, x, w).total;
      },
      [&] {
        m.zero_grad();
        const ModelOutputs o = m.forward(x);
        const JointLoss l = joint_loss(o.logits, y, o.recon, x, w);
        m.backward(l.logits_grad, l.recon_grad);
      });
  EXPECT_TRUE(g.passed) << g.worst;
  EXPECT_LE(g.max_rel_error, 1e-4);
}

TEST(Train, DeterministicAndLearns) {
  const Dataset ds = synth_digits(12, 8, 10, 3);
  const SgdConfig cfg{0.05, 16, 6, 11};
  TrainOptions opt;
  opt.topology = tiny_topology();
  auto [a, ra] = train_joint(ds, cfg, {1.0, 1.0}, opt);
  auto [b, rb] = train_joint(ds, cfg, {1.0, 1.0}, opt);
  EXPECT_TRUE(a == b);
  EXPECT_EQ(ra.primary_loss, rb.primary_loss);
  ASSERT_EQ(ra.primary_loss.size(), 6u);
  ASSERT_EQ(ra.self_loss.size(), 6u);
  EXPECT_LT(ra.primary_loss.back(), ra.primary_loss.front());
  EXPECT_GT(ra.running_time, 0.0);
  EXPECT_EQ(ra.total_batches, 6u * 8u);  // ceil(120 / 16) = 8 per epoch
}

TEST(Train, PrimaryOnlyReportHasNoSelfLoss) {
  const Dataset ds = synth_digits(6, 8, 10, 3);
  TrainOptions opt;
  opt.topology = tiny_topology();
  opt.test = &ds;
  auto [m, r] = train_primary_only(ds, {0.05, 16, 2, 1}, opt);
  EXPECT_FALSE(m.has_decoder());
  EXPECT_TRUE(r.self_loss.empty());
  EXPECT_GE(r.test_accuracy, 0.0);
  EXPECT_NE(report_csv(r).find("epoch,primary_loss"), std::string::npos);
}

TEST(Train, DivergenceRaisesTrainingError) {
  const Dataset ds = synth_digits(6, 8, 10, 3);
  TrainOptions opt;
  opt.topology = tiny_topology();
  EXPECT_THROW(train_joint(ds, {1e300, 16, 3, 1}, {1.0, 1.0}, opt), TrainingError);
}

TEST(Accuracy, MatchesPredictions) {
  const Dataset ds = synth_digits(4, 8, 10, 3);
  Rng rng(2);
  const SeededModel m = SeededModel::create(64, 10, tiny_topology(), rng);
  const auto pred = predict(m, ds.images);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) hits += static_cast<int>(pred[i]) == ds.labels[i];
  EXPECT_DOUBLE_EQ(accuracy(m, ds), static_cast<double>(hits) / ds.size());
}

TEST(Checkpoints, SaveLoadAndTamperDetection) {
  Rng rng(3);
  const SeededModel m = SeededModel::create(16, 4, tiny_topology(), rng);
  const fs::path dir = fs::temp_directory_path() / "sms_joint_ckpt";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto paths = save_model(m, dir, "unit");
  ASSERT_EQ(paths.size(), 4u);
  EXPECT_EQ(paths.back().filename(), "unit_manifest.json");
  const SeededModel back = load_model(dir, "unit");
  EXPECT_TRUE(back == m);
  EXPECT_EQ(model_hash(back), model_hash(m));

  std::string enc = read_file(dir / "unit_encoder.bin");
  enc[enc.size() - 1] ^= 1;
  write_file(dir / "unit_encoder.bin", enc);
  EXPECT_THROW(load_model(dir, "unit"), IntegrityError);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace sms
