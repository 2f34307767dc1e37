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

#include "sms/datasets.hpp"
#include "sms/error.hpp"
#include "sms/rng.hpp"
#include "sms/seeding.hpp"
#include "sms/verifier.hpp"

namespace sms {
namespace {

struct UserPairs {
  Tensor clean;
  Tensor seeded;
  Seed seed;
};

UserPairs make_pairs(std::size_t n, double ser, std::uint64_t rng_seed = 1) {
  const Dataset ds = synth_digits(static_cast<int>((n + 9) / 10), 12, 10, rng_seed);
  UserPairs p;
  p.seed = generate_seed(0, 16, 12, rng_seed);
  p.clean = Tensor::matrix(n, 144);
  p.seeded = Tensor::matrix(n, 144);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(ds.images.row(i).begin(), ds.images.row(i).end(), p.clean.row(i).begin());
    const Tensor b =
        blend(ds.images.row(i), p.seed.pattern.values(), SeedMask::on_support(p.seed, ser));
    std::copy(b.values().begin(), b.values().end(), p.seeded.row(i).begin());
  }
  return p;
}

VerifierConfig quick_config() {
  VerifierConfig c;
  c.sgd = SgdConfig{0.01, 16, 20, 3};
  return c;
}

TEST(VerificationSet, InterleavesPairs) {
  const UserPairs p = make_pairs(3, 0.6);
  const VerificationDataset dv = build_verification_set(p.clean, p.seeded);
  EXPECT_EQ(dv.inputs.rows(), 6u);
  EXPECT_EQ(dv.labels, (std::vector<int>{0, 1, 0, 1, 0, 1}));
  EXPECT_EQ(dv.pairs(), 3u);
}

TEST(VerificationSet, PositivesDifferOnlyOnSupport) {
  const UserPairs p = make_pairs(5, 0.6);
  const VerificationDataset dv = build_verification_set(p.clean, p.seeded);
  const auto sup = p.seed.support();
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t k = 0; k < 144; ++k) {
      const bool differs = dv.inputs.at(2 * i, k) != dv.inputs.at(2 * i + 1, k);
      if (differs) EXPECT_TRUE(std::find(sup.begin(), sup.end(), k) != sup.end());
    }
  }
}

TEST(VerificationSet, BadInputs) {
  EXPECT_THROW(build_verification_set(Tensor::matrix(0, 4), Tensor::matrix(0, 4)), InputError);
  EXPECT_THROW(build_verification_set(Tensor::matrix(2, 4), Tensor::matrix(3, 4)), InputError);
  EXPECT_THROW(build_verification_set(Tensor::matrix(2, 4), Tensor::matrix(2, 5)),
               DimensionError);
}

TEST(TrainVerifier, CalibratesOnDefaultSeedSettings) {
  const UserPairs p = make_pairs(200, 0.6);
  const VerifierModel v =
      train_verifier(build_verification_set(p.clean, p.seeded), quick_config(), 0);
  EXPECT_GE(v.holdout_accuracy, 0.95);
  EXPECT_EQ(v.owner, 0);
  const auto seeded_bits = v.decide(p.seeded);
  EXPECT_GE(indicator_mean(seeded_bits, 1), 0.9);
  // A featureless mid-grey reconstruction is not evidence of the seed.
  EXPECT_EQ(v.decide(Tensor::matrix(1, 144, 0.5)).front(), 0);
}

TEST(TrainVerifier, IndistinguishableClassesFailCalibration) {
  const UserPairs p = make_pairs(40, 0.0);
  EXPECT_THROW(train_verifier(build_verification_set(p.clean, p.seeded), quick_config(), 0),
               CalibrationError);
}

TEST(TrainVerifier, DeterministicUnderFixedSeed) {
  const UserPairs p = make_pairs(200, 0.6);
  const auto dv = build_verification_set(p.clean, p.seeded);
  const VerifierModel a = train_verifier(dv, quick_config(), 0);
  const VerifierModel b = train_verifier(dv, quick_config(), 0);
  EXPECT_TRUE(a.net == b.net);
}

TEST(TrainVerifier, BadThresholdRejected) {
  const UserPairs p = make_pairs(4, 0.6);
  VerifierConfig c = quick_config();
  c.threshold = 1.0;
  EXPECT_THROW(train_verifier(build_verification_set(p.clean, p.seeded), c, 0), ParameterError);
}

TEST(Rates, ExactIndicatorMeans) {
  EXPECT_DOUBLE_EQ(indicator_mean(std::vector<int>{1, 1, 1}, 1), 1.0);
  EXPECT_DOUBLE_EQ(indicator_mean(std::vector<int>{1, 0, 1, 0}, 1), 0.5);
  EXPECT_THROW(indicator_mean(std::vector<int>{}, 1), InputError);
  const VerificationOutcome o = outcome_from({1, 1, 0, 1}, {0, 0, 1, 0, 0});
  EXPECT_DOUBLE_EQ(o.verifiability, 0.75);
  EXPECT_DOUBLE_EQ(o.unambiguity, 0.8);
}

TEST(Rates, ThresholdMonotonicity) {
  Rng rng(9);
  ModelTopology topo;
  topo.encoder_hidden = {16};
  topo.latent = 8;
  topo.decoder_hidden = {16};
  const SeededModel m = SeededModel::create(144, 10, topo, rng);
  VerifierModel v;
  const std::vector<std::size_t> widths = {144, 32, 2};
  v.net = Mlp::glorot(chain(widths, Activation::relu, Activation::identity), rng);
  const UserPairs p = make_pairs(50, 0.6);
  double prev_ver = 2.0;
  double prev_unamb = -1.0;
  for (double t = 0.05; t < 1.0; t += 0.05) {
    v.threshold = t;
    const double ver = verifiability(v, m, p.seeded);
    const double unamb = unambiguity(v, m, p.clean);
    EXPECT_LE(ver, prev_ver);
    EXPECT_GE(unamb, prev_unamb);
    prev_ver = ver;
    prev_unamb = unamb;
  }
}

TEST(Rates, AltSeedEqualToTrueSeedCollapsesUnambiguity) {
  Rng rng(10);
  const SeededModel m = SeededModel::create(144, 10, {}, rng);
  VerifierModel v;
  const std::vector<std::size_t> widths = {144, 8, 2};
  v.net = Mlp::glorot(chain(widths, Activation::relu, Activation::identity), rng);
  const UserPairs p = make_pairs(30, 0.6);
  const VerificationOutcome o = evaluate(v, m, p.seeded, p.seeded);
  EXPECT_DOUBLE_EQ(o.unambiguity, 1.0 - o.verifiability);
}

TEST(Mia, LogConfidenceMatchesDirectComputation) {
  const Tensor logits = Tensor::matrix(2, 3, {1.0, 2.0, 3.0, -1.0, 5.0, 0.0});
  const auto got = log_confidence(logits);
  const Tensor p = softmax(logits);
  EXPECT_NEAR(got[0], std::log(p.at(0, 2)), 1e-12);
  EXPECT_NEAR(got[1], std::log(p.at(1, 1)), 1e-12);
}

TEST(Mia, ExtremesAndBounds) {
  const std::vector<double> hi(20, 1.0), lo(20, -1.0);
  EXPECT_DOUBLE_EQ(mia_score(hi, lo, 1), 1.0);
  EXPECT_DOUBLE_EQ(mia_score(hi, hi, 1), 0.5);
  EXPECT_THROW(mia_score(std::vector<double>{}, lo, 1), InputError);
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(15), b(23);
    for (double& v : a) v = rng.normal();
    for (double& v : b) v = rng.normal();
    const double s = mia_score(a, b, static_cast<std::uint64_t>(trial));
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(Mia, InvariantUnderIncreasingTransforms) {
  Rng rng(4);
  std::vector<double> a(40), b(40);
  for (double& v : a) v = rng.normal() + 0.5;
  for (double& v : b) v = rng.normal();
  std::vector<double> ea(a.size()), eb(b.size());
  std::transform(a.begin(), a.end(), ea.begin(), [](double v) { return std::exp(v); });
  std::transform(b.begin(), b.end(), eb.begin(), [](double v) { return std::exp(v); });
  EXPECT_DOUBLE_EQ(mia_score(a, b, 5), mia_score(ea, eb, 5));
}

TEST(Mia, SingletonsServeBothRoles) {
  EXPECT_DOUBLE_EQ(mia_score(std::vector<double>{2.0}, std::vector<double>{1.0}, 1), 1.0);
}

TEST(Blur, ConstantImageUnchangedAndImpulseMatchesKernel) {
  const Tensor flat = Tensor::matrix(1, 25, 0.3);
  const Tensor out = gaussian_blur(flat, 5, 0.5);
  for (double v : out.values()) EXPECT_NEAR(v, 0.3, 1e-12);

  Tensor impulse = Tensor::matrix(1, 25, 0.0);
  impulse[12] = 1.0;
  const Tensor b = gaussian_blur(impulse, 5, 0.5);
  const double w = std::exp(-1.0 / (2 * 0.25));
  const double z = (1 + 2 * w) * (1 + 2 * w);
  EXPECT_NEAR(b[12], 1.0 / z, 1e-12);
  EXPECT_NEAR(b[7], w / z, 1e-12);
  EXPECT_NEAR(b[6], w * w / z, 1e-12);
  EXPECT_EQ(b[0], 0.0);
  EXPECT_THROW(gaussian_blur(impulse, 4, 0.5), DimensionError);
}

}  // namespace
}  // namespace sms
