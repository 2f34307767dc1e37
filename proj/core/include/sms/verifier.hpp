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

#ifndef SMS_VERIFIER_HPP_
#define SMS_VERIFIER_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sms/joint_training.hpp"
#include "sms/nn.hpp"

namespace sms {

// Balanced user-side dataset: row 2i is the clean original (label 0), row
// 2i + 1 its seed-embedded counterpart (label 1).
struct VerificationDataset {
  Tensor inputs;  // [2k x d]
  std::vector<int> labels;

  std::size_t pairs() const { return labels.size() / 2; }
};

// Rows of `clean` and `seeded` must be aligned by original sample.
VerificationDataset build_verification_set(const Tensor& clean, const Tensor& seeded);

struct VerifierConfig {
  SgdConfig sgd{0.01, 16, 50, 0};
  std::vector<std::size_t> hidden = {256, 128, 64, 32};
  double threshold = 0.5;
  double holdout_fraction = 0.25;
  double min_holdout_accuracy = 0.95;
  // Adds Gaussian-blurred (sigma 0.5 px) copies of the positives to training.
  bool blur_positives = false;
};

// User-owned binary classifier over images: P(seed | image).
struct VerifierModel {
  Mlp net;
  int owner = 0;
  double threshold = 0.5;
  double holdout_accuracy = 0.0;

  // P(label 1) for every row.
  std::vector<double> seed_probability(const Tensor& images) const;
  // 1 iff P(seed) > threshold.
  std::vector<int> decide(const Tensor& images) const;
};

// Trains V on raw pairs. V never sees the server model. Holds out a quarter
// of the pairs and throws CalibrationError if accuracy there stays below the
// floor.
VerifierModel train_verifier(const VerificationDataset& dv,
                             const VerifierConfig& cfg, int owner = 0);

// 1 iff V flags the model's reconstruction of x as seeded.
int verify_one(const VerifierModel& v, const SeededModel& model,
               std::span<const double> x);

// One decision per query row, computed on the model's reconstructions.
std::vector<int> verify_batch(const VerifierModel& v, const SeededModel& model,
                              const Tensor& queries);

// Fraction of bits equal to `value`. Empty input throws InputError.
double indicator_mean(std::span<const int> bits, int value = 1);

// Mean of verify_one over seed-embedded queries.
double verifiability(const VerifierModel& v, const SeededModel& model,
                     const Tensor& seeded_queries);

// Mean of (1 - verify_one) over queries carrying other seeds.
double unambiguity(const VerifierModel& v, const SeededModel& model,
                   const Tensor& alt_queries);

struct VerificationOutcome {
  double verifiability = 0.0;
  double unambiguity = 0.0;
  std::vector<int> seeded_decisions;
  std::vector<int> alt_decisions;
};

VerificationOutcome outcome_from(std::vector<int> seeded_decisions,
                                 std::vector<int> alt_decisions);

VerificationOutcome evaluate(const VerifierModel& v, const SeededModel& model,
                             const Tensor& seeded_queries, const Tensor& alt_queries);

// Log of the max softmax probability per row. Monotone in the max
// probability itself but keeps resolution where the probability rounds to 1.
std::vector<double> log_confidence(const Tensor& logits);

// Global-threshold confidence attack. Each set is split in half at random;
// t* maximizes balanced accuracy on the first halves ("member" iff
// confidence >= t*), and the balanced accuracy on the second halves is
// returned. Sets of one element are used for both roles.
double mia_score(std::span<const double> member_conf,
                 std::span<const double> nonmember_conf, std::uint64_t rng_seed);

using LogitsFn = std::function<Tensor(const Tensor&)>;

double mia_score(const LogitsFn& logits, const Tensor& members,
                 const Tensor& nonmembers, std::uint64_t rng_seed);
double mia_score(const SeededModel& model, const Tensor& members,
                 const Tensor& nonmembers, std::uint64_t rng_seed);

// 3x3 Gaussian blur with the given sigma, edges clamped.
Tensor gaussian_blur(const Tensor& images, int side, double sigma);

}  // namespace sms

#endif  // SMS_VERIFIER_HPP_
