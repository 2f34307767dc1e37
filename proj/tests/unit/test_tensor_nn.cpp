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
#include <vector>

#include "sms/error.hpp"
#include "sms/joint_training.hpp"
#include "sms/nn.hpp"
#include "sms/rng.hpp"

namespace sms {
namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double lo = 0.0,
                     double hi = 1.0) {
  Rng rng(seed);
  Tensor t = Tensor::matrix(r, c);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Central differences of a scalar function of a tensor's entries.
std::vector<double> numeric_grad(Tensor x, const std::function<double(const Tensor&)>& f) {
  std::vector<double> g(x.size());
  const double h = 1e-6;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

TEST(Tensor, ShapeAndRowAccess) {
  Tensor t = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(t.at(1, 2), 6.0);
  EXPECT_EQ(t.row(1)[0], 4.0);
  const Tensor v = Tensor::vector({7, 8});
  EXPECT_EQ(v.rows(), 1u);
  EXPECT_EQ(v.cols(), 2u);
}

TEST(Tensor, GatherRowsCopiesSelectedRows) {
  const Tensor t = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
  const std::vector<std::size_t> pick = {2, 0};
  const Tensor g = gather_rows(t, pick);
  EXPECT_EQ(g, Tensor::matrix(2, 2, {5, 6, 1, 2}));
}

TEST(Tensor, RequireFiniteNamesTheSite) {
  Tensor t = Tensor::vector({1.0, std::nan("")});
  EXPECT_FALSE(t.all_finite());
  try {
    require_finite(t, "unit-site");
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("unit-site"), std::string::npos);
  }
}

TEST(Softmax, RowsSumToOneAndSurviveLargeLogits) {
  const Tensor logits = Tensor::matrix(2, 3, {1000, 1001, 1002, -5, 0, 5});
  const Tensor p = softmax(logits);
  for (std::size_t r = 0; r < 2; ++r) {
    double s = 0;
    for (double v : p.row(r)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_TRUE(p.all_finite());
  EXPECT_NEAR(p.at(0, 2), 0.665240955774822, 1e-12);  // softmax(0, 1, 2) by shift invariance
}

TEST(CrossEntropy, UniformLogitsGiveLogC) {
  const Tensor logits = Tensor::matrix(2, 4, 0.0);
  const std::vector<int> y = {0, 3};
  EXPECT_NEAR(cross_entropy_loss(logits, y).loss, std::log(4.0), 1e-12);
}

TEST(CrossEntropy, GradientMatchesCentralDifferences) {
  const Tensor logits = random_matrix(3, 5, 2, -2, 2);
  const std::vector<int> y = {4, 0, 2};
  const auto analytic = cross_entropy_loss(logits, y).grad;
  const auto numeric =
      numeric_grad(logits, [&](const Tensor& z) { return cross_entropy_loss(z, y).loss; });
  for (std::size_t i = 0; i < numeric.size(); ++i) EXPECT_NEAR(analytic[i], numeric[i], 1e-7);
}

TEST(Mse, MeanOverAllElements) {
  const Tensor pred = Tensor::matrix(1, 2, {1.0, 0.0});
  const Tensor target = Tensor::matrix(1, 2, {0.0, 0.0});
  const auto r = mse_loss(pred, target);
  EXPECT_DOUBLE_EQ(r.loss, 0.5);
  EXPECT_DOUBLE_EQ(r.grad[0], 1.0);  // 2 * (1 - 0) / (B * d)
  EXPECT_DOUBLE_EQ(r.grad[1], 0.0);
}

TEST(Mse, GradientMatchesCentralDifferences) {
  const Tensor pred = random_matrix(4, 3, 3);
  const Tensor target = random_matrix(4, 3, 4);
  const auto analytic = mse_loss(pred, target).grad;
  const auto numeric =
      numeric_grad(pred, [&](const Tensor& p) { return mse_loss(p, target).loss; });
  for (std::size_t i = 0; i < numeric.size(); ++i) EXPECT_NEAR(analytic[i], numeric[i], 1e-8);
}

TEST(Mse, ShapeMismatchThrows) {
  EXPECT_THROW(mse_loss(Tensor::matrix(2, 2), Tensor::matrix(2, 3)), DimensionError);
}

TEST(Glorot, WeightsWithinLimitAndBiasZero) {
  Rng rng(5);
  const std::vector<std::size_t> widths = {20, 30, 10};
  const Mlp m = Mlp::glorot(chain(widths, Activation::relu, Activation::identity), rng);
  ASSERT_EQ(m.layers().size(), 2u);
  for (const DenseLayer& l : m.layers()) {
    const double limit = std::sqrt(6.0 / static_cast<double>(l.in_dim() + l.out_dim()));
    for (double w : l.weights.values()) EXPECT_LE(std::abs(w), limit);
    for (double b : l.bias.values()) EXPECT_EQ(b, 0.0);
  }
  EXPECT_EQ(m.parameter_count(), 20u * 30 + 30 + 30 * 10 + 10);
}

class MlpGradCheck : public ::testing::TestWithParam<Activation> {};

TEST_P(MlpGradCheck, BackwardMatchesFiniteDifferences) {
  Rng rng(6);
  const std::vector<std::size_t> widths = {6, 7, 5, 3};
  Mlp m = Mlp::glorot(chain(widths, GetParam(), Activation::identity), rng);
  const Tensor x = random_matrix(4, 6, 7);
  const std::vector<int> y = {0, 1, 2, 1};
  const auto report =
      finite_diff_check(m, x, [&](const Tensor& out) { return cross_entropy_loss(out, y); });
  EXPECT_TRUE(report.passed) << report.worst << " " << report.max_rel_error;
  EXPECT_LE(report.max_rel_error, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Activations, MlpGradCheck,
                         ::testing::Values(Activation::relu, Activation::sigmoid,
                                           Activation::identity));

TEST(Mlp, InferMatchesForward) {
  Rng rng(8);
  const std::vector<std::size_t> widths = {4, 6, 2};
  Mlp m = Mlp::glorot(chain(widths, Activation::relu, Activation::sigmoid), rng);
  const Tensor x = random_matrix(3, 4, 9);
  EXPECT_EQ(m.forward(x), m.infer(x));
}

TEST(Mlp, WrongInputWidthThrows) {
  Rng rng(8);
  const std::vector<std::size_t> widths = {4, 2};
  Mlp m = Mlp::glorot(chain(widths, Activation::relu, Activation::identity), rng);
  EXPECT_THROW(m.infer(Tensor::matrix(1, 5)), DimensionError);
}

TEST(Sgd, StepMovesAgainstGradientAndClearsIt) {
  std::vector<double> p = {1.0, -2.0};
  std::vector<double> g = {0.5, -1.0};
  sgd_step(p, g, 0.1);
  EXPECT_DOUBLE_EQ(p[0], 0.95);
  EXPECT_DOUBLE_EQ(p[1], -1.9);
  EXPECT_EQ(g, (std::vector<double>{0.0, 0.0}));
}

TEST(SgdConfig, ValidateRejectsBadValues) {
  EXPECT_THROW((SgdConfig{0.0, 16, 1, 0}.validate()), ParameterError);
  EXPECT_THROW((SgdConfig{0.1, 0, 1, 0}.validate()), ParameterError);
  EXPECT_THROW((SgdConfig{0.1, 16, 0, 0}.validate()), ParameterError);
  EXPECT_NO_THROW((SgdConfig{0.1, 16, 1, 0}.validate()));
}

TEST(Rng, DeriveSeedSeparatesStagesAndIndices) {
  EXPECT_EQ(derive_seed(1, "train", 0), derive_seed(1, "train", 0));
  EXPECT_NE(derive_seed(1, "train", 0), derive_seed(1, "train", 1));
  EXPECT_NE(derive_seed(1, "train", 0), derive_seed(1, "split", 0));
  EXPECT_NE(derive_seed(1, "train", 0), derive_seed(2, "train", 0));
}

TEST(Rng, PermutationIsABijection) {
  Rng rng(3);
  auto p = rng.permutation(100);
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], i);
}

TEST(Rng, Fnv1aKnownVector) {
  // FNV-1a 64 of "a".
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
}

}  // namespace
}  // namespace sms
