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

#include <benchmark/benchmark.h>

#include <vector>

#include "sms/datasets.hpp"
#include "sms/io.hpp"
#include "sms/joint_training.hpp"
#include "sms/seeding.hpp"
#include "sms/verifier.hpp"

namespace {

sms::Tensor random_batch(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  sms::Rng rng(seed);
  sms::Tensor t = sms::Tensor::matrix(rows, cols);
  for (double& v : t.values()) v = rng.uniform();
  return t;
}

void BM_JointStep(benchmark::State& state) {
  const std::size_t batch = static_cast<std::size_t>(state.range(0));
  sms::Rng rng(1);
  sms::SeededModel m = sms::SeededModel::create(144, 10, {}, rng);
  const sms::Tensor x = random_batch(batch, 144, 2);
  std::vector<int> y(batch);
  for (std::size_t i = 0; i < batch; ++i) y[i] = static_cast<int>(i % 10);
  const sms::JointWeights w{1.0, 1000.0};
  for (auto _ : state) {
    m.zero_grad();
    const sms::ModelOutputs o = m.forward(x);
    const sms::JointLoss l = sms::joint_loss(o.logits, y, o.recon, x, w);
    m.backward(l.logits_grad, l.recon_grad);
    m.sgd_step(1e-6);
    benchmark::DoNotOptimize(l.total);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(batch));
}
BENCHMARK(BM_JointStep)->Arg(16)->Arg(64);

void BM_PrimaryOnlyStep(benchmark::State& state) {
  sms::Rng rng(1);
  sms::SeededModel m = sms::SeededModel::create(144, 10, {}, rng, false);
  const sms::Tensor x = random_batch(16, 144, 2);
  std::vector<int> y(16);
  for (std::size_t i = 0; i < 16; ++i) y[i] = static_cast<int>(i % 10);
  for (auto _ : state) {
    m.zero_grad();
    const sms::ModelOutputs o = m.forward(x);
    const sms::JointLoss l = sms::joint_loss(o.logits, y, o.recon, x, {1.0, 0.0});
    m.backward(l.logits_grad, l.recon_grad);
    m.sgd_step(1e-6);
    benchmark::DoNotOptimize(l.total);
  }
}
BENCHMARK(BM_PrimaryOnlyStep);

void BM_Blend(benchmark::State& state) {
  const sms::Seed s = sms::generate_seed(0, 16, 28, 3, sms::Placement::bottom_right);
  const sms::SeedMask mask = sms::SeedMask::on_support(s, 0.6);
  const sms::Tensor x = random_batch(1, 784, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sms::blend(x.values(), s.pattern.values(), mask));
  }
}
BENCHMARK(BM_Blend);

void BM_GenerateSeed(benchmark::State& state) {
  std::uint64_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sms::generate_seed(0, 16, 28, ++i, sms::Placement::bottom_right));
  }
}
BENCHMARK(BM_GenerateSeed);

void BM_Sha256(benchmark::State& state) {
  const std::string bytes(static_cast<std::size_t>(state.range(0)), 'x');
  for (auto _ : state) benchmark::DoNotOptimize(sms::sha256_hex(bytes));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Sha256)->Arg(1 << 10)->Arg(1 << 20);

void BM_VerifierDecide(benchmark::State& state) {
  sms::Rng rng(5);
  const std::vector<std::size_t> widths = {144, 256, 128, 64, 32, 2};
  sms::VerifierModel v;
  v.net = sms::Mlp::glorot(
      sms::chain(widths, sms::Activation::relu, sms::Activation::identity), rng);
  const sms::Tensor q = random_batch(100, 144, 6);
  for (auto _ : state) benchmark::DoNotOptimize(v.decide(q));
}
BENCHMARK(BM_VerifierDecide);

void BM_MiaScore(benchmark::State& state) {
  sms::Rng rng(7);
  std::vector<double> a(500), b(500);
  for (double& v : a) v = rng.normal();
  for (double& v : b) v = rng.normal() - 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(sms::mia_score(a, b, 3));
}
BENCHMARK(BM_MiaScore);

}  // namespace

BENCHMARK_MAIN();
