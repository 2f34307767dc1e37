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

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <unistd.h>

#include "sms/experiment.hpp"
#include "sms/io.hpp"
#include "sms/rng.hpp"
#include "sms/verifier.hpp"

namespace sms {
namespace {

namespace fs = std::filesystem;

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t = Tensor::matrix(r, c);
  for (double& v : t.values()) v = rng.uniform();
  return t;
}

std::string grad_detail(const GradCheckReport& g) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "max rel err %.2e over %zu params", g.max_rel_error,
                g.checked);
  return buf;
}

struct Check {
  const char* name;
  std::function<std::pair<bool, std::string>()> body;
};

std::pair<bool, std::string> check_ce_grad() {
  Rng rng(11);
  Mlp net = Mlp::glorot(chain(std::vector<std::size_t>{6, 5, 4}, Activation::relu,
                              Activation::identity),
                        rng);
  const Tensor x = random_matrix(3, 6, rng);
  const std::vector<int> y = {0, 3, 1};
  const auto g = finite_diff_check(net, x, [&](const Tensor& out) {
    return cross_entropy_loss(out, y);
  });
  return {g.passed, grad_detail(g)};
}

std::pair<bool, std::string> check_mse_grad() {
  Rng rng(12);
  Mlp net = Mlp::glorot(chain(std::vector<std::size_t>{5, 4, 5}, Activation::relu,
                              Activation::sigmoid),
                        rng);
  const Tensor x = random_matrix(4, 5, rng);
  const auto g = finite_diff_check(net, x, [&](const Tensor& out) { return mse_loss(out, x); });
  return {g.passed, grad_detail(g)};
}

std::pair<bool, std::string> check_joint_grad() {
  Rng rng(13);
  ModelTopology topo;
  topo.encoder_hidden = {7};
  topo.latent = 5;
  topo.classifier_hidden = {4};
  topo.decoder_hidden = {6};
  SeededModel m = SeededModel::create(9, 3, topo, rng);
  const Tensor x = random_matrix(4, 9, rng);
  const std::vector<int> y = {0, 2, 1, 2};
  const JointWeights w{0.7, 2.5};
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
  return {g.passed, grad_detail(g)};
}

std::pair<bool, std::string> check_verifier_grad() {
  Rng rng(14);
  const std::vector<std::size_t> widths = {16, 12, 10, 8, 6, 2};
  Mlp net = Mlp::glorot(chain(widths, Activation::relu, Activation::identity), rng);
  const Tensor x = random_matrix(5, 16, rng);
  const std::vector<int> y = {0, 1, 1, 0, 1};
  const auto g = finite_diff_check(net, x, [&](const Tensor& out) {
    return cross_entropy_loss(out, y);
  });
  return {g.passed, grad_detail(g)};
}

std::pair<bool, std::string> check_metrics() {
  const std::vector<int> bits = {1, 0, 1, 1};
  bool ok = indicator_mean(bits, 1) == 0.75 && indicator_mean(bits, 0) == 0.25;
  const std::vector<double> hi(40, 5.0);
  const std::vector<double> lo(40, -5.0);
  ok = ok && mia_score(hi, lo, 3) == 1.0;
  const std::vector<double> same(40, 1.0);
  const double chance = mia_score(same, same, 3);
  ok = ok && std::abs(chance - 0.5) < 1e-12;
  return {ok, ok ? "indicator means and MIA extremes hold" : "metric identity violated"};
}

std::pair<bool, std::string> check_blend() {
  Rng rng(15);
  const Seed s = generate_seed(3, 16, 12, 99, Placement::bottom_right);
  const std::size_t d = s.pattern.size();
  bool ok = s.support().size() == 16;
  for (int trial = 0; trial < 50 && ok; ++trial) {
    std::vector<double> x(d);
    for (double& v : x) v = rng.uniform();
    const Tensor x0 = blend(x, s.pattern.values(), SeedMask::scalar(0.0));
    const Tensor x1 = blend(x, s.pattern.values(), SeedMask::scalar(1.0));
    const Tensor xv = blend(x, s.pattern.values(), SeedMask::scalar(rng.uniform()));
    for (std::size_t i = 0; i < d; ++i) {
      ok = ok && x0[i] == x[i] && x1[i] == s.pattern[i] && xv[i] >= 0.0 && xv[i] <= 1.0;
    }
    const Tensor xs = blend(x, s.pattern.values(), SeedMask::on_support(s, 0.6));
    const auto sup = s.support();
    const std::set<std::size_t> on(sup.begin(), sup.end());
    for (std::size_t i = 0; i < d; ++i) {
      if (!on.contains(i)) ok = ok && xs[i] == x[i];
    }
  }
  return {ok, ok ? "v=0, v=1, range closure and off-support identity hold" : "blend law violated"};
}

std::pair<bool, std::string> check_partitions() {
  const Dataset ds = synth_digits(13, 8, 10, 5);
  bool ok = true;
  for (int users : {1, 3, 7}) {
    const auto parts = partition_users(ds, users, 21);
    std::set<std::size_t> seen;
    std::size_t lo = ds.size();
    std::size_t hi = 0;
    for (const auto& p : parts) {
      for (std::size_t i : p.indices) ok = ok && seen.insert(i).second;
      lo = std::min(lo, p.indices.size());
      hi = std::max(hi, p.indices.size());
    }
    ok = ok && seen.size() == ds.size() && hi - lo <= 1;
  }
  const auto [train, test] = split(ds, 0.8, 4);
  ok = ok && train.size() + test.size() == ds.size() && train.size() == 104;
  ok = ok && seeded_count(0.006, 2000) == 12 && seeded_count(0.01, 100) == 1 &&
       seeded_count(0.0, 50) == 0;
  return {ok, ok ? "disjoint cover, balanced sizes and seeded counts hold" : "partition law violated"};
}

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.synth_per_class = 30;
  c.synth_side = 8;
  c.epochs = 3;
  c.ssr = 0.05;
  c.ser = 1.0;
  c.seed_n = 10;
  c.verifier_epochs = 15;
  c.verifier_pairs = 120;
  c.alt_queries = 20;
  c.seed = 7;
  return c;
}

std::pair<bool, std::string> check_determinism() {
  const fs::path root = fs::temp_directory_path() /
                        ("sms_selftest_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const ExperimentConfig c = tiny_config();
  RunOptions a;
  a.out = root / "a";
  RunOptions b;
  b.out = root / "b";
  cmd_run(c, a);
  cmd_run(c, b);
  const std::string ma = read_file(root / "a" / "metrics.csv");
  const std::string mb = read_file(root / "b" / "metrics.csv");
  fs::remove_all(root);
  const bool ok = ma == mb && !ma.empty();
  return {ok, ok ? "two runs gave byte-identical metrics.csv" : "metrics.csv differs between runs"};
}

}  // namespace

bool run_selftest(std::ostream& out) {
  const Check checks[] = {
      {"grad.cross_entropy", check_ce_grad},   {"grad.mse", check_mse_grad},
      {"grad.joint_model", check_joint_grad},  {"grad.verifier", check_verifier_grad},
      {"metrics.identities", check_metrics},   {"seeding.blend", check_blend},
      {"datasets.partitions", check_partitions}, {"run.determinism", check_determinism},
  };
  bool all = true;
  for (const Check& c : checks) {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    std::string detail;
    try {
      std::tie(ok, detail) = c.body();
    } catch (const std::exception& e) {
      detail = std::string("threw: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char buf[64];
    std::snprintf(buf, sizeof buf, " (%.2f s)", secs);
    out << (ok ? "PASS " : "FAIL ") << c.name << ": " << detail << buf << '\n';
    all = all && ok;
  }
  out << (all ? "selftest: all checks passed" : "selftest: FAILED") << '\n';
  return all;
}

}  // namespace sms
