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

#include "sms/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sms/error.hpp"
#include "sms/rng.hpp"

namespace sms {
namespace {

double balanced_accuracy(std::span<const double> members,
                         std::span<const double> nonmembers, double t) {
  std::size_t tp = 0;
  for (double c : members) tp += c >= t ? 1 : 0;
  std::size_t tn = 0;
  for (double c : nonmembers) tn += c < t ? 1 : 0;
  return 0.5 * (static_cast<double>(tp) / static_cast<double>(members.size()) +
                static_cast<double>(tn) / static_cast<double>(nonmembers.size()));
}

std::pair<std::vector<double>, std::vector<double>> halves(std::span<const double> xs,
                                                           Rng& rng) {
  std::vector<double> v(xs.begin(), xs.end());
  rng.shuffle(v);
  if (v.size() < 2) return {v, v};
  const std::size_t cut = v.size() / 2;
  return {std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(cut)),
          std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(cut), v.end())};
}

}  // namespace

VerificationDataset build_verification_set(const Tensor& clean, const Tensor& seeded) {
  if (clean.rows() != seeded.rows()) {
    throw InputError("verification set: " + std::to_string(clean.rows()) +
                     " clean rows vs " + std::to_string(seeded.rows()) + " seeded rows");
  }
  if (clean.rows() == 0 || clean.empty()) {
    throw InputError("verification set needs at least one pair");
  }
  if (clean.cols() != seeded.cols()) {
    throw DimensionError("verification set: clean and seeded widths differ");
  }
  const std::size_t k = clean.rows();
  const std::size_t d = clean.cols();
  VerificationDataset dv;
  dv.inputs = Tensor::matrix(2 * k, d);
  dv.labels.resize(2 * k);
  for (std::size_t i = 0; i < k; ++i) {
    std::copy(clean.row(i).begin(), clean.row(i).end(), dv.inputs.row(2 * i).begin());
    std::copy(seeded.row(i).begin(), seeded.row(i).end(), dv.inputs.row(2 * i + 1).begin());
    dv.labels[2 * i] = 0;
    dv.labels[2 * i + 1] = 1;
  }
  return dv;
}

std::vector<double> VerifierModel::seed_probability(const Tensor& images) const {
  const Tensor p = softmax(net.infer(images));
  std::vector<double> out(p.rows());
  for (std::size_t r = 0; r < p.rows(); ++r) out[r] = p.at(r, 1);
  return out;
}

std::vector<int> VerifierModel::decide(const Tensor& images) const {
  const auto probs = seed_probability(images);
  std::vector<int> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] > threshold ? 1 : 0;
  return out;
}

VerifierModel train_verifier(const VerificationDataset& dv, const VerifierConfig& cfg,
                             int owner) {
  cfg.sgd.validate();
  if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0)) {
    throw ParameterError("verifier threshold must lie in (0, 1)");
  }
  const std::size_t pairs = dv.pairs();
  if (pairs < 1 || dv.labels.size() != 2 * pairs || dv.inputs.rows() != dv.labels.size()) {
    throw InputError("verification set must be balanced with at least 2 rows");
  }
  const std::size_t d = dv.inputs.cols();
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(d))));

  // Hold out whole pairs so both halves stay balanced.
  Rng rng(derive_seed(cfg.sgd.rng_seed, "verifier-holdout"));
  std::vector<std::size_t> pair_order = rng.permutation(pairs);
  std::size_t n_hold = static_cast<std::size_t>(
      std::ceil(cfg.holdout_fraction * static_cast<double>(pairs)));
  n_hold = std::clamp<std::size_t>(n_hold, 1, pairs);
  const bool reuse = n_hold == pairs;  // a single pair serves both roles
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> hold_rows;
  for (std::size_t j = 0; j < pairs; ++j) {
    const std::size_t p = pair_order[j];
    auto& dst = j < n_hold ? hold_rows : train_rows;
    dst.push_back(2 * p);
    dst.push_back(2 * p + 1);
    if (reuse) {
      train_rows.push_back(2 * p);
      train_rows.push_back(2 * p + 1);
    }
  }
  std::sort(train_rows.begin(), train_rows.end());

  Dataset train;
  train.side = side;
  train.class_count = 2;
  train.images = gather_rows(dv.inputs, train_rows);
  for (std::size_t r : train_rows) train.labels.push_back(dv.labels[r]);
  if (cfg.blur_positives) {
    std::vector<std::size_t> pos;
    for (std::size_t i = 0; i < train.size(); ++i) {
      if (train.labels[i] == 1) pos.push_back(i);
    }
    Dataset blurred = train.subset(pos);
    blurred.images = gaussian_blur(blurred.images, side, 0.5);
    train = concat(train, blurred);
  }

  std::vector<std::size_t> widths{d};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(2);
  Rng init(derive_seed(cfg.sgd.rng_seed, "verifier-init"));
  Mlp net = Mlp::glorot(chain(widths, Activation::relu, Activation::identity), init);
  Rng order_rng(derive_seed(cfg.sgd.rng_seed, "verifier-shuffle"));
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<int> labels;
  for (int epoch = 1; epoch <= cfg.sgd.epochs; ++epoch) {
    order_rng.shuffle(order);
    for (std::size_t lo = 0; lo < order.size(); lo += cfg.sgd.batch_size) {
      const std::size_t hi = std::min(order.size(), lo + cfg.sgd.batch_size);
      std::span<const std::size_t> idx(order.data() + lo, hi - lo);
      Tensor x = gather_rows(train.images, idx);
      labels.clear();
      for (std::size_t i : idx) labels.push_back(train.labels[i]);
      try {
        Tensor logits = net.forward(x);
        net.backward(cross_entropy_loss(logits, labels).grad);
        net.sgd_step(cfg.sgd.learning_rate);
      } catch (const NumericalError& e) {
        throw TrainingError(std::string("verifier training diverged: ") + e.what(), epoch);
      }
    }
  }

  VerifierModel v;
  v.net = std::move(net);
  v.owner = owner;
  v.threshold = cfg.threshold;
  const Tensor hold = gather_rows(dv.inputs, hold_rows);
  const auto decisions = v.decide(hold);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < hold_rows.size(); ++i) {
    if (decisions[i] == dv.labels[hold_rows[i]]) ++hits;
  }
  v.holdout_accuracy = static_cast<double>(hits) / static_cast<double>(hold_rows.size());
  if (v.holdout_accuracy < cfg.min_holdout_accuracy) {
    throw CalibrationError("verifier reached only " + std::to_string(v.holdout_accuracy) +
                               " hold-out accuracy (floor " +
                               std::to_string(cfg.min_holdout_accuracy) +
                               "); increase the seed embedding rate or N",
                           v.holdout_accuracy);
  }
  return v;
}

int verify_one(const VerifierModel& v, const SeededModel& model,
               std::span<const double> x) {
  Tensor q({1, x.size()}, std::vector<double>(x.begin(), x.end()));
  return verify_batch(v, model, q).front();
}

std::vector<int> verify_batch(const VerifierModel& v, const SeededModel& model,
                              const Tensor& queries) {
  return v.decide(model.reconstruct(queries));
}

double indicator_mean(std::span<const int> bits, int value) {
  if (bits.empty()) throw InputError("rate over an empty query set");
  std::size_t n = 0;
  for (int b : bits) n += b == value ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(bits.size());
}

double verifiability(const VerifierModel& v, const SeededModel& model,
                     const Tensor& seeded_queries) {
  return indicator_mean(verify_batch(v, model, seeded_queries), 1);
}

double unambiguity(const VerifierModel& v, const SeededModel& model,
                   const Tensor& alt_queries) {
  return indicator_mean(verify_batch(v, model, alt_queries), 0);
}

VerificationOutcome outcome_from(std::vector<int> seeded_decisions,
                                 std::vector<int> alt_decisions) {
  VerificationOutcome out;
  out.verifiability = indicator_mean(seeded_decisions, 1);
  out.unambiguity = indicator_mean(alt_decisions, 0);
  out.seeded_decisions = std::move(seeded_decisions);
  out.alt_decisions = std::move(alt_decisions);
  return out;
}

VerificationOutcome evaluate(const VerifierModel& v, const SeededModel& model,
                             const Tensor& seeded_queries, const Tensor& alt_queries) {
  return outcome_from(verify_batch(v, model, seeded_queries),
                      verify_batch(v, model, alt_queries));
}

std::vector<double> log_confidence(const Tensor& logits) {
  std::vector<double> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double z : row) sum += std::exp(z - mx);
    out[r] = -std::log(sum);
  }
  return out;
}

double mia_score(std::span<const double> member_conf,
                 std::span<const double> nonmember_conf, std::uint64_t rng_seed) {
  if (member_conf.empty() || nonmember_conf.empty()) {
    throw InputError("membership inference needs non-empty member and non-member sets");
  }
  Rng rng(derive_seed(rng_seed, "mia-split"));
  auto [m_cal, m_eval] = halves(member_conf, rng);
  auto [n_cal, n_eval] = halves(nonmember_conf, rng);

  std::vector<double> candidates = m_cal;
  candidates.insert(candidates.end(), n_cal.begin(), n_cal.end());
  candidates.push_back(std::numeric_limits<double>::infinity());
  std::sort(candidates.begin(), candidates.end());
  double best_t = candidates.back();
  double best = -1.0;
  for (double t : candidates) {
    const double ba = balanced_accuracy(m_cal, n_cal, t);
    if (ba > best) {
      best = ba;
      best_t = t;
    }
  }
  return balanced_accuracy(m_eval, n_eval, best_t);
}

double mia_score(const LogitsFn& logits, const Tensor& members,
                 const Tensor& nonmembers, std::uint64_t rng_seed) {
  const auto m = log_confidence(logits(members));
  const auto n = log_confidence(logits(nonmembers));
  return mia_score(m, n, rng_seed);
}

double mia_score(const SeededModel& model, const Tensor& members,
                 const Tensor& nonmembers, std::uint64_t rng_seed) {
  return mia_score([&](const Tensor& x) { return model.logits(x); }, members,
                   nonmembers, rng_seed);
}

Tensor gaussian_blur(const Tensor& images, int side, double sigma) {
  if (side <= 0 || images.cols() != static_cast<std::size_t>(side) * side) {
    throw DimensionError("gaussian_blur: rows are not side x side images");
  }
  const double w1 = std::exp(-1.0 / (2.0 * sigma * sigma));
  const double k[3] = {w1, 1.0, w1};
  const double norm = (k[0] + k[1] + k[2]) * (k[0] + k[1] + k[2]);
  Tensor out = images;
  for (std::size_t r = 0; r < images.rows(); ++r) {
    auto src = images.row(r);
    auto dst = out.row(r);
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        double acc = 0.0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = std::clamp(y + dy, 0, side - 1);
            const int xx = std::clamp(x + dx, 0, side - 1);
            acc += k[dy + 1] * k[dx + 1] * src[static_cast<std::size_t>(yy * side + xx)];
          }
        }
        dst[static_cast<std::size_t>(y * side + x)] = acc / norm;
      }
    }
  }
  return out;
}

}  // namespace sms
