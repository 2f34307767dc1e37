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

#include "sms/unlearning.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "glyphs.hpp"
#include "sms/error.hpp"
#include "sms/io.hpp"
#include "sms/rng.hpp"

namespace sms {
namespace {

constexpr const char* kTraceColumns[] = {"method",        "step",        "test_acc",
                                         "erased_acc",    "verifiability", "unambiguity",
                                         "backdoor_asr"};

std::string cell(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_cell(const std::string& s, std::size_t line) {
  if (s.empty()) return kNotMeasured;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("trace line " + std::to_string(line) + ": bad number '" + s + "'",
                      line);
  }
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first error.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (std::thread& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

TraceRow measure(const std::string& method, int step, const SeededModel& model,
                 const Dataset* erased, const UnlearnContext& ctx) {
  TraceRow row;
  row.method = method;
  row.step = step;
  if (ctx.test) row.test_acc = accuracy(model, *ctx.test);
  if (erased && !erased->empty()) row.erased_acc = accuracy(model, *erased);
  if (ctx.probe) ctx.probe(model, row);
  return row;
}

SeededModel train_shard(const Dataset& train, std::span<const std::size_t> rows,
                        std::uint64_t seed, const SgdConfig& cfg, const JointWeights& w,
                        const ModelTopology& topology) {
  if (rows.empty()) throw InputError("SISA shard is empty");
  SgdConfig c = cfg;
  c.rng_seed = seed;
  TrainOptions opt;
  opt.topology = topology;
  return train_joint(train.subset(rows), c, w, opt).first;
}

}  // namespace

std::string trace_csv(const UnlearnTrace& trace) {
  std::string out;
  for (std::size_t c = 0; c < std::size(kTraceColumns); ++c) {
    if (c) out += ',';
    out += kTraceColumns[c];
  }
  out += '\n';
  for (const TraceRow& r : trace.rows) {
    out += r.method + ',' + std::to_string(r.step) + ',' + cell(r.test_acc) + ',' +
           cell(r.erased_acc) + ',' + cell(r.verifiability) + ',' + cell(r.unambiguity) +
           ',' + cell(r.backdoor_asr) + '\n';
  }
  return out;
}

UnlearnTrace parse_trace_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  std::vector<int> col(std::size(kTraceColumns), -1);
  bool header = false;
  UnlearnTrace trace;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (!header) {
      for (std::size_t c = 0; c < std::size(kTraceColumns); ++c) {
        for (std::size_t f = 0; f < fields.size(); ++f) {
          if (fields[f] == kTraceColumns[c]) col[c] = static_cast<int>(f);
        }
        if (col[c] < 0) {
          throw FormatError(std::string("trace is missing column '") + kTraceColumns[c] +
                                "'",
                            lineno);
        }
      }
      width = fields.size();
      header = true;
      continue;
    }
    if (fields.size() != width) {
      throw FormatError("trace line " + std::to_string(lineno) + ": expected " +
                            std::to_string(width) + " fields, found " +
                            std::to_string(fields.size()),
                        lineno);
    }
    auto at = [&](int c) -> const std::string& {
      return fields[static_cast<std::size_t>(col[static_cast<std::size_t>(c)])];
    };
    TraceRow r;
    r.method = at(0);
    const double step = parse_cell(at(1), lineno);
    if (std::isnan(step) || step != std::floor(step)) {
      throw FormatError("trace line " + std::to_string(lineno) + ": bad step", lineno);
    }
    r.step = static_cast<int>(step);
    r.test_acc = parse_cell(at(2), lineno);
    r.erased_acc = parse_cell(at(3), lineno);
    r.verifiability = parse_cell(at(4), lineno);
    r.unambiguity = parse_cell(at(5), lineno);
    r.backdoor_asr = parse_cell(at(6), lineno);
    trace.rows.push_back(std::move(r));
  }
  if (!header) throw FormatError("trace is empty", lineno);
  return trace;
}

std::pair<SeededModel, UnlearnTrace> retrain_unlearn(const Dataset& train,
                                                     const EraseRequest& erase,
                                                     const SgdConfig& cfg,
                                                     const JointWeights& w,
                                                     const UnlearnContext& ctx,
                                                     const ModelTopology& topology) {
  std::set<std::size_t> unique(erase.indices.begin(), erase.indices.end());
  if (unique.size() >= train.size()) {
    throw InputError("erase request would remove the whole training set");
  }
  const Dataset reduced = train.without(erase.indices);
  const Dataset erased = train.subset(erase.indices);
  SgdConfig c = cfg;
  c.rng_seed = derive_seed(cfg.rng_seed, "retrain");
  TrainOptions opt;
  opt.topology = topology;
  auto [model, report] = w.alpha_s > 0.0 ? train_joint(reduced, c, w, opt)
                                          : train_primary_only(reduced, c, opt);
  UnlearnTrace trace;
  trace.rows.push_back(measure(ctx.method, 0, model, &erased, ctx));
  return {std::move(model), std::move(trace)};
}

std::vector<std::size_t> ShardedModel::shard_indices(int shard) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == shard) out.push_back(i);
  }
  return out;
}

std::vector<std::string> ShardedModel::shard_hashes() const {
  std::vector<std::string> out;
  out.reserve(shards.size());
  for (const SeededModel& m : shards) out.push_back(model_hash(m));
  return out;
}

ShardedModel sisa_train(const Dataset& train, int k, const SgdConfig& cfg,
                        const JointWeights& w, const ModelTopology& topology, int jobs) {
  if (k < 2) throw ParameterError("SISA needs k >= 2 shards");
  if (static_cast<std::size_t>(k) > train.size()) {
    throw ParameterError("SISA: k = " + std::to_string(k) + " exceeds the " +
                         std::to_string(train.size()) + " training samples");
  }
  ShardedModel sm;
  sm.assignment.assign(train.size(), -1);
  Rng rng(derive_seed(cfg.rng_seed, "sisa-assign"));
  const auto perm = rng.permutation(train.size());
  for (std::size_t j = 0; j < perm.size(); ++j) {
    sm.assignment[perm[j]] = static_cast<int>(j % static_cast<std::size_t>(k));
  }
  const auto shards = static_cast<std::size_t>(k);
  sm.shards.resize(shards);
  sm.shard_seeds.resize(shards);
  for (std::size_t s = 0; s < shards; ++s) {
    sm.shard_seeds[s] = derive_seed(cfg.rng_seed, "sisa-shard", s);
  }
  parallel_for(shards, jobs, [&](std::size_t s) {
    const auto rows = sm.shard_indices(static_cast<int>(s));
    sm.shards[s] = train_shard(train, rows, sm.shard_seeds[s], cfg, w, topology);
  });
  return sm;
}

SisaUnlearnResult sisa_unlearn(const ShardedModel& sm, const Dataset& train,
                               const EraseRequest& erase, const SgdConfig& cfg,
                               const JointWeights& w, const UnlearnContext& ctx,
                               const ModelTopology& topology, int jobs) {
  if (sm.assignment.size() != train.size()) {
    throw DimensionError("SISA assignment does not match the training set");
  }
  SisaUnlearnResult res;
  res.model = sm;
  std::set<int> touched;
  for (std::size_t i : erase.indices) {
    if (i >= train.size()) throw InputError("erase index out of range");
    const int s = sm.assignment[i];
    if (s >= 0) touched.insert(s);
    res.model.assignment[i] = -1;
  }
  res.retrained.assign(touched.begin(), touched.end());
  parallel_for(res.retrained.size(), jobs, [&](std::size_t j) {
    const int s = res.retrained[j];
    const auto rows = res.model.shard_indices(s);
    const auto us = static_cast<std::size_t>(s);
    res.model.shard_seeds[us] = derive_seed(sm.shard_seeds[us], "sisa-retrain");
    res.model.shards[us] = train_shard(train, rows, res.model.shard_seeds[us], cfg, w,
                                       topology);
  });

  TraceRow row;
  row.method = ctx.method;
  const Dataset erased = train.subset(erase.indices);
  if (ctx.test) row.test_acc = sisa_accuracy(res.model, *ctx.test);
  if (!erased.empty()) row.erased_acc = sisa_accuracy(res.model, erased);
  res.trace.rows.push_back(row);
  return res;
}

Tensor sisa_predict(const ShardedModel& sm, const Tensor& batch) {
  if (sm.shards.empty()) throw StateError("SISA model has no shards");
  const std::size_t b = batch.rows();
  const std::size_t c = sm.shards.front().classes();
  Tensor votes = Tensor::matrix(b, c);
  Tensor mass = Tensor::matrix(b, c);
  for (const SeededModel& m : sm.shards) {
    const Tensor p = softmax(m.logits(batch));
    const auto top = argmax_rows(p);
    for (std::size_t r = 0; r < b; ++r) {
      votes.at(r, top[r]) += 1.0;
      for (std::size_t j = 0; j < c; ++j) mass.at(r, j) += p.at(r, j);
    }
  }
  const double scale = 1.0 / static_cast<double>(sm.shards.size() + 1);
  for (std::size_t i = 0; i < votes.size(); ++i) votes[i] += mass[i] * scale;
  return votes;
}

double sisa_accuracy(const ShardedModel& sm, const Dataset& ds) {
  if (ds.empty()) throw InputError("accuracy over an empty dataset");
  const auto top = argmax_rows(sisa_predict(sm, ds.images));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (static_cast<int>(top[i]) == ds.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

std::string shard_manifest_json(const ShardedModel& sm, std::span<const int> retrained) {
  nlohmann::ordered_json j;
  j["k"] = sm.k();
  j["retrained"] = std::vector<int>(retrained.begin(), retrained.end());
  nlohmann::ordered_json shards = nlohmann::ordered_json::array();
  const auto hashes = sm.shard_hashes();
  for (std::size_t s = 0; s < sm.k(); ++s) {
    shards.push_back({{"id", s},
                      {"samples", sm.shard_indices(static_cast<int>(s)).size()},
                      {"sha256", hashes[s]}});
  }
  j["shards"] = std::move(shards);
  return j.dump(2);
}

std::pair<SeededModel, UnlearnTrace> approx_unlearn(const SeededModel& model,
                                                    const Dataset& erased,
                                                    const Dataset& retained,
                                                    const ApproxConfig& cfg,
                                                    const JointWeights& w,
                                                    const UnlearnContext& ctx) {
  if (cfg.steps < 1) throw ParameterError("approximate unlearning needs T >= 1 steps");
  if (!(cfg.learning_rate > 0.0)) throw ParameterError("ascent rate must be positive");
  if (!(cfg.retain_fraction > 0.0 && cfg.retain_fraction <= 1.0)) {
    throw ParameterError("retain fraction must lie in (0, 1]");
  }
  if (cfg.trace_every < 1) throw ParameterError("trace interval must be >= 1");
  if (erased.empty()) throw InputError("approximate unlearning needs erased samples");
  if (retained.empty()) throw InputError("approximate unlearning needs retained samples");
  w.validate();

  SeededModel m = model;
  const bool with_self = m.has_decoder() && w.alpha_s > 0.0;
  const double chance = 1.0 / static_cast<double>(m.classes());
  const std::size_t retain_n = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::llround(cfg.retain_fraction * static_cast<double>(retained.size()))));
  Rng rng(derive_seed(cfg.rng_seed, "approx-retain"));

  UnlearnTrace trace;
  trace.rows.push_back(measure(ctx.method, 0, m, &erased, ctx));
  const double start_acc = trace.rows.front().test_acc;

  auto step_on = [&](const Dataset& ds, std::span<const std::size_t> rows, double lr) {
    const Tensor x = gather_rows(ds.images, rows);
    std::vector<int> labels;
    labels.reserve(rows.size());
    for (std::size_t i : rows) labels.push_back(ds.labels[i]);
    ModelOutputs out = m.forward(x);
    if (!with_self) out.recon = Tensor();
    const JointLoss loss = joint_loss(out.logits, labels, out.recon, x, w);
    m.backward(loss.logits_grad, loss.recon_grad);
    m.sgd_step(lr);
  };

  std::vector<std::size_t> all_erased(erased.size());
  for (std::size_t i = 0; i < all_erased.size(); ++i) all_erased[i] = i;
  for (int step = 1; step <= cfg.steps; ++step) {
    try {
      step_on(erased, all_erased, -cfg.learning_rate);
      auto pick = rng.permutation(retained.size());
      pick.resize(retain_n);
      for (std::size_t lo = 0; lo < pick.size(); lo += cfg.retain_batch) {
        const std::size_t hi = std::min(pick.size(), lo + cfg.retain_batch);
        step_on(retained, std::span<const std::size_t>(pick.data() + lo, hi - lo),
                cfg.learning_rate);
      }
    } catch (const NumericalError& e) {
      trace.aborted = true;
      trace.abort_reason = std::string("diverged at step ") + std::to_string(step) + ": " +
                           e.what();
      break;
    }
    const double erased_acc = accuracy(m, erased);
    const bool done = erased_acc <= chance || step == cfg.steps;
    if (step % cfg.trace_every == 0 || done) {
      trace.rows.push_back(measure(ctx.method, step, m, &erased, ctx));
      const double acc = trace.rows.back().test_acc;
      if (!std::isnan(start_acc) && acc < 0.5 * start_acc) {
        trace.aborted = true;
        trace.abort_reason = "test accuracy fell below half its starting value at step " +
                             std::to_string(step);
        break;
      }
    }
    if (done) break;
  }
  return {std::move(m), std::move(trace)};
}

BackdoorSpec default_backdoor(int side, int glyph, Placement placement) {
  if (side < 6) throw ParameterError("backdoor trigger needs side >= 6");
  if (glyph < 0 || glyph > 9) throw ParameterError("trigger glyph must be a digit");
  const std::size_t d = static_cast<std::size_t>(side) * side;
  const int box_w = std::max(3, side / 4);
  const int box_h = std::max(5, side * 5 / 12);
  const bool bottom =
      placement == Placement::bottom_left || placement == Placement::bottom_right;
  const bool right = placement == Placement::top_right || placement == Placement::bottom_right;
  const int top = bottom ? side - box_h - 1 : 1;
  const int left = right ? side - box_w - 1 : 1;
  BackdoorSpec spec;
  spec.trigger.pattern = Tensor({d}, 0.0);
  glyphs::stamp(glyphs::kDigit3x5[static_cast<std::size_t>(glyph)], box_w, box_h, top, left,
                side, spec.trigger.pattern.values());
  spec.trigger.side = side;
  spec.trigger.owner = -1;
  spec.trigger.placement = placement;
  spec.trigger.security_n = static_cast<int>(spec.trigger.support().size());
  spec.trigger.seed_id = derive_seed(0, "backdoor-trigger", static_cast<std::uint64_t>(glyph));
  spec.mask = SeedMask::on_support(spec.trigger, 1.0);
  return spec;
}

Tensor apply_trigger(const Tensor& images, const BackdoorSpec& spec) {
  Tensor out = images;
  for (std::size_t r = 0; r < images.rows(); ++r) {
    const Tensor t = blend(images.row(r), spec.trigger.pattern.values(), spec.mask);
    std::copy(t.values().begin(), t.values().end(), out.row(r).begin());
  }
  return out;
}

MibData mib_prepare(const Dataset& train, const UserPartition& part,
                    const BackdoorSpec& spec, std::uint64_t rng_seed) {
  if (!(spec.rate > 0.0 && spec.rate <= 1.0)) {
    throw ParameterError("backdoor rate must lie in (0, 1]");
  }
  if (spec.target < 0 || spec.target >= train.class_count) {
    throw ParameterError("backdoor target label out of range");
  }
  MibData out;
  const std::size_t count = seeded_count(spec.rate, part.indices.size());
  Rng rng(derive_seed(rng_seed, "mib-select", static_cast<std::uint64_t>(part.user_id)));
  std::vector<std::size_t> chosen = part.indices;
  rng.shuffle(chosen);
  chosen.resize(count);
  std::sort(chosen.begin(), chosen.end());
  for (std::size_t i : chosen) {
    if (i >= train.size()) throw InputError("partition index out of range");
  }
  Dataset extra = train.subset(chosen);
  extra.images = apply_trigger(extra.images, spec);
  for (int& y : extra.labels) y = spec.target;
  out.train = concat(train, extra);
  for (std::size_t j = 0; j < count; ++j) out.backdoor_rows.push_back(train.size() + j);
  out.sources = std::move(chosen);
  return out;
}

Tensor triggered_queries(const Dataset& test, const BackdoorSpec& spec) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test.labels[i] != spec.target) rows.push_back(i);
  }
  if (rows.empty()) throw InputError("no test rows outside the backdoor target class");
  return apply_trigger(gather_rows(test.images, rows), spec);
}

double backdoor_asr(const SeededModel& model, const Tensor& triggered, int target) {
  if (triggered.rows() == 0) throw InputError("ASR over an empty query set");
  const auto top = predict(model, triggered);
  std::size_t hits = 0;
  for (std::size_t p : top) {
    if (static_cast<int>(p) == target) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(top.size());
}

}  // namespace sms
