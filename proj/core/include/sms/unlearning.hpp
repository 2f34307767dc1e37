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

#ifndef SMS_UNLEARNING_HPP_
#define SMS_UNLEARNING_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sms/datasets.hpp"
#include "sms/joint_training.hpp"
#include "sms/seeding.hpp"

namespace sms {

inline constexpr double kNotMeasured = std::numeric_limits<double>::quiet_NaN();

struct TraceRow {
  std::string method;
  int step = 0;
  double test_acc = kNotMeasured;
  double erased_acc = kNotMeasured;
  double verifiability = kNotMeasured;
  double unambiguity = kNotMeasured;
  double backdoor_asr = kNotMeasured;
};

struct UnlearnTrace {
  std::vector<TraceRow> rows;
  bool aborted = false;
  std::string abort_reason;
};

// Header: method,step,test_acc,erased_acc,verifiability,unambiguity,backdoor_asr.
// Unmeasured cells are left empty.
std::string trace_csv(const UnlearnTrace& trace);
// Inverse of trace_csv. Throws FormatError carrying the 1-based line number,
// or naming the first missing column.
UnlearnTrace parse_trace_csv(std::string_view text);

// Fills the verification columns of a trace row for a single model.
using ModelProbe = std::function<void(const SeededModel&, TraceRow&)>;

// What the unlearning routines need to observe their effect.
struct UnlearnContext {
  const Dataset* test = nullptr;   // test accuracy column
  ModelProbe probe;                // optional verification columns
  std::string method = "retrain";
};

// Trains a fresh model on D \ D_e. The reduced dataset is built before any
// training so erased rows are never read afterwards.
// alpha_s = 0 retrains a primary-only model without a decoder.
std::pair<SeededModel, UnlearnTrace> retrain_unlearn(const Dataset& train,
                                                     const EraseRequest& erase,
                                                     const SgdConfig& cfg,
                                                     const JointWeights& w,
                                                     const UnlearnContext& ctx = {},
                                                     const ModelTopology& topology = {});

struct ShardedModel {
  std::vector<SeededModel> shards;
  std::vector<int> assignment;  // training index -> shard id
  std::vector<std::uint64_t> shard_seeds;

  std::size_t k() const { return shards.size(); }
  std::vector<std::size_t> shard_indices(int shard) const;
  std::vector<std::string> shard_hashes() const;
};

// k sub-models on disjoint random shards of equal size (sizes differ by at
// most one). `jobs` > 1 trains shards on worker threads.
ShardedModel sisa_train(const Dataset& train, int k, const SgdConfig& cfg,
                        const JointWeights& w, const ModelTopology& topology = {},
                        int jobs = 1);

struct SisaUnlearnResult {
  ShardedModel model;
  UnlearnTrace trace;
  std::vector<int> retrained;  // ascending shard ids
};

// Retrains from scratch only the shards holding erased indices, each without
// those indices. Other shards are copied unchanged. Assignment entries of
// erased indices become -1.
SisaUnlearnResult sisa_unlearn(const ShardedModel& sm, const Dataset& train,
                               const EraseRequest& erase, const SgdConfig& cfg,
                               const JointWeights& w, const UnlearnContext& ctx = {},
                               const ModelTopology& topology = {}, int jobs = 1);

// Per row: votes(c) + summed_softmax(c) / (k + 1). The argmax is the
// majority class, ties going to the larger summed softmax.
Tensor sisa_predict(const ShardedModel& sm, const Tensor& batch);
double sisa_accuracy(const ShardedModel& sm, const Dataset& ds);

// JSON listing the retrained shard ids and every shard's checkpoint hash.
std::string shard_manifest_json(const ShardedModel& sm, std::span<const int> retrained);

struct ApproxConfig {
  double learning_rate = 0.025;  // eta / 2 for the default eta
  int steps = 200;
  double retain_fraction = 0.10;
  std::size_t retain_batch = 16;
  std::uint64_t rng_seed = 0;
  int trace_every = 1;
};

// Gradient-ascent stand-in for variational Bayesian unlearning: each step
// ascends the joint loss on the erased rows, then descends on a fresh random
// 10% of the retained rows. Stops once erased accuracy is at most 1/C.
// If test accuracy falls below half its starting value the run aborts and the
// trace is marked; the partially unlearned model is still returned.
std::pair<SeededModel, UnlearnTrace> approx_unlearn(const SeededModel& model,
                                                    const Dataset& erased,
                                                    const Dataset& retained,
                                                    const ApproxConfig& cfg,
                                                    const JointWeights& w,
                                                    const UnlearnContext& ctx = {});

struct BackdoorSpec {
  Seed trigger;
  SeedMask mask;  // v = 1 on the trigger support
  int target = 0;
  double rate = 0.006;
};

// Digit-glyph corner patch, stamped at full strength.
BackdoorSpec default_backdoor(int side, int glyph = 7,
                              Placement placement = Placement::top_left);

struct MibData {
  Dataset train;                          // original rows followed by D_b
  std::vector<std::size_t> backdoor_rows; // rows of D_b in `train`
  std::vector<std::size_t> sources;       // original row of each D_b entry
};

// Appends ceil(rate * |part|) triggered copies of randomly chosen user
// samples, labelled with the target class.
MibData mib_prepare(const Dataset& train, const UserPartition& part,
                    const BackdoorSpec& spec, std::uint64_t rng_seed);

Tensor apply_trigger(const Tensor& images, const BackdoorSpec& spec);

// Triggered copies of the test rows whose label differs from the target.
Tensor triggered_queries(const Dataset& test, const BackdoorSpec& spec);

// Fraction of rows classified as `target`.
double backdoor_asr(const SeededModel& model, const Tensor& triggered, int target);

}  // namespace sms

#endif  // SMS_UNLEARNING_HPP_
