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

#include "sms/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <thread>

#include "sms/error.hpp"
#include "sms/io.hpp"
#include "sms/rng.hpp"
#include "sms/svg.hpp"
#include "sms/verifier.hpp"

namespace sms {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

std::string cell(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

Json num_or_null(double v) { return std::isnan(v) ? Json(nullptr) : Json(v); }
double from_json(const Json& j) { return j.is_null() ? kNotMeasured : j.get<double>(); }

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string rel(const fs::path& root, const fs::path& p) {
  return p.lexically_relative(root).generic_string();
}

// Mean softmax over shards, as log-probabilities, for confidence attacks.
Tensor sisa_log_probs(const ShardedModel& sm, const Tensor& batch) {
  Tensor acc;
  for (const SeededModel& m : sm.shards) {
    const Tensor p = softmax(m.logits(batch));
    if (acc.empty()) {
      acc = p;
    } else {
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += p[i];
    }
  }
  for (double& v : acc.values()) v = std::log(std::max(v / static_cast<double>(sm.k()), 1e-300));
  return acc;
}

// A query counts as seeded if any shard's reconstruction is flagged.
std::vector<int> sisa_verify(const VerifierModel& v, const ShardedModel& sm,
                             const Tensor& queries) {
  std::vector<int> any(queries.rows(), 0);
  for (const SeededModel& m : sm.shards) {
    const auto bits = verify_batch(v, m, queries);
    for (std::size_t i = 0; i < bits.size(); ++i) any[i] |= bits[i];
  }
  return any;
}

class Pipeline {
 public:
  Pipeline(const ExperimentConfig& cfg, const RunOptions& opts)
      : cfg_(cfg), opts_(opts), dir_(opts.out.empty() ? cfg.out_dir : opts.out) {
    jobs_ = opts.jobs > 0 ? opts.jobs : cfg.jobs;
  }

  RunManifest run();

 private:
  // Stage plumbing.
  void open_state();
  void save_state();
  bool completed(const std::string& stage) const;
  void stage(const std::string& name, const std::function<void(bool resumed)>& body);
  void record(const fs::path& path);
  void write_artifact(const fs::path& path, std::string_view bytes);
  void log(const std::string& line);
  std::uint64_t seed_for(std::string_view stage, std::uint64_t index = 0) const {
    return derive_seed(cfg_.seed, stage, index);
  }
  SgdConfig train_cfg() const {
    return SgdConfig{cfg_.learning_rate, cfg_.batch_size, cfg_.epochs, seed_for("train")};
  }
  JointWeights sms_weights() const { return {cfg_.alpha_p, cfg_.alpha_s}; }
  bool sisa() const { return cfg_.unlearn == UnlearnMethod::sisa; }

  // Stages.
  void data_stage();
  void seed_stage();
  void train_stage(bool resumed);
  void verifier_stage(bool resumed);
  void verify_stage(const std::string& phase);
  void unlearn_stage(bool resumed);
  void finish();

  void save_sharded(const ShardedModel& sm, const std::string& name);
  ShardedModel load_sharded(const std::string& name);
  void save_trained(const SeededModel& m, const std::string& prefix);
  MetricRow sms_row(const std::string& phase, const SeededModel& m) const;
  double mia_for(const SeededModel& m, const Dataset& members) const;

  ExperimentConfig cfg_;
  RunOptions opts_;
  fs::path dir_;
  int jobs_ = 1;
  Json state_;
  Clock::time_point start_;
  std::set<std::string> resumable_;

  Dataset train_, test_, seeded_, nonverif_train_;
  std::vector<UserPartition> parts_;
  Seed target_seed_;
  std::vector<std::size_t> target_seeded_;
  Tensor seeded_q_, alt_q_;
  EraseRequest erase_;
  BackdoorSpec backdoor_;
  MibData mib_;
  Tensor triggered_;
  VerifierModel verifier_;

  std::optional<SeededModel> sms_, nonverif_, mib_model_;
  std::optional<ShardedModel> sisa_;
  std::optional<SeededModel> sms_post_, nonverif_post_, mib_post_;
  std::optional<ShardedModel> sisa_post_;
  std::vector<MetricRow> rows_;
};

void Pipeline::log(const std::string& line) {
  if (opts_.log) *opts_.log << line << '\n' << std::flush;
}

void Pipeline::open_state() {
  const fs::path state_path = dir_ / "state.json";
  const std::string hash = config_hash(cfg_);
  if (fs::exists(state_path)) {
    if (!opts_.resume) {
      throw ConfigError("output directory '" + dir_.string() +
                        "' already holds a run; pass --resume or choose another directory");
    }
    try {
      state_ = Json::parse(read_file(state_path));
    } catch (const nlohmann::json::exception& e) {
      throw IntegrityError("unreadable run state in " + state_path.string() + ": " + e.what());
    }
    if (state_.value("config_hash", std::string()) != hash) {
      throw IntegrityError("output directory '" + dir_.string() +
                           "' belongs to a different config; refusing to mix runs");
    }
    for (const auto& [path, sha] : state_["artifacts"].items()) {
      const fs::path p = dir_ / path;
      if (!fs::exists(p) || sha256_file(p) != sha.get<std::string>()) {
        throw IntegrityError("artifact '" + path + "' is missing or altered since the last run");
      }
    }
    for (const auto& s : state_["completed"]) resumable_.insert(s.get<std::string>());
    log("[run] resuming in " + dir_.string());
  } else {
    state_ = Json::object();
    state_["config_hash"] = hash;
    state_["completed"] = Json::array();
    state_["artifacts"] = Json::object();
    state_["running_time"] = Json::object();
  }
  fs::create_directories(dir_);
  write_file(dir_ / "config.txt", config_text(cfg_));
  save_state();
}

void Pipeline::save_state() { write_file(dir_ / "state.json", state_.dump(2) + "\n"); }

bool Pipeline::completed(const std::string& stage) const { return resumable_.contains(stage); }

void Pipeline::record(const fs::path& path) {
  const std::string key = rel(dir_, path);
  const std::string sha = sha256_file(path);
  auto& arts = state_["artifacts"];
  if (arts.contains(key) && arts[key].get<std::string>() != sha && opts_.resume &&
      key.rfind("models/", 0) != 0 && key.rfind("metrics", 0) != 0 &&
      key.rfind("timing", 0) != 0) {
    throw IntegrityError("regenerated artifact '" + key + "' differs from the earlier run");
  }
  arts[key] = sha;
}

void Pipeline::write_artifact(const fs::path& path, std::string_view bytes) {
  fs::create_directories(path.parent_path());
  write_file(path, bytes);
  record(path);
}

void Pipeline::stage(const std::string& name, const std::function<void(bool)>& body) {
  const bool resumed = completed(name);
  const auto t0 = Clock::now();
  try {
    body(resumed);
  } catch (const IntegrityError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    save_state();
    throw StageError(name, e.what());
  }
  const double secs = seconds_since(t0);
  state_["stage_seconds"][name] = secs;
  if (!resumed) state_["completed"].push_back(name);
  save_state();
  char buf[96];
  std::snprintf(buf, sizeof buf, "[run] %-11s %s (%.1f s)", name.c_str(),
                resumed ? "resumed" : "done", secs);
  log(buf);
}

void Pipeline::data_stage() {
  Dataset all;
  if (cfg_.source == "idx") {
    all = load_idx(cfg_.idx_images, cfg_.idx_labels, cfg_.idx_limit);
  } else {
    all = synth_digits(cfg_.synth_per_class, cfg_.synth_side, cfg_.classes, seed_for("data"));
  }
  if (all.class_count != cfg_.classes && cfg_.source == "idx") {
    all.class_count = std::max(all.class_count, cfg_.classes);
  }
  std::tie(train_, test_) = split(all, cfg_.train_fraction, seed_for("split"));
  parts_ = partition_users(train_, cfg_.n_users, seed_for("partition"));
  write_artifact(dir_ / "data" / "train.smsd", encode_dataset(train_));
  write_artifact(dir_ / "data" / "test.smsd", encode_dataset(test_));
}

void Pipeline::seed_stage() {
  const int side = train_.side;
  seeded_ = train_;
  const std::uint64_t seeding_seed = seed_for("seeding");
  for (const UserPartition& part : parts_) {
    const Seed s = generate_seed(part.user_id, cfg_.seed_n, side,
                                 seed_for("user-seed", static_cast<std::uint64_t>(part.user_id)),
                                 cfg_.placement);
    const SeedingResult r =
        seed_dataset(part, train_, s, cfg_.ser, cfg_.ssr, seeding_seed, cfg_.seeding_mode);
    seeded_ = apply_seeding(seeded_, r.samples);
    write_artifact(dir_ / "seeds" / ("user_" + std::to_string(part.user_id) + ".json"),
                   seed_record_json(record_of(s)) + "\n");
    if (part.user_id == cfg_.target_user) {
      target_seed_ = s;
      target_seeded_ = r.indices();
    }
  }
  write_artifact(dir_ / "data" / "seeded.smsd", encode_dataset(seeded_));
  Json idx = target_seeded_;
  write_artifact(dir_ / "seeds" / "target_seeded.json", idx.dump() + "\n");
  nonverif_train_ = cfg_.nonverif_on_clean ? train_ : seeded_;

  // Queries: the target user's seeded rows, and other-seed copies of their
  // unseeded rows (test rows when every sample is seeded).
  seeded_q_ = gather_rows(seeded_.images, target_seeded_);
  const UserPartition& part = parts_.at(static_cast<std::size_t>(cfg_.target_user));
  std::vector<std::size_t> bases;
  const std::set<std::size_t> used(target_seeded_.begin(), target_seeded_.end());
  for (std::size_t i : part.indices) {
    if (!used.contains(i)) bases.push_back(i);
  }
  const Dataset& base_src = bases.empty() ? test_ : train_;
  if (bases.empty()) {
    for (std::size_t i = 0; i < test_.size(); ++i) bases.push_back(i);
  }
  Rng pick(seed_for("alt-bases"));
  pick.shuffle(bases);
  const int owner_digit = ((cfg_.target_user % 10) + 10) % 10;
  alt_q_ = Tensor::matrix(cfg_.alt_queries, train_.dim());
  for (std::size_t i = 0; i < cfg_.alt_queries; ++i) {
    const int digit = (owner_digit + 1 + static_cast<int>(i % 9)) % 10;
    const int alt_id = 1000 + 10 * static_cast<int>(i) + digit;
    const Seed alt = generate_seed(alt_id, cfg_.seed_n, side, seed_for("alt-seed", i),
                                   cfg_.placement);
    const Tensor q = blend(base_src.images.row(bases[i % bases.size()]), alt.pattern.values(),
                           SeedMask::on_support(alt, cfg_.ser));
    std::copy(q.values().begin(), q.values().end(), alt_q_.row(i).begin());
  }

  erase_.user_id = cfg_.target_user;
  erase_.granularity = cfg_.erase;
  erase_.indices = cfg_.erase == EraseGranularity::whole_user ? part.indices : target_seeded_;
  validate_erase(erase_, part);

  if (cfg_.mib) {
    backdoor_ = default_backdoor(side);
    backdoor_.target = cfg_.mib_target;
    backdoor_.rate = cfg_.ssr;
    mib_ = mib_prepare(train_, part, backdoor_, seed_for("mib"));
    triggered_ = triggered_queries(test_, backdoor_);
  }
}

void Pipeline::save_trained(const SeededModel& m, const std::string& prefix) {
  fs::create_directories(dir_ / "models");
  for (const fs::path& p : save_model(m, dir_ / "models", prefix)) record(p);
}

void Pipeline::save_sharded(const ShardedModel& sm, const std::string& name) {
  const fs::path sub = dir_ / "models" / name;
  fs::create_directories(sub);
  for (std::size_t s = 0; s < sm.k(); ++s) {
    for (const fs::path& p : save_model(sm.shards[s], sub, "shard_" + std::to_string(s))) {
      record(p);
    }
  }
  Json j;
  j["assignment"] = sm.assignment;
  j["shard_seeds"] = sm.shard_seeds;
  write_artifact(sub / "layout.json", j.dump() + "\n");
}

ShardedModel Pipeline::load_sharded(const std::string& name) {
  const fs::path sub = dir_ / "models" / name;
  const Json j = Json::parse(read_file(sub / "layout.json"));
  ShardedModel sm;
  sm.assignment = j["assignment"].get<std::vector<int>>();
  sm.shard_seeds = j["shard_seeds"].get<std::vector<std::uint64_t>>();
  for (std::size_t s = 0; s < sm.shard_seeds.size(); ++s) {
    sm.shards.push_back(load_model(sub, "shard_" + std::to_string(s)));
  }
  return sm;
}

void Pipeline::train_stage(bool resumed) {
  const SgdConfig c = train_cfg();
  auto running = [&](const std::string& method, const TrainReport& rep) {
    state_["running_time"][method] = rep.running_time;
    write_artifact(dir_ / "reports" / ("train_" + method + ".csv"), report_csv(rep));
  };
  if (resumed) {
    sms_ = load_model(dir_ / "models", "sms");
    if (state_.value("baselines", true)) {
      nonverif_ = load_model(dir_ / "models", "nonverif");
      if (cfg_.mib) mib_model_ = load_model(dir_ / "models", "mib");
    }
    if (sisa()) sisa_ = load_sharded("sisa_pre");
    return;
  }
  TrainOptions opt;
  opt.test = &test_;
  auto [sms, sms_rep] = train_joint(seeded_, c, sms_weights(), opt);
  sms_ = std::move(sms);
  save_trained(*sms_, "sms");
  running("sms", sms_rep);
  state_["baselines"] = opts_.baselines;
  if (opts_.baselines) {
    auto [nv, nv_rep] = train_primary_only(nonverif_train_, c, opt);
    nonverif_ = std::move(nv);
    save_trained(*nonverif_, "nonverif");
    running("nonverif", nv_rep);
    if (cfg_.mib) {
      auto [mm, mm_rep] = train_primary_only(mib_.train, c, opt);
      mib_model_ = std::move(mm);
      save_trained(*mib_model_, "mib");
      running("mib", mm_rep);
    }
  }
  if (sisa()) {
    const auto t0 = Clock::now();
    sisa_ = sisa_train(seeded_, cfg_.sisa_k, c, sms_weights(), {}, jobs_);
    state_["running_time"]["sms_sisa"] = seconds_since(t0);
    save_sharded(*sisa_, "sisa_pre");
    write_artifact(dir_ / "models" / "sisa_pre" / "shards.json",
                   shard_manifest_json(*sisa_, {}) + "\n");
  }
}

void Pipeline::verifier_stage(bool resumed) {
  const fs::path vpath = dir_ / "models" / "verifier.bin";
  if (resumed) {
    const Json meta = Json::parse(read_file(dir_ / "models" / "verifier.json"));
    verifier_.net = load_mlp(vpath);
    verifier_.owner = meta["owner"].get<int>();
    verifier_.threshold = meta["threshold"].get<double>();
    verifier_.holdout_accuracy = meta["holdout_accuracy"].get<double>();
    return;
  }
  const UserPartition& part = parts_.at(static_cast<std::size_t>(cfg_.target_user));
  std::vector<std::size_t> pool = part.indices;
  Rng pick(seed_for("verifier-pairs"));
  pick.shuffle(pool);
  pool.resize(std::min(pool.size(), cfg_.verifier_pairs));
  std::sort(pool.begin(), pool.end());
  const Tensor clean = gather_rows(train_.images, pool);
  Tensor positive = clean;
  const std::uint64_t seeding_seed = seed_for("seeding");
  for (std::size_t r = 0; r < pool.size(); ++r) {
    Seed s = target_seed_;
    if (cfg_.seeding_mode == SeedingMode::per_sample) {
      s = generate_seed(cfg_.target_user, cfg_.seed_n, train_.side,
                        derive_seed(seeding_seed, "per-sample-seed", pool[r]), cfg_.placement);
    }
    const Tensor b = blend(clean.row(r), s.pattern.values(), SeedMask::on_support(s, cfg_.ser));
    std::copy(b.values().begin(), b.values().end(), positive.row(r).begin());
  }
  VerifierConfig vc;
  vc.sgd = SgdConfig{cfg_.verifier_lr, 16, cfg_.verifier_epochs, seed_for("verifier")};
  vc.threshold = cfg_.verifier_threshold;
  vc.blur_positives = cfg_.verifier_blur;
  verifier_ = train_verifier(build_verification_set(clean, positive), vc, cfg_.target_user);
  fs::create_directories(vpath.parent_path());
  save_mlp(verifier_.net, vpath);
  record(vpath);
  Json meta;
  meta["owner"] = verifier_.owner;
  meta["threshold"] = verifier_.threshold;
  meta["holdout_accuracy"] = verifier_.holdout_accuracy;
  meta["pairs"] = pool.size();
  write_artifact(dir_ / "models" / "verifier.json", meta.dump(2) + "\n");
}

double Pipeline::mia_for(const SeededModel& m, const Dataset& members) const {
  if (!cfg_.mia) return kNotMeasured;
  return mia_score(m, members.images, test_.images, seed_for("mia"));
}

MetricRow Pipeline::sms_row(const std::string& phase, const SeededModel& m) const {
  MetricRow r;
  r.phase = phase;
  r.method = "sms";
  const VerificationOutcome o = evaluate(verifier_, m, seeded_q_, alt_q_);
  r.verifiability = o.verifiability;
  r.unambiguity = o.unambiguity;
  r.mia = mia_for(m, seeded_.subset(erase_.indices));
  r.accuracy = accuracy(m, test_);
  return r;
}

void Pipeline::verify_stage(const std::string& phase) {
  const bool pre = phase == "pre_unlearn";
  const SeededModel* sms = pre ? &*sms_ : (sms_post_ ? &*sms_post_ : nullptr);
  if (sms) rows_.push_back(sms_row(phase, *sms));

  const ShardedModel* sm = pre ? (sisa_ ? &*sisa_ : nullptr) : (sisa_post_ ? &*sisa_post_ : nullptr);
  if (sm) {
    MetricRow r;
    r.phase = phase;
    r.method = "sms_sisa";
    r.verifiability = indicator_mean(sisa_verify(verifier_, *sm, seeded_q_), 1);
    r.unambiguity = indicator_mean(sisa_verify(verifier_, *sm, alt_q_), 0);
    if (cfg_.mia) {
      const ShardedModel& ref = *sm;
      r.mia = mia_score([&](const Tensor& x) { return sisa_log_probs(ref, x); },
                        seeded_.subset(erase_.indices).images, test_.images, seed_for("mia"));
    }
    r.accuracy = sisa_accuracy(*sm, test_);
    rows_.push_back(r);
  }

  const SeededModel* nv = pre ? (nonverif_ ? &*nonverif_ : nullptr)
                              : (nonverif_post_ ? &*nonverif_post_ : nullptr);
  if (nv) {
    MetricRow r;
    r.phase = phase;
    r.method = "nonverif";
    r.mia = mia_for(*nv, nonverif_train_.subset(erase_.indices));
    r.accuracy = accuracy(*nv, test_);
    rows_.push_back(r);
  }

  const SeededModel* mm = pre ? (mib_model_ ? &*mib_model_ : nullptr)
                              : (mib_post_ ? &*mib_post_ : nullptr);
  if (mm) {
    MetricRow r;
    r.phase = phase;
    r.method = "mib";
    r.mia = mia_for(*mm, mib_.train.subset(erase_.indices));
    r.accuracy = accuracy(*mm, test_);
    r.backdoor_asr = backdoor_asr(*mm, triggered_, backdoor_.target);
    rows_.push_back(r);
  }
}

void Pipeline::unlearn_stage(bool resumed) {
  const SgdConfig c = train_cfg();
  const JointWeights primary{1.0, 0.0};
  const std::string method(to_string(cfg_.unlearn));
  const fs::path traces = dir_ / "traces";

  UnlearnContext sms_ctx;
  sms_ctx.test = &test_;
  sms_ctx.method = "sms";
  sms_ctx.probe = [&](const SeededModel& m, TraceRow& row) {
    row.verifiability = verifiability(verifier_, m, seeded_q_);
    row.unambiguity = unambiguity(verifier_, m, alt_q_);
  };
  UnlearnContext nv_ctx;
  nv_ctx.test = &test_;
  nv_ctx.method = "nonverif";
  UnlearnContext mib_ctx;
  mib_ctx.test = &test_;
  mib_ctx.method = "mib";
  mib_ctx.probe = [&](const SeededModel& m, TraceRow& row) {
    row.backdoor_asr = backdoor_asr(m, triggered_, backdoor_.target);
  };

  // MIB: exact methods drop the user's backdoored uploads too; the
  // approximate method targets the genuine samples only.
  EraseRequest mib_erase = erase_;
  if (cfg_.unlearn != UnlearnMethod::approx) {
    mib_erase.indices.insert(mib_erase.indices.end(), mib_.backdoor_rows.begin(),
                             mib_.backdoor_rows.end());
  }

  if (resumed) {
    if (sisa()) {
      sisa_post_ = load_sharded("sisa_post");
    } else {
      sms_post_ = load_model(dir_ / "models", "sms_post");
      if (nonverif_) nonverif_post_ = load_model(dir_ / "models", "nonverif_post");
      if (mib_model_) mib_post_ = load_model(dir_ / "models", "mib_post");
    }
    return;
  }

  auto keep_trace = [&](const std::string& who, const UnlearnTrace& t) {
    write_artifact(traces / (who + "_" + method + ".csv"), trace_csv(t));
    if (t.aborted) log("[run] " + who + " " + method + " aborted: " + t.abort_reason);
  };

  switch (cfg_.unlearn) {
    case UnlearnMethod::retrain: {
      auto [m, t] = retrain_unlearn(seeded_, erase_, c, sms_weights(), sms_ctx);
      sms_post_ = std::move(m);
      keep_trace("sms", t);
      if (nonverif_) {
        auto [nv, nvt] = retrain_unlearn(nonverif_train_, erase_, c, primary, nv_ctx);
        nonverif_post_ = std::move(nv);
        keep_trace("nonverif", nvt);
      }
      if (mib_model_) {
        auto [mm, mt] = retrain_unlearn(mib_.train, mib_erase, c, primary, mib_ctx);
        mib_post_ = std::move(mm);
        keep_trace("mib", mt);
      }
      break;
    }
    case UnlearnMethod::sisa: {
      UnlearnContext ctx;
      ctx.test = &test_;
      ctx.method = "sms_sisa";
      SisaUnlearnResult res = sisa_unlearn(*sisa_, seeded_, erase_, c, sms_weights(), ctx, {},
                                           jobs_);
      res.trace.rows.front().verifiability =
          indicator_mean(sisa_verify(verifier_, res.model, seeded_q_), 1);
      res.trace.rows.front().unambiguity =
          indicator_mean(sisa_verify(verifier_, res.model, alt_q_), 0);
      sisa_post_ = std::move(res.model);
      keep_trace("sms_sisa", res.trace);
      save_sharded(*sisa_post_, "sisa_post");
      write_artifact(dir_ / "models" / "sisa_post" / "shards.json",
                     shard_manifest_json(*sisa_post_, res.retrained) + "\n");
      return;
    }
    case UnlearnMethod::approx: {
      ApproxConfig ac;
      ac.learning_rate = cfg_.effective_approx_lr();
      ac.steps = cfg_.approx_steps;
      ac.retain_fraction = cfg_.approx_retain;
      ac.retain_batch = cfg_.batch_size;
      ac.rng_seed = seed_for("approx");
      auto [m, t] = approx_unlearn(*sms_, seeded_.subset(erase_.indices),
                                   seeded_.without(erase_.indices), ac, sms_weights(), sms_ctx);
      sms_post_ = std::move(m);
      keep_trace("sms", t);
      if (nonverif_) {
        auto [nv, nvt] = approx_unlearn(*nonverif_, nonverif_train_.subset(erase_.indices),
                                        nonverif_train_.without(erase_.indices), ac, primary,
                                        nv_ctx);
        nonverif_post_ = std::move(nv);
        keep_trace("nonverif", nvt);
      }
      if (mib_model_) {
        auto [mm, mt] = approx_unlearn(*mib_model_, mib_.train.subset(mib_erase.indices),
                                       mib_.train.without(mib_erase.indices), ac, primary,
                                       mib_ctx);
        mib_post_ = std::move(mm);
        keep_trace("mib", mt);
      }
      break;
    }
  }
  save_trained(*sms_post_, "sms_post");
  if (nonverif_post_) save_trained(*nonverif_post_, "nonverif_post");
  if (mib_post_) save_trained(*mib_post_, "mib_post");
}

void Pipeline::finish() {
  write_artifact(dir_ / "metrics.csv", metrics_csv(rows_, cfg_.mib));
  std::string timing = "item,seconds\n";
  for (const auto& [k, v] : state_["running_time"].items()) {
    timing += "running_time:" + k + "," + cell(v.get<double>()) + "\n";
  }
  for (const auto& [k, v] : state_["stage_seconds"].items()) {
    timing += "stage:" + k + "," + cell(v.get<double>()) + "\n";
  }
  timing += "wall," + cell(seconds_since(start_)) + "\n";
  write_artifact(dir_ / "timing.csv", timing);
  save_state();
}

RunManifest Pipeline::run() {
  start_ = Clock::now();
  cfg_.validate();
  if (!opts_.stop_after.empty() &&
      std::find_if(std::begin(kStages), std::end(kStages), [&](const char* s) {
        return opts_.stop_after == s;
      }) == std::end(kStages)) {
    throw ConfigError("unknown stage '" + opts_.stop_after + "'");
  }
  open_state();
  auto stop = [&](const char* s) { return opts_.stop_after == s; };

  do {
    stage("data", [&](bool) { data_stage(); });
    if (stop("data")) break;
    stage("seed", [&](bool) { seed_stage(); });
    if (stop("seed")) break;
    stage("train", [&](bool r) { train_stage(r); });
    if (stop("train")) break;
    stage("verifier", [&](bool r) { verifier_stage(r); });
    if (stop("verifier")) break;
    stage("verify_pre", [&](bool) { verify_stage("pre_unlearn"); });
    if (stop("verify_pre")) break;
    stage("unlearn", [&](bool r) { unlearn_stage(r); });
    if (stop("unlearn")) break;
    stage("verify_post", [&](bool) { verify_stage("post_unlearn"); });
  } while (false);
  finish();

  RunManifest m;
  m.dir = dir_;
  m.config_hash = state_["config_hash"].get<std::string>();
  for (const auto& [k, v] : state_["artifacts"].items()) m.artifacts[k] = v.get<std::string>();
  m.rows = rows_;
  for (const auto& [k, v] : state_["running_time"].items()) m.running_time[k] = v.get<double>();
  m.wall_seconds = seconds_since(start_);
  write_file(dir_ / "manifest.json", manifest_json(m));
  log("[run] wrote " + (dir_ / "manifest.json").string());
  return m;
}

std::vector<std::string> split_fields(const std::string& line) {
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

}  // namespace

std::string metrics_csv(std::span<const MetricRow> rows, bool with_asr) {
  std::string out = "phase,method,verifiability,unambiguity,mia,accuracy";
  if (with_asr) out += ",backdoor_asr";
  out += '\n';
  for (const MetricRow& r : rows) {
    out += r.phase + ',' + r.method + ',' + cell(r.verifiability) + ',' + cell(r.unambiguity) +
           ',' + cell(r.mia) + ',' + cell(r.accuracy);
    if (with_asr) out += ',' + cell(r.backdoor_asr);
    out += '\n';
  }
  return out;
}

std::string manifest_json(const RunManifest& m) {
  Json j;
  j["config_hash"] = m.config_hash;
  Json arts = Json::object();
  for (const auto& [k, v] : m.artifacts) arts[k] = v;
  j["artifacts"] = std::move(arts);
  Json rows = Json::array();
  for (const MetricRow& r : m.rows) {
    rows.push_back({{"phase", r.phase},
                    {"method", r.method},
                    {"verifiability", num_or_null(r.verifiability)},
                    {"unambiguity", num_or_null(r.unambiguity)},
                    {"mia", num_or_null(r.mia)},
                    {"accuracy", num_or_null(r.accuracy)},
                    {"backdoor_asr", num_or_null(r.backdoor_asr)}});
  }
  j["rows"] = std::move(rows);
  Json rt = Json::object();
  for (const auto& [k, v] : m.running_time) rt[k] = v;
  j["running_time"] = std::move(rt);
  j["wall_seconds"] = m.wall_seconds;
  return j.dump(2) + "\n";
}

RunManifest load_manifest(const fs::path& path, bool verify) {
  const fs::path file = fs::is_directory(path) ? path / "manifest.json" : path;
  RunManifest m;
  m.dir = file.parent_path();
  Json j;
  try {
    j = Json::parse(read_file(file));
    m.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& [k, v] : j.at("artifacts").items()) m.artifacts[k] = v.get<std::string>();
    for (const auto& r : j.at("rows")) {
      MetricRow row;
      row.phase = r.at("phase").get<std::string>();
      row.method = r.at("method").get<std::string>();
      row.verifiability = from_json(r.at("verifiability"));
      row.unambiguity = from_json(r.at("unambiguity"));
      row.mia = from_json(r.at("mia"));
      row.accuracy = from_json(r.at("accuracy"));
      row.backdoor_asr = from_json(r.at("backdoor_asr"));
      m.rows.push_back(std::move(row));
    }
    for (const auto& [k, v] : j.at("running_time").items()) m.running_time[k] = v.get<double>();
    m.wall_seconds = j.at("wall_seconds").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(file.string() + ": " + e.what(), 0);
  }
  if (verify) {
    for (const auto& [k, sha] : m.artifacts) {
      const fs::path p = m.dir / k;
      if (!fs::exists(p)) throw IntegrityError("manifest lists missing artifact '" + k + "'");
      if (sha256_file(p) != sha) {
        throw IntegrityError("artifact '" + k + "' does not match its manifest hash");
      }
    }
  }
  return m;
}

RunManifest cmd_run(const ExperimentConfig& cfg, const RunOptions& opts) {
  Pipeline p(cfg, opts);
  return p.run();
}

SweepResult cmd_sweep(const ExperimentConfig& cfg, const std::string& axis,
                      std::span<const double> values, const RunOptions& opts) {
  if (axis != "ssr" && axis != "ser") {
    throw ConfigError("sweep axis must be ssr or ser, not '" + axis + "'");
  }
  if (values.size() < 2) throw ParameterError("a sweep needs at least two values");
  const fs::path root = opts.out.empty() ? cfg.out_dir : opts.out;
  fs::create_directories(root);
  SweepResult res;
  res.axis = axis;
  res.points.resize(values.size());
  const int jobs = opts.jobs > 0 ? opts.jobs : cfg.jobs;

  std::mutex log_mu;
  auto one = [&](std::size_t i) {
    ExperimentConfig c = cfg;
    set_config_value(c, axis, std::to_string(values[i]));
    c.seed = derive_seed(cfg.seed, "sweep-" + axis, i);
    c.mib = false;
    c.jobs = 1;
    RunOptions o;
    o.out = root / (axis + "_" + std::to_string(i));
    o.resume = opts.resume;
    o.stop_after = "verify_pre";
    o.baselines = false;
    const RunManifest m = cmd_run(c, o);
    SweepPoint& pt = res.points[i];
    pt.value = values[i];
    for (const MetricRow& r : m.rows) {
      if (r.method == "sms") pt.sms = r;
    }
    pt.running_time = m.running_time.at("sms");
    if (opts.log) {
      std::lock_guard lock(log_mu);
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "[sweep] %s=%g acc=%.4f verifiability=%.4f unambiguity=%.4f runtime=%.2fs",
                    axis.c_str(), values[i], pt.sms.accuracy, pt.sms.verifiability,
                    pt.sms.unambiguity, pt.running_time);
      *opts.log << buf << '\n' << std::flush;
    }
  };
  if (jobs <= 1) {
    for (std::size_t i = 0; i < values.size(); ++i) one(i);
  } else {
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex mu;
    std::size_t next = 0;
    for (int t = 0; t < std::min<int>(jobs, static_cast<int>(values.size())); ++t) {
      pool.emplace_back([&] {
        while (true) {
          std::size_t i;
          {
            std::lock_guard lock(mu);
            if (next >= values.size() || failure) return;
            i = next++;
          }
          try {
            one(i);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  std::string csv = "axis,value,accuracy,verifiability,unambiguity,running_time\n";
  LineChart chart;
  chart.title = "SMS vs " + axis;
  chart.x_label = axis;
  chart.y_label = "rate";
  Series acc{"accuracy", {}, {}}, ver{"verifiability", {}, {}}, una{"unambiguity", {}, {}};
  for (const SweepPoint& p : res.points) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", p.value);
    csv += axis + ',' + buf + ',' + cell(p.sms.accuracy) + ',' + cell(p.sms.verifiability) +
           ',' + cell(p.sms.unambiguity) + ',' + cell(p.running_time) + '\n';
    for (Series* s : {&acc, &ver, &una}) s->x.push_back(p.value);
    acc.y.push_back(p.sms.accuracy);
    ver.y.push_back(p.sms.verifiability);
    una.y.push_back(p.sms.unambiguity);
  }
  chart.series = {acc, ver, una};
  res.csv = root / "sweep.csv";
  res.svg = root / "sweep.svg";
  write_file(res.csv, csv);
  write_file(res.svg, render_line_chart(chart));
  return res;
}

std::string trace_svg(std::string_view trace_csv_text, const std::string& title) {
  const UnlearnTrace trace = parse_trace_csv(trace_csv_text);
  if (trace.rows.empty()) throw InputError("trace has no rows");
  std::vector<std::string> methods;
  for (const TraceRow& r : trace.rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
  }
  struct Column {
    const char* name;
    double TraceRow::*field;
  };
  const Column columns[] = {{"test_acc", &TraceRow::test_acc},
                            {"erased_acc", &TraceRow::erased_acc},
                            {"verifiability", &TraceRow::verifiability},
                            {"unambiguity", &TraceRow::unambiguity},
                            {"backdoor_asr", &TraceRow::backdoor_asr}};
  LineChart chart;
  chart.title = title;
  chart.x_label = "step";
  chart.y_label = "rate";
  for (const std::string& method : methods) {
    for (const Column& col : columns) {
      Series s;
      s.name = methods.size() > 1 ? method + " " + col.name : col.name;
      bool any = false;
      for (const TraceRow& r : trace.rows) {
        if (r.method != method) continue;
        s.x.push_back(r.step);
        s.y.push_back(r.*col.field);
        any = any || !std::isnan(r.*col.field);
      }
      if (any) chart.series.push_back(std::move(s));
    }
  }
  if (chart.series.empty()) throw InputError("trace has no measured values");
  return render_line_chart(chart);
}

void cmd_trace_plot(const fs::path& trace_path, const fs::path& svg_path) {
  const std::string text = read_file(trace_path);
  const std::string svg = trace_svg(text, trace_path.stem().string());
  if (svg_path.has_parent_path()) fs::create_directories(svg_path.parent_path());
  write_file(svg_path, svg);
}

std::string cmd_report(std::span<const fs::path> manifests) {
  if (manifests.empty()) throw InputError("report needs at least one manifest");
  std::string out =
      "run,method,phase,accuracy,verifiability,unambiguity,mia,backdoor_asr,runtime\n";
  for (const fs::path& p : manifests) {
    const RunManifest m = load_manifest(p, true);
    const std::string run = m.dir.filename().string();
    for (const MetricRow& r : m.rows) {
      const auto it = m.running_time.find(r.method);
      const double rt = it == m.running_time.end() ? kNotMeasured : it->second;
      out += run + ',' + r.method + ',' + r.phase + ',' + cell(r.accuracy) + ',' +
             cell(r.verifiability) + ',' + cell(r.unambiguity) + ',' + cell(r.mia) + ',' +
             cell(r.backdoor_asr) + ',' + cell(rt) + '\n';
    }
  }
  return out;
}

}  // namespace sms
