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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.
//
//   sms_acceptance [WORK_DIR]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sms/experiment.hpp"
#include "sms/io.hpp"

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const sms::MetricRow& row(const sms::RunManifest& m, const std::string& phase,
                          const std::string& method) {
  for (const auto& r : m.rows) {
    if (r.phase == phase && r.method == method) return r;
  }
  throw std::runtime_error("no metrics row " + phase + "/" + method + " in " + m.dir.string());
}

sms::RunManifest run(const fs::path& dir, const sms::ExperimentConfig& cfg) {
  sms::RunOptions o;
  o.out = dir;
  o.log = &std::cerr;
  return sms::cmd_run(cfg, o);
}

std::vector<double> primary_loss(const fs::path& report) {
  std::istringstream in(sms::read_file(report));
  std::string line;
  std::getline(in, line);  // header
  std::vector<double> out;
  while (std::getline(in, line)) {
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    out.push_back(std::stod(line.substr(a + 1, b - a - 1)));
  }
  return out;
}

// Total training wall clock: the seconds column summed over epochs.
double training_seconds(const fs::path& report) {
  std::istringstream in(sms::read_file(report));
  std::string line;
  std::getline(in, line);  // header
  double total = 0.0;
  while (std::getline(in, line)) total += std::stod(line.substr(line.rfind(',') + 1));
  return total;
}

// Sample standard deviation of consecutive differences over epochs [from, to].
double delta_std(const std::vector<double>& loss, int from, int to) {
  std::vector<double> d;
  for (int e = from + 1; e <= to; ++e) d.push_back(loss[e - 1] - loss[e - 2]);
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(d.size() - 1));
}

double lsq_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

sms::ShardedModel load_shards(const fs::path& sub) {
  const Json j = Json::parse(sms::read_file(sub / "layout.json"));
  sms::ShardedModel sm;
  sm.assignment = j["assignment"].get<std::vector<int>>();
  sm.shard_seeds = j["shard_seeds"].get<std::vector<std::uint64_t>>();
  for (std::size_t s = 0; s < sm.shard_seeds.size(); ++s) {
    sm.shards.push_back(sms::load_model(sub, "shard_" + std::to_string(s)));
  }
  return sm;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1])
                                 : fs::temp_directory_path() / "sms_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);
  const sms::ExperimentConfig base;

  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria;
  sms::RunManifest main_run;

  criteria.emplace_back("1 end-to-end separation", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    main_run = run(work / "retrain", base);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto& pre = row(main_run, "pre_unlearn", "sms");
    const auto& post = row(main_run, "post_unlearn", "sms");
    const bool ok = pre.verifiability >= 0.90 && pre.unambiguity >= 0.90 &&
                    post.verifiability <= 0.10 && post.unambiguity >= 0.90 && secs <= 600.0;
    return Outcome{ok, fmt("pre ver=%.3f (>=0.90) unamb=%.3f (>=0.90); post ver=%.3f (<=0.10) "
                           "unamb=%.3f (>=0.90); runtime %.1fs (<=600)",
                           pre.verifiability, pre.unambiguity, post.verifiability,
                           post.unambiguity, secs)};
  });

  criteria.emplace_back("2 functionality preservation", [&] {
    const double a = row(main_run, "pre_unlearn", "sms").accuracy;
    const double b = row(main_run, "pre_unlearn", "nonverif").accuracy;
    return Outcome{std::abs(a - b) <= 0.02,
                   fmt("acc(sms)=%.4f acc(primary-only)=%.4f |diff|=%.4f (<=0.02)", a, b,
                       std::abs(a - b))};
  });

  criteria.emplace_back("3 SISA exactness and verification", [&] {
    sms::ExperimentConfig c = base;
    c.unlearn = sms::UnlearnMethod::sisa;
    c.mib = false;
    const fs::path dir = work / "sisa";
    const sms::RunManifest m = run(dir, c);
    const auto& pre = row(m, "pre_unlearn", "sms_sisa");
    const auto& post = row(m, "post_unlearn", "sms_sisa");

    // Hash identity of untouched shards, from the run's own manifests.
    const Json before = Json::parse(sms::read_file(dir / "models/sisa_pre/shards.json"));
    const Json after = Json::parse(sms::read_file(dir / "models/sisa_post/shards.json"));
    const auto retrained = after["retrained"].get<std::vector<int>>();
    int untouched = 0;
    bool same = true;
    for (std::size_t s = 0; s < after["shards"].size(); ++s) {
      if (std::find(retrained.begin(), retrained.end(), static_cast<int>(s)) != retrained.end()) {
        continue;
      }
      ++untouched;
      same = same && before["shards"][s]["sha256"] == after["shards"][s]["sha256"];
    }

    // The user's seeded rows usually span every shard, so also erase the
    // seeded rows of one shard and check the other k - 1 checkpoints.
    const sms::ShardedModel sm = load_shards(dir / "models/sisa_pre");
    const sms::Dataset seeded = sms::load_dataset(dir / "data/seeded.smsd");
    const auto target =
        Json::parse(sms::read_file(dir / "seeds/target_seeded.json")).get<std::vector<std::size_t>>();
    sms::EraseRequest one;
    const int shard = sm.assignment[target.front()];
    for (std::size_t i : target) {
      if (sm.assignment[i] == shard) one.indices.push_back(i);
    }
    const sms::SgdConfig sgd{c.learning_rate, c.batch_size, c.epochs,
                             sms::derive_seed(c.seed, "train")};
    const sms::SisaUnlearnResult single =
        sms::sisa_unlearn(sm, seeded, one, sgd, {c.alpha_p, c.alpha_s});
    const auto h0 = sm.shard_hashes();
    const auto h1 = single.model.shard_hashes();
    int single_same = 0;
    for (std::size_t s = 0; s < sm.k(); ++s) {
      if (static_cast<int>(s) != shard && h0[s] == h1[s]) ++single_same;
    }
    const bool single_ok = single.retrained == std::vector<int>{shard} &&
                           single_same == static_cast<int>(sm.k()) - 1 &&
                           h0[static_cast<std::size_t>(shard)] != h1[static_cast<std::size_t>(shard)];

    const double drop = pre.accuracy - post.accuracy;
    const bool ok = same && single_ok && post.verifiability <= 0.10 && drop <= 0.03;
    return Outcome{ok, fmt("run: %d untouched shard(s) identical=%s; single-shard erase: %d/%zu "
                           "untouched identical; post ver=%.3f (<=0.10); acc drop=%.4f (<=0.03)",
                           untouched, same ? "yes" : "no", single_same, sm.k() - 1,
                           post.verifiability, drop)};
  });

  criteria.emplace_back("4 MIB failure under approximate unlearning", [&] {
    sms::ExperimentConfig c = base;
    c.unlearn = sms::UnlearnMethod::approx;
    const sms::RunManifest m = run(work / "approx", c);
    const double asr = row(m, "post_unlearn", "mib").backdoor_asr;
    const double ver = row(m, "post_unlearn", "sms").verifiability;
    // Bounds 0.90 and 0.10, each with the +-0.10 tolerance.
    return Outcome{asr >= 0.80 && ver <= 0.20,
                   fmt("MIB ASR=%.3f (>=0.90-0.10); SMS ver=%.3f (<=0.10+0.10)", asr, ver)};
  });

  criteria.emplace_back("5 SER trend", [&] {
    const std::vector<double> sers = {0.2, 0.4, 0.6, 0.8, 1.0};
    sms::RunOptions o;
    o.out = work / "sweep_ser";
    o.log = &std::cerr;
    const sms::SweepResult r = sms::cmd_sweep(base, "ser", sers, o);
    std::vector<double> v;
    for (const auto& p : r.points) v.push_back(p.sms.verifiability);
    const double gain = v.back() - v.front();
    const double slope = lsq_slope(sers, v);
    return Outcome{gain >= 0.15 && slope > 0.0,
                   fmt("ver=[%.2f %.2f %.2f %.2f %.2f]; v(1.0)-v(0.2)=%.3f (>=0.15); slope=%.3f (>0)",
                       v[0], v[1], v[2], v[3], v[4], gain, slope)};
  });

  criteria.emplace_back("6 SSR runtime flatness", [&] {
    const std::vector<double> ssrs = {0.002, 0.006, 0.01};
    sms::RunOptions o;
    o.out = work / "sweep_ssr";
    o.log = &std::cerr;
    const sms::SweepResult r = sms::cmd_sweep(base, "ssr", ssrs, o);
    std::vector<double> t;
    for (std::size_t i = 0; i < r.points.size(); ++i) {
      t.push_back(training_seconds(o.out / ("ssr_" + std::to_string(i)) / "reports" /
                                   "train_sms.csv"));
    }
    const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
    const double rel = (*hi - *lo) / *lo;
    return Outcome{rel <= 0.10,
                   fmt("training wall clock=[%.3fs %.3fs %.3fs]; (max-min)/min=%.3f (<=0.10); "
                       "batch-extrapolated=[%.3fs %.3fs %.3fs]",
                       t[0], t[1], t[2], rel, r.points[0].running_time,
                       r.points[1].running_time, r.points[2].running_time)};
  });

  criteria.emplace_back("7 loss-dynamics smoothness", [&] {
    const auto sms_loss = primary_loss(main_run.dir / "reports/train_sms.csv");
    const auto mib_loss = primary_loss(main_run.dir / "reports/train_mib.csv");
    const double a = delta_std(sms_loss, 10, 50);
    const double b = delta_std(mib_loss, 10, 50);
    return Outcome{a <= b, fmt("std of epoch deltas, epochs 10-50: SMS=%.3e MIB=%.3e (SMS<=MIB)",
                               a, b)};
  });

  criteria.emplace_back("8 numerical soundness selftest", [&] {
    std::ostringstream log;
    const auto t0 = std::chrono::steady_clock::now();
    const bool ok = sms::run_selftest(log);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!ok) std::cerr << log.str();
    return Outcome{ok && secs <= 60.0,
                   fmt("selftest %s in %.2fs (<=60)", ok ? "passed" : "failed", secs)};
  });

  criteria.emplace_back("9 MIA directionality", [&] {
    sms::ExperimentConfig c = base;
    c.n_users = 4;
    c.erase = sms::EraseGranularity::whole_user;
    c.mib = false;
    const sms::RunManifest m = run(work / "mia", c);
    const auto& pre = row(m, "pre_unlearn", "sms");
    const auto& post = row(m, "post_unlearn", "sms");
    const double mia_drop = pre.mia - post.mia;
    const double ver_drop = pre.verifiability - post.verifiability;
    return Outcome{mia_drop >= 0.02 && mia_drop < ver_drop,
                   fmt("MIA %.3f -> %.3f (drop %.3f, >=0.02); verifiability drop %.3f (> MIA drop)",
                       pre.mia, post.mia, mia_drop, ver_drop)};
  });

  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = Outcome{false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << name << ": " << o.detail
              << std::endl;
  }
  std::cout << (failed == 0 ? "acceptance: all criteria passed"
                            : "acceptance: " + std::to_string(failed) + " criterion(s) failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
