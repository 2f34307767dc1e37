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

#ifndef SMS_EXPERIMENT_HPP_
#define SMS_EXPERIMENT_HPP_

#include <filesystem>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sms/config.hpp"
#include "sms/unlearning.hpp"

namespace sms {

// Pipeline stages in execution order.
inline constexpr const char* kStages[] = {"data",   "seed",       "train",   "verifier",
                                          "verify_pre", "unlearn", "verify_post"};

struct RunOptions {
  std::filesystem::path out;  // overrides cfg.out_dir when set
  bool resume = false;
  int jobs = 0;               // 0 keeps cfg.jobs
  std::string stop_after;     // empty runs every stage
  bool baselines = true;      // also train the non-verifiable and MIB models
  std::ostream* log = nullptr;
};

// One row of metrics.csv. Unmeasured cells are NaN and written empty.
struct MetricRow {
  std::string phase;   // pre_unlearn | post_unlearn
  std::string method;  // sms | sms_sisa | nonverif | mib
  double verifiability = kNotMeasured;
  double unambiguity = kNotMeasured;
  double mia = kNotMeasured;
  double accuracy = kNotMeasured;
  double backdoor_asr = kNotMeasured;
};

// phase,method,verifiability,unambiguity,mia,accuracy[,backdoor_asr]
std::string metrics_csv(std::span<const MetricRow> rows, bool with_asr);

struct RunManifest {
  std::filesystem::path dir;
  std::string config_hash;
  std::map<std::string, std::string> artifacts;  // path relative to dir -> sha256
  std::vector<MetricRow> rows;
  std::map<std::string, double> running_time;    // method -> seconds
  double wall_seconds = 0.0;
};

std::string manifest_json(const RunManifest& m);
// Reads <dir>/manifest.json. With `verify`, every listed artifact is
// re-hashed and a mismatch or missing file throws IntegrityError.
RunManifest load_manifest(const std::filesystem::path& path, bool verify = true);

// seed -> train -> verify(pre) -> unlearn -> verify(post). Writes
// metrics.csv (byte-deterministic), timing.csv, traces/, models/, seeds/ and
// manifest.json under the output directory. Stage errors become StageError;
// an existing run in the directory is refused unless `resume` is set.
RunManifest cmd_run(const ExperimentConfig& cfg, const RunOptions& opts = {});

struct SweepPoint {
  double value = 0.0;
  MetricRow sms;             // pre-unlearn SMS row
  double running_time = 0.0; // SMS training running time
};

struct SweepResult {
  std::string axis;
  std::vector<SweepPoint> points;
  std::filesystem::path csv;
  std::filesystem::path svg;
};

// One run per value (through verify_pre) in <out>/<axis>_<i>/, each with a
// master seed derived from the config's. Writes sweep.csv and sweep.svg.
SweepResult cmd_sweep(const ExperimentConfig& cfg, const std::string& axis,
                      std::span<const double> values, const RunOptions& opts = {});

// Renders a trace CSV as a multi-series line chart.
std::string trace_svg(std::string_view trace_csv_text, const std::string& title);
void cmd_trace_plot(const std::filesystem::path& trace_path,
                    const std::filesystem::path& svg_path);

// One row per (run, method, phase):
// run,method,phase,accuracy,verifiability,unambiguity,mia,backdoor_asr,runtime
std::string cmd_report(std::span<const std::filesystem::path> manifests);

// Gradient checks, metric identities, blend identities, partition laws and a
// determinism check. Prints one line per check; true iff all pass.
bool run_selftest(std::ostream& out);

}  // namespace sms

#endif  // SMS_EXPERIMENT_HPP_
