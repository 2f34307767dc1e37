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

#ifndef SMS_CONFIG_HPP_
#define SMS_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "sms/datasets.hpp"
#include "sms/seeding.hpp"

namespace sms {

enum class UnlearnMethod { retrain, sisa, approx };

std::string_view to_string(UnlearnMethod m);
UnlearnMethod parse_unlearn_method(std::string_view s);

// Flat key = value experiment description. Unknown keys are errors.
struct ExperimentConfig {
  // data
  std::string source = "synth";  // synth | idx
  std::filesystem::path idx_images;
  std::filesystem::path idx_labels;
  std::size_t idx_limit = 2500;
  int synth_per_class = 250;
  int synth_side = 12;
  int classes = 10;
  double train_fraction = 0.8;
  int n_users = 1;
  int target_user = 0;

  // seeding
  double ssr = 0.006;
  double ser = 0.6;
  int seed_n = 16;
  Placement placement = Placement::bottom_right;
  SeedingMode seeding_mode = SeedingMode::per_user;

  // joint training
  double alpha_p = 1.0;
  double alpha_s = 1000.0;
  double learning_rate = 0.05;
  std::size_t batch_size = 16;
  int epochs = 50;
  bool nonverif_on_clean = false;

  // verifier
  double verifier_lr = 0.01;
  int verifier_epochs = 50;
  double verifier_threshold = 0.5;
  bool verifier_blur = false;
  std::size_t verifier_pairs = 500;
  std::size_t alt_queries = 100;

  // unlearning
  UnlearnMethod unlearn = UnlearnMethod::retrain;
  int sisa_k = 5;
  int approx_steps = 200;
  double approx_lr = 0.0;  // 0 selects learning_rate / 2
  double approx_retain = 0.10;
  EraseGranularity erase = EraseGranularity::samples;

  // baselines
  bool mib = true;
  bool mia = true;
  int mib_target = 0;

  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 1;
  int jobs = 1;

  // Throws ConfigError naming the offending key.
  void validate() const;
  double effective_approx_lr() const { return approx_lr > 0.0 ? approx_lr : learning_rate / 2; }
};

// Parses `key = value` lines; `#` starts a comment. Throws ConfigError with
// the 1-based line number on syntax errors, unknown keys or bad values.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Canonical text form: every key, fixed order, one per line.
std::string config_text(const ExperimentConfig& cfg);

// SHA-256 over every key except out_dir and jobs, which never change results.
// Equal configs hash equal however they were written.
std::string config_hash(const ExperimentConfig& cfg);

// Sets a single key from its text form (same rules as the file parser).
void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value);

}  // namespace sms

#endif  // SMS_CONFIG_HPP_
