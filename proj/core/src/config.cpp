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

#include "sms/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "sms/error.hpp"
#include "sms/io.hpp"

namespace sms {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(std::string(key) + ": '" + std::string(v) + "' is not a number");
  }
  return out;
}

template <typename Int>
Int to_int(std::string_view key, std::string_view v) {
  Int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(std::string(key) + ": '" + std::string(v) + "' is not an integer");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(std::string(key) + ": '" + std::string(v) + "' is not a boolean");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string_view mode_name(SeedingMode m) {
  return m == SeedingMode::per_user ? "per_user" : "per_sample";
}

struct Field {
  std::function<void(ExperimentConfig&, std::string_view, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define SMS_DOUBLE(name)                                                              \
  {#name,                                                                             \
   {[](ExperimentConfig& c, std::string_view k, std::string_view v) {                 \
      c.name = to_double(k, v);                                                       \
    },                                                                                \
    [](const ExperimentConfig& c) { return fmt(c.name); }}}
#define SMS_INT(name, type)                                                           \
  {#name,                                                                             \
   {[](ExperimentConfig& c, std::string_view k, std::string_view v) {                 \
      c.name = to_int<type>(k, v);                                                    \
    },                                                                                \
    [](const ExperimentConfig& c) { return std::to_string(c.name); }}}
#define SMS_BOOL(name)                                                                \
  {#name,                                                                             \
   {[](ExperimentConfig& c, std::string_view k, std::string_view v) {                 \
      c.name = to_bool(k, v);                                                         \
    },                                                                                \
    [](const ExperimentConfig& c) { return std::string(c.name ? "true" : "false"); }}}
#define SMS_PATH(name)                                                                \
  {#name,                                                                             \
   {[](ExperimentConfig& c, std::string_view, std::string_view v) { c.name = v; },    \
    [](const ExperimentConfig& c) { return c.name.string(); }}}

const std::map<std::string, Field, std::less<>>& fields() {
  static const std::map<std::string, Field, std::less<>> table = {
      {"source",
       {[](ExperimentConfig& c, std::string_view k, std::string_view v) {
          if (v != "synth" && v != "idx") {
            throw ConfigError(std::string(k) + ": expected synth or idx");
          }
          c.source = v;
        },
        [](const ExperimentConfig& c) { return c.source; }}},
      SMS_PATH(idx_images),
      SMS_PATH(idx_labels),
      SMS_INT(idx_limit, std::size_t),
      SMS_INT(synth_per_class, int),
      SMS_INT(synth_side, int),
      SMS_INT(classes, int),
      SMS_DOUBLE(train_fraction),
      SMS_INT(n_users, int),
      SMS_INT(target_user, int),
      SMS_DOUBLE(ssr),
      SMS_DOUBLE(ser),
      SMS_INT(seed_n, int),
      {"placement",
       {[](ExperimentConfig& c, std::string_view k, std::string_view v) {
          try {
            c.placement = parse_placement(v);
          } catch (const ParameterError& e) {
            throw ConfigError(std::string(k) + ": " + e.what());
          }
        },
        [](const ExperimentConfig& c) { return std::string(to_string(c.placement)); }}},
      {"seeding_mode",
       {[](ExperimentConfig& c, std::string_view k, std::string_view v) {
          if (v == "per_user") {
            c.seeding_mode = SeedingMode::per_user;
          } else if (v == "per_sample") {
            c.seeding_mode = SeedingMode::per_sample;
          } else {
            throw ConfigError(std::string(k) + ": expected per_user or per_sample");
          }
        },
        [](const ExperimentConfig& c) { return std::string(mode_name(c.seeding_mode)); }}},
      SMS_DOUBLE(alpha_p),
      SMS_DOUBLE(alpha_s),
      SMS_DOUBLE(learning_rate),
      SMS_INT(batch_size, std::size_t),
      SMS_INT(epochs, int),
      SMS_BOOL(nonverif_on_clean),
      SMS_DOUBLE(verifier_lr),
      SMS_INT(verifier_epochs, int),
      SMS_DOUBLE(verifier_threshold),
      SMS_BOOL(verifier_blur),
      SMS_INT(verifier_pairs, std::size_t),
      SMS_INT(alt_queries, std::size_t),
      {"unlearn",
       {[](ExperimentConfig& c, std::string_view k, std::string_view v) {
          try {
            c.unlearn = parse_unlearn_method(v);
          } catch (const ConfigError& e) {
            throw ConfigError(std::string(k) + ": " + e.what());
          }
        },
        [](const ExperimentConfig& c) { return std::string(to_string(c.unlearn)); }}},
      SMS_INT(sisa_k, int),
      SMS_INT(approx_steps, int),
      SMS_DOUBLE(approx_lr),
      SMS_DOUBLE(approx_retain),
      {"erase",
       {[](ExperimentConfig& c, std::string_view k, std::string_view v) {
          try {
            c.erase = parse_granularity(v);
          } catch (const Error& e) {
            throw ConfigError(std::string(k) + ": " + e.what());
          }
        },
        [](const ExperimentConfig& c) { return std::string(to_string(c.erase)); }}},
      SMS_BOOL(mib),
      SMS_BOOL(mia),
      SMS_INT(mib_target, int),
      SMS_PATH(out_dir),
      SMS_INT(seed, std::uint64_t),
      SMS_INT(jobs, int),
  };
  return table;
}

#undef SMS_DOUBLE
#undef SMS_INT
#undef SMS_BOOL
#undef SMS_PATH

// Canonical key order, matching the struct layout.
constexpr const char* kOrder[] = {
    "source",        "idx_images",      "idx_labels",     "idx_limit",
    "synth_per_class", "synth_side",    "classes",        "train_fraction",
    "n_users",       "target_user",     "ssr",            "ser",
    "seed_n",        "placement",       "seeding_mode",   "alpha_p",
    "alpha_s",       "learning_rate",   "batch_size",     "epochs",
    "nonverif_on_clean", "verifier_lr", "verifier_epochs", "verifier_threshold",
    "verifier_blur", "verifier_pairs",  "alt_queries",    "unlearn",
    "sisa_k",        "approx_steps",    "approx_lr",      "approx_retain",
    "erase",         "mib",             "mia",            "mib_target",
    "out_dir",       "seed",            "jobs"};

void require(bool ok, const char* key, const std::string& rule) {
  if (!ok) throw ConfigError(std::string(key) + ": " + rule);
}

}  // namespace

std::string_view to_string(UnlearnMethod m) {
  switch (m) {
    case UnlearnMethod::retrain:
      return "retrain";
    case UnlearnMethod::sisa:
      return "sisa";
    case UnlearnMethod::approx:
      return "approx";
  }
  return "retrain";
}

UnlearnMethod parse_unlearn_method(std::string_view s) {
  if (s == "retrain") return UnlearnMethod::retrain;
  if (s == "sisa") return UnlearnMethod::sisa;
  if (s == "approx") return UnlearnMethod::approx;
  throw ConfigError("unknown unlearning method '" + std::string(s) +
                    "' (expected retrain, sisa or approx)");
}

void ExperimentConfig::validate() const {
  if (source == "idx") {
    require(!idx_images.empty() && std::filesystem::exists(idx_images), "idx_images",
            "file '" + idx_images.string() + "' does not exist");
    require(!idx_labels.empty() && std::filesystem::exists(idx_labels), "idx_labels",
            "file '" + idx_labels.string() + "' does not exist");
  }
  require(synth_per_class >= 1, "synth_per_class", "must be >= 1");
  require(synth_side >= 8, "synth_side", "must be >= 8");
  require(classes >= 2 && classes <= 10, "classes", "must lie in [2, 10]");
  require(train_fraction > 0.0 && train_fraction < 1.0, "train_fraction",
          "must lie in (0, 1)");
  require(n_users >= 1, "n_users", "must be >= 1");
  require(target_user >= 0 && target_user < n_users, "target_user",
          "must lie in [0, n_users)");
  require(ssr > 0.0 && ssr <= 1.0, "ssr", "must lie in (0, 1]");
  require(ser >= 0.0 && ser <= 1.0, "ser", "must lie in [0, 1]");
  require(seed_n >= 1, "seed_n", "must be >= 1");
  require(alpha_p >= 0.0 && alpha_s >= 0.0 && alpha_p + alpha_s > 0.0, "alpha_p",
          "alphas must be >= 0 with a positive sum");
  require(learning_rate > 0.0, "learning_rate", "must be > 0");
  require(batch_size >= 1, "batch_size", "must be >= 1");
  require(epochs >= 1, "epochs", "must be >= 1");
  require(verifier_lr > 0.0, "verifier_lr", "must be > 0");
  require(verifier_epochs >= 1, "verifier_epochs", "must be >= 1");
  require(verifier_threshold > 0.0 && verifier_threshold < 1.0, "verifier_threshold",
          "must lie in (0, 1)");
  require(verifier_pairs >= 2, "verifier_pairs", "must be >= 2");
  require(alt_queries >= 1, "alt_queries", "must be >= 1");
  require(sisa_k >= 2, "sisa_k", "must be >= 2");
  require(approx_steps >= 1, "approx_steps", "must be >= 1");
  require(approx_lr >= 0.0, "approx_lr", "must be >= 0");
  require(approx_retain > 0.0 && approx_retain <= 1.0, "approx_retain",
          "must lie in (0, 1]");
  require(mib_target >= 0 && mib_target < classes, "mib_target",
          "must lie in [0, classes)");
  require(!out_dir.empty(), "out_dir", "must not be empty");
  require(jobs >= 1, "jobs", "must be >= 1");
  require(!(n_users == 1 && erase == EraseGranularity::whole_user), "erase",
          "whole_user erasure needs n_users >= 2");
}

void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  const auto& table = fields();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown key '" + std::string(key) + "'");
  it->second.set(cfg, key, value);
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  std::map<std::string, std::size_t, std::less<>> seen;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(lineno) + ": ";
    if (eq == std::string_view::npos) {
      throw ConfigError(where + "expected 'key = value'");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + "missing key");
    if (const auto prev = seen.find(key); prev != seen.end()) {
      throw ConfigError(where + "'" + std::string(key) + "' already set on line " +
                        std::to_string(prev->second));
    }
    seen.emplace(std::string(key), lineno);
    try {
      set_config_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw ConfigError("cannot read config '" + path.string() + "': " + e.what());
  }
  return parse_config(text);
}

std::string config_text(const ExperimentConfig& cfg) {
  const auto& table = fields();
  std::string out;
  for (const char* key : kOrder) {
    out += key;
    out += " = ";
    out += table.at(key).get(cfg);
    out += '\n';
  }
  return out;
}

std::string config_hash(const ExperimentConfig& cfg) {
  const auto& table = fields();
  std::string text;
  for (const char* key : kOrder) {
    const std::string_view k = key;
    if (k == "out_dir" || k == "jobs") continue;
    text += k;
    text += '=';
    text += table.at(key).get(cfg);
    text += '\n';
  }
  return sha256_hex(text);
}

}  // namespace sms
