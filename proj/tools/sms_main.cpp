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

// sms: seed, train, verify and unlearn from the command line.

#include <CLI11.hpp>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "sms/error.hpp"
#include "sms/experiment.hpp"
#include "sms/io.hpp"

namespace {

namespace fs = std::filesystem;

enum Exit : int { kOk = 0, kConfig = 2, kStage = 3, kIntegrity = 4 };

sms::ExperimentConfig resolve_config(const std::string& path) {
  sms::ExperimentConfig cfg = path.empty() ? sms::ExperimentConfig{} : sms::load_config(path);
  if (const char* env = std::getenv("SMS_SEED")) {
    const std::string_view s(env);
    std::uint64_t seed = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
    if (ec != std::errc() || end != s.data() + s.size() || s.empty()) {
      throw sms::ConfigError("SMS_SEED must be an unsigned integer, got '" + std::string(s) +
                             "'");
    }
    cfg.seed = seed;
  }
  cfg.validate();
  return cfg;
}

struct Common {
  std::string config;
  std::string out;
  bool resume = false;
  int jobs = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Config file (key = value lines)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_flag("--resume", c.resume, "Continue a partial run in --out");
  cmd->add_option("--jobs", c.jobs, "Worker threads (0 keeps the config value)")
      ->check(CLI::NonNegativeNumber);
}

sms::RunOptions options_of(const Common& c) {
  sms::RunOptions o;
  o.out = c.out;
  o.resume = c.resume;
  o.jobs = c.jobs;
  o.log = &std::cerr;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Seed, verify and unlearn user data in small models"};
  app.require_subcommand(1);

  Common run_opts;
  std::string stop_after;
  CLI::App* run = app.add_subcommand("run", "Run the full pipeline once");
  add_common(run, run_opts);
  run->add_option("--stop-after", stop_after, "Last stage to execute");

  Common sweep_opts;
  std::string axis = "ser";
  std::vector<double> values;
  CLI::App* sweep = app.add_subcommand("sweep", "Repeat the pipeline over one parameter");
  add_common(sweep, sweep_opts);
  sweep->add_option("--axis", axis, "ssr or ser")->check(CLI::IsMember({"ssr", "ser"}));
  sweep->add_option("--values", values, "Comma-separated values")->delimiter(',');

  std::string trace_path;
  std::string svg_out;
  CLI::App* plot = app.add_subcommand("trace-plot", "Render an unlearning trace as SVG");
  plot->add_option("trace", trace_path, "Trace CSV")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", svg_out, "SVG file or directory (default: beside the trace)");

  std::vector<std::string> manifests;
  std::string report_out;
  CLI::App* report = app.add_subcommand("report", "Tabulate metrics from run manifests");
  report->add_option("manifests", manifests, "Run directories or manifest.json files")
      ->required();
  report->add_option("--out", report_out, "CSV file (default: stdout)");

  app.add_subcommand("selftest", "Gradient, identity and determinism checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (run->parsed()) {
      const sms::ExperimentConfig cfg = resolve_config(run_opts.config);
      sms::RunOptions o = options_of(run_opts);
      o.stop_after = stop_after;
      const sms::RunManifest m = sms::cmd_run(cfg, o);
      std::cout << sms::read_file(m.dir / "metrics.csv");
    } else if (sweep->parsed()) {
      const sms::ExperimentConfig cfg = resolve_config(sweep_opts.config);
      if (values.empty()) {
        values = axis == "ser" ? std::vector<double>{0.2, 0.4, 0.6, 0.8, 1.0}
                               : std::vector<double>{0.002, 0.006, 0.01};
      }
      const sms::SweepResult r = sms::cmd_sweep(cfg, axis, values, options_of(sweep_opts));
      std::cout << sms::read_file(r.csv);
    } else if (plot->parsed()) {
      fs::path target = svg_out.empty() ? fs::path(trace_path).replace_extension(".svg")
                                        : fs::path(svg_out);
      if (fs::is_directory(target)) {
        target /= fs::path(trace_path).stem().string() + ".svg";
      }
      sms::cmd_trace_plot(trace_path, target);
      std::cout << target.string() << '\n';
    } else if (report->parsed()) {
      const std::vector<fs::path> paths(manifests.begin(), manifests.end());
      const std::string csv = sms::cmd_report(paths);
      if (report_out.empty()) {
        std::cout << csv;
      } else {
        sms::write_file(report_out, csv);
      }
    } else {
      return sms::run_selftest(std::cout) ? kOk : kStage;
    }
  } catch (const sms::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const sms::IntegrityError& e) {
    std::cerr << "integrity error: " << e.what() << '\n';
    return kIntegrity;
  } catch (const sms::FormatError& e) {
    std::cerr << "integrity error: " << e.what() << '\n';
    return kIntegrity;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kStage;
  }
  return kOk;
}
