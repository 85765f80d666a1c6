/*
 * Copyright 2026 The crowdnav Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// crowdnav run: benchmark episodes over a grid of modes and crowd sizes.
// Exit codes: 0 done, 1 internal, 2 usage or config, 3 io.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "crowdnav/crowdnav.h"

namespace {

int ExitCode(cn_status status) {
  switch (status) {
    case CN_OK:
      return 0;
    case CN_ERR_INVALID_ARGUMENT:
    case CN_ERR_CONFIG:
      return 2;
    case CN_ERR_IO:
      return 3;
    default:
      return 1;
  }
}

int Report(cn_status status, const std::string& context) {
  std::fprintf(stderr, "crowdnav: %s: %s: %s\n", context.c_str(), cn_status_name(status),
               cn_last_error());
  return ExitCode(status);
}

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  for (char c : text + ",") {
    if (c == ',') {
      if (!item.empty()) out.push_back(item);
      item.clear();
    } else if (c != ' ') {
      item += c;
    }
  }
  return out;
}

struct RunArgs {
  std::string config;
  std::string modes = "full";
  std::string agents = "20";
  int trials = 100;
  std::uint64_t seed = 0;
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::string out;
  bool plots = false;
  bool continue_after_collision = false;
  std::vector<std::string> overrides;
};

class Run {
 public:
  ~Run() {
    for (cn_result* r : results_) cn_result_destroy(r);
    cn_config_destroy(config_);
  }

  int Execute(const RunArgs& args) {
    cn_status st = cn_config_create(&config_);
    if (st != CN_OK) return Report(st, "config");
    if (!args.config.empty() && (st = cn_config_load(config_, args.config.c_str())) != CN_OK) {
      return Report(st, args.config);
    }
    for (const std::string& kv : args.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        std::fprintf(stderr, "crowdnav: --set expects key=value, got '%s'\n", kv.c_str());
        return 2;
      }
      st = cn_config_set(config_, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
      if (st != CN_OK) return Report(st, "--set " + kv);
    }
    std::vector<std::string> modes = SplitList(args.modes);
    if (modes.size() == 1 && modes[0] == "all") modes = {"sgap", "dagap", "dagap-cfs", "full"};
    std::vector<int> crowds;
    for (const std::string& a : SplitList(args.agents)) {
      try {
        std::size_t used = 0;
        crowds.push_back(std::stoi(a, &used));
        if (used != a.size()) throw std::invalid_argument(a);
      } catch (const std::exception&) {
        std::fprintf(stderr, "crowdnav: bad agent count '%s'\n", a.c_str());
        return 2;
      }
    }
    if (modes.empty() || crowds.empty()) {
      std::fprintf(stderr, "crowdnav: need at least one mode and one agent count\n");
      return 2;
    }
    const bool grid = modes.size() * crowds.size() > 1;
    for (int n : crowds) {
      for (const std::string& mode : modes) {
        std::string dir = args.out;
        if (grid && !dir.empty()) dir += "/" + std::to_string(n) + "-" + mode;
        if (const int code = RunOne(args, mode, n, dir)) return code;
      }
    }
    size_t needed = 0;
    st = cn_format_table(results_.data(), static_cast<int>(results_.size()), nullptr, 0, &needed);
    if (st != CN_OK) return Report(st, "table");
    std::string table(needed, '\0');
    cn_format_table(results_.data(), static_cast<int>(results_.size()), table.data(), needed,
                    &needed);
    std::fputs(table.c_str(), stdout);
    if (grid && !args.out.empty()) {
      const std::string path = args.out + "/summary.csv";
      st = cn_write_summary_csv(results_.data(), static_cast<int>(results_.size()), path.c_str());
      if (st != CN_OK) return Report(st, path);
    }
    return 0;
  }

 private:
  int RunOne(const RunArgs& args, const std::string& mode, int agents, const std::string& dir) {
    cn_spec* spec = nullptr;
    cn_status st = cn_spec_create(config_, mode.c_str(), &spec);
    if (st != CN_OK) return Report(st, "mode " + mode);
    struct Release {
      cn_spec* s;
      ~Release() { cn_spec_destroy(s); }
    } release{spec};
    if ((st = cn_spec_set_agents(spec, agents)) != CN_OK ||
        (st = cn_spec_set_trials(spec, args.trials)) != CN_OK ||
        (st = cn_spec_set_seed(spec, args.seed)) != CN_OK ||
        (st = cn_spec_set_workers(spec, args.workers)) != CN_OK ||
        (st = cn_spec_set_output(spec, dir.c_str(), args.plots ? 1 : 0)) != CN_OK ||
        (st = cn_spec_set_continue_after_collision(spec, args.continue_after_collision ? 1 : 0)) !=
            CN_OK) {
      return Report(st, "run options");
    }
    std::fprintf(stderr, "crowdnav: %s, %d agents, %d trials\n", mode.c_str(), agents,
                 args.trials);
    cn_result* result = nullptr;
    st = cn_run(spec, &result);
    if (st != CN_OK) return Report(st, "run " + mode);
    results_.push_back(result);
    return 0;
  }

  cn_config* config_ = nullptr;
  std::vector<cn_result*> results_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crowd navigation benchmark"};
  app.require_subcommand(1);
  RunArgs args;
  CLI::App* run = app.add_subcommand("run", "Run seeded episodes and summarize them");
  run->add_option("--config", args.config, "Flat key = value config file")->check(CLI::ExistingFile);
  run->add_option("--mode", args.modes, "sgap, dagap, dagap-cfs, full, a comma list or all")
      ->capture_default_str();
  run->add_option("--agents", args.agents, "Crowd size or comma list of sizes")
      ->capture_default_str();
  run->add_option("--trials", args.trials, "Trials per mode and crowd size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("--seed", args.seed, "Base seed; trial i uses seed ^ i")->capture_default_str();
  run->add_option("--workers", args.workers, "Parallel trials")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("--out", args.out, "Output directory for trials.jsonl and summaries");
  run->add_flag("--plots", args.plots, "Write SVG plots and trace CSVs per trial");
  run->add_flag("--continue-after-collision", args.continue_after_collision,
                "Keep driving after a collision");
  run->add_option("--set", args.overrides, "Extra key=value override, repeatable");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (args.plots && args.out.empty()) {
    std::fprintf(stderr, "crowdnav: --plots needs --out\n");
    return 2;
  }
  Run runner;
  return runner.Execute(args);
}
