// Copyright 2026 The pba Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "pba/errors.hpp"
#include "pba/harness.hpp"

namespace {

int default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Augmentation schedule search and replay"};
  app.require_subcommand(1);

  std::string config_path;
  std::string schedule_path;
  std::string mode_name = "full-schedule";
  std::string out_path;
  std::string in_path;
  int workers = default_workers();
  int trials = 16;
  uint64_t seed = 0;

  CLI::App* search = app.add_subcommand(
      "search", "Run the population search and emit a schedule");
  search->add_option("--config", config_path, "Config JSON path")->required();
  search->add_option("--out", out_path, "Output directory")->required();
  search->add_option("--workers", workers,
                     "Worker threads (results are identical for any count)");

  CLI::App* train = app.add_subcommand(
      "train", "Train an evaluation model under a (transformed) schedule");
  train->add_option("--schedule", schedule_path, "Schedule JSON path")->required();
  train->add_option("--mode", mode_name,
                    "full-schedule | fixed-last | order-shuffled | "
                    "collapsed-stationary | none");
  train->add_option("--config", config_path, "Config JSON path")->required();
  train->add_option("--out", out_path, "Output directory")->required();
  train->add_option("--seed", seed, "Training seed");

  CLI::App* baseline = app.add_subcommand(
      "baseline", "Train models under random schedules and emit the "
                  "expected-best-of-n curve");
  baseline->add_option("--config", config_path, "Config JSON path")->required();
  baseline->add_option("--trials", trials, "Number of random schedules")->required();
  baseline->add_option("--out", out_path, "Output directory")->required();
  baseline->add_option("--seed", seed, "Baseline seed");

  CLI::App* report = app.add_subcommand(
      "report", "Summarize search artifacts into tidy CSV");
  report->add_option("--in", in_path, "Directory holding schedule.json")->required();
  report->add_option("--out", out_path, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (search->parsed()) {
      pba::cmd_search(config_path, out_path, workers);
    } else if (train->parsed()) {
      const auto mode = pba::replay_mode_from_name(mode_name);
      if (!mode) {
        throw pba::ConfigError("unknown replay mode \"" + mode_name + "\"");
      }
      pba::cmd_train(schedule_path, *mode, config_path, out_path, seed);
    } else if (baseline->parsed()) {
      pba::cmd_baseline(config_path, trials, out_path, seed);
    } else if (report->parsed()) {
      pba::cmd_report(in_path, out_path);
    }
  } catch (const pba::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
