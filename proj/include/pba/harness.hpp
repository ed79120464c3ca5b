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

#ifndef PBA_HARNESS_HPP_
#define PBA_HARNESS_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pba/data.hpp"
#include "pba/pbt.hpp"
#include "pba/policy.hpp"
#include "pba/trainer.hpp"

namespace pba {

enum class ReplayMode {
  kFullSchedule,
  kFixedLast,
  kOrderShuffled,
  kCollapsedStationary,
  kNone,
};

std::string_view replay_mode_name(ReplayMode mode);
std::optional<ReplayMode> replay_mode_from_name(std::string_view name);

struct RandomScheduleSpec {
  int interval_len_min = 1;
  int interval_len_max = 40;
  int epochs = 0;
};

/// Random schedule baseline: segment lengths uniform in [min, max] (the last
/// segment truncated to fit) with every prob/mag level uniform on its domain.
Schedule random_schedule(const RandomScheduleSpec& spec, Rng& rng);

/// Expected maximum of n draws (with replacement) from the empirical score
/// distribution, for n = 1..n_max:
///   E_n = sum_i s_(i) * ((i/N)^n - ((i-1)/N)^n), s sorted ascending.
std::vector<std::pair<int, double>> best_of_n_curve(std::vector<double> scores,
                                                    int n_max);

// Parsed CLI config file. JSON keys mirror the struct field names.
struct AppConfig {
  std::optional<SearchConfig> search;
  std::optional<TrainerConfig> trainer;
  std::optional<SyntheticSpec> synthetic;
  std::optional<std::filesystem::path> manifest;
};

AppConfig parse_app_config(const std::string& text,
                           const std::filesystem::path& base_dir);
AppConfig load_app_config(const std::filesystem::path& path);

/// Synthetic or manifest-backed splits, per the config's data section.
DatasetSplits load_config_dataset(const AppConfig& cfg);

/// Writes via a temp file in the target directory plus rename, so an
/// interrupted run never leaves a partial file at the final path.
void atomic_write(const std::filesystem::path& path, const std::string& contents);

/// Search log CSV: interval, trial_id, epoch, score, cloned_from,
/// params_digest. One row per trial per interval; cloned_from is empty for
/// trials that did not clone in that round, and params_digest identifies the
/// params the trial carries into the next interval.
std::string search_log_csv(const SearchResult& result);

struct EpochEval {
  int epoch;
  double train_acc;
  double val_acc;
  double test_acc;
};

struct ReplayResult {
  std::vector<EpochEval> epochs;
  double final_test_acc = 0.0;
  uint64_t shuffle_seed = 0;  // order-shuffled mode only
  bool stretched = false;     // schedule was stretched to the trainer epochs
};

/// Trains one evaluation model under a transformed schedule. A schedule
/// whose length differs from cfg.epochs is stretched (and flagged in the
/// result). Seed drives model init, training randomness, and the
/// order-shuffled permutation.
ReplayResult run_replay(const Schedule& schedule, ReplayMode mode,
                        const TrainerConfig& cfg, const DatasetSplits& data,
                        uint64_t seed);

std::string replay_csv(const ReplayResult& result);

/// Per-epoch parameter summary of a schedule: for each op, the mean prob and
/// mag level over its two slots plus the op's share of total probability
/// mass (zero when all probs are zero). CSV columns: epoch, op, mean_prob,
/// mean_mag, prob_share.
std::string schedule_report_csv(const Schedule& s);

/// Per-interval score summary of a search log CSV: interval, epoch,
/// mean_score, best_score, clone_count. Throws ConfigError naming the line
/// number on malformed rows.
std::string summarize_search_log(const std::string& csv_text);

// CLI commands. These throw ConfigError for bad configs/inputs and
// std::runtime_error for runtime failures; main maps those to exit codes 2
// and 3.
void cmd_search(const std::filesystem::path& config_path,
                const std::filesystem::path& out_dir, int workers);
void cmd_train(const std::filesystem::path& schedule_path, ReplayMode mode,
               const std::filesystem::path& config_path,
               const std::filesystem::path& out_dir, uint64_t seed);
void cmd_baseline(const std::filesystem::path& config_path, int trials,
                  const std::filesystem::path& out_dir, uint64_t seed);
void cmd_report(const std::filesystem::path& in_dir,
                const std::filesystem::path& out_dir);

}  // namespace pba

#endif  // PBA_HARNESS_HPP_
