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

#ifndef PBA_PBT_HPP_
#define PBA_PBT_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pba/policy.hpp"
#include "pba/rng.hpp"
#include "pba/trainer.hpp"

namespace pba {

struct SearchConfig {
  int population_size = 16;
  int epochs = 200;
  int ready_interval = 3;  // epochs between exploit/explore rounds
  double truncation_fraction = 0.25;
  double explore_resample_prob = 0.2;
  std::vector<int> perturb_amounts = {0, 1, 2, 3};
  uint64_t master_seed = 0;

  void validate() const;  // throws ConfigError
};

/// One population member. history records the params the trial trained
/// under, one entry per completed epoch; a clone overwrites it wholesale so
/// the winner's history is a coherent lineage.
struct Trial {
  int id = 0;
  std::vector<std::byte> checkpoint;
  PolicyParams params = PolicyParams::zero();
  std::vector<std::pair<int, PolicyParams>> history;  // (epoch, params)
  double score = 0.0;
  int epoch = 0;
};

/// One mutation decision made by explore, per free parameter.
struct ParamMutation {
  int param_index;  // 0..59: slot * 2 + (0 for prob, 1 for mag)
  bool resampled;
  int amount;  // perturb amount drawn; -1 on resample
  int sign;    // +1/-1 perturb direction; 0 on resample
  int old_level;
  int new_level;
};

struct ExploreOptions {
  double resample_prob = 0.2;
  std::vector<int> amounts = {0, 1, 2, 3};
};

/// Mutates each of the 60 prob/mag parameters independently: with
/// probability resample_prob draw a fresh uniform value from the parameter's
/// domain, otherwise add or subtract (p=0.5 each) a uniform amount, clipping
/// to the domain. Op slots are untouched.
PolicyParams explore(const PolicyParams& p, Rng& rng,
                     const ExploreOptions& opt = {},
                     std::vector<ParamMutation>* log = nullptr);

struct CloneEvent {
  int epoch;
  int src_id;
  int dst_id;
};

/// Truncation selection: rank by score descending (ties by id ascending);
/// each trial in the bottom floor(truncation_fraction * N) clones the
/// checkpoint, params, score and full history of a uniformly chosen member
/// of the top bucket, then explores its params. Buckets smaller than 2
/// degenerate to a logged no-op. Top-bucket and middle trials are never
/// modified.
std::vector<CloneEvent> exploit(
    std::vector<Trial>& trials, const SearchConfig& cfg, Rng& rng,
    std::vector<std::pair<int, std::vector<ParamMutation>>>* mutation_log =
        nullptr,
    bool* skipped = nullptr);

struct TrialEval {
  int trial_id;
  int epoch;  // epochs completed when evaluated
  double score;
};

struct IntervalLog {
  int interval;
  int epoch_end;
  std::vector<TrialEval> evals;
  std::vector<CloneEvent> clones;
  std::vector<std::pair<int, std::vector<ParamMutation>>> mutations;
  std::vector<std::string> params_digests;  // per trial, after the round
  bool exploit_skipped = false;
};

struct SearchResult {
  Schedule schedule;
  double best_score = 0.0;
  int winner_id = 0;
  uint64_t total_epochs_trained = 0;
  std::vector<IntervalLog> population_log;
};

/// Compresses a trial's per-epoch history into schedule segments. The
/// history must cover epochs 0..epochs-1 without gaps.
Schedule extract_schedule(const Trial& winner, const SearchConfig& cfg);

/// Runs the synchronous population search: every trial trains
/// ready_interval epochs under its current params, all trials evaluate on
/// the validation split, then one exploit/explore round runs; repeat until
/// cfg.epochs epochs per trial. Returns the best trial's lineage as the
/// schedule.
///
/// Trials are initialized with all-zero policies and train on worker
/// threads; results are bit-identical for any worker count. A trainable
/// failure aborts the search with the trial id attached.
SearchResult run_search(const SearchConfig& cfg, const TrainableFactory& factory,
                        const DatasetSplits& data, int workers = 1);

}  // namespace pba

#endif  // PBA_PBT_HPP_
