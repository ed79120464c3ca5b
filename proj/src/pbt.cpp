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

#include "pba/pbt.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "pba/errors.hpp"

namespace pba {

namespace {

// Ranking indices: score descending, trial id ascending on ties.
std::vector<int> rank_by_score(const std::vector<Trial>& trials) {
  std::vector<int> order(trials.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (trials[a].score != trials[b].score) {
      return trials[a].score > trials[b].score;
    }
    return trials[a].id < trials[b].id;
  });
  return order;
}

}  // namespace

void SearchConfig::validate() const {
  if (population_size < 2) {
    throw ConfigError("search.population_size: must be >= 2");
  }
  if (epochs < 1) throw ConfigError("search.epochs: must be >= 1");
  if (ready_interval < 1) {
    throw ConfigError("search.ready_interval: must be >= 1");
  }
  if (epochs < ready_interval) {
    throw ConfigError("search.epochs: must be >= ready_interval");
  }
  if (!(truncation_fraction > 0.0) || truncation_fraction > 0.5) {
    throw ConfigError("search.truncation_fraction: must be in (0, 0.5]");
  }
  if (explore_resample_prob < 0.0 || explore_resample_prob > 1.0) {
    throw ConfigError("search.explore_resample_prob: must be in [0, 1]");
  }
  if (perturb_amounts.empty()) {
    throw ConfigError("search.perturb_amounts: must be nonempty");
  }
  for (int a : perturb_amounts) {
    if (a < 0) throw ConfigError("search.perturb_amounts: must be >= 0");
  }
}

PolicyParams explore(const PolicyParams& p, Rng& rng, const ExploreOptions& opt,
                     std::vector<ParamMutation>* log) {
  PolicyParams out = p;
  for (int slot = 0; slot < kPolicySlots; ++slot) {
    for (int which = 0; which < 2; ++which) {
      const bool is_prob = which == 0;
      const int domain = is_prob ? kNumProbLevels : kNumMagLevels;
      const int old_level = is_prob ? out.params()[slot].prob
                                    : out.params()[slot].mag;

      ParamMutation m{};
      m.param_index = slot * 2 + which;
      m.old_level = old_level;

      int level;
      if (rng.next_double() < opt.resample_prob) {
        m.resampled = true;
        m.amount = -1;
        m.sign = 0;
        level = static_cast<int>(rng.uniform_int(static_cast<uint32_t>(domain)));
      } else {
        m.resampled = false;
        m.amount = opt.amounts[rng.uniform_int(
            static_cast<uint32_t>(opt.amounts.size()))];
        m.sign = rng.next_double() < 0.5 ? 1 : -1;
        level = std::clamp(old_level + m.sign * m.amount, 0, domain - 1);
      }
      m.new_level = level;
      if (is_prob) {
        out.set_prob(slot, level);
      } else {
        out.set_mag(slot, level);
      }
      if (log) log->push_back(m);
    }
  }
  return out;
}

std::vector<CloneEvent> exploit(
    std::vector<Trial>& trials, const SearchConfig& cfg, Rng& rng,
    std::vector<std::pair<int, std::vector<ParamMutation>>>* mutation_log,
    bool* skipped) {
  const int n = static_cast<int>(trials.size());
  const int bucket = static_cast<int>(std::floor(cfg.truncation_fraction * n));
  if (skipped) *skipped = false;
  if (bucket < 2) {
    // fewer than two trials per quartile bucket: selection degenerates
    if (skipped) *skipped = true;
    return {};
  }

  const std::vector<int> order = rank_by_score(trials);
  std::vector<int> top(order.begin(), order.begin() + bucket);
  std::vector<int> bottom(order.end() - bucket, order.end());
  std::sort(bottom.begin(), bottom.end(),
            [&](int a, int b) { return trials[a].id < trials[b].id; });

  const ExploreOptions opt{cfg.explore_resample_prob, cfg.perturb_amounts};
  std::vector<CloneEvent> events;
  for (int dst : bottom) {
    const int src = top[rng.uniform_int(static_cast<uint32_t>(bucket))];
    trials[dst].checkpoint = trials[src].checkpoint;
    trials[dst].params = trials[src].params;
    trials[dst].history = trials[src].history;
    trials[dst].score = trials[src].score;

    std::vector<ParamMutation> mutations;
    trials[dst].params = explore(trials[dst].params, rng, opt, &mutations);
    if (mutation_log) {
      mutation_log->push_back({trials[dst].id, std::move(mutations)});
    }
    events.push_back({trials[dst].epoch, trials[src].id, trials[dst].id});
  }
  return events;
}

Schedule extract_schedule(const Trial& winner, const SearchConfig& cfg) {
  if (static_cast<int>(winner.history.size()) != cfg.epochs) {
    throw std::runtime_error(
        "trial history covers " + std::to_string(winner.history.size()) +
        " epochs, expected " + std::to_string(cfg.epochs));
  }
  for (int e = 0; e < cfg.epochs; ++e) {
    if (winner.history[e].first != e) {
      throw std::runtime_error("trial history has a gap at epoch " +
                               std::to_string(e));
    }
  }
  std::vector<ScheduleEntry> entries;
  for (int e = 0; e < cfg.epochs; ++e) {
    if (entries.empty() || !(entries.back().params == winner.history[e].second)) {
      entries.push_back({e, winner.history[e].second});
    }
  }
  return Schedule(cfg.epochs, std::move(entries));
}

SearchResult run_search(const SearchConfig& cfg, const TrainableFactory& factory,
                        const DatasetSplits& data, int workers) {
  cfg.validate();
  const int n = cfg.population_size;

  Rng master(cfg.master_seed);
  Rng controller = master.split(0);

  std::vector<Trial> trials(n);
  std::vector<std::unique_ptr<Trainable>> trainables(n);
  std::vector<Rng> trial_rngs;
  trial_rngs.reserve(n);
  for (int i = 0; i < n; ++i) {
    trials[i].id = i;
    const uint64_t model_seed = master.split(1'000'000 + i).next_u64();
    trainables[i] = factory(i, model_seed, data);
    if (!trainables[i]) {
      throw std::runtime_error("trainable factory returned null for trial " +
                               std::to_string(i));
    }
    trial_rngs.push_back(master.split(1 + i));
  }

  SearchResult result{Schedule(1, {{0, PolicyParams::zero()}}), 0.0, 0, 0, {}};
  uint64_t epochs_trained = 0;
  const int thread_count = std::max(1, std::min(workers, n));

  int epoch = 0;
  int interval = 0;
  while (epoch < cfg.epochs) {
    const int span = std::min(cfg.ready_interval, cfg.epochs - epoch);

    // Train every trial span epochs and evaluate, on worker threads. Each
    // trial only touches its own model and RNG stream, so the schedule of
    // work across threads cannot affect results.
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(n);
    auto work = [&]() {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          Trial& trial = trials[i];
          const PolicyParams params = trial.params;
          const PolicySource source =
              [&params](Rng&) -> std::optional<PolicyParams> { return params; };
          for (int k = 0; k < span; ++k) {
            trial.history.emplace_back(trial.epoch, trial.params);
            trainables[i]->train_epoch(source, trial_rngs[i]);
            ++trial.epoch;
          }
          trial.score = trainables[i]->evaluate(Split::kVal);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    if (thread_count == 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(thread_count);
      for (int t = 0; t < thread_count; ++t) pool.emplace_back(work);
      for (auto& t : pool) t.join();
    }
    for (int i = 0; i < n; ++i) {
      if (errors[i]) {
        try {
          std::rethrow_exception(errors[i]);
        } catch (const std::exception& e) {
          throw std::runtime_error("trial " + std::to_string(i) +
                                   " failed: " + e.what());
        }
      }
    }
    epochs_trained += static_cast<uint64_t>(n) * span;
    epoch += span;

    IntervalLog log;
    log.interval = interval;
    log.epoch_end = epoch;
    for (const Trial& t : trials) {
      log.evals.push_back({t.id, t.epoch, t.score});
    }

    // Synchronized exploit/explore round at the barrier.
    for (int i = 0; i < n; ++i) {
      trials[i].checkpoint = trainables[i]->save_checkpoint();
    }
    log.clones = exploit(trials, cfg, controller, &log.mutations,
                         &log.exploit_skipped);
    for (const CloneEvent& event : log.clones) {
      trainables[event.dst_id]->load_checkpoint(trials[event.dst_id].checkpoint);
    }
    for (const Trial& t : trials) {
      log.params_digests.push_back(params_digest(t.params));
    }
    result.population_log.push_back(std::move(log));
    ++interval;
  }

  int winner = 0;
  for (int i = 1; i < n; ++i) {
    if (trials[i].score > trials[winner].score) winner = i;
  }
  result.schedule = extract_schedule(trials[winner], cfg);
  result.best_score = trials[winner].score;
  result.winner_id = trials[winner].id;
  result.total_epochs_trained = epochs_trained;
  return result;
}

}  // namespace pba
