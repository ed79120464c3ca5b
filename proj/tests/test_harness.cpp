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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "pba/errors.hpp"
#include "pba/harness.hpp"
#include "support.hpp"

using namespace pba;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("pba_harness_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static inline int counter = 0;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kFullConfig = R"({
  "search": {"population_size": 4, "epochs": 4, "ready_interval": 2,
             "truncation_fraction": 0.5, "master_seed": 5},
  "trainer": {"learning_rate": 0.1, "batch_size": 8, "epochs": 4,
              "hidden_units": 4},
  "synthetic": {"image_size": 10, "class_count": 2, "train_count": 16,
                "val_count": 8, "test_count": 8, "seed": 3,
                "dataset_kind": "digit-like"}
})";

Schedule two_segment_schedule() {
  PolicyParams a = PolicyParams::zero();
  PolicyParams b = a;
  b.set_prob(0, 8);
  b.set_mag(0, 4);
  return Schedule(6, {{0, a}, {3, b}});
}

}  // namespace

TEST_CASE("replay mode names round trip") {
  for (ReplayMode mode :
       {ReplayMode::kFullSchedule, ReplayMode::kFixedLast,
        ReplayMode::kOrderShuffled, ReplayMode::kCollapsedStationary,
        ReplayMode::kNone}) {
    CHECK(replay_mode_from_name(replay_mode_name(mode)) == mode);
  }
  CHECK(!replay_mode_from_name("stationary").has_value());
}

TEST_CASE("random schedules honor the interval bounds") {
  RandomScheduleSpec spec;
  spec.epochs = 1;
  Rng rng(1);
  const Schedule one = random_schedule(spec, rng);
  CHECK(one.epochs() == 1);
  CHECK(one.entries().size() == 1);

  spec.epochs = 200;
  for (int i = 0; i < 20; ++i) {
    const Schedule s = random_schedule(spec, rng);
    const auto& entries = s.entries();
    for (size_t k = 0; k < entries.size(); ++k) {
      const int end =
          k + 1 < entries.size() ? entries[k + 1].start_epoch : s.epochs();
      const int len = end - entries[k].start_epoch;
      CHECK(len >= 1);
      CHECK(len <= 40);
    }
  }
}

TEST_CASE("random schedule parameters are uniform on their domains") {
  RandomScheduleSpec spec;
  spec.epochs = 40;
  Rng rng(2);
  std::map<int, long> prob_counts;
  long total = 0;
  while (total < 100000) {
    const Schedule s = random_schedule(spec, rng);
    for (const ScheduleEntry& e : s.entries()) {
      for (const OpParam& t : e.params.params()) {
        ++prob_counts[t.prob];
        ++total;
      }
    }
  }
  for (int level = 0; level <= 10; ++level) {
    CHECK(std::abs(prob_counts[level] / static_cast<double>(total) - 1.0 / 11) <
          0.01);
  }
}

TEST_CASE("best_of_n_curve: mean at n=1, monotone, bounded by the max") {
  std::vector<double> scores = {0.3, 0.5, 0.7, 0.4, 0.6};
  const auto curve = best_of_n_curve(scores, 60);
  CHECK(curve[0].second == doctest::Approx(0.5));  // the mean
  double prev = 0.0;
  for (const auto& [n, expected] : curve) {
    CHECK(expected >= prev - 1e-12);
    CHECK(expected <= 0.7 + 1e-12);
    prev = expected;
  }
  CHECK(curve.back().second == doctest::Approx(0.7).epsilon(1e-3));
  CHECK_THROWS_AS(best_of_n_curve({}, 5), std::invalid_argument);
  CHECK_THROWS_AS(best_of_n_curve({0.5}, 0), std::invalid_argument);
}

TEST_CASE("best_of_n_curve matches a resampling Monte Carlo oracle") {
  Rng rng(3);
  std::vector<double> scores;
  for (int i = 0; i < 100; ++i) scores.push_back(0.3 + 0.5 * rng.next_double());
  const int n_max = 30;
  const auto curve = best_of_n_curve(scores, n_max);

  std::vector<double> mc(n_max, 0.0);
  const int trials = 200000;
  Rng mc_rng(4);
  for (int t = 0; t < trials; ++t) {
    double running = 0.0;
    for (int n = 0; n < n_max; ++n) {
      running = std::max(
          running, scores[mc_rng.uniform_int(static_cast<uint32_t>(scores.size()))]);
      mc[n] += running;
    }
  }
  for (int n = 0; n < n_max; ++n) {
    CHECK(std::abs(curve[n].second - mc[n] / trials) < 2e-3);
  }
}

TEST_CASE("config parsing reports missing and unknown fields by name") {
  CHECK_THROWS_WITH_AS(
      parse_app_config(R"({"search": {"population_size": 8}})", "."),
      doctest::Contains("search.master_seed"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_app_config(R"({"search": {"master_seed": 1, "popsize": 8}})", "."),
      doctest::Contains("popsize"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_app_config(R"({"trainer": {"learning_rate": 0.1, "batch_size": 8}})",
                       "."),
      doctest::Contains("trainer.epochs"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_app_config(R"({"trainer": {"learning_rate": "fast", "batch_size": 8,
                                        "epochs": 2}})",
                       "."),
      doctest::Contains("trainer.learning_rate"), ConfigError);
  CHECK_THROWS_AS(parse_app_config("{cfg}", "."), ConfigError);

  const AppConfig cfg = parse_app_config(kFullConfig, ".");
  CHECK(cfg.search->population_size == 4);
  CHECK(cfg.trainer->hidden_units == 4);
  CHECK(cfg.synthetic->image_size == 10);
  CHECK(cfg.synthetic->dataset_kind == DatasetKind::kDigit);
}

TEST_CASE("atomic_write leaves no partial or temporary files") {
  TempDir dir;
  const fs::path target = dir.path / "artifact.json";
  atomic_write(target, "hello\n");
  CHECK(slurp(target) == "hello\n");
  int entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path)) ++entries;
  CHECK(entries == 1);  // no stray temp files

  const fs::path bad = dir.path / "no_such_dir" / "artifact.json";
  CHECK_THROWS_AS(atomic_write(bad, "x"), std::exception);
  CHECK(!fs::exists(bad));
}

TEST_CASE("mode none ignores the schedule entirely") {
  DatasetSplits data = generate_synthetic([] {
    SyntheticSpec s;
    s.image_size = 10;
    s.class_count = 2;
    s.train_count = 16;
    s.val_count = 8;
    s.test_count = 8;
    s.seed = 11;
    s.dataset_kind = DatasetKind::kDigit;
    return s;
  }());
  TrainerConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.batch_size = 8;
  cfg.epochs = 3;
  cfg.hidden_units = 4;

  Schedule aggressive = two_segment_schedule();
  Schedule zero(6, {{0, PolicyParams::zero()}});
  const ReplayResult a = run_replay(aggressive, ReplayMode::kNone, cfg, data, 5);
  const ReplayResult b = run_replay(zero, ReplayMode::kNone, cfg, data, 5);
  REQUIRE(a.epochs.size() == b.epochs.size());
  for (size_t i = 0; i < a.epochs.size(); ++i) {
    CHECK(a.epochs[i].test_acc == b.epochs[i].test_acc);
    CHECK(a.epochs[i].train_acc == b.epochs[i].train_acc);
  }
}

TEST_CASE("all non-none modes coincide on a single-segment schedule") {
  DatasetSplits data = generate_synthetic([] {
    SyntheticSpec s;
    s.image_size = 10;
    s.class_count = 2;
    s.train_count = 16;
    s.val_count = 8;
    s.test_count = 8;
    s.seed = 12;
    s.dataset_kind = DatasetKind::kDigit;
    return s;
  }());
  TrainerConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.batch_size = 8;
  cfg.epochs = 4;
  cfg.hidden_units = 4;

  PolicyParams p = PolicyParams::zero();
  p.set_prob(4, 6);
  p.set_mag(4, 3);
  Schedule single(4, {{0, p}});

  const ReplayResult full =
      run_replay(single, ReplayMode::kFullSchedule, cfg, data, 9);
  for (ReplayMode mode : {ReplayMode::kFixedLast, ReplayMode::kOrderShuffled,
                          ReplayMode::kCollapsedStationary}) {
    const ReplayResult other = run_replay(single, mode, cfg, data, 9);
    REQUIRE(other.epochs.size() == full.epochs.size());
    for (size_t i = 0; i < full.epochs.size(); ++i) {
      CHECK(other.epochs[i].test_acc == full.epochs[i].test_acc);
    }
  }
}

TEST_CASE("schedule length mismatches are stretched and flagged") {
  DatasetSplits data = generate_synthetic([] {
    SyntheticSpec s;
    s.image_size = 10;
    s.class_count = 2;
    s.train_count = 8;
    s.val_count = 4;
    s.test_count = 4;
    s.seed = 13;
    s.dataset_kind = DatasetKind::kDigit;
    return s;
  }());
  TrainerConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 8;
  cfg.epochs = 4;
  cfg.hidden_units = 2;
  const ReplayResult r =
      run_replay(two_segment_schedule(), ReplayMode::kFullSchedule, cfg, data, 1);
  CHECK(r.stretched);
  CHECK(r.epochs.size() == 4);
}

TEST_CASE("schedule report carries per-op means and probability shares") {
  PolicyParams p = PolicyParams::zero();
  // the two rotate slots carry probs 4 and 6 -> mean 5
  int hit = 0;
  for (int slot = 0; slot < kPolicySlots; ++slot) {
    if (p.params()[slot].op == OpKind::kRotate) {
      p.set_prob(slot, hit == 0 ? 4 : 6);
      ++hit;
    }
  }
  Schedule s(2, {{0, p}});
  const std::string csv = schedule_report_csv(s);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,op,mean_prob,mean_mag,prob_share");
  double share_sum = 0.0;
  bool rotate_seen = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string epoch, op, mean_prob, mean_mag, share;
    std::getline(ls, epoch, ',');
    std::getline(ls, op, ',');
    std::getline(ls, mean_prob, ',');
    std::getline(ls, mean_mag, ',');
    std::getline(ls, share, ',');
    if (epoch != "0") continue;
    share_sum += std::stod(share);
    if (op == "rotate") {
      rotate_seen = true;
      CHECK(std::stod(mean_prob) == doctest::Approx(5.0));
      CHECK(std::stod(share) == doctest::Approx(1.0));  // the only nonzero op
    }
  }
  CHECK(rotate_seen);
  CHECK(share_sum == doctest::Approx(1.0));

  // the all-zero schedule reports zero means and zero shares
  Schedule zero(1, {{0, PolicyParams::zero()}});
  const std::string zero_csv = schedule_report_csv(zero);
  CHECK(zero_csv.find("rotate,0.00,0.00,0.000000") != std::string::npos);
}

TEST_CASE("search log summaries flag malformed rows with line numbers") {
  const std::string good =
      "interval,trial_id,epoch,score,cloned_from,params_digest\n"
      "0,0,3,0.5,,abc\n"
      "0,1,3,0.25,0,def\n";
  const std::string summary = summarize_search_log(good);
  CHECK(summary.find("0,3,0.375000,0.500000,1") != std::string::npos);

  CHECK_THROWS_WITH_AS(summarize_search_log("bogus header\n0,0,3,0.5,,x\n"),
                       doctest::Contains("line 1"), ConfigError);
  const std::string bad_row =
      "interval,trial_id,epoch,score,cloned_from,params_digest\n"
      "0,0,3\n";
  CHECK_THROWS_WITH_AS(summarize_search_log(bad_row), doctest::Contains("line 2"),
                       ConfigError);
  const std::string bad_number =
      "interval,trial_id,epoch,score,cloned_from,params_digest\n"
      "0,0,three,0.5,,x\n";
  CHECK_THROWS_WITH_AS(summarize_search_log(bad_number),
                       doctest::Contains("line 2"), ConfigError);
}

TEST_CASE("cmd_search writes deterministic artifacts end to end") {
  TempDir dir;
  const fs::path config = dir.path / "config.json";
  {
    std::ofstream out(config);
    out << kFullConfig;
  }
  pba::cmd_search(config, dir.path / "out1", 2);
  pba::cmd_search(config, dir.path / "out2", 1);
  const std::string s1 = slurp(dir.path / "out1" / "schedule.json");
  const std::string s2 = slurp(dir.path / "out2" / "schedule.json");
  CHECK(!s1.empty());
  CHECK(s1 == s2);
  CHECK(slurp(dir.path / "out1" / "search_log.csv") ==
        slurp(dir.path / "out2" / "search_log.csv"));

  // the written schedule loads and covers the search epochs
  const Schedule s = schedule_from_string(s1);
  CHECK(s.epochs() == 4);

  // report consumes the artifacts
  pba::cmd_report(dir.path / "out1", dir.path / "report");
  CHECK(fs::exists(dir.path / "report" / "schedule_params.csv"));
  CHECK(fs::exists(dir.path / "report" / "summary.csv"));
}

TEST_CASE("cmd_train exercises a mode end to end") {
  TempDir dir;
  const fs::path config = dir.path / "config.json";
  {
    std::ofstream out(config);
    out << kFullConfig;
  }
  const fs::path schedule_path = dir.path / "schedule.json";
  atomic_write(schedule_path, schedule_to_string(two_segment_schedule()));
  pba::cmd_train(schedule_path, ReplayMode::kFixedLast, config,
                 dir.path / "train_out", 7);
  const std::string csv = slurp(dir.path / "train_out" / "results.csv");
  CHECK(csv.find("epoch,train_acc,val_acc,test_acc") == 0);
  // 4 epochs of rows
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("cmd_baseline writes scores and a monotone curve") {
  TempDir dir;
  const fs::path config = dir.path / "config.json";
  {
    std::ofstream out(config);
    out << kFullConfig;
  }
  pba::cmd_baseline(config, 3, dir.path / "base_out", 21);
  const std::string scores = slurp(dir.path / "base_out" / "scores.csv");
  CHECK(std::count(scores.begin(), scores.end(), '\n') == 4);
  const std::string curve = slurp(dir.path / "base_out" / "curve.csv");
  CHECK(curve.find("n,expected_best") == 0);
}

TEST_CASE("commands surface config errors") {
  TempDir dir;
  CHECK_THROWS_AS(pba::cmd_search(dir.path / "missing.json", dir.path, 1),
                  ConfigError);
  const fs::path config = dir.path / "config.json";
  {
    std::ofstream out(config);
    out << R"({"trainer": {"learning_rate": 0.1, "batch_size": 8, "epochs": 2}})";
  }
  CHECK_THROWS_WITH_AS(pba::cmd_search(config, dir.path, 1),
                       doctest::Contains("search"), ConfigError);
}
