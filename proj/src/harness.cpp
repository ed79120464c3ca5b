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

#include "pba/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pba/errors.hpp"

namespace pba {

namespace fs = std::filesystem;

namespace {

std::string fmt_double(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

void check_keys(const nlohmann::json& j, const std::string& section,
                std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(section + ": unknown field \"" + key + "\"");
    }
  }
}

template <typename T>
T get_field(const nlohmann::json& j, const std::string& section,
            const std::string& key) {
  if (!j.contains(key)) {
    throw ConfigError(section + "." + key + ": missing required field");
  }
  try {
    return j.at(key).get<T>();
  } catch (const std::exception&) {
    throw ConfigError(section + "." + key + ": wrong type");
  }
}

template <typename T>
T get_field_or(const nlohmann::json& j, const std::string& section,
               const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const std::exception&) {
    throw ConfigError(section + "." + key + ": wrong type");
  }
}

SearchConfig parse_search_config(const nlohmann::json& j) {
  check_keys(j, "search",
             {"population_size", "epochs", "ready_interval",
              "truncation_fraction", "explore_resample_prob",
              "perturb_amounts", "master_seed"});
  SearchConfig cfg;
  cfg.population_size = get_field_or(j, "search", "population_size",
                                     cfg.population_size);
  cfg.epochs = get_field_or(j, "search", "epochs", cfg.epochs);
  cfg.ready_interval = get_field_or(j, "search", "ready_interval",
                                    cfg.ready_interval);
  cfg.truncation_fraction =
      get_field_or(j, "search", "truncation_fraction", cfg.truncation_fraction);
  cfg.explore_resample_prob = get_field_or(j, "search", "explore_resample_prob",
                                           cfg.explore_resample_prob);
  cfg.perturb_amounts = get_field_or(j, "search", "perturb_amounts",
                                     cfg.perturb_amounts);
  cfg.master_seed = get_field<uint64_t>(j, "search", "master_seed");
  cfg.validate();
  return cfg;
}

TrainerConfig parse_trainer_config(const nlohmann::json& j) {
  check_keys(j, "trainer",
             {"learning_rate", "weight_decay", "batch_size", "epochs",
              "lr_schedule", "gradient_clip", "hidden_units"});
  TrainerConfig cfg;
  cfg.learning_rate = get_field<double>(j, "trainer", "learning_rate");
  cfg.weight_decay = get_field_or(j, "trainer", "weight_decay", 0.0);
  cfg.batch_size = get_field<int>(j, "trainer", "batch_size");
  cfg.epochs = get_field<int>(j, "trainer", "epochs");
  const std::string schedule =
      get_field_or<std::string>(j, "trainer", "lr_schedule", "constant");
  if (schedule == "constant") {
    cfg.lr_schedule = LrSchedule::kConstant;
  } else if (schedule == "cosine") {
    cfg.lr_schedule = LrSchedule::kCosine;
  } else if (schedule == "step") {
    cfg.lr_schedule = LrSchedule::kStep;
  } else {
    throw ConfigError("trainer.lr_schedule: unknown schedule \"" + schedule +
                      "\"");
  }
  cfg.gradient_clip = get_field_or(j, "trainer", "gradient_clip", 5.0);
  cfg.hidden_units = get_field_or(j, "trainer", "hidden_units", 32);
  cfg.validate();
  return cfg;
}

SyntheticSpec parse_synthetic_spec(const nlohmann::json& j) {
  check_keys(j, "synthetic",
             {"image_size", "class_count", "train_count", "val_count",
              "test_count", "rotation_range_deg", "translation_range_px",
              "brightness_jitter", "seed", "dataset_kind"});
  SyntheticSpec spec;
  spec.image_size = get_field<int>(j, "synthetic", "image_size");
  spec.class_count = get_field<int>(j, "synthetic", "class_count");
  spec.train_count = get_field<int>(j, "synthetic", "train_count");
  spec.val_count = get_field<int>(j, "synthetic", "val_count");
  spec.test_count = get_field<int>(j, "synthetic", "test_count");
  spec.rotation_range_deg =
      get_field_or(j, "synthetic", "rotation_range_deg", 0.0);
  spec.translation_range_px =
      get_field_or(j, "synthetic", "translation_range_px", 0.0);
  spec.brightness_jitter =
      get_field_or(j, "synthetic", "brightness_jitter", 0.0);
  spec.seed = get_field<uint64_t>(j, "synthetic", "seed");
  const std::string kind = get_field_or<std::string>(
      j, "synthetic", "dataset_kind", "natural-image-like");
  if (kind == "digit-like") {
    spec.dataset_kind = DatasetKind::kDigit;
  } else if (kind == "natural-image-like") {
    spec.dataset_kind = DatasetKind::kNaturalImage;
  } else {
    throw ConfigError("synthetic.dataset_kind: unknown kind \"" + kind + "\"");
  }
  spec.validate();
  return spec;
}

}  // namespace

std::string_view replay_mode_name(ReplayMode mode) {
  switch (mode) {
    case ReplayMode::kFullSchedule:
      return "full-schedule";
    case ReplayMode::kFixedLast:
      return "fixed-last";
    case ReplayMode::kOrderShuffled:
      return "order-shuffled";
    case ReplayMode::kCollapsedStationary:
      return "collapsed-stationary";
    case ReplayMode::kNone:
      return "none";
  }
  return "none";
}

std::optional<ReplayMode> replay_mode_from_name(std::string_view name) {
  for (ReplayMode mode :
       {ReplayMode::kFullSchedule, ReplayMode::kFixedLast,
        ReplayMode::kOrderShuffled, ReplayMode::kCollapsedStationary,
        ReplayMode::kNone}) {
    if (replay_mode_name(mode) == name) return mode;
  }
  return std::nullopt;
}

Schedule random_schedule(const RandomScheduleSpec& spec, Rng& rng) {
  if (spec.interval_len_min < 1 || spec.interval_len_min > spec.interval_len_max) {
    throw ConfigError("random schedule: need 1 <= interval_len_min <= interval_len_max");
  }
  if (spec.epochs < 1) {
    throw ConfigError("random schedule: epochs must be >= 1");
  }
  std::vector<ScheduleEntry> entries;
  int start = 0;
  while (start < spec.epochs) {
    const int span = spec.interval_len_min +
                     static_cast<int>(rng.uniform_int(static_cast<uint32_t>(
                         spec.interval_len_max - spec.interval_len_min + 1)));
    PolicyParams params = PolicyParams::zero();
    for (int slot = 0; slot < kPolicySlots; ++slot) {
      params.set_prob(slot, static_cast<int>(rng.uniform_int(kNumProbLevels)));
      params.set_mag(slot, static_cast<int>(rng.uniform_int(kNumMagLevels)));
    }
    entries.push_back({start, std::move(params)});
    start += span;  // the final segment is truncated by the schedule bound
  }
  return Schedule(spec.epochs, std::move(entries));
}

std::vector<std::pair<int, double>> best_of_n_curve(std::vector<double> scores,
                                                    int n_max) {
  if (scores.empty()) {
    throw std::invalid_argument("best_of_n_curve: scores must be nonempty");
  }
  if (n_max < 1) {
    throw std::invalid_argument("best_of_n_curve: n_max must be >= 1");
  }
  std::sort(scores.begin(), scores.end());
  const double n_scores = static_cast<double>(scores.size());
  std::vector<std::pair<int, double>> curve;
  curve.reserve(n_max);
  for (int n = 1; n <= n_max; ++n) {
    double expected = 0.0;
    for (size_t i = 1; i <= scores.size(); ++i) {
      const double hi = std::pow(static_cast<double>(i) / n_scores, n);
      const double lo = std::pow(static_cast<double>(i - 1) / n_scores, n);
      expected += scores[i - 1] * (hi - lo);
    }
    curve.emplace_back(n, expected);
  }
  return curve;
}

AppConfig parse_app_config(const std::string& text, const fs::path& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError("config: invalid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  check_keys(j, "config", {"search", "trainer", "synthetic", "manifest"});

  AppConfig cfg;
  if (j.contains("search")) cfg.search = parse_search_config(j.at("search"));
  if (j.contains("trainer")) cfg.trainer = parse_trainer_config(j.at("trainer"));
  if (j.contains("synthetic")) {
    cfg.synthetic = parse_synthetic_spec(j.at("synthetic"));
  }
  if (j.contains("manifest")) {
    fs::path p = get_field<std::string>(j, "config", "manifest");
    cfg.manifest = p.is_absolute() ? p : base_dir / p;
  }
  if (cfg.synthetic && cfg.manifest) {
    throw ConfigError("config: give either \"synthetic\" or \"manifest\", not both");
  }
  return cfg;
}

AppConfig load_app_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_app_config(ss.str(), path.parent_path());
}

DatasetSplits load_config_dataset(const AppConfig& cfg) {
  if (cfg.synthetic) return generate_synthetic(*cfg.synthetic);
  if (cfg.manifest) return load_dataset(*cfg.manifest);
  throw ConfigError("config: missing data section (\"synthetic\" or \"manifest\")");
}

void atomic_write(const fs::path& path, const std::string& contents) {
  static std::atomic<uint64_t> counter{0};
  fs::path dir = path.parent_path();
  if (dir.empty()) dir = ".";
  const fs::path tmp =
      dir / (path.filename().string() + ".tmp." +
             std::to_string(counter.fetch_add(1)));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot write " + tmp.string());
    }
    out << contents;
    out.flush();
    if (!out) {
      fs::remove(tmp);
      throw std::runtime_error("short write to " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

std::string search_log_csv(const SearchResult& result) {
  std::string out = "interval,trial_id,epoch,score,cloned_from,params_digest\n";
  for (const IntervalLog& log : result.population_log) {
    std::map<int, int> cloned_from;
    for (const CloneEvent& event : log.clones) {
      cloned_from[event.dst_id] = event.src_id;
    }
    for (const TrialEval& eval : log.evals) {
      out += std::to_string(log.interval) + "," + std::to_string(eval.trial_id) +
             "," + std::to_string(eval.epoch) + "," + fmt_double(eval.score) +
             ",";
      if (auto it = cloned_from.find(eval.trial_id); it != cloned_from.end()) {
        out += std::to_string(it->second);
      }
      out += "," + log.params_digests.at(eval.trial_id) + "\n";
    }
  }
  return out;
}

ReplayResult run_replay(const Schedule& schedule, ReplayMode mode,
                        const TrainerConfig& cfg, const DatasetSplits& data,
                        uint64_t seed) {
  cfg.validate();
  ReplayResult result;

  Schedule working = schedule;
  if (schedule.epochs() != cfg.epochs) {
    working = stretch_schedule(schedule, cfg.epochs);
    result.stretched = true;
  }

  Rng master(seed);
  Rng train_rng = master.split(1);
  const uint64_t model_seed = master.split(2).next_u64();
  result.shuffle_seed = master.split(3).next_u64();

  std::optional<Schedule> shuffled;
  if (mode == ReplayMode::kOrderShuffled) {
    Rng shuffle_rng(result.shuffle_seed);
    shuffled = shuffle_order(working, shuffle_rng);
  }
  std::optional<StationarySampler> sampler;
  if (mode == ReplayMode::kCollapsedStationary) {
    sampler = collapse_schedule(working);
  }
  // The fixed policy comes from the loaded schedule, pre-stretch.
  const PolicyParams fixed = last_policy(schedule);

  const Image& probe = data.train.at(0).image;
  ToyClassifier model(probe.width() * probe.height() * probe.channels(),
                      data.class_count, cfg.hidden_units, model_seed);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    PolicySource source;
    switch (mode) {
      case ReplayMode::kFullSchedule: {
        const PolicyParams params = schedule_at(working, epoch);
        source = [params](Rng&) -> std::optional<PolicyParams> { return params; };
        break;
      }
      case ReplayMode::kFixedLast:
        source = [&fixed](Rng&) -> std::optional<PolicyParams> { return fixed; };
        break;
      case ReplayMode::kOrderShuffled: {
        const PolicyParams params = schedule_at(*shuffled, epoch);
        source = [params](Rng&) -> std::optional<PolicyParams> { return params; };
        break;
      }
      case ReplayMode::kCollapsedStationary:
        source = [&sampler](Rng& rng) -> std::optional<PolicyParams> {
          return sampler->sample(rng);
        };
        break;
      case ReplayMode::kNone:
        source = [](Rng&) -> std::optional<PolicyParams> { return std::nullopt; };
        break;
    }
    train_epoch(model, data, source, cfg, epoch, train_rng);
    result.epochs.push_back({epoch, evaluate(model, data, Split::kTrain),
                             evaluate(model, data, Split::kVal),
                             evaluate(model, data, Split::kTest)});
  }
  result.final_test_acc = result.epochs.back().test_acc;
  return result;
}

std::string replay_csv(const ReplayResult& result) {
  std::string out = "epoch,train_acc,val_acc,test_acc\n";
  for (const EpochEval& row : result.epochs) {
    out += std::to_string(row.epoch) + "," + fmt_double(row.train_acc) + "," +
           fmt_double(row.val_acc) + "," + fmt_double(row.test_acc) + "\n";
  }
  return out;
}

std::string schedule_report_csv(const Schedule& s) {
  std::string out = "epoch,op,mean_prob,mean_mag,prob_share\n";
  for (int epoch = 0; epoch < s.epochs(); ++epoch) {
    const PolicyParams& params = schedule_at(s, epoch);
    std::array<double, kNumOps> prob_sum{}, mag_sum{};
    for (const OpParam& t : params.params()) {
      prob_sum[static_cast<int>(t.op)] += t.prob;
      mag_sum[static_cast<int>(t.op)] += t.mag;
    }
    double total = 0.0;
    for (double p : prob_sum) total += p / 2.0;
    for (int i = 0; i < kNumOps; ++i) {
      const double mean_prob = prob_sum[i] / 2.0;
      const double mean_mag = mag_sum[i] / 2.0;
      const double share = total > 0.0 ? mean_prob / total : 0.0;
      out += std::to_string(epoch) + "," + std::string(op_name(kAllOps[i])) +
             "," + fmt_double(mean_prob, 2) + "," + fmt_double(mean_mag, 2) +
             "," + fmt_double(share) + "\n";
    }
  }
  return out;
}

std::string summarize_search_log(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  int line_number = 0;

  struct Row {
    int interval;
    int epoch;
    double score;
    bool cloned;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    if (line_number == 1) {
      if (line != "interval,trial_id,epoch,score,cloned_from,params_digest") {
        throw ConfigError("search log line 1: unexpected header");
      }
      continue;
    }
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (line.back() == ',') fields.push_back("");
    if (fields.size() != 6) {
      throw ConfigError("search log line " + std::to_string(line_number) +
                        ": expected 6 fields, got " +
                        std::to_string(fields.size()));
    }
    try {
      rows.push_back({std::stoi(fields[0]), std::stoi(fields[2]),
                      std::stod(fields[3]), !fields[4].empty()});
    } catch (const std::exception&) {
      throw ConfigError("search log line " + std::to_string(line_number) +
                        ": malformed numeric field");
    }
  }

  std::map<int, std::vector<Row>> by_interval;
  for (const Row& row : rows) by_interval[row.interval].push_back(row);

  std::string out = "interval,epoch,mean_score,best_score,clones\n";
  for (const auto& [interval, group] : by_interval) {
    double sum = 0.0, best = 0.0;
    int clones = 0;
    for (const Row& row : group) {
      sum += row.score;
      best = std::max(best, row.score);
      clones += row.cloned ? 1 : 0;
    }
    out += std::to_string(interval) + "," + std::to_string(group.front().epoch) +
           "," + fmt_double(sum / group.size()) + "," + fmt_double(best) + "," +
           std::to_string(clones) + "\n";
  }
  return out;
}

void cmd_search(const fs::path& config_path, const fs::path& out_dir,
                int workers) {
  const AppConfig app = load_app_config(config_path);
  if (!app.search) throw ConfigError("config: missing \"search\" section");
  if (!app.trainer) throw ConfigError("config: missing \"trainer\" section");
  const DatasetSplits data = load_config_dataset(app);

  // The child model's lr schedule spans the whole search.
  TrainerConfig child_cfg = *app.trainer;
  child_cfg.epochs = app.search->epochs;

  const TrainableFactory factory =
      [&child_cfg](int, uint64_t model_seed,
                   const DatasetSplits& d) -> std::unique_ptr<Trainable> {
    return std::make_unique<ClassifierTrainable>(d, child_cfg, model_seed);
  };

  const SearchResult result = run_search(*app.search, factory, data, workers);

  fs::create_directories(out_dir);
  atomic_write(out_dir / "schedule.json", schedule_to_string(result.schedule));
  atomic_write(out_dir / "search_log.csv", search_log_csv(result));
  std::cout << "search complete: best_val_score="
            << fmt_double(result.best_score) << " winner_trial="
            << result.winner_id << " epochs_trained="
            << result.total_epochs_trained << "\n"
            << "wrote " << (out_dir / "schedule.json").string() << "\n"
            << "wrote " << (out_dir / "search_log.csv").string() << "\n";
}

void cmd_train(const fs::path& schedule_path, ReplayMode mode,
               const fs::path& config_path, const fs::path& out_dir,
               uint64_t seed) {
  const AppConfig app = load_app_config(config_path);
  if (!app.trainer) throw ConfigError("config: missing \"trainer\" section");
  const DatasetSplits data = load_config_dataset(app);

  std::ifstream in(schedule_path);
  if (!in) throw ConfigError("cannot open schedule: " + schedule_path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const Schedule schedule = schedule_from_string(ss.str());

  const ReplayResult result = run_replay(schedule, mode, *app.trainer, data, seed);
  if (result.stretched) {
    std::cerr << "note: schedule stretched from " << schedule.epochs() << " to "
              << app.trainer->epochs << " epochs\n";
  }
  if (mode == ReplayMode::kOrderShuffled) {
    std::cerr << "note: order-shuffled with seed " << result.shuffle_seed << "\n";
  }

  fs::create_directories(out_dir);
  atomic_write(out_dir / "results.csv", replay_csv(result));
  std::cout << "train complete: mode=" << replay_mode_name(mode)
            << " final_test_acc=" << fmt_double(result.final_test_acc) << "\n"
            << "wrote " << (out_dir / "results.csv").string() << "\n";
}

void cmd_baseline(const fs::path& config_path, int trials,
                  const fs::path& out_dir, uint64_t seed) {
  if (trials < 1) throw ConfigError("baseline: trials must be >= 1");
  const AppConfig app = load_app_config(config_path);
  if (!app.trainer) throw ConfigError("config: missing \"trainer\" section");
  const DatasetSplits data = load_config_dataset(app);

  RandomScheduleSpec spec;
  spec.epochs = app.trainer->epochs;

  std::vector<double> scores;
  std::string scores_csv = "trial,score\n";
  for (int t = 0; t < trials; ++t) {
    Rng schedule_rng(seed, 1000 + static_cast<uint64_t>(t));
    const Schedule schedule = random_schedule(spec, schedule_rng);
    const uint64_t replay_seed = Rng(seed, 2000 + static_cast<uint64_t>(t)).next_u64();
    const ReplayResult result =
        run_replay(schedule, ReplayMode::kFullSchedule, *app.trainer, data,
                   replay_seed);
    scores.push_back(result.final_test_acc);
    scores_csv += std::to_string(t) + "," + fmt_double(result.final_test_acc) + "\n";
  }

  std::string curve_csv = "n,expected_best\n";
  for (const auto& [n, expected] : best_of_n_curve(scores, trials)) {
    curve_csv += std::to_string(n) + "," + fmt_double(expected) + "\n";
  }

  fs::create_directories(out_dir);
  atomic_write(out_dir / "scores.csv", scores_csv);
  atomic_write(out_dir / "curve.csv", curve_csv);
  std::cout << "baseline complete: trials=" << trials << "\n"
            << "wrote " << (out_dir / "scores.csv").string() << "\n"
            << "wrote " << (out_dir / "curve.csv").string() << "\n";
}

void cmd_report(const fs::path& in_dir, const fs::path& out_dir) {
  const fs::path schedule_path = in_dir / "schedule.json";
  std::ifstream in(schedule_path);
  if (!in) throw ConfigError("cannot open schedule: " + schedule_path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const Schedule schedule = schedule_from_string(ss.str());

  fs::create_directories(out_dir);
  atomic_write(out_dir / "schedule_params.csv", schedule_report_csv(schedule));
  std::cout << "wrote " << (out_dir / "schedule_params.csv").string() << "\n";

  const fs::path log_path = in_dir / "search_log.csv";
  if (fs::exists(log_path)) {
    std::ifstream log_in(log_path);
    std::stringstream log_ss;
    log_ss << log_in.rdbuf();
    atomic_write(out_dir / "summary.csv", summarize_search_log(log_ss.str()));
    std::cout << "wrote " << (out_dir / "summary.csv").string() << "\n";
  }
}

}  // namespace pba
