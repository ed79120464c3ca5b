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

#include "pba/policy.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "pba/errors.hpp"

namespace pba {

namespace {

void check_prob(int prob) {
  if (prob < 0 || prob >= kNumProbLevels) {
    throw std::invalid_argument("probability level out of range: " +
                                std::to_string(prob));
  }
}

void check_mag_level(int mag) {
  if (mag < 0 || mag >= kNumMagLevels) {
    throw std::invalid_argument("magnitude level out of range: " +
                                std::to_string(mag));
  }
}

}  // namespace

PolicyParams PolicyParams::zero() {
  std::vector<OpParam> params;
  params.reserve(kPolicySlots);
  for (OpKind op : kAllOps) {
    params.push_back({op, 0, 0});
    params.push_back({op, 0, 0});
  }
  return PolicyParams(std::move(params));
}

PolicyParams::PolicyParams(std::vector<OpParam> params)
    : params_(std::move(params)) {
  if (params_.size() != kPolicySlots) {
    throw std::invalid_argument("policy must have exactly 30 tuples, got " +
                                std::to_string(params_.size()));
  }
  std::array<int, kNumOps> copies{};
  for (const OpParam& p : params_) {
    check_prob(p.prob);
    check_mag_level(p.mag);
    ++copies[static_cast<int>(p.op)];
  }
  for (int i = 0; i < kNumOps; ++i) {
    if (copies[i] != 2) {
      throw std::invalid_argument("policy must hold exactly two tuples per op; " +
                                  std::string(op_name(kAllOps[i])) + " has " +
                                  std::to_string(copies[i]));
    }
  }
}

void PolicyParams::set_prob(int slot, int prob) {
  check_prob(prob);
  params_.at(slot).prob = prob;
}

void PolicyParams::set_mag(int slot, int mag) {
  check_mag_level(mag);
  params_.at(slot).mag = mag;
}

std::string params_digest(const PolicyParams& p) {
  uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&h](uint64_t byte) {
    h ^= byte;
    h *= 0x100000001b3ull;
  };
  for (const OpParam& t : p.params()) {
    feed(static_cast<uint64_t>(t.op));
    feed(static_cast<uint64_t>(t.prob));
    feed(static_cast<uint64_t>(t.mag));
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = hex[h & 0xF];
    h >>= 4;
  }
  return out;
}

Image apply_policy(const Image& img, const PolicyParams& p, Rng& rng,
                   PolicyApplication* log) {
  std::array<int, kPolicySlots> order;
  std::iota(order.begin(), order.end(), 0);
  for (int i = kPolicySlots - 1; i >= 1; --i) {
    int j = static_cast<int>(rng.uniform_int(static_cast<uint32_t>(i + 1)));
    std::swap(order[i], order[j]);
  }

  const double u = rng.next_double();
  int count = u < kOpCountProbs[0]                      ? 0
              : u < kOpCountProbs[0] + kOpCountProbs[1] ? 1
                                                        : 2;
  if (log) {
    log->count = count;
    log->applied.clear();
  }

  Image out = img;
  for (int idx : order) {
    if (count == 0) break;
    const OpParam& t = p.params()[idx];
    if (rng.next_double() < t.prob / 10.0) {
      out = apply_op(out, t.op, t.mag, rng);
      --count;
      if (log) log->applied.emplace_back(t.op, t.mag);
    }
  }
  return out;
}

Schedule::Schedule(int epochs, std::vector<ScheduleEntry> entries)
    : epochs_(epochs), entries_(std::move(entries)) {
  if (epochs_ < 1) {
    throw std::invalid_argument("schedule must cover at least one epoch");
  }
  if (entries_.empty()) {
    throw std::invalid_argument("schedule has no entries");
  }
  if (entries_.front().start_epoch != 0) {
    throw std::invalid_argument("first schedule entry must start at epoch 0");
  }
  for (size_t i = 1; i < entries_.size(); ++i) {
    if (entries_[i].start_epoch <= entries_[i - 1].start_epoch) {
      throw std::invalid_argument("schedule entries must have increasing starts");
    }
  }
  if (entries_.back().start_epoch >= epochs_) {
    throw std::invalid_argument("schedule entry starts beyond the last epoch");
  }
}

const PolicyParams& schedule_at(const Schedule& s, int epoch) {
  if (epoch < 0 || epoch >= s.epochs()) {
    throw std::out_of_range("epoch " + std::to_string(epoch) +
                            " outside schedule of " +
                            std::to_string(s.epochs()) + " epochs");
  }
  const auto& entries = s.entries();
  auto it = std::upper_bound(
      entries.begin(), entries.end(), epoch,
      [](int e, const ScheduleEntry& entry) { return e < entry.start_epoch; });
  return std::prev(it)->params;
}

Schedule stretch_schedule(const Schedule& s, int new_epochs) {
  if (new_epochs < 1) {
    throw std::invalid_argument("schedule length must be positive, got " +
                                std::to_string(new_epochs));
  }
  std::vector<ScheduleEntry> entries;
  for (int e = 0; e < new_epochs; ++e) {
    const int src = static_cast<int>(static_cast<int64_t>(e) * s.epochs() /
                                     new_epochs);
    const PolicyParams& p = schedule_at(s, src);
    if (entries.empty() || !(entries.back().params == p)) {
      entries.push_back({e, p});
    }
  }
  return Schedule(new_epochs, std::move(entries));
}

const PolicyParams& last_policy(const Schedule& s) {
  return schedule_at(s, s.epochs() - 1);
}

Schedule shuffle_order(const Schedule& s, Rng& rng) {
  struct Segment {
    int duration;
    PolicyParams params;
  };
  std::vector<Segment> segments;
  const auto& entries = s.entries();
  for (size_t i = 0; i < entries.size(); ++i) {
    const int end = i + 1 < entries.size() ? entries[i + 1].start_epoch
                                           : s.epochs();
    segments.push_back({end - entries[i].start_epoch, entries[i].params});
  }
  for (int i = static_cast<int>(segments.size()) - 1; i >= 1; --i) {
    int j = static_cast<int>(rng.uniform_int(static_cast<uint32_t>(i + 1)));
    std::swap(segments[i], segments[j]);
  }
  std::vector<ScheduleEntry> shuffled;
  int start = 0;
  for (const Segment& seg : segments) {
    shuffled.push_back({start, seg.params});
    start += seg.duration;
  }
  return Schedule(s.epochs(), std::move(shuffled));
}

StationarySampler::StationarySampler(const Schedule& s)
    : epochs_(s.epochs()), entries_(s.entries()) {}

const PolicyParams& StationarySampler::sample(Rng& rng) const {
  const int epoch = static_cast<int>(rng.uniform_int(static_cast<uint32_t>(epochs_)));
  auto it = std::upper_bound(
      entries_.begin(), entries_.end(), epoch,
      [](int e, const ScheduleEntry& entry) { return e < entry.start_epoch; });
  return std::prev(it)->params;
}

StationarySampler collapse_schedule(const Schedule& s) {
  return StationarySampler(s);
}

boost::multiprecision::cpp_int search_space_size() {
  return boost::multiprecision::pow(
      boost::multiprecision::cpp_int(kNumMagLevels * kNumProbLevels),
      kPolicySlots);
}

nlohmann::json schedule_to_json(const Schedule& s) {
  nlohmann::json entries = nlohmann::json::array();
  for (const ScheduleEntry& entry : s.entries()) {
    nlohmann::json params = nlohmann::json::array();
    for (const OpParam& t : entry.params.params()) {
      params.push_back({{"op", std::string(op_name(t.op))},
                        {"prob", t.prob},
                        {"mag", t.mag}});
    }
    entries.push_back({{"start", entry.start_epoch}, {"params", std::move(params)}});
  }
  return {{"epochs", s.epochs()}, {"entries", std::move(entries)}};
}

Schedule schedule_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || !j.contains("epochs") || !j.contains("entries")) {
      throw ConfigError("schedule: expected object with epochs and entries");
    }
    const int epochs = j.at("epochs").get<int>();
    std::vector<ScheduleEntry> entries;
    for (const auto& je : j.at("entries")) {
      std::vector<OpParam> params;
      for (const auto& jp : je.at("params")) {
        const std::string name = jp.at("op").get<std::string>();
        auto op = op_from_name(name);
        if (!op) {
          throw ConfigError("schedule: unknown op name \"" + name + "\"");
        }
        params.push_back({*op, jp.at("prob").get<int>(), jp.at("mag").get<int>()});
      }
      entries.push_back({je.at("start").get<int>(), PolicyParams(std::move(params))});
    }
    return Schedule(epochs, std::move(entries));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
}

std::string schedule_to_string(const Schedule& s) {
  return schedule_to_json(s).dump(2) + "\n";
}

Schedule schedule_from_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("schedule: invalid JSON: ") + e.what());
  }
  return schedule_from_json(j);
}

}  // namespace pba
