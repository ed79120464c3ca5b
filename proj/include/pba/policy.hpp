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

#ifndef PBA_POLICY_HPP_
#define PBA_POLICY_HPP_

#include <array>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <nlohmann/json_fwd.hpp>

#include "pba/augment.hpp"
#include "pba/image.hpp"
#include "pba/rng.hpp"

namespace pba {

/// Probability levels run 0..10; level/10 is the application probability.
inline constexpr int kNumProbLevels = 11;

/// Two slots per op: 30 tuples, 60 free prob/mag parameters.
inline constexpr int kPolicySlots = 30;

/// Distribution of how many ops one policy application may fire: 0, 1 or 2.
inline constexpr std::array<double, 3> kOpCountProbs = {0.2, 0.3, 0.5};

struct OpParam {
  OpKind op;
  int prob;  // 0..10
  int mag;   // 0..9
  bool operator==(const OpParam&) const = default;
};

/// The 30-tuple policy parameter vector. Op slots are fixed at construction;
/// only prob and mag are mutable.
class PolicyParams {
 public:
  /// Canonical layout (two adjacent slots per op, in kAllOps order) with all
  /// prob and mag levels zero. Applying this policy is the identity.
  static PolicyParams zero();

  /// Validates: exactly 30 slots, two per op, levels in range.
  explicit PolicyParams(std::vector<OpParam> params);

  const std::vector<OpParam>& params() const { return params_; }
  void set_prob(int slot, int prob);
  void set_mag(int slot, int mag);

  bool operator==(const PolicyParams&) const = default;

 private:
  std::vector<OpParam> params_;
};

/// 16-hex-digit FNV-1a digest of the parameter vector, used in search logs.
std::string params_digest(const PolicyParams& p);

/// What one apply_policy call did: the sampled op budget and the ops fired.
struct PolicyApplication {
  int count = 0;
  std::vector<std::pair<OpKind, int>> applied;  // (op, mag) in firing order
};

/// Applies the policy template: shuffle a copy of the 30 tuples, sample the
/// op budget from kOpCountProbs, then walk the shuffled list firing each op
/// with probability prob/10 until the budget is spent. At most 2 ops fire.
Image apply_policy(const Image& img, const PolicyParams& p, Rng& rng,
                   PolicyApplication* log = nullptr);

struct ScheduleEntry {
  int start_epoch;  // inclusive
  PolicyParams params;
  bool operator==(const ScheduleEntry&) const = default;
};

/// Maps every epoch in [0, epochs) to one PolicyParams via sorted,
/// non-overlapping segments starting at epoch 0.
class Schedule {
 public:
  Schedule(int epochs, std::vector<ScheduleEntry> entries);

  int epochs() const { return epochs_; }
  const std::vector<ScheduleEntry>& entries() const { return entries_; }

  bool operator==(const Schedule&) const = default;

 private:
  int epochs_;
  std::vector<ScheduleEntry> entries_;
};

/// Policy in effect at the given epoch. Throws std::out_of_range outside
/// [0, epochs).
const PolicyParams& schedule_at(const Schedule& s, int epoch);

/// Linear schedule stretch: output epoch e takes the input policy at epoch
/// floor(e * old_epochs / new_epochs).
Schedule stretch_schedule(const Schedule& s, int new_epochs);

/// Policy of the final epoch.
const PolicyParams& last_policy(const Schedule& s);

/// Uniformly permutes the segment order, keeping each segment's duration;
/// start epochs are recomputed cumulatively.
Schedule shuffle_order(const Schedule& s, Rng& rng);

/// Time-independent collapse of a schedule: samples a segment's policy with
/// probability proportional to its duration.
class StationarySampler {
 public:
  explicit StationarySampler(const Schedule& s);
  const PolicyParams& sample(Rng& rng) const;

 private:
  int epochs_;
  std::vector<ScheduleEntry> entries_;
};

StationarySampler collapse_schedule(const Schedule& s);

/// Number of distinct policy parameter vectors: (10 * 11)^30.
boost::multiprecision::cpp_int search_space_size();

// Schedule file format: {"epochs": int, "entries": [{"start": int,
// "params": [{"op": str, "prob": int, "mag": int} x30]}]}. Op strings are
// the lowercase op names.
nlohmann::json schedule_to_json(const Schedule& s);
Schedule schedule_from_json(const nlohmann::json& j);
std::string schedule_to_string(const Schedule& s);  // pretty, trailing newline
Schedule schedule_from_string(const std::string& text);

}  // namespace pba

#endif  // PBA_POLICY_HPP_
