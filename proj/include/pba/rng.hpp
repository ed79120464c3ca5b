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

#ifndef PBA_RNG_HPP_
#define PBA_RNG_HPP_

#include <cstdint>

namespace pba {

/// Splittable counter-based random source in the SplitMix64 family.
///
/// A stream is identified by (seed, stream). The state is a Weyl counter
/// advanced by a stream-specific odd increment; outputs are the SplitMix64
/// finalizer of the counter. Streams derived from distinct (seed, stream)
/// pairs never share state, so population members can draw concurrently on
/// any number of worker threads with results identical to a serial run.
///
/// Every public draw method consumes exactly one logical draw, visible via
/// draws(). Callers that need RNG accounting (the trainer's determinism
/// contract) rely on this.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0)
      : ident_(mix(mix(seed + 0x9E3779B97F4A7C15ull) ^
                   (0xBF58476D1CE4E5B9ull * (stream + 1)))) {
    counter_ = mix(ident_ ^ 0x2545F4914F6CDD1Dull);
    gamma_ = mix(ident_ + 0x9E3779B97F4A7C15ull) | 1ull;
  }

  uint64_t next_u64() {
    counter_ += gamma_;
    ++draws_;
    return mix(counter_);
  }

  /// Uniform double in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound). bound must be >= 1.
  uint32_t uniform_int(uint32_t bound) {
    return static_cast<uint32_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

  /// Derives an independent child stream without consuming a draw.
  Rng split(uint64_t stream) const { return Rng(ident_, stream); }

  /// Number of draws consumed so far (one per call to any draw method).
  uint64_t draws() const { return draws_; }

 private:
  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  uint64_t ident_;
  uint64_t counter_;
  uint64_t gamma_;
  uint64_t draws_ = 0;
};

}  // namespace pba

#endif  // PBA_RNG_HPP_
