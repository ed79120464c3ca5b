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

#ifndef PBA_TESTS_SUPPORT_HPP_
#define PBA_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pba/data.hpp"
#include "pba/image.hpp"
#include "pba/pbt.hpp"
#include "pba/rng.hpp"
#include "pba/trainer.hpp"

namespace pba::testing {

inline Image random_image(int w, int h, int c, Rng& rng) {
  Image img(w, h, c);
  for (auto& v : img.data()) v = static_cast<uint8_t>(rng.uniform_int(256));
  return img;
}

inline int sum_prob_levels(const PolicyParams& p) {
  int sum = 0;
  for (const OpParam& t : p.params()) sum += t.prob;
  return sum;
}

// Scripted child model: its "weights" are the digest sequence of the params
// it trained under, so cloning a checkpoint transplants the lineage record.
// The validation score is a pure function of the current policy. State lives
// behind a shared pointer so tests can inspect it after the search (which
// owns and destroys the trainables) has finished.
class FakeTrainable : public Trainable {
 public:
  struct State {
    std::vector<std::string> lineage;
    int epochs_trained = 0;
  };
  using ScoreFn = std::function<double(const PolicyParams&)>;

  explicit FakeTrainable(ScoreFn score)
      : score_(std::move(score)), state_(std::make_shared<State>()) {}

  void train_epoch(const PolicySource& policy_source, Rng& rng) override {
    const std::optional<PolicyParams> policy = policy_source(rng);
    if (!policy) throw std::logic_error("search must provide a policy");
    state_->lineage.push_back(params_digest(*policy));
    last_params_ = *policy;
    ++state_->epochs_trained;
  }

  double evaluate(Split) override { return score_(last_params_); }

  std::vector<std::byte> save_checkpoint() const override {
    std::string blob;
    for (const std::string& digest : state_->lineage) {
      blob += digest;
      blob += '\n';
    }
    std::vector<std::byte> out(blob.size());
    if (!blob.empty()) std::memcpy(out.data(), blob.data(), blob.size());
    return out;
  }

  void load_checkpoint(std::span<const std::byte> bytes) override {
    std::string blob(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    state_->lineage.clear();
    size_t pos = 0;
    while (pos < blob.size()) {
      const size_t nl = blob.find('\n', pos);
      state_->lineage.push_back(blob.substr(pos, nl - pos));
      pos = nl + 1;
    }
  }

  std::shared_ptr<State> state() const { return state_; }

 private:
  ScoreFn score_;
  std::shared_ptr<State> state_;
  PolicyParams last_params_ = PolicyParams::zero();
};

// max |analytic - central difference| / max(1, |analytic|, |fd|) over all
// weights, for a fixed small batch.
inline double gradient_check(ToyClassifier& model,
                             const std::vector<std::vector<double>>& x,
                             const std::vector<int>& y) {
  ToyClassifier::Gradients grads;
  model.loss_and_grad(x, y, &grads);

  const double eps = 6e-6;
  double worst = 0.0;
  auto check_tensor = [&](std::vector<double>& w, const std::vector<double>& g) {
    for (size_t i = 0; i < w.size(); ++i) {
      const double orig = w[i];
      w[i] = orig + eps;
      const double up = model.loss_and_grad(x, y, nullptr);
      w[i] = orig - eps;
      const double down = model.loss_and_grad(x, y, nullptr);
      w[i] = orig;
      const double fd = (up - down) / (2 * eps);
      const double rel =
          std::abs(fd - g[i]) / std::max({1.0, std::abs(fd), std::abs(g[i])});
      worst = std::max(worst, rel);
    }
  };
  check_tensor(model.w1(), grads.w1);
  check_tensor(model.b1(), grads.b1);
  check_tensor(model.w2(), grads.w2);
  check_tensor(model.b2(), grads.b2);
  return worst;
}

// The synthetic task used by the statistical checks: rotation is the
// dominant nuisance (the baseline pipeline's random crop already absorbs
// small translations), so a policy has to discover rotation-like ops to
// close the train/test gap.
inline SyntheticSpec acceptance_task_spec(uint64_t seed) {
  SyntheticSpec spec;
  spec.image_size = 32;
  spec.class_count = 5;
  spec.train_count = 384;
  spec.val_count = 512;
  spec.test_count = 512;
  spec.rotation_range_deg = 30.0;
  spec.translation_range_px = 2.0;
  spec.brightness_jitter = 0.10;
  spec.seed = seed;
  spec.dataset_kind = DatasetKind::kDigit;
  return spec;
}

inline TrainerConfig acceptance_trainer_config() {
  TrainerConfig cfg;
  cfg.learning_rate = 0.15;
  cfg.weight_decay = 1e-4;
  cfg.batch_size = 32;
  cfg.epochs = 60;
  cfg.lr_schedule = LrSchedule::kCosine;
  cfg.gradient_clip = 5.0;
  cfg.hidden_units = 32;
  return cfg;
}

// Rotation-only variant used to calibrate the oracle gap.
inline SyntheticSpec calibration_spec(uint64_t seed) {
  SyntheticSpec spec = acceptance_task_spec(seed);
  spec.translation_range_px = 0;
  spec.brightness_jitter = 0;
  spec.train_count = 256;
  spec.val_count = 128;
  spec.test_count = 256;
  return spec;
}

// Trains one model with or without the oracle augmentation (a fresh draw
// from the dataset's own nuisance distribution per image per epoch) and
// returns its test accuracy.
inline double oracle_arm_accuracy(const DatasetSplits& data,
                                  const SyntheticSpec& spec,
                                  const TrainerConfig& cfg, uint64_t seed,
                                  bool oracle_augment) {
  const Image& probe = data.train.at(0).image;
  Rng master(seed);
  Rng train_rng = master.split(1);
  ToyClassifier model(probe.width() * probe.height() * probe.channels(),
                      data.class_count, cfg.hidden_units,
                      master.split(2).next_u64());

  const int n = static_cast<int>(data.train.size());
  std::vector<int> order(n);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int i = n - 1; i >= 1; --i) {
      int j = static_cast<int>(train_rng.uniform_int(static_cast<uint32_t>(i + 1)));
      std::swap(order[i], order[j]);
    }
    const double lr = scheduled_lr(cfg, epoch);
    ToyClassifier::Gradients grads;
    std::vector<std::vector<double>> xs;
    std::vector<int> ys;
    for (int begin = 0; begin < n; begin += cfg.batch_size) {
      const int end = std::min(begin + cfg.batch_size, n);
      xs.clear();
      ys.clear();
      for (int i = begin; i < end; ++i) {
        const Example& ex = data.train[order[i]];
        Image img = oracle_augment ? apply_nuisance(ex.image, spec, train_rng)
                                   : ex.image;
        xs.push_back(to_input(img, data.norm_mean, data.norm_std));
        ys.push_back(ex.label);
      }
      model.loss_and_grad(xs, ys, &grads);
      model.sgd_step(grads, lr, cfg.weight_decay, cfg.gradient_clip);
    }
  }
  return evaluate(model, data, Split::kTest);
}

// Median oracle-vs-plain test accuracy gap over the given seeds.
inline double oracle_gap(const DatasetSplits& data, const SyntheticSpec& spec,
                         const TrainerConfig& cfg,
                         const std::vector<uint64_t>& seeds) {
  std::vector<double> gaps;
  for (uint64_t seed : seeds) {
    const double with_oracle = oracle_arm_accuracy(data, spec, cfg, seed, true);
    const double without = oracle_arm_accuracy(data, spec, cfg, seed, false);
    gaps.push_back(with_oracle - without);
  }
  std::sort(gaps.begin(), gaps.end());
  return gaps[gaps.size() / 2];
}

// The calibration measurement shared by the data-module test and the
// end-to-end acceptance criterion.
inline double calibration_gap() {
  const SyntheticSpec spec = calibration_spec(404);
  const DatasetSplits data = generate_synthetic(spec);
  TrainerConfig cfg = acceptance_trainer_config();
  cfg.epochs = 25;
  return oracle_gap(data, spec, cfg, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
}

}  // namespace pba::testing

#endif  // PBA_TESTS_SUPPORT_HPP_
