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

#ifndef PBA_TRAINER_HPP_
#define PBA_TRAINER_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "pba/data.hpp"
#include "pba/policy.hpp"
#include "pba/rng.hpp"

namespace pba {

enum class Split { kTrain, kVal, kTest };

enum class LrSchedule { kConstant, kCosine, kStep };

struct TrainerConfig {
  double learning_rate = 0.1;
  double weight_decay = 0.0;  // multiplicative shrink per update, decoupled from lr
  int batch_size = 32;
  int epochs = 10;
  LrSchedule lr_schedule = LrSchedule::kConstant;
  double gradient_clip = 5.0;  // global L2 norm; <= 0 disables
  int hidden_units = 32;       // 0 gives plain softmax regression

  void validate() const;  // throws ConfigError
};

/// Learning rate for a 0-based epoch index. Cosine anneals over cfg.epochs
/// with one cycle; step drops by 10x at 50% and again at 75%.
double scheduled_lr(const TrainerConfig& cfg, int epoch);

/// Softmax classifier on flattened pixels with zero or one tanh hidden
/// layer, 64-bit weights throughout.
class ToyClassifier {
 public:
  ToyClassifier(int input_dim, int class_count, int hidden_units,
                uint64_t init_seed);

  int input_dim() const { return input_dim_; }
  int class_count() const { return class_count_; }
  int hidden_units() const { return hidden_units_; }

  struct Gradients {
    std::vector<double> w1, b1, w2, b2;
  };

  /// Mean softmax cross-entropy over the batch; fills grads when non-null.
  /// x is n rows of input_dim values; y holds n labels.
  double loss_and_grad(const std::vector<std::vector<double>>& x,
                       const std::vector<int>& y, Gradients* grads) const;

  /// Argmax prediction; ties resolve to the lowest class index.
  int predict(std::span<const double> x) const;

  /// One SGD update: grads are L2-clipped at clip (global norm), weights are
  /// shrunk by (1 - weight_decay), then the clipped gradient scaled by lr is
  /// subtracted.
  void sgd_step(const Gradients& grads, double lr, double weight_decay,
                double clip);

  /// Versioned length-prefixed binary blob of the weight tensors. Round
  /// trips bit-exactly on the same platform.
  std::vector<std::byte> save() const;
  void load(std::span<const std::byte> bytes);

  /// True when every weight is finite.
  bool weights_finite() const;

  // Direct weight access for gradient-check tests.
  std::vector<double>& w1() { return w1_; }
  std::vector<double>& b1() { return b1_; }
  std::vector<double>& w2() { return w2_; }
  std::vector<double>& b2() { return b2_; }

 private:
  std::vector<double> forward_logits(std::span<const double> x,
                                     std::vector<double>* hidden) const;

  int input_dim_;
  int class_count_;
  int hidden_units_;
  std::vector<double> w1_, b1_;  // hidden x input, hidden (empty when hidden_units == 0)
  std::vector<double> w2_, b2_;  // classes x (hidden or input), classes
};

/// Per-batch policy provider. Called once per batch; may draw from the rng
/// (the stationary replay mode samples here). nullopt means no learned
/// policy for this batch.
using PolicySource = std::function<std::optional<PolicyParams>(Rng&)>;

/// Baseline augmentation: pad-4 random crop back to size, horizontal flip
/// with p=0.5 (natural-image datasets only), then a fixed cutout patch with
/// edge 16/32 of the short image side. Draw order per image: crop dx, crop
/// dy, [flip], cutout cx, cutout cy. cutout_enabled exists for tests that
/// need the crop/flip stages in isolation.
Image baseline_pipeline(const Image& img, DatasetKind kind, Rng& rng,
                        bool cutout_enabled = true);

/// Flattens to doubles and normalizes: ((v/255) - mean[c]) / std[c].
std::vector<double> to_input(const Image& img,
                             const std::array<double, 3>& mean,
                             const std::array<double, 3>& stddev);

/// One full pass of shuffled mini-batch SGD. Per batch, the policy source is
/// consulted once; each image runs through the baseline pipeline and then
/// the policy (when present). Throws on non-finite loss.
void train_epoch(ToyClassifier& model, const DatasetSplits& data,
                 const PolicySource& policy_source, const TrainerConfig& cfg,
                 int epoch_index, Rng& rng);

/// Fraction of argmax-correct predictions; no augmentation at eval time.
double evaluate(const ToyClassifier& model, const DatasetSplits& data,
                Split split);

/// Child-model contract for the population search.
class Trainable {
 public:
  virtual ~Trainable() = default;
  virtual void train_epoch(const PolicySource& policy_source, Rng& rng) = 0;
  virtual double evaluate(Split split) = 0;
  virtual std::vector<std::byte> save_checkpoint() const = 0;
  virtual void load_checkpoint(std::span<const std::byte> bytes) = 0;
};

using TrainableFactory = std::function<std::unique_ptr<Trainable>(
    int trial_id, uint64_t model_seed, const DatasetSplits& data)>;

/// ToyClassifier-backed Trainable.
class ClassifierTrainable : public Trainable {
 public:
  ClassifierTrainable(const DatasetSplits& data, const TrainerConfig& cfg,
                      uint64_t model_seed);

  void train_epoch(const PolicySource& policy_source, Rng& rng) override;
  double evaluate(Split split) override;
  std::vector<std::byte> save_checkpoint() const override;
  void load_checkpoint(std::span<const std::byte> bytes) override;

  const ToyClassifier& model() const { return model_; }

 private:
  const DatasetSplits* data_;
  TrainerConfig cfg_;
  ToyClassifier model_;
  int epochs_trained_ = 0;
};

}  // namespace pba

#endif  // PBA_TRAINER_HPP_
