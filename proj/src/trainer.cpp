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

#include "pba/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "pba/augment.hpp"
#include "pba/errors.hpp"

namespace pba {

namespace {

constexpr uint32_t kCheckpointMagic = 0x4B434250u;  // "PBCK"
constexpr uint32_t kCheckpointVersion = 1;

void append_u32(std::vector<std::byte>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
  }
}

void append_u64(std::vector<std::byte>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
  }
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  uint32_t u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(take()) << (8 * i);
    return v;
  }

  uint64_t u64() {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(take()) << (8 * i);
    return v;
  }

  void doubles(std::vector<double>& out, size_t count) {
    if (pos_ + count * sizeof(double) > bytes_.size()) {
      throw std::runtime_error("checkpoint truncated");
    }
    out.resize(count);
    std::memcpy(out.data(), bytes_.data() + pos_, count * sizeof(double));
    pos_ += count * sizeof(double);
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  uint8_t take() {
    if (pos_ >= bytes_.size()) throw std::runtime_error("checkpoint truncated");
    return static_cast<uint8_t>(bytes_[pos_++]);
  }

  std::span<const std::byte> bytes_;
  size_t pos_ = 0;
};

void append_tensor(std::vector<std::byte>& out, const std::vector<double>& v,
                   std::initializer_list<uint32_t> dims) {
  append_u32(out, static_cast<uint32_t>(dims.size()));
  for (uint32_t d : dims) append_u32(out, d);
  append_u64(out, v.size() * sizeof(double));
  const size_t off = out.size();
  out.resize(off + v.size() * sizeof(double));
  std::memcpy(out.data() + off, v.data(), v.size() * sizeof(double));
}

void read_tensor(ByteReader& r, std::vector<double>& out,
                 std::initializer_list<uint32_t> dims) {
  const uint32_t rank = r.u32();
  if (rank != dims.size()) throw std::runtime_error("checkpoint rank mismatch");
  uint64_t count = 1;
  for (uint32_t want : dims) {
    const uint32_t got = r.u32();
    if (got != want) {
      throw std::runtime_error("checkpoint shape mismatch: expected " +
                               std::to_string(want) + ", got " +
                               std::to_string(got));
    }
    count *= want;
  }
  const uint64_t payload = r.u64();
  if (payload != count * sizeof(double)) {
    throw std::runtime_error("checkpoint payload length mismatch");
  }
  r.doubles(out, count);
}

}  // namespace

void TrainerConfig::validate() const {
  if (learning_rate < 0) throw ConfigError("trainer.learning_rate: must be >= 0");
  if (weight_decay < 0 || weight_decay >= 1) {
    throw ConfigError("trainer.weight_decay: must be in [0, 1)");
  }
  if (batch_size < 1) throw ConfigError("trainer.batch_size: must be >= 1");
  if (epochs < 1) throw ConfigError("trainer.epochs: must be >= 1");
  if (hidden_units < 0) throw ConfigError("trainer.hidden_units: must be >= 0");
}

double scheduled_lr(const TrainerConfig& cfg, int epoch) {
  switch (cfg.lr_schedule) {
    case LrSchedule::kConstant:
      return cfg.learning_rate;
    case LrSchedule::kCosine:
      return cfg.learning_rate * 0.5 *
             (1.0 + std::cos(std::numbers::pi * epoch / cfg.epochs));
    case LrSchedule::kStep:
      if (epoch >= cfg.epochs * 3 / 4) return cfg.learning_rate * 0.01;
      if (epoch >= cfg.epochs / 2) return cfg.learning_rate * 0.1;
      return cfg.learning_rate;
  }
  return cfg.learning_rate;
}

ToyClassifier::ToyClassifier(int input_dim, int class_count, int hidden_units,
                             uint64_t init_seed)
    : input_dim_(input_dim), class_count_(class_count),
      hidden_units_(hidden_units) {
  if (input_dim < 1 || class_count < 2 || hidden_units < 0) {
    throw std::invalid_argument("bad classifier dimensions");
  }
  Rng rng(init_seed);
  auto init = [&rng](std::vector<double>& w, size_t n, int fan_in, int fan_out) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    w.resize(n);
    for (double& v : w) v = (2.0 * rng.next_double() - 1.0) * bound;
  };
  if (hidden_units_ > 0) {
    init(w1_, static_cast<size_t>(hidden_units_) * input_dim_, input_dim_,
         hidden_units_);
    b1_.assign(hidden_units_, 0.0);
    init(w2_, static_cast<size_t>(class_count_) * hidden_units_, hidden_units_,
         class_count_);
    b2_.assign(class_count_, 0.0);
  } else {
    init(w2_, static_cast<size_t>(class_count_) * input_dim_, input_dim_,
         class_count_);
    b2_.assign(class_count_, 0.0);
  }
}

std::vector<double> ToyClassifier::forward_logits(
    std::span<const double> x, std::vector<double>* hidden) const {
  const int feat_dim = hidden_units_ > 0 ? hidden_units_ : input_dim_;
  std::vector<double> act;
  if (hidden_units_ > 0) {
    act.resize(hidden_units_);
    for (int h = 0; h < hidden_units_; ++h) {
      const double* row = &w1_[static_cast<size_t>(h) * input_dim_];
      double z = b1_[h];
      for (int d = 0; d < input_dim_; ++d) z += row[d] * x[d];
      act[h] = std::tanh(z);
    }
    if (hidden) *hidden = act;
  }
  const double* feat = hidden_units_ > 0 ? act.data() : x.data();
  std::vector<double> logits(class_count_);
  for (int k = 0; k < class_count_; ++k) {
    const double* row = &w2_[static_cast<size_t>(k) * feat_dim];
    double z = b2_[k];
    for (int d = 0; d < feat_dim; ++d) z += row[d] * feat[d];
    logits[k] = z;
  }
  return logits;
}

int ToyClassifier::predict(std::span<const double> x) const {
  const std::vector<double> logits = forward_logits(x, nullptr);
  int best = 0;
  for (int k = 1; k < class_count_; ++k) {
    if (logits[k] > logits[best]) best = k;
  }
  return best;
}

double ToyClassifier::loss_and_grad(const std::vector<std::vector<double>>& x,
                                    const std::vector<int>& y,
                                    Gradients* grads) const {
  if (x.empty() || x.size() != y.size()) {
    throw std::invalid_argument("batch inputs and labels must match and be nonempty");
  }
  const int n = static_cast<int>(x.size());
  const int feat_dim = hidden_units_ > 0 ? hidden_units_ : input_dim_;
  if (grads) {
    grads->w1.assign(w1_.size(), 0.0);
    grads->b1.assign(b1_.size(), 0.0);
    grads->w2.assign(w2_.size(), 0.0);
    grads->b2.assign(b2_.size(), 0.0);
  }

  double loss = 0.0;
  std::vector<double> hidden;
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(x[i].size()) != input_dim_) {
      throw std::invalid_argument("input dimension mismatch");
    }
    if (y[i] < 0 || y[i] >= class_count_) {
      throw std::invalid_argument("label out of range");
    }
    std::vector<double> logits = forward_logits(x[i], &hidden);

    const double zmax = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - zmax);
    const double log_sum = std::log(sum) + zmax;
    loss += (log_sum - logits[y[i]]) / n;

    if (!grads) continue;
    // dlogits = softmax - onehot, averaged over the batch
    std::vector<double> dlogits(class_count_);
    for (int k = 0; k < class_count_; ++k) {
      dlogits[k] = (std::exp(logits[k] - log_sum) - (k == y[i] ? 1.0 : 0.0)) / n;
    }
    const double* feat = hidden_units_ > 0 ? hidden.data() : x[i].data();
    for (int k = 0; k < class_count_; ++k) {
      double* row = &grads->w2[static_cast<size_t>(k) * feat_dim];
      for (int d = 0; d < feat_dim; ++d) row[d] += dlogits[k] * feat[d];
      grads->b2[k] += dlogits[k];
    }
    if (hidden_units_ > 0) {
      for (int h = 0; h < hidden_units_; ++h) {
        double da = 0.0;
        for (int k = 0; k < class_count_; ++k) {
          da += w2_[static_cast<size_t>(k) * feat_dim + h] * dlogits[k];
        }
        const double dz = da * (1.0 - hidden[h] * hidden[h]);
        double* row = &grads->w1[static_cast<size_t>(h) * input_dim_];
        for (int d = 0; d < input_dim_; ++d) row[d] += dz * x[i][d];
        grads->b1[h] += dz;
      }
    }
  }
  return loss;
}

void ToyClassifier::sgd_step(const Gradients& grads, double lr,
                             double weight_decay, double clip) {
  double sq = 0.0;
  for (const auto* g : {&grads.w1, &grads.b1, &grads.w2, &grads.b2}) {
    for (double v : *g) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  const double scale = (clip > 0 && norm > clip) ? clip / norm : 1.0;

  auto update = [&](std::vector<double>& w, const std::vector<double>& g) {
    for (size_t i = 0; i < w.size(); ++i) {
      w[i] = w[i] * (1.0 - weight_decay) - lr * scale * g[i];
    }
  };
  update(w1_, grads.w1);
  update(b1_, grads.b1);
  update(w2_, grads.w2);
  update(b2_, grads.b2);
}

std::vector<std::byte> ToyClassifier::save() const {
  std::vector<std::byte> out;
  append_u32(out, kCheckpointMagic);
  append_u32(out, kCheckpointVersion);
  const uint32_t tensor_count = hidden_units_ > 0 ? 4 : 2;
  append_u32(out, tensor_count);
  if (hidden_units_ > 0) {
    append_tensor(out, w1_, {static_cast<uint32_t>(hidden_units_),
                             static_cast<uint32_t>(input_dim_)});
    append_tensor(out, b1_, {static_cast<uint32_t>(hidden_units_)});
    append_tensor(out, w2_, {static_cast<uint32_t>(class_count_),
                             static_cast<uint32_t>(hidden_units_)});
  } else {
    append_tensor(out, w2_, {static_cast<uint32_t>(class_count_),
                             static_cast<uint32_t>(input_dim_)});
  }
  append_tensor(out, b2_, {static_cast<uint32_t>(class_count_)});
  return out;
}

void ToyClassifier::load(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  if (r.u32() != kCheckpointMagic) throw std::runtime_error("bad checkpoint magic");
  if (r.u32() != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version");
  }
  const uint32_t tensor_count = r.u32();
  const uint32_t expected = hidden_units_ > 0 ? 4 : 2;
  if (tensor_count != expected) {
    throw std::runtime_error("checkpoint tensor count mismatch");
  }
  if (hidden_units_ > 0) {
    read_tensor(r, w1_, {static_cast<uint32_t>(hidden_units_),
                         static_cast<uint32_t>(input_dim_)});
    read_tensor(r, b1_, {static_cast<uint32_t>(hidden_units_)});
    read_tensor(r, w2_, {static_cast<uint32_t>(class_count_),
                         static_cast<uint32_t>(hidden_units_)});
  } else {
    read_tensor(r, w2_, {static_cast<uint32_t>(class_count_),
                         static_cast<uint32_t>(input_dim_)});
  }
  read_tensor(r, b2_, {static_cast<uint32_t>(class_count_)});
  if (!r.done()) throw std::runtime_error("checkpoint has trailing bytes");
}

bool ToyClassifier::weights_finite() const {
  for (const auto* w : {&w1_, &b1_, &w2_, &b2_}) {
    for (double v : *w) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

Image baseline_pipeline(const Image& img, DatasetKind kind, Rng& rng,
                        bool cutout_enabled) {
  constexpr int kPad = 4;
  const int dx = static_cast<int>(rng.uniform_int(2 * kPad + 1)) - kPad;
  const int dy = static_cast<int>(rng.uniform_int(2 * kPad + 1)) - kPad;
  Image out = translate_image(img, dx, dy);

  if (kind == DatasetKind::kNaturalImage && rng.next_double() < 0.5) {
    out = flip_horizontal_image(out);
  }

  if (!cutout_enabled) return out;
  const int short_side = std::min(out.width(), out.height());
  const int edge = std::min<int>(
      static_cast<int>(std::lround(16.0 * short_side / 32.0)), short_side);
  return cutout_patch(out, edge, rng);
}

std::vector<double> to_input(const Image& img,
                             const std::array<double, 3>& mean,
                             const std::array<double, 3>& stddev) {
  std::vector<double> out;
  out.reserve(img.data().size());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        out.push_back((img.at(x, y, c) / 255.0 - mean[c]) / stddev[c]);
      }
    }
  }
  return out;
}

void train_epoch(ToyClassifier& model, const DatasetSplits& data,
                 const PolicySource& policy_source, const TrainerConfig& cfg,
                 int epoch_index, Rng& rng) {
  const auto& train = data.train;
  if (train.empty()) throw std::invalid_argument("train split is empty");

  std::vector<int> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (int i = static_cast<int>(order.size()) - 1; i >= 1; --i) {
    int j = static_cast<int>(rng.uniform_int(static_cast<uint32_t>(i + 1)));
    std::swap(order[i], order[j]);
  }

  const double lr = scheduled_lr(cfg, epoch_index);
  ToyClassifier::Gradients grads;
  std::vector<std::vector<double>> batch_x;
  std::vector<int> batch_y;

  const int n = static_cast<int>(train.size());
  for (int begin = 0, batch_index = 0; begin < n;
       begin += cfg.batch_size, ++batch_index) {
    const int end = std::min(begin + cfg.batch_size, n);
    std::optional<PolicyParams> policy =
        policy_source ? policy_source(rng) : std::nullopt;

    batch_x.clear();
    batch_y.clear();
    for (int i = begin; i < end; ++i) {
      const Example& ex = train[order[i]];
      Image augmented = baseline_pipeline(ex.image, data.dataset_kind, rng);
      if (policy) augmented = apply_policy(augmented, *policy, rng);
      batch_x.push_back(to_input(augmented, data.norm_mean, data.norm_std));
      batch_y.push_back(ex.label);
    }

    const double loss = model.loss_and_grad(batch_x, batch_y, &grads);
    if (!std::isfinite(loss)) {
      throw std::runtime_error("non-finite loss at epoch " +
                               std::to_string(epoch_index) + " batch " +
                               std::to_string(batch_index));
    }
    model.sgd_step(grads, lr, cfg.weight_decay, cfg.gradient_clip);
  }
}

double evaluate(const ToyClassifier& model, const DatasetSplits& data,
                Split split) {
  const auto& examples = split_of(data, static_cast<int>(split));
  if (examples.empty()) throw std::invalid_argument("evaluation split is empty");
  int correct = 0;
  for (const Example& ex : examples) {
    const std::vector<double> x = to_input(ex.image, data.norm_mean, data.norm_std);
    if (model.predict(x) == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

ClassifierTrainable::ClassifierTrainable(const DatasetSplits& data,
                                         const TrainerConfig& cfg,
                                         uint64_t model_seed)
    : data_(&data), cfg_(cfg),
      model_(data.train.at(0).image.width() * data.train.at(0).image.height() *
                 data.train.at(0).image.channels(),
             data.class_count, cfg.hidden_units, model_seed) {}

void ClassifierTrainable::train_epoch(const PolicySource& policy_source,
                                      Rng& rng) {
  pba::train_epoch(model_, *data_, policy_source, cfg_, epochs_trained_, rng);
  ++epochs_trained_;
}

double ClassifierTrainable::evaluate(Split split) {
  return pba::evaluate(model_, *data_, split);
}

std::vector<std::byte> ClassifierTrainable::save_checkpoint() const {
  return model_.save();
}

void ClassifierTrainable::load_checkpoint(std::span<const std::byte> bytes) {
  model_.load(bytes);
}

}  // namespace pba
