// Copyright 2026 The ACD Authors
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

#pragma once

// Token-level policy surrogate. A fixed random projection of recent command
// frames stands in for the multimodal observation; a two-layer perceptron
// maps it to C x N_q groups of K logits, one group per code index in
// time-major order. The codec stays frozen throughout.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "acd/autograd.hpp"
#include "acd/codec.hpp"
#include "acd/container.hpp"
#include "acd/rvq.hpp"
#include "acd/tensor.hpp"
#include "acd/trajectory.hpp"

namespace acd {

struct FeatureConfig {
  std::size_t width = 16;
  std::size_t context = 4;  // frames ending at the chunk start, inclusive
  std::uint64_t seed = 7;

  bool operator==(const FeatureConfig&) const = default;
};

// Observation features from normalized frames.
class FeatureProjector {
 public:
  explicit FeatureProjector(const FeatureConfig& cfg = {});

  const FeatureConfig& config() const { return cfg_; }
  // tanh(P * window / sqrt(context * 12)) where window holds frames
  // [start - context + 1, start], zero before the first frame.
  // frames: [length x 12], normalized.
  std::vector<double> operator()(const Tensor& frames, std::size_t start) const;

 private:
  FeatureConfig cfg_;
  Tensor projection_;  // [width x context*12]
};

struct LabeledDataset {
  Tensor features;                    // [M x width]
  std::vector<std::int64_t> targets;  // M * C * N_q, time-major per sample
  std::vector<Tensor> chunks;         // normalized [N x 12] source chunks
  std::size_t groups = 0;             // C * N_q

  std::size_t size() const { return chunks.size(); }
  CodeIndices indices(std::size_t sample, std::size_t layers) const;
  // First `count` samples (or all if fewer).
  LabeledDataset head(std::size_t count) const;
};

// One (feature, code indices) pair per stride-spaced chunk, labeled by the
// frozen codec's quantizer. Throws ConfigError when no trajectory is long
// enough for one chunk.
LabeledDataset label_dataset(const Codec& codec, const Dataset& data,
                             const FeatureProjector& features,
                             std::size_t stride);

struct PolicyHeadConfig {
  std::size_t feature_width = 16;
  std::size_t hidden = 128;
  std::size_t groups = 4;  // C * N_q
  std::size_t codebook_size = 128;
  std::uint64_t seed = 0;

  bool operator==(const PolicyHeadConfig&) const = default;
};

class PolicyHead {
 public:
  explicit PolicyHead(const PolicyHeadConfig& cfg);
  // Sized to match a codec's token layout.
  static PolicyHead for_codec(const Codec& codec, const FeatureConfig& features,
                              std::size_t hidden, std::uint64_t seed);

  PolicyHead(const PolicyHead&) = delete;
  PolicyHead& operator=(const PolicyHead&) = delete;
  PolicyHead(PolicyHead&&) = default;
  PolicyHead& operator=(PolicyHead&&) = default;

  const PolicyHeadConfig& config() const { return cfg_; }

  // features [B x width] -> logits [B x groups x K]
  ag::Var forward(const ag::Var& features) const;
  Tensor logits(const Tensor& features) const;
  // Argmax per group; [B x groups] flattened.
  std::vector<std::int64_t> predict(const Tensor& features) const;

  std::vector<NamedParam> parameters() const;

  Container to_container() const;
  static PolicyHead from_container(const Container& c);
  void save(const std::filesystem::path& path) const;
  static PolicyHead load(const std::filesystem::path& path);

 private:
  PolicyHeadConfig cfg_;
  ag::Var w1_, b1_, w2_, b2_;
};

// Mean cross-entropy over logit groups. logits [B x groups x K]; targets
// B * groups entries. Throws DimensionError on a count mismatch.
ag::Var stage2_loss(const ag::Var& logits, std::span<const std::int64_t> targets);

// Fraction of groups whose argmax equals the target.
double token_accuracy(const PolicyHead& head, const LabeledDataset& data);

struct PolicyTrainConfig {
  double lr = 1e-3;
  double weight_decay = 0.0;
  std::size_t steps = 2000;
  std::size_t batch_size = 0;  // 0 = full batch
  std::size_t log_every = 50;
  // Stop once a logged accuracy reaches this value; 0 disables.
  double stop_at_accuracy = 0.0;
  std::uint64_t seed = 0;
};

struct PolicyRecord {
  std::int64_t step = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct PolicyTrainResult {
  std::vector<PolicyRecord> history;  // record 0 is the untrained head
  double final_accuracy = 0.0;
};

// AdamW on the head only. A non-finite loss raises NumericError.
PolicyTrainResult train_policy(PolicyHead& head, const LabeledDataset& data,
                               const PolicyTrainConfig& cfg,
                               const std::function<void(const PolicyRecord&)>& on_record = {});

// Single forward pass: argmax tokens -> dequantize -> decode -> denormalize.
// Returns the chunk in raw command units [N x 12].
Tensor infer_chunk(const PolicyHead& head, std::span<const double> feature,
                   const Codec& codec);

}  // namespace acd
