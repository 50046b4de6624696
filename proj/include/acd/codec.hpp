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

// Action chunk codec: a causal temporal-convolution encoder with average
// pooling maps an [N x 12] chunk to a [C x D] latent grid, residual vector
// quantization turns it into C x N_q code indices, and a transposed-conv
// decoder maps the dequantized grid back to [N x 12].

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "acd/autograd.hpp"
#include "acd/container.hpp"
#include "acd/metrics.hpp"
#include "acd/optim.hpp"
#include "acd/rvq.hpp"
#include "acd/trajectory.hpp"

namespace acd {

struct CodecConfig {
  std::size_t chunk_len = 10;       // N
  std::size_t encoder_layers = 3;   // N_L
  std::size_t kernel_size = 4;
  std::size_t stride = 1;
  std::size_t pool_factor = 5;
  std::size_t hidden = 32;          // conv channel width between input and latent
  std::size_t latent_dim = 64;      // D
  std::size_t codebook_size = 128;  // K
  std::size_t num_quantizers = 2;   // N_q
  double beta = 0.25;               // commitment weight
  double ema_decay = 0.99;
  double dead_code_threshold = 1.0;
  std::size_t dead_code_window = 20;
  double lr = 3e-4;
  double weight_decay = 0.0;
  std::size_t batch_size = 32;
  std::size_t steps = 3000;
  std::uint64_t seed = 0;

  // D = K = 512 as in the full-size model.
  static CodecConfig full_size();

  std::size_t compressed_len() const;      // C = ceil(N / pool_factor)
  std::size_t tokens_per_chunk() const { return compressed_len() * num_quantizers; }
  void validate() const;                   // throws ConfigError

  void to_container(Container& c) const;
  static CodecConfig from_container(const Container& c);
  bool operator==(const CodecConfig&) const = default;
};

struct TrainingMeta {
  std::int64_t steps = 0;
  double final_rec = 0.0;
  double final_com = 0.0;
  double final_total = 0.0;
  bool operator==(const TrainingMeta&) const = default;
};

class Codec {
 public:
  // Random weights (biases zero) drawn from `config.seed`; codebook zero.
  explicit Codec(const CodecConfig& config);

  Codec(const Codec&) = delete;
  Codec& operator=(const Codec&) = delete;
  Codec(Codec&&) = default;
  Codec& operator=(Codec&&) = default;
  // Deep copy (parameters are not shared).
  Codec clone() const;

  const CodecConfig& config() const { return config_; }

  // x: [B x N x 12] -> [B x C x D]
  ag::Var encode(const ag::Var& x) const;
  // z: [B x C x D] -> [B x N x 12]
  ag::Var decode(const ag::Var& z) const;

  // Single chunk or batch, no gradient tracking. chunk: [N x 12] or
  // [B x N x 12]; throws DimensionError for a wrong N.
  Tensor encode(const Tensor& chunk) const;
  Tensor decode(const Tensor& quantized) const;
  QuantizeResult quantize(const Tensor& latent, std::size_t layers = 0) const;
  Tensor dequantize(const CodeIndices& indices) const;
  // encode -> quantize -> dequantize -> decode, in normalized units.
  Tensor reconstruct(const Tensor& chunks, std::size_t layers = 0) const;
  // Code indices of one chunk [C x N_q].
  CodeIndices tokenize(const Tensor& chunk) const;
  // Decoded chunk [N x 12] from indices of one chunk.
  Tensor detokenize(const CodeIndices& indices) const;

  Codebook& codebook() { return codebook_; }
  const Codebook& codebook() const { return codebook_; }

  std::vector<NamedParam> encoder_params() const;
  std::vector<NamedParam> decoder_params() const;
  std::vector<NamedParam> parameters() const;

  const NormalizationStats& normalization() const { return norm_; }
  void set_normalization(const NormalizationStats& s) { norm_ = s; }
  const TrainingMeta& meta() const { return meta_; }
  void set_meta(const TrainingMeta& m) { meta_ = m; }

  Container to_container() const;
  static Codec from_container(const Container& c);
  void save(const std::filesystem::path& path) const;
  static Codec load(const std::filesystem::path& path);

  // Bitwise equality of config, parameters, codebook, stats and metadata.
  bool same_state(const Codec& other) const;

 private:
  struct Conv {
    ag::Var weight;
    ag::Var bias;
  };

  CodecConfig config_;
  std::vector<Conv> encoder_;
  Conv upsample_;
  std::vector<Conv> decoder_;
  Codebook codebook_;
  NormalizationStats norm_;
  TrainingMeta meta_;
};

struct Stage1Loss {
  ag::Var total;
  ag::Var rec;  // MSE(chunk, reconstruction)
  ag::Var com;  // MSE(latent, stop_gradient(quantized)), unweighted
};

// total = rec + beta * com.
Stage1Loss stage1_loss(const ag::Var& chunk, const ag::Var& reconstruction,
                       const ag::Var& latent, const Tensor& quantized,
                       double beta);

struct TrainRecord {
  std::int64_t step = 0;
  double rec = 0.0;
  double com = 0.0;
  double total = 0.0;
  std::vector<double> perplexity;  // per layer, over the logging interval
  std::size_t reseeded = 0;
};

struct TrainOptions {
  std::size_t log_every = 100;
  // Called after each logged record.
  std::function<void(const TrainRecord&)> on_record;
};

struct CodecTrainResult {
  Codec codec;
  std::vector<TrainRecord> history;
};

// Thrown when a step produces a non-finite loss; carries the parameters as
// they were before that step.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, std::int64_t step, Codec last_good)
      : std::runtime_error(what), step_(step), last_good_(std::move(last_good)) {}
  std::int64_t step() const { return step_; }
  const Codec& last_good() const { return last_good_; }

 private:
  std::int64_t step_;
  Codec last_good_;
};

// Trains on normalized chunks ([N x 12] each). Runs AdamW on the encoder and
// decoder through the straight-through estimator and updates the codebook
// with EMA. The codebook is initialized from encoder outputs at step 0.
CodecTrainResult train_codec(const std::vector<Tensor>& chunks,
                             const NormalizationStats& stats,
                             const CodecConfig& config,
                             const TrainOptions& options = {});

// Continues training an existing codec in place.
std::vector<TrainRecord> train_codec_inplace(Codec& codec,
                                             const std::vector<Tensor>& chunks,
                                             const TrainOptions& options = {});

// Normalized, stride-`stride` chunks of every trajectory.
std::vector<Tensor> dataset_chunks(const Dataset& data,
                                   const NormalizationStats& stats,
                                   std::size_t n, std::size_t stride);

// Stacks chunks into [B x N x 12].
Tensor stack_chunks(const std::vector<Tensor>& chunks);

// Metrics on normalized data (peak 2) plus per-layer codebook perplexity.
metrics::ReconstructionReport evaluate_codec(const Codec& codec,
                                             const std::vector<Tensor>& chunks,
                                             std::size_t batch = 256);

}  // namespace acd
