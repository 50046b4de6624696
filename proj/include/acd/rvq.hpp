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

// Multi-layer residual vector quantization.
//
// Layer i quantizes the residual left by layers 1..i-1 against its own
// codebook; the quantized vector is the sum of the selected codes. Codes are
// learned with exponential moving averages of the residuals assigned to
// them, and codes that go unused for a window of updates are reseeded from
// recent residuals.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "acd/tensor.hpp"

namespace acd {

// Grid of code indices, one row per latent position and one column per
// quantizer layer. Rows follow time order, so flattening row-major yields the
// time-major token stream (all layers of t = 0, then t = 1, ...).
class CodeIndices {
 public:
  CodeIndices() = default;
  CodeIndices(std::size_t positions, std::size_t layers)
      : positions_(positions), layers_(layers), idx_(positions * layers, 0) {}

  std::size_t positions() const { return positions_; }
  std::size_t layers() const { return layers_; }
  std::int64_t& at(std::size_t t, std::size_t layer) { return idx_[t * layers_ + layer]; }
  std::int64_t at(std::size_t t, std::size_t layer) const { return idx_[t * layers_ + layer]; }
  const std::vector<std::int64_t>& tokens() const { return idx_; }
  std::vector<std::int64_t>& tokens() { return idx_; }

  bool operator==(const CodeIndices&) const = default;

 private:
  std::size_t positions_ = 0;
  std::size_t layers_ = 0;
  std::vector<std::int64_t> idx_;
};

class Codebook {
 public:
  Codebook() = default;
  // All codes zero; EMA counts start at 1 with sums equal to the codes.
  Codebook(std::size_t layers, std::size_t size, std::size_t dim);
  static Codebook random(std::size_t layers, std::size_t size, std::size_t dim,
                         std::mt19937_64& rng, double stddev);

  std::size_t num_layers() const { return layers_.size(); }
  std::size_t size() const { return size_; }
  std::size_t dim() const { return dim_; }

  // [K x D]
  Tensor& layer(std::size_t i) { return layers_.at(i); }
  const Tensor& layer(std::size_t i) const { return layers_.at(i); }

  // [N_q x K]
  Tensor& ema_count() { return ema_count_; }
  const Tensor& ema_count() const { return ema_count_; }
  // [N_q x K x D]
  Tensor& ema_sum() { return ema_sum_; }
  const Tensor& ema_sum() const { return ema_sum_; }
  // Assignments per code since the current dead-code window opened [N_q x K].
  Tensor& window_usage() { return window_usage_; }
  const Tensor& window_usage() const { return window_usage_; }
  std::int64_t window_steps() const { return window_steps_; }
  void set_window_steps(std::int64_t s) { window_steps_ = s; }

  // Overwrites code k of layer i and resets its EMA state to that vector.
  void set_code(std::size_t layer, std::size_t k, std::span<const double> v);
  // Sets the EMA sums to count * code for every code.
  void sync_ema_sums();

  bool operator==(const Codebook&) const = default;

 private:
  std::size_t size_ = 0;
  std::size_t dim_ = 0;
  std::vector<Tensor> layers_;
  Tensor ema_count_;
  Tensor ema_sum_;
  Tensor window_usage_;
  std::int64_t window_steps_ = 0;
};

struct QuantizeResult {
  CodeIndices indices;           // [rows x layers]
  Tensor quantized;              // same shape as the latent
  // residuals[0] is the latent itself; residuals[i] is what remains after
  // layer i. Each is [rows x D].
  std::vector<Tensor> residuals;
  // Squared distance of each layer's selected code to that layer's input
  // residual, [layers][rows].
  std::vector<std::vector<double>> distances;
};

// latent: [... x D]; every leading position is one row. `layers` limits the
// number of quantizer layers used (0 means all). Throws ConfigError for an
// empty codebook and DimensionError when D differs.
QuantizeResult quantize(const Tensor& latent, const Codebook& codebook,
                        std::size_t layers = 0);

// Sum over layers of the indexed codes, [positions x D]. Accumulates in layer
// order so the result is bitwise equal to quantize().quantized.
Tensor dequantize(const CodeIndices& indices, const Codebook& codebook);

struct EmaConfig {
  double decay = 0.99;
  double eps = 1e-5;
  // Codes assigned fewer than this many vectors over a window are reseeded.
  double dead_code_threshold = 1.0;
  std::int64_t window = 20;
};

struct EmaUpdateStats {
  std::vector<std::size_t> reseeded;  // per layer
  std::vector<std::vector<std::int64_t>> counts;  // per layer, per code, this step
};

// One EMA step from the residual trace of `q`. Reseeding draws replacement
// vectors from that layer's input residuals in `q` using `rng`.
EmaUpdateStats codebook_update_ema(Codebook& codebook, const QuantizeResult& q,
                                   const EmaConfig& cfg, std::mt19937_64& rng);

// Initializes each layer from randomly chosen rows of its input residual,
// quantizing with the already-initialized layers first.
void init_codebook_from_latents(Codebook& codebook, const Tensor& latents,
                                std::mt19937_64& rng);

}  // namespace acd
