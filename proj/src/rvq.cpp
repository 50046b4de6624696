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

#include "acd/rvq.hpp"

#include <algorithm>

#include "acd/error.hpp"
#include "acd/kernels.hpp"

namespace acd {

Codebook::Codebook(std::size_t layers, std::size_t size, std::size_t dim)
    : size_(size),
      dim_(dim),
      layers_(layers, Tensor({size, dim})),
      ema_count_({layers, size}, 1.0),
      ema_sum_({layers, size, dim}),
      window_usage_({layers, size}) {}

Codebook Codebook::random(std::size_t layers, std::size_t size,
                          std::size_t dim, std::mt19937_64& rng,
                          double stddev) {
  Codebook cb(layers, size, dim);
  for (auto& l : cb.layers_) l = Tensor::randn({size, dim}, rng, stddev);
  cb.sync_ema_sums();
  return cb;
}

void Codebook::set_code(std::size_t layer, std::size_t k,
                        std::span<const double> v) {
  if (v.size() != dim_) throw DimensionError("set_code: vector size != codebook dim");
  std::copy(v.begin(), v.end(), &layers_.at(layer)[k * dim_]);
  ema_count_[layer * size_ + k] = 1.0;
  std::copy(v.begin(), v.end(), &ema_sum_[(layer * size_ + k) * dim_]);
}

void Codebook::sync_ema_sums() {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (std::size_t k = 0; k < size_; ++k) {
      const double n = ema_count_[i * size_ + k];
      for (std::size_t j = 0; j < dim_; ++j) {
        ema_sum_[(i * size_ + k) * dim_ + j] = n * layers_[i][k * dim_ + j];
      }
    }
  }
}

QuantizeResult quantize(const Tensor& latent, const Codebook& codebook,
                        std::size_t layers) {
  if (codebook.num_layers() == 0 || codebook.size() == 0) {
    throw ConfigError("quantize: codebook has no layers or no codes");
  }
  if (latent.rank() == 0 || latent.shape().back() != codebook.dim()) {
    throw DimensionError("quantize: latent trailing axis " +
                         shape_str(latent.shape()) + " does not match codebook dim " +
                         std::to_string(codebook.dim()));
  }
  if (layers == 0 || layers > codebook.num_layers()) layers = codebook.num_layers();
  const std::size_t dim = codebook.dim();
  const std::size_t rows = latent.numel() / dim;

  QuantizeResult q;
  q.indices = CodeIndices(rows, layers);
  q.quantized = Tensor(latent.shape());
  q.residuals.reserve(layers + 1);
  q.residuals.push_back(latent.reshaped({rows, dim}));
  std::vector<std::int64_t> idx(rows);
  for (std::size_t i = 0; i < layers; ++i) {
    const Tensor& in = q.residuals.back();
    std::vector<double> dist(rows);
    kernels::parallel::nearest_codes(rows, dim, in.data(), codebook.layer(i).data(),
                                     codebook.size(), idx, dist);
    Tensor next = in;
    const Tensor& codes = codebook.layer(i);
    for (std::size_t r = 0; r < rows; ++r) {
      q.indices.at(r, i) = idx[r];
      const double* c = &codes[static_cast<std::size_t>(idx[r]) * dim];
      for (std::size_t j = 0; j < dim; ++j) {
        next[r * dim + j] -= c[j];
        q.quantized[r * dim + j] += c[j];
      }
    }
    q.distances.push_back(std::move(dist));
    q.residuals.push_back(std::move(next));
  }
  return q;
}

Tensor dequantize(const CodeIndices& indices, const Codebook& codebook) {
  if (indices.layers() > codebook.num_layers()) {
    throw IndexError("dequantize: " + std::to_string(indices.layers()) +
                     " index layers but codebook has " +
                     std::to_string(codebook.num_layers()));
  }
  const std::size_t dim = codebook.dim();
  Tensor out({indices.positions(), dim});
  for (std::size_t i = 0; i < indices.layers(); ++i) {
    const Tensor& codes = codebook.layer(i);
    for (std::size_t t = 0; t < indices.positions(); ++t) {
      const auto k = indices.at(t, i);
      if (k < 0 || static_cast<std::size_t>(k) >= codebook.size()) {
        throw IndexError("dequantize: index " + std::to_string(k) +
                         " at position " + std::to_string(t) + ", layer " +
                         std::to_string(i) + " outside [0, " +
                         std::to_string(codebook.size()) + ")");
      }
      const double* c = &codes[static_cast<std::size_t>(k) * dim];
      for (std::size_t j = 0; j < dim; ++j) out[t * dim + j] += c[j];
    }
  }
  return out;
}

EmaUpdateStats codebook_update_ema(Codebook& codebook, const QuantizeResult& q,
                                   const EmaConfig& cfg, std::mt19937_64& rng) {
  if (!(cfg.decay > 0.0 && cfg.decay < 1.0)) {
    throw ConfigError("codebook_update_ema: decay must lie in (0, 1)");
  }
  const std::size_t K = codebook.size();
  const std::size_t D = codebook.dim();
  const std::size_t layers = q.indices.layers();
  const std::size_t rows = q.indices.positions();
  EmaUpdateStats stats;
  stats.reseeded.assign(layers, 0);
  stats.counts.assign(layers, std::vector<std::int64_t>(K, 0));

  for (std::size_t i = 0; i < layers; ++i) {
    const Tensor& in = q.residuals[i];
    std::vector<double> sums(K * D, 0.0);
    auto& counts = stats.counts[i];
    for (std::size_t r = 0; r < rows; ++r) {
      const auto k = static_cast<std::size_t>(q.indices.at(r, i));
      ++counts[k];
      for (std::size_t j = 0; j < D; ++j) sums[k * D + j] += in[r * D + j];
    }
    Tensor& codes = codebook.layer(i);
    for (std::size_t k = 0; k < K; ++k) {
      double& n = codebook.ema_count()[i * K + k];
      n = cfg.decay * n + (1.0 - cfg.decay) * static_cast<double>(counts[k]);
      double* s = &codebook.ema_sum()[(i * K + k) * D];
      for (std::size_t j = 0; j < D; ++j) {
        s[j] = cfg.decay * s[j] + (1.0 - cfg.decay) * sums[k * D + j];
      }
      if (counts[k] > 0) {
        const double inv = 1.0 / std::max(n, cfg.eps);
        for (std::size_t j = 0; j < D; ++j) codes[k * D + j] = s[j] * inv;
      }
      codebook.window_usage()[i * K + k] += static_cast<double>(counts[k]);
    }
  }

  codebook.set_window_steps(codebook.window_steps() + 1);
  if (codebook.window_steps() >= cfg.window) {
    for (std::size_t i = 0; i < layers; ++i) {
      std::uniform_int_distribution<std::size_t> pick(0, rows - 1);
      for (std::size_t k = 0; k < K; ++k) {
        if (codebook.window_usage()[i * K + k] < cfg.dead_code_threshold) {
          const std::size_t r = pick(rng);
          codebook.set_code(i, k, std::span<const double>(&q.residuals[i][r * D], D));
          ++stats.reseeded[i];
        }
      }
    }
    codebook.window_usage().fill(0.0);
    codebook.set_window_steps(0);
  }
  return stats;
}

void init_codebook_from_latents(Codebook& codebook, const Tensor& latents,
                                std::mt19937_64& rng) {
  const std::size_t D = codebook.dim();
  if (latents.rank() == 0 || latents.shape().back() != D) {
    throw DimensionError("init_codebook_from_latents: latent dim mismatch");
  }
  const std::size_t rows = latents.numel() / D;
  if (rows == 0) throw DimensionError("init_codebook_from_latents: no latents");
  Tensor residual = latents.reshaped({rows, D});
  std::uniform_int_distribution<std::size_t> pick(0, rows - 1);
  for (std::size_t i = 0; i < codebook.num_layers(); ++i) {
    for (std::size_t k = 0; k < codebook.size(); ++k) {
      const std::size_t r = pick(rng);
      codebook.set_code(i, k, std::span<const double>(&residual[r * D], D));
    }
    // residual after this layer feeds the next layer's initialization
    Codebook single(1, codebook.size(), D);
    single.layer(0) = codebook.layer(i);
    auto q = quantize(residual, single);
    residual = q.residuals.back();
  }
}

}  // namespace acd
