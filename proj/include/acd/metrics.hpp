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

// Reconstruction-quality metrics for action chunks: MAE, AKI (mean absolute
// excess kurtosis of the per-dimension error), PSNR and the universal
// quality index. All functions are pure.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "acd/tensor.hpp"

namespace acd::metrics {

// Reported in place of +infinity when the MSE is exactly zero.
inline constexpr double kPsnrCap = 200.0;
// Peak for data normalized to [-1, 1].
inline constexpr double kNormalizedPeak = 2.0;

double mae(const Tensor& x, const Tensor& x_hat);
double mse(const Tensor& x, const Tensor& x_hat);
double psnr(const Tensor& x, const Tensor& x_hat, double peak);

struct UqiResult {
  double value = 0.0;
  bool degenerate = false;
};
UqiResult uqi(const Tensor& x, const Tensor& x_hat);

// Excess kurtosis of a sample; 0 when the variance is below 1e-12.
double excess_kurtosis(std::span<const double> values);

// x, x_hat: [frames x dims] (or [chunks x frames x dims], flattened over the
// leading axes). Averages |excess kurtosis| of the error over dims. Throws
// Error with fewer than 4 frames.
double aki(const Tensor& x, const Tensor& x_hat);

double perplexity(std::span<const double> usage);
double perplexity(std::span<const std::int64_t> usage);

struct ReconstructionReport {
  double mae = 0.0;
  double aki = 0.0;
  double psnr = 0.0;
  double psnr_peak = kNormalizedPeak;
  double uqi = 0.0;
  bool uqi_degenerate = false;
  std::vector<double> per_dim_mae;
  std::vector<double> perplexity;  // per codebook layer
  std::string label;

  std::string to_kv() const;
  static std::string csv_header(std::size_t dims, std::size_t layers);
  std::string to_csv_row() const;
};

// Builds a report from tensors whose trailing axis is the command dimension.
ReconstructionReport make_report(const Tensor& x, const Tensor& x_hat,
                                 double peak = kNormalizedPeak);

}  // namespace acd::metrics
