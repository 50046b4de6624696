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

#include "acd/metrics.hpp"

#include <cmath>
#include <sstream>

#include "acd/binary_io.hpp"
#include "acd/error.hpp"

namespace acd::metrics {

double mae(const Tensor& x, const Tensor& x_hat) {
  require_same_shape(x, x_hat, "mae");
  if (x.numel() == 0) throw DimensionError("mae of empty tensors");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) acc += std::abs(x[i] - x_hat[i]);
  return acc / static_cast<double>(x.numel());
}

double mse(const Tensor& x, const Tensor& x_hat) {
  require_same_shape(x, x_hat, "mse");
  if (x.numel() == 0) throw DimensionError("mse of empty tensors");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double d = x[i] - x_hat[i];
    acc += d * d;
  }
  return acc / static_cast<double>(x.numel());
}

double psnr(const Tensor& x, const Tensor& x_hat, double peak) {
  if (!(peak > 0.0)) throw ConfigError("psnr: peak must be positive");
  const double m = mse(x, x_hat);
  if (m == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / m));
}

UqiResult uqi(const Tensor& x, const Tensor& x_hat) {
  require_same_shape(x, x_hat, "uqi");
  const std::size_t n = x.numel();
  if (n < 2) throw DimensionError("uqi needs at least 2 elements");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += x_hat[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double vx = 0.0, vy = 0.0, cxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = x_hat[i] - my;
    vx += dx * dx;
    vy += dy * dy;
    cxy += dx * dy;
  }
  const double denom_n = static_cast<double>(n - 1);
  vx /= denom_n;
  vy /= denom_n;
  cxy /= denom_n;
  const double den = (vx + vy) * (mx * mx + my * my);
  if (den == 0.0) {
    if (x == x_hat) return {1.0, false};
    return {0.0, true};
  }
  return {4.0 * cxy * mx * my / den, false};
}

double excess_kurtosis(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n == 0) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double m2 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  if (m2 < 1e-12) return 0.0;
  return m4 / (m2 * m2) - 3.0;
}

double aki(const Tensor& x, const Tensor& x_hat) {
  require_same_shape(x, x_hat, "aki");
  if (x.rank() < 2) throw DimensionError("aki: expected [frames x dims]");
  const std::size_t dims = x.shape().back();
  const std::size_t frames = x.numel() / dims;
  if (frames < 4) {
    throw Error("aki undefined for fewer than 4 time steps (got " +
                std::to_string(frames) + ")");
  }
  std::vector<double> err(frames);
  double acc = 0.0;
  for (std::size_t d = 0; d < dims; ++d) {
    for (std::size_t t = 0; t < frames; ++t) {
      err[t] = x[t * dims + d] - x_hat[t * dims + d];
    }
    acc += std::abs(excess_kurtosis(err));
  }
  return acc / static_cast<double>(dims);
}

double perplexity(std::span<const double> usage) {
  double total = 0.0;
  for (double u : usage) {
    if (u < 0.0) throw Error("perplexity: negative usage count");
    total += u;
  }
  if (!(total > 0.0)) throw Error("perplexity: empty usage histogram");
  double h = 0.0;
  for (double u : usage) {
    if (u > 0.0) {
      const double p = u / total;
      h -= p * std::log(p);
    }
  }
  return std::exp(h);
}

double perplexity(std::span<const std::int64_t> usage) {
  std::vector<double> d(usage.begin(), usage.end());
  return perplexity(d);
}

ReconstructionReport make_report(const Tensor& x, const Tensor& x_hat,
                                 double peak) {
  ReconstructionReport r;
  r.mae = mae(x, x_hat);
  r.psnr = psnr(x, x_hat, peak);
  r.psnr_peak = peak;
  const auto q = uqi(x, x_hat);
  r.uqi = q.value;
  r.uqi_degenerate = q.degenerate;
  const std::size_t dims = x.shape().back();
  const std::size_t frames = x.numel() / dims;
  r.aki = frames >= 4 ? aki(x, x_hat) : 0.0;
  r.per_dim_mae.assign(dims, 0.0);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    r.per_dim_mae[i % dims] += std::abs(x[i] - x_hat[i]);
  }
  for (auto& v : r.per_dim_mae) v /= static_cast<double>(frames);
  return r;
}

std::string ReconstructionReport::to_kv() const {
  std::ostringstream os;
  if (!label.empty()) os << "label=" << label << '\n';
  os << "mae=" << io::format_double(mae) << '\n'
     << "aki=" << io::format_double(aki) << '\n'
     << "psnr_db=" << io::format_double(psnr) << '\n'
     << "psnr_peak=" << io::format_double(psnr_peak) << '\n'
     << "uqi=" << io::format_double(uqi) << '\n'
     << "uqi_degenerate=" << (uqi_degenerate ? 1 : 0) << '\n';
  for (std::size_t d = 0; d < per_dim_mae.size(); ++d) {
    os << "mae_dim" << d << '=' << io::format_double(per_dim_mae[d]) << '\n';
  }
  for (std::size_t l = 0; l < perplexity.size(); ++l) {
    os << "perplexity_layer" << l << '=' << io::format_double(perplexity[l]) << '\n';
  }
  return os.str();
}

std::string ReconstructionReport::csv_header(std::size_t dims,
                                             std::size_t layers) {
  std::ostringstream os;
  os << "label,mae,aki,psnr_db,psnr_peak,uqi,uqi_degenerate";
  for (std::size_t d = 0; d < dims; ++d) os << ",mae_dim" << d;
  for (std::size_t l = 0; l < layers; ++l) os << ",perplexity_layer" << l;
  return os.str();
}

std::string ReconstructionReport::to_csv_row() const {
  std::ostringstream os;
  os << label << ',' << io::format_double(mae) << ',' << io::format_double(aki)
     << ',' << io::format_double(psnr) << ',' << io::format_double(psnr_peak)
     << ',' << io::format_double(uqi) << ',' << (uqi_degenerate ? 1 : 0);
  for (double v : per_dim_mae) os << ',' << io::format_double(v);
  for (double v : perplexity) os << ',' << io::format_double(v);
  return os.str();
}

}  // namespace acd::metrics
