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

#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "acd/kernels.hpp"

namespace acd::kernels {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_num_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

namespace parallel {

namespace {

using isz = long long;

inline double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
#pragma omp simd reduction(+ : acc)
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// [out][in][k] -> [out][k][in]
std::vector<double> conv_weight_okc(const Conv1dDims& d,
                                    std::span<const double> w) {
  std::vector<double> t(w.size());
  for (std::size_t o = 0; o < d.out_ch; ++o)
    for (std::size_t c = 0; c < d.in_ch; ++c)
      for (std::size_t j = 0; j < d.ksize; ++j)
        t[(o * d.ksize + j) * d.in_ch + c] = w[(o * d.in_ch + c) * d.ksize + j];
  return t;
}

// [out][in][k] -> [k][out][in]
std::vector<double> conv_weight_koc(const Conv1dDims& d,
                                    std::span<const double> w) {
  std::vector<double> t(w.size());
  for (std::size_t o = 0; o < d.out_ch; ++o)
    for (std::size_t c = 0; c < d.in_ch; ++c)
      for (std::size_t j = 0; j < d.ksize; ++j)
        t[(j * d.out_ch + o) * d.in_ch + c] = w[(o * d.in_ch + c) * d.ksize + j];
  return t;
}

}  // namespace

void conv1d_forward(const Conv1dDims& d, std::span<const double> in,
                    std::span<const double> w, std::span<const double> b,
                    std::span<double> out) {
  const auto wt = conv_weight_okc(d, w);
  const isz rows = static_cast<isz>(d.batch * d.out_length);
#pragma omp parallel for schedule(static)
  for (isz r = 0; r < rows; ++r) {
    const std::size_t n = static_cast<std::size_t>(r) / d.out_length;
    const std::size_t t = static_cast<std::size_t>(r) % d.out_length;
    double* y = &out[static_cast<std::size_t>(r) * d.out_ch];
    for (std::size_t o = 0; o < d.out_ch; ++o) {
      double acc = b[o];
      for (std::size_t j = 0; j < d.ksize; ++j) {
        const isz p = static_cast<isz>(d.stride * t + j) -
                      static_cast<isz>(d.pad_left);
        if (p < 0 || p >= static_cast<isz>(d.length)) continue;
        acc += dot(&in[(n * d.length + static_cast<std::size_t>(p)) * d.in_ch],
                   &wt[(o * d.ksize + j) * d.in_ch], d.in_ch);
      }
      y[o] = acc;
    }
  }
}

void conv1d_backward_input(const Conv1dDims& d,
                           std::span<const double> grad_out,
                           std::span<const double> w,
                           std::span<double> grad_in) {
  const auto wt = conv_weight_koc(d, w);
  const isz rows = static_cast<isz>(d.batch * d.length);
#pragma omp parallel for schedule(static)
  for (isz r = 0; r < rows; ++r) {
    const std::size_t n = static_cast<std::size_t>(r) / d.length;
    const std::size_t p = static_cast<std::size_t>(r) % d.length;
    double* gi = &grad_in[static_cast<std::size_t>(r) * d.in_ch];
    for (std::size_t j = 0; j < d.ksize; ++j) {
      // output t reads p at tap j when stride*t + j - pad_left == p
      const isz q = static_cast<isz>(p + d.pad_left) - static_cast<isz>(j);
      if (q < 0 || q % static_cast<isz>(d.stride) != 0) continue;
      const std::size_t t = static_cast<std::size_t>(q) / d.stride;
      if (t >= d.out_length) continue;
      const double* go = &grad_out[(n * d.out_length + t) * d.out_ch];
      for (std::size_t o = 0; o < d.out_ch; ++o) {
        axpy(go[o], &wt[(j * d.out_ch + o) * d.in_ch], gi, d.in_ch);
      }
    }
  }
}

void conv1d_backward_weight(const Conv1dDims& d,
                            std::span<const double> grad_out,
                            std::span<const double> in,
                            std::span<double> grad_w,
                            std::span<double> grad_b) {
  const isz outs = static_cast<isz>(d.out_ch);
#pragma omp parallel for schedule(static)
  for (isz oi = 0; oi < outs; ++oi) {
    const std::size_t o = static_cast<std::size_t>(oi);
    std::vector<double> local(d.ksize * d.in_ch, 0.0);  // [k][in]
    double gb = 0.0;
    for (std::size_t n = 0; n < d.batch; ++n) {
      for (std::size_t t = 0; t < d.out_length; ++t) {
        const double g = grad_out[(n * d.out_length + t) * d.out_ch + o];
        gb += g;
        if (g == 0.0) continue;
        for (std::size_t j = 0; j < d.ksize; ++j) {
          const isz p = static_cast<isz>(d.stride * t + j) -
                        static_cast<isz>(d.pad_left);
          if (p < 0 || p >= static_cast<isz>(d.length)) continue;
          axpy(g, &in[(n * d.length + static_cast<std::size_t>(p)) * d.in_ch],
               &local[j * d.in_ch], d.in_ch);
        }
      }
    }
    grad_b[o] += gb;
    for (std::size_t c = 0; c < d.in_ch; ++c)
      for (std::size_t j = 0; j < d.ksize; ++j)
        grad_w[(o * d.in_ch + c) * d.ksize + j] += local[j * d.in_ch + c];
  }
}

void conv_transpose1d_forward(const ConvTranspose1dDims& d,
                              std::span<const double> in,
                              std::span<const double> w,
                              std::span<const double> b,
                              std::span<double> out) {
  // [in][out][k] -> [k][out][in]
  std::vector<double> wt(w.size());
  for (std::size_t c = 0; c < d.in_ch; ++c)
    for (std::size_t o = 0; o < d.out_ch; ++o)
      for (std::size_t j = 0; j < d.ksize; ++j)
        wt[(j * d.out_ch + o) * d.in_ch + c] = w[(c * d.out_ch + o) * d.ksize + j];
  const isz rows = static_cast<isz>(d.batch * d.out_length);
#pragma omp parallel for schedule(static)
  for (isz r = 0; r < rows; ++r) {
    const std::size_t n = static_cast<std::size_t>(r) / d.out_length;
    const std::size_t u = static_cast<std::size_t>(r) % d.out_length;
    double* y = &out[static_cast<std::size_t>(r) * d.out_ch];
    for (std::size_t o = 0; o < d.out_ch; ++o) y[o] = b[o];
    for (std::size_t j = 0; j < d.ksize && j <= u; ++j) {
      const std::size_t q = u - j;
      if (q % d.stride != 0) continue;
      const std::size_t t = q / d.stride;
      if (t >= d.length) continue;
      const double* x = &in[(n * d.length + t) * d.in_ch];
      for (std::size_t o = 0; o < d.out_ch; ++o) {
        y[o] += dot(x, &wt[(j * d.out_ch + o) * d.in_ch], d.in_ch);
      }
    }
  }
}

void conv_transpose1d_backward_input(const ConvTranspose1dDims& d,
                                     std::span<const double> grad_out,
                                     std::span<const double> w,
                                     std::span<double> grad_in) {
  // [in][out][k] -> [in][k][out]
  std::vector<double> wt(w.size());
  for (std::size_t c = 0; c < d.in_ch; ++c)
    for (std::size_t o = 0; o < d.out_ch; ++o)
      for (std::size_t j = 0; j < d.ksize; ++j)
        wt[(c * d.ksize + j) * d.out_ch + o] = w[(c * d.out_ch + o) * d.ksize + j];
  const isz rows = static_cast<isz>(d.batch * d.length);
#pragma omp parallel for schedule(static)
  for (isz r = 0; r < rows; ++r) {
    const std::size_t n = static_cast<std::size_t>(r) / d.length;
    const std::size_t t = static_cast<std::size_t>(r) % d.length;
    double* gi = &grad_in[static_cast<std::size_t>(r) * d.in_ch];
    for (std::size_t c = 0; c < d.in_ch; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d.ksize; ++j) {
        const std::size_t u = t * d.stride + j;
        acc += dot(&grad_out[(n * d.out_length + u) * d.out_ch],
                   &wt[(c * d.ksize + j) * d.out_ch], d.out_ch);
      }
      gi[c] += acc;
    }
  }
}

void conv_transpose1d_backward_weight(const ConvTranspose1dDims& d,
                                      std::span<const double> grad_out,
                                      std::span<const double> in,
                                      std::span<double> grad_w,
                                      std::span<double> grad_b) {
  const isz ins = static_cast<isz>(d.in_ch);
#pragma omp parallel for schedule(static)
  for (isz ci = 0; ci < ins; ++ci) {
    const std::size_t c = static_cast<std::size_t>(ci);
    std::vector<double> local(d.ksize * d.out_ch, 0.0);  // [k][out]
    for (std::size_t n = 0; n < d.batch; ++n) {
      for (std::size_t t = 0; t < d.length; ++t) {
        const double x = in[(n * d.length + t) * d.in_ch + c];
        if (x == 0.0) continue;
        for (std::size_t j = 0; j < d.ksize; ++j) {
          axpy(x, &grad_out[(n * d.out_length + t * d.stride + j) * d.out_ch],
               &local[j * d.out_ch], d.out_ch);
        }
      }
    }
    for (std::size_t o = 0; o < d.out_ch; ++o)
      for (std::size_t j = 0; j < d.ksize; ++j)
        grad_w[(c * d.out_ch + o) * d.ksize + j] += local[j * d.out_ch + o];
  }
  // bias: sum over every output position, one thread per channel
  const isz outs = static_cast<isz>(d.out_ch);
#pragma omp parallel for schedule(static)
  for (isz oi = 0; oi < outs; ++oi) {
    const std::size_t o = static_cast<std::size_t>(oi);
    double gb = 0.0;
    for (std::size_t r = 0; r < d.batch * d.out_length; ++r) {
      gb += grad_out[r * d.out_ch + o];
    }
    grad_b[o] += gb;
  }
}

void linear_forward(const LinearDims& d, std::span<const double> in,
                    std::span<const double> w, std::span<const double> b,
                    std::span<double> out) {
  const isz rows = static_cast<isz>(d.rows);
#pragma omp parallel for schedule(static)
  for (isz ri = 0; ri < rows; ++ri) {
    const std::size_t r = static_cast<std::size_t>(ri);
    const double* x = &in[r * d.in_features];
    for (std::size_t o = 0; o < d.out_features; ++o) {
      out[r * d.out_features + o] =
          b[o] + dot(x, &w[o * d.in_features], d.in_features);
    }
  }
}

void linear_backward_input(const LinearDims& d,
                           std::span<const double> grad_out,
                           std::span<const double> w,
                           std::span<double> grad_in) {
  const isz rows = static_cast<isz>(d.rows);
#pragma omp parallel for schedule(static)
  for (isz ri = 0; ri < rows; ++ri) {
    const std::size_t r = static_cast<std::size_t>(ri);
    double* gi = &grad_in[r * d.in_features];
    for (std::size_t o = 0; o < d.out_features; ++o) {
      const double g = grad_out[r * d.out_features + o];
      if (g == 0.0) continue;
      axpy(g, &w[o * d.in_features], gi, d.in_features);
    }
  }
}

void linear_backward_weight(const LinearDims& d,
                            std::span<const double> grad_out,
                            std::span<const double> in,
                            std::span<double> grad_w,
                            std::span<double> grad_b) {
  const isz outs = static_cast<isz>(d.out_features);
#pragma omp parallel for schedule(static)
  for (isz oi = 0; oi < outs; ++oi) {
    const std::size_t o = static_cast<std::size_t>(oi);
    double* gw = &grad_w[o * d.in_features];
    double gb = 0.0;
    for (std::size_t r = 0; r < d.rows; ++r) {
      const double g = grad_out[r * d.out_features + o];
      gb += g;
      if (g == 0.0) continue;
      axpy(g, &in[r * d.in_features], gw, d.in_features);
    }
    grad_b[o] += gb;
  }
}

void nearest_codes(std::size_t rows, std::size_t dim,
                   std::span<const double> queries,
                   std::span<const double> codes, std::size_t num_codes,
                   std::span<std::int64_t> index, std::span<double> dist2) {
  const isz n = static_cast<isz>(rows);
#pragma omp parallel for schedule(static)
  for (isz ri = 0; ri < n; ++ri) {
    const std::size_t r = static_cast<std::size_t>(ri);
    const double* q = &queries[r * dim];
    double best = std::numeric_limits<double>::infinity();
    std::int64_t best_k = 0;
    for (std::size_t k = 0; k < num_codes; ++k) {
      const double* c = &codes[k * dim];
      double s = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        const double diff = q[i] - c[i];
        s += diff * diff;
      }
      if (s < best) {
        best = s;
        best_k = static_cast<std::int64_t>(k);
      }
    }
    index[r] = best_k;
    dist2[r] = best;
  }
}

}  // namespace parallel
}  // namespace acd::kernels
