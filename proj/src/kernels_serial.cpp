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
#include <string>

#include "acd/error.hpp"
#include "acd/kernels.hpp"

namespace acd::kernels {

Conv1dDims make_conv1d_dims(std::size_t batch, std::size_t length,
                            std::size_t in_ch, std::size_t out_ch,
                            std::size_t ksize, std::size_t stride,
                            std::size_t pad_left, std::size_t pad_right) {
  if (stride == 0) throw DimensionError("conv1d: stride must be >= 1");
  if (ksize == 0) throw DimensionError("conv1d: kernel size must be >= 1");
  const std::size_t padded = length + pad_left + pad_right;
  if (ksize > padded) {
    throw DimensionError("conv1d: kernel size " + std::to_string(ksize) +
                         " exceeds padded input length " +
                         std::to_string(padded) + " (axis: length)");
  }
  Conv1dDims d;
  d.batch = batch;
  d.length = length;
  d.in_ch = in_ch;
  d.out_ch = out_ch;
  d.ksize = ksize;
  d.stride = stride;
  d.pad_left = pad_left;
  d.out_length = (padded - ksize) / stride + 1;
  return d;
}

ConvTranspose1dDims make_conv_transpose1d_dims(std::size_t batch,
                                               std::size_t length,
                                               std::size_t in_ch,
                                               std::size_t out_ch,
                                               std::size_t ksize,
                                               std::size_t stride) {
  if (stride == 0) throw DimensionError("conv_transpose1d: stride must be >= 1");
  if (ksize == 0 || length == 0) {
    throw DimensionError("conv_transpose1d: empty kernel or input");
  }
  ConvTranspose1dDims d;
  d.batch = batch;
  d.length = length;
  d.in_ch = in_ch;
  d.out_ch = out_ch;
  d.ksize = ksize;
  d.stride = stride;
  d.out_length = (length - 1) * stride + ksize;
  return d;
}

namespace serial {

namespace {

// Input position read by output t at tap j, or -1 when it falls in padding.
inline long tap_pos(const Conv1dDims& d, std::size_t t, std::size_t j) {
  long p = static_cast<long>(d.stride * t + j) - static_cast<long>(d.pad_left);
  if (p < 0 || p >= static_cast<long>(d.length)) return -1;
  return p;
}

}  // namespace

void conv1d_forward(const Conv1dDims& d, std::span<const double> in,
                    std::span<const double> w, std::span<const double> b,
                    std::span<double> out) {
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t t = 0; t < d.out_length; ++t) {
      for (std::size_t o = 0; o < d.out_ch; ++o) {
        double acc = b[o];
        for (std::size_t c = 0; c < d.in_ch; ++c) {
          for (std::size_t j = 0; j < d.ksize; ++j) {
            long p = tap_pos(d, t, j);
            if (p < 0) continue;
            acc += in[(n * d.length + p) * d.in_ch + c] *
                   w[(o * d.in_ch + c) * d.ksize + j];
          }
        }
        out[(n * d.out_length + t) * d.out_ch + o] = acc;
      }
    }
  }
}

void conv1d_backward_input(const Conv1dDims& d,
                           std::span<const double> grad_out,
                           std::span<const double> w,
                           std::span<double> grad_in) {
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t t = 0; t < d.out_length; ++t) {
      for (std::size_t o = 0; o < d.out_ch; ++o) {
        const double g = grad_out[(n * d.out_length + t) * d.out_ch + o];
        for (std::size_t c = 0; c < d.in_ch; ++c) {
          for (std::size_t j = 0; j < d.ksize; ++j) {
            long p = tap_pos(d, t, j);
            if (p < 0) continue;
            grad_in[(n * d.length + p) * d.in_ch + c] +=
                g * w[(o * d.in_ch + c) * d.ksize + j];
          }
        }
      }
    }
  }
}

void conv1d_backward_weight(const Conv1dDims& d,
                            std::span<const double> grad_out,
                            std::span<const double> in,
                            std::span<double> grad_w,
                            std::span<double> grad_b) {
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t t = 0; t < d.out_length; ++t) {
      for (std::size_t o = 0; o < d.out_ch; ++o) {
        const double g = grad_out[(n * d.out_length + t) * d.out_ch + o];
        grad_b[o] += g;
        for (std::size_t c = 0; c < d.in_ch; ++c) {
          for (std::size_t j = 0; j < d.ksize; ++j) {
            long p = tap_pos(d, t, j);
            if (p < 0) continue;
            grad_w[(o * d.in_ch + c) * d.ksize + j] +=
                g * in[(n * d.length + p) * d.in_ch + c];
          }
        }
      }
    }
  }
}

void conv_transpose1d_forward(const ConvTranspose1dDims& d,
                              std::span<const double> in,
                              std::span<const double> w,
                              std::span<const double> b,
                              std::span<double> out) {
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t u = 0; u < d.out_length; ++u) {
      for (std::size_t o = 0; o < d.out_ch; ++o) {
        out[(n * d.out_length + u) * d.out_ch + o] = b[o];
      }
    }
    for (std::size_t t = 0; t < d.length; ++t) {
      for (std::size_t c = 0; c < d.in_ch; ++c) {
        const double x = in[(n * d.length + t) * d.in_ch + c];
        for (std::size_t o = 0; o < d.out_ch; ++o) {
          for (std::size_t j = 0; j < d.ksize; ++j) {
            const std::size_t u = t * d.stride + j;
            out[(n * d.out_length + u) * d.out_ch + o] +=
                x * w[(c * d.out_ch + o) * d.ksize + j];
          }
        }
      }
    }
  }
}

void conv_transpose1d_backward_input(const ConvTranspose1dDims& d,
                                     std::span<const double> grad_out,
                                     std::span<const double> w,
                                     std::span<double> grad_in) {
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t t = 0; t < d.length; ++t) {
      for (std::size_t c = 0; c < d.in_ch; ++c) {
        double acc = 0.0;
        for (std::size_t o = 0; o < d.out_ch; ++o) {
          for (std::size_t j = 0; j < d.ksize; ++j) {
            const std::size_t u = t * d.stride + j;
            acc += grad_out[(n * d.out_length + u) * d.out_ch + o] *
                   w[(c * d.out_ch + o) * d.ksize + j];
          }
        }
        grad_in[(n * d.length + t) * d.in_ch + c] += acc;
      }
    }
  }
}

void conv_transpose1d_backward_weight(const ConvTranspose1dDims& d,
                                      std::span<const double> grad_out,
                                      std::span<const double> in,
                                      std::span<double> grad_w,
                                      std::span<double> grad_b) {
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t u = 0; u < d.out_length; ++u) {
      for (std::size_t o = 0; o < d.out_ch; ++o) {
        grad_b[o] += grad_out[(n * d.out_length + u) * d.out_ch + o];
      }
    }
    for (std::size_t t = 0; t < d.length; ++t) {
      for (std::size_t c = 0; c < d.in_ch; ++c) {
        const double x = in[(n * d.length + t) * d.in_ch + c];
        for (std::size_t o = 0; o < d.out_ch; ++o) {
          for (std::size_t j = 0; j < d.ksize; ++j) {
            const std::size_t u = t * d.stride + j;
            grad_w[(c * d.out_ch + o) * d.ksize + j] +=
                x * grad_out[(n * d.out_length + u) * d.out_ch + o];
          }
        }
      }
    }
  }
}

void linear_forward(const LinearDims& d, std::span<const double> in,
                    std::span<const double> w, std::span<const double> b,
                    std::span<double> out) {
  for (std::size_t r = 0; r < d.rows; ++r) {
    for (std::size_t o = 0; o < d.out_features; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < d.in_features; ++i) {
        acc += in[r * d.in_features + i] * w[o * d.in_features + i];
      }
      out[r * d.out_features + o] = acc;
    }
  }
}

void linear_backward_input(const LinearDims& d,
                           std::span<const double> grad_out,
                           std::span<const double> w,
                           std::span<double> grad_in) {
  for (std::size_t r = 0; r < d.rows; ++r) {
    for (std::size_t i = 0; i < d.in_features; ++i) {
      double acc = 0.0;
      for (std::size_t o = 0; o < d.out_features; ++o) {
        acc += grad_out[r * d.out_features + o] * w[o * d.in_features + i];
      }
      grad_in[r * d.in_features + i] += acc;
    }
  }
}

void linear_backward_weight(const LinearDims& d,
                            std::span<const double> grad_out,
                            std::span<const double> in,
                            std::span<double> grad_w,
                            std::span<double> grad_b) {
  for (std::size_t r = 0; r < d.rows; ++r) {
    for (std::size_t o = 0; o < d.out_features; ++o) {
      const double g = grad_out[r * d.out_features + o];
      grad_b[o] += g;
      for (std::size_t i = 0; i < d.in_features; ++i) {
        grad_w[o * d.in_features + i] += g * in[r * d.in_features + i];
      }
    }
  }
}

void nearest_codes(std::size_t rows, std::size_t dim,
                   std::span<const double> queries,
                   std::span<const double> codes, std::size_t num_codes,
                   std::span<std::int64_t> index, std::span<double> dist2) {
  for (std::size_t r = 0; r < rows; ++r) {
    double best = std::numeric_limits<double>::infinity();
    std::int64_t best_k = 0;
    for (std::size_t k = 0; k < num_codes; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        const double diff = queries[r * dim + i] - codes[k * dim + i];
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

}  // namespace serial
}  // namespace acd::kernels
