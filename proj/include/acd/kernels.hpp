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

// Numeric kernels behind the autograd ops.
//
// Two implementations share one signature set: `serial` is the plain
// nested-loop reference, `parallel` is the OpenMP version with reordered
// weight layouts and contiguous inner loops. Each output element of a
// parallel kernel is accumulated by exactly one thread in a fixed order, so
// results do not depend on the thread count. Serial and parallel results
// agree to rounding, not bitwise.
//
// All tensors are row-major: activations are [batch][length][channels],
// conv weights are [out][in][k], transposed-conv weights are [in][out][k],
// linear weights are [out][in]. Backward kernels accumulate into their
// outputs.

#include <cstddef>
#include <cstdint>
#include <span>

namespace acd::kernels {

struct Conv1dDims {
  std::size_t batch = 1;
  std::size_t length = 0;      // input length
  std::size_t in_ch = 0;
  std::size_t out_ch = 0;
  std::size_t ksize = 0;
  std::size_t stride = 1;
  std::size_t pad_left = 0;
  std::size_t out_length = 0;  // floor((L + pad_left + pad_right - k) / stride) + 1
};

// Validates and fills out_length; throws DimensionError if the padded input
// is shorter than the kernel.
Conv1dDims make_conv1d_dims(std::size_t batch, std::size_t length,
                            std::size_t in_ch, std::size_t out_ch,
                            std::size_t ksize, std::size_t stride,
                            std::size_t pad_left, std::size_t pad_right);

struct ConvTranspose1dDims {
  std::size_t batch = 1;
  std::size_t length = 0;      // input length
  std::size_t in_ch = 0;
  std::size_t out_ch = 0;
  std::size_t ksize = 0;
  std::size_t stride = 1;
  std::size_t out_length = 0;  // (L - 1) * stride + k
};

ConvTranspose1dDims make_conv_transpose1d_dims(std::size_t batch,
                                               std::size_t length,
                                               std::size_t in_ch,
                                               std::size_t out_ch,
                                               std::size_t ksize,
                                               std::size_t stride);

struct LinearDims {
  std::size_t rows = 0;
  std::size_t in_features = 0;
  std::size_t out_features = 0;
};

#define ACD_KERNEL_DECLS                                                      \
  void conv1d_forward(const Conv1dDims& d, std::span<const double> in,       \
                      std::span<const double> w, std::span<const double> b,  \
                      std::span<double> out);                                \
  void conv1d_backward_input(const Conv1dDims& d,                            \
                             std::span<const double> grad_out,               \
                             std::span<const double> w,                      \
                             std::span<double> grad_in);                     \
  void conv1d_backward_weight(const Conv1dDims& d,                           \
                              std::span<const double> grad_out,              \
                              std::span<const double> in,                    \
                              std::span<double> grad_w,                      \
                              std::span<double> grad_b);                     \
  void conv_transpose1d_forward(const ConvTranspose1dDims& d,                \
                                std::span<const double> in,                  \
                                std::span<const double> w,                   \
                                std::span<const double> b,                   \
                                std::span<double> out);                      \
  void conv_transpose1d_backward_input(const ConvTranspose1dDims& d,         \
                                       std::span<const double> grad_out,     \
                                       std::span<const double> w,            \
                                       std::span<double> grad_in);           \
  void conv_transpose1d_backward_weight(const ConvTranspose1dDims& d,        \
                                        std::span<const double> grad_out,    \
                                        std::span<const double> in,          \
                                        std::span<double> grad_w,            \
                                        std::span<double> grad_b);           \
  void linear_forward(const LinearDims& d, std::span<const double> in,       \
                      std::span<const double> w, std::span<const double> b,  \
                      std::span<double> out);                                \
  void linear_backward_input(const LinearDims& d,                            \
                             std::span<const double> grad_out,               \
                             std::span<const double> w,                      \
                             std::span<double> grad_in);                     \
  void linear_backward_weight(const LinearDims& d,                           \
                              std::span<const double> grad_out,              \
                              std::span<const double> in,                    \
                              std::span<double> grad_w,                      \
                              std::span<double> grad_b);                     \
  /* Squared-L2 nearest row of `codes` (K x dim) for each query row; ties  */ \
  /* resolve to the lowest index.                                         */ \
  void nearest_codes(std::size_t rows, std::size_t dim,                      \
                     std::span<const double> queries,                        \
                     std::span<const double> codes, std::size_t num_codes,   \
                     std::span<std::int64_t> index,                          \
                     std::span<double> dist2);

namespace serial {
ACD_KERNEL_DECLS
}  // namespace serial

namespace parallel {
ACD_KERNEL_DECLS
}  // namespace parallel

#undef ACD_KERNEL_DECLS

// Threads available to the parallel kernels (1 without OpenMP).
int max_threads();
// Restricts parallel kernels to `n` threads; no-op without OpenMP.
void set_num_threads(int n);

}  // namespace acd::kernels
