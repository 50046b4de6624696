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

// Define-by-run reverse-mode differentiation over Tensor.
//
// Every op returns a fresh Var whose node remembers its inputs and a
// backward rule. Parameters are long-lived leaf Vars; their gradients
// accumulate across backward() calls until zero_grad().

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "acd/tensor.hpp"

namespace acd::ag {

struct Node {
  Tensor value;
  Tensor grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  std::string op;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  Tensor& ensure_grad();
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false,
               std::string op = "leaf");
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  // Parameters are updated in place by optimizers.
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  // Gradient, or zeros of the value's shape when none has arrived.
  Tensor grad() const;
  void zero_grad();
  const std::string& op() const { return node_->op; }
  const std::shared_ptr<Node>& node() const { return node_; }
  bool defined() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

// Disables graph recording on this thread for its lifetime; ops still
// compute values. Used for inference with frozen parameters.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};
bool grad_enabled();

// Seeds d(loss)/d(loss) = 1 and runs every backward rule once in reverse
// topological order. Throws Error if `loss` is not a single element.
void backward(const Var& loss);

// Number of distinct nodes reachable from `root` (for graph inspection).
std::size_t graph_size(const Var& root);

enum class Padding { kCausal, kValid };

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var sum(const Var& a);
Var mean(const Var& a);
Var reshape(const Var& a, Shape shape);

Var relu(const Var& a);
Var gelu(const Var& a);
Var tanh(const Var& a);
// Softmax over the trailing axis.
Var softmax(const Var& a);

// mean((a - b)^2) over all elements.
Var mse(const Var& a, const Var& b);
// Mean over groups of -log softmax(logits)[target]; logits [..., K] with
// one target per leading position.
Var cross_entropy_logits(const Var& logits,
                         std::span<const std::int64_t> targets);

// x: [L x Cin] or [B x L x Cin]; w: [Cout x Cin x k]; b: [Cout].
// Causal padding pads k-1 zeros on the left only.
Var conv1d(const Var& x, const Var& w, const Var& b, std::size_t stride,
           Padding padding);
// x: [B x L x Cin]; w: [Cin x Cout x k]; output length (L-1)*stride + k.
Var conv_transpose1d(const Var& x, const Var& w, const Var& b,
                     std::size_t stride);
// x: [... x Din]; w: [Dout x Din]; b: [Dout].
Var linear(const Var& x, const Var& w, const Var& b);
// x: [B x L x C] -> [B x ceil(L/factor) x C]; the last window averages only
// the frames it covers.
Var avg_pool_time(const Var& x, std::size_t factor);
// x: [B x L x C] -> [B x length x C], keeping the leading frames.
Var crop_time(const Var& x, std::size_t length);

// Forward value is `quantized`; the backward pass hands the incoming
// gradient unchanged to `latent`.
Var straight_through(const Var& latent, const Tensor& quantized);
// Copy of the value with no path back to `a`.
Var stop_gradient(const Var& a);

}  // namespace acd::ag
