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

#include "acd/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

#include "acd/error.hpp"
#include "acd/kernels.hpp"

namespace acd::ag {

namespace kn = acd::kernels::parallel;

Tensor& Node::ensure_grad() {
  if (grad.empty() && value.numel() != 0) grad = Tensor(value.shape());
  if (grad.shape() != value.shape()) grad = Tensor(value.shape());
  return grad;
}

Var::Var(Tensor value, bool requires_grad, std::string op)
    : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
  node_->op = std::move(op);
}

Tensor Var::grad() const {
  if (!node_->grad.empty()) return node_->grad;
  return Tensor(node_->value.shape());
}

void Var::zero_grad() {
  if (!node_->grad.empty()) node_->grad.fill(0.0);
}

namespace {

thread_local bool g_grad_enabled = true;

}  // namespace

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

namespace {

using NodePtr = std::shared_ptr<Node>;

Var make(Tensor value, std::string op, std::vector<NodePtr> inputs,
         std::function<void(Node&)> bw) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = std::move(op);
  node->requires_grad = g_grad_enabled && std::any_of(inputs.begin(), inputs.end(),
                                    [](const NodePtr& n) { return n->requires_grad; });
  if (node->requires_grad) {
    node->inputs = std::move(inputs);
    node->backward = std::move(bw);
  }
  return Var(std::move(node));
}

void topo_visit(const NodePtr& root, std::vector<Node*>& order) {
  std::unordered_set<const Node*> seen;
  // iterative post-order DFS
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

struct ConvShape {
  std::size_t batch, length, channels;
};

ConvShape seq_shape(const Tensor& x, const char* what) {
  if (x.rank() == 2) return {1, x.dim(0), x.dim(1)};
  if (x.rank() == 3) return {x.dim(0), x.dim(1), x.dim(2)};
  throw DimensionError(std::string(what) + ": expected [L x C] or [B x L x C], got " +
                       shape_str(x.shape()));
}

}  // namespace

void backward(const Var& loss) {
  if (!loss.defined() || loss.value().numel() != 1) {
    throw Error("backward: loss must be a scalar, got shape " +
                (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) return;
  std::vector<Node*> order;
  topo_visit(loss.node(), order);
  loss.node()->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

std::size_t graph_size(const Var& root) {
  std::unordered_set<const Node*> seen;
  std::vector<const Node*> stack{root.node().get()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    for (const auto& in : n->inputs) stack.push_back(in.get());
  }
  return seen.size();
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b.value()[i];
  return make(std::move(out), "add", {a.node(), b.node()}, [](Node& n) {
    for (auto& in : n.inputs) {
      if (!in->requires_grad) continue;
      auto& g = in->ensure_grad();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b.value()[i];
  return make(std::move(out), "sub", {a.node(), b.node()}, [](Node& n) {
    const double sign[2] = {1.0, -1.0};
    for (std::size_t k = 0; k < 2; ++k) {
      auto& in = n.inputs[k];
      if (!in->requires_grad) continue;
      auto& g = in->ensure_grad();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += sign[k] * n.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
  return make(std::move(out), "mul", {a.node(), b.node()}, [](Node& n) {
    auto& x = n.inputs[0];
    auto& y = n.inputs[1];
    if (x->requires_grad) {
      auto& g = x->ensure_grad();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * y->value[i];
    }
    if (y->requires_grad) {
      auto& g = y->ensure_grad();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * x->value[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= s;
  return make(std::move(out), "scale", {a.node()}, [s](Node& n) {
    auto& g = n.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += s * n.grad[i];
  });
}

Var sum(const Var& a) {
  double acc = 0.0;
  for (auto v : a.value().data()) acc += v;
  return make(Tensor::scalar(acc), "sum", {a.node()}, [](Node& n) {
    auto& g = n.inputs[0]->ensure_grad();
    const double up = n.grad[0];
    for (auto& v : g.data()) v += up;
  });
}

Var mean(const Var& a) {
  const std::size_t count = a.value().numel();
  if (count == 0) throw DimensionError("mean of empty tensor");
  double acc = 0.0;
  for (auto v : a.value().data()) acc += v;
  const double inv = 1.0 / static_cast<double>(count);
  return make(Tensor::scalar(acc * inv), "mean", {a.node()}, [inv](Node& n) {
    auto& g = n.inputs[0]->ensure_grad();
    const double up = n.grad[0] * inv;
    for (auto& v : g.data()) v += up;
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return make(std::move(out), "reshape", {a.node()}, [](Node& n) {
    auto& g = n.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
  });
}

Var relu(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.data()) v = v < 0.0 ? 0.0 : v;  // NaN passes through
  return make(std::move(out), "relu", {a.node()}, [](Node& n) {
    auto& in = n.inputs[0];
    auto& g = in->ensure_grad();
    for (std::size_t i = 0; i < g.numel(); ++i) {
      if (in->value[i] > 0.0) g[i] += n.grad[i];
    }
  });
}

Var gelu(const Var& a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  Tensor out = a.value();
  for (auto& v : out.data()) v = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  return make(std::move(out), "gelu", {a.node()}, [](Node& n) {
    constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    auto& in = n.inputs[0];
    auto& g = in->ensure_grad();
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const double x = in->value[i];
      const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      g[i] += n.grad[i] * (cdf + x * pdf);
    }
  });
}

Var tanh(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.data()) v = std::tanh(v);
  return make(std::move(out), "tanh", {a.node()}, [](Node& n) {
    auto& g = n.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const double y = n.value[i];
      g[i] += n.grad[i] * (1.0 - y * y);
    }
  });
}

Var softmax(const Var& a) {
  if (a.value().rank() == 0) throw DimensionError("softmax of a scalar");
  const std::size_t k = a.shape().back();
  const std::size_t groups = a.value().numel() / k;
  Tensor out = a.value();
  for (std::size_t r = 0; r < groups; ++r) {
    double* row = &out[r * k];
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      row[i] = std::exp(row[i] - mx);
      z += row[i];
    }
    for (std::size_t i = 0; i < k; ++i) row[i] /= z;
  }
  return make(std::move(out), "softmax", {a.node()}, [k, groups](Node& n) {
    auto& g = n.inputs[0]->ensure_grad();
    for (std::size_t r = 0; r < groups; ++r) {
      double dot = 0.0;
      for (std::size_t i = 0; i < k; ++i) dot += n.grad[r * k + i] * n.value[r * k + i];
      for (std::size_t i = 0; i < k; ++i) {
        g[r * k + i] += n.value[r * k + i] * (n.grad[r * k + i] - dot);
      }
    }
  });
}

Var mse(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mse");
  const std::size_t count = a.value().numel();
  if (count == 0) throw DimensionError("mse of empty tensors");
  double acc = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double d = a.value()[i] - b.value()[i];
    acc += d * d;
  }
  const double inv = 1.0 / static_cast<double>(count);
  return make(Tensor::scalar(acc * inv), "mse", {a.node(), b.node()},
              [inv](Node& n) {
                const double up = 2.0 * inv * n.grad[0];
                auto& x = n.inputs[0];
                auto& y = n.inputs[1];
                if (x->requires_grad) {
                  auto& g = x->ensure_grad();
                  for (std::size_t i = 0; i < g.numel(); ++i)
                    g[i] += up * (x->value[i] - y->value[i]);
                }
                if (y->requires_grad) {
                  auto& g = y->ensure_grad();
                  for (std::size_t i = 0; i < g.numel(); ++i)
                    g[i] -= up * (x->value[i] - y->value[i]);
                }
              });
}

Var cross_entropy_logits(const Var& logits,
                         std::span<const std::int64_t> targets) {
  if (logits.value().rank() == 0) throw DimensionError("cross_entropy: scalar logits");
  const std::size_t k = logits.shape().back();
  const std::size_t groups = logits.value().numel() / k;
  if (targets.size() != groups) {
    throw DimensionError("cross_entropy: " + std::to_string(groups) +
                         " logit groups but " + std::to_string(targets.size()) +
                         " targets");
  }
  Tensor probs = logits.value();
  double loss = 0.0;
  for (std::size_t r = 0; r < groups; ++r) {
    const auto t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= k) {
      throw IndexError("cross_entropy: target " + std::to_string(t) +
                       " outside [0, " + std::to_string(k) + ")");
    }
    double* row = &probs[r * k];
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t i = 0; i < k; ++i) z += std::exp(row[i] - mx);
    const double log_z = mx + std::log(z);
    loss += log_z - row[t];
    for (std::size_t i = 0; i < k; ++i) row[i] = std::exp(row[i] - log_z);
  }
  const double inv = 1.0 / static_cast<double>(groups);
  std::vector<std::int64_t> tgt(targets.begin(), targets.end());
  return make(Tensor::scalar(loss * inv), "cross_entropy", {logits.node()},
              [probs = std::move(probs), tgt = std::move(tgt), k, inv](Node& n) {
                auto& g = n.inputs[0]->ensure_grad();
                const double up = n.grad[0] * inv;
                for (std::size_t r = 0; r < tgt.size(); ++r) {
                  for (std::size_t i = 0; i < k; ++i) {
                    double p = probs[r * k + i];
                    if (static_cast<std::int64_t>(i) == tgt[r]) p -= 1.0;
                    g[r * k + i] += up * p;
                  }
                }
              });
}

Var conv1d(const Var& x, const Var& w, const Var& b, std::size_t stride,
           Padding padding) {
  const auto xs = seq_shape(x.value(), "conv1d input");
  if (w.value().rank() != 3) {
    throw DimensionError("conv1d: kernel must be [Cout x Cin x k], got " +
                         shape_str(w.shape()));
  }
  const std::size_t cout = w.shape()[0];
  const std::size_t cin = w.shape()[1];
  const std::size_t k = w.shape()[2];
  if (cin != xs.channels) {
    throw DimensionError("conv1d: input channels (axis " +
                         std::to_string(x.value().rank() - 1) + ") = " +
                         std::to_string(xs.channels) +
                         " but kernel in-channels (axis 1) = " + std::to_string(cin));
  }
  if (b.value().rank() != 1 || b.shape()[0] != cout) {
    throw DimensionError("conv1d: bias shape " + shape_str(b.shape()) +
                         " does not match kernel out-channels (axis 0) = " +
                         std::to_string(cout));
  }
  const std::size_t pad_left = padding == Padding::kCausal ? k - 1 : 0;
  const auto d = kernels::make_conv1d_dims(xs.batch, xs.length, cin, cout, k,
                                           stride, pad_left, 0);
  Shape out_shape = x.value().rank() == 2 ? Shape{d.out_length, cout}
                                          : Shape{d.batch, d.out_length, cout};
  Tensor out(out_shape);
  kn::conv1d_forward(d, x.value().data(), w.value().data(), b.value().data(),
                     out.data());
  return make(std::move(out), "conv1d", {x.node(), w.node(), b.node()},
              [d](Node& n) {
                auto& xin = n.inputs[0];
                auto& win = n.inputs[1];
                auto& bin = n.inputs[2];
                if (xin->requires_grad) {
                  kn::conv1d_backward_input(d, n.grad.data(), win->value.data(),
                                            xin->ensure_grad().data());
                }
                if (win->requires_grad || bin->requires_grad) {
                  Tensor gw(win->value.shape());
                  Tensor gb(bin->value.shape());
                  kn::conv1d_backward_weight(d, n.grad.data(), xin->value.data(),
                                             gw.data(), gb.data());
                  if (win->requires_grad) {
                    auto& g = win->ensure_grad();
                    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += gw[i];
                  }
                  if (bin->requires_grad) {
                    auto& g = bin->ensure_grad();
                    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += gb[i];
                  }
                }
              });
}

Var conv_transpose1d(const Var& x, const Var& w, const Var& b,
                     std::size_t stride) {
  const auto xs = seq_shape(x.value(), "conv_transpose1d input");
  if (w.value().rank() != 3) {
    throw DimensionError("conv_transpose1d: kernel must be [Cin x Cout x k], got " +
                         shape_str(w.shape()));
  }
  const std::size_t cin = w.shape()[0];
  const std::size_t cout = w.shape()[1];
  const std::size_t k = w.shape()[2];
  if (cin != xs.channels) {
    throw DimensionError("conv_transpose1d: input channels = " +
                         std::to_string(xs.channels) +
                         " but kernel in-channels (axis 0) = " + std::to_string(cin));
  }
  if (b.value().rank() != 1 || b.shape()[0] != cout) {
    throw DimensionError("conv_transpose1d: bias shape " + shape_str(b.shape()) +
                         " does not match kernel out-channels (axis 1) = " +
                         std::to_string(cout));
  }
  const auto d = kernels::make_conv_transpose1d_dims(xs.batch, xs.length, cin,
                                                     cout, k, stride);
  Shape out_shape = x.value().rank() == 2 ? Shape{d.out_length, cout}
                                          : Shape{d.batch, d.out_length, cout};
  Tensor out(out_shape);
  kn::conv_transpose1d_forward(d, x.value().data(), w.value().data(),
                               b.value().data(), out.data());
  return make(std::move(out), "conv_transpose1d", {x.node(), w.node(), b.node()},
              [d](Node& n) {
                auto& xin = n.inputs[0];
                auto& win = n.inputs[1];
                auto& bin = n.inputs[2];
                if (xin->requires_grad) {
                  kn::conv_transpose1d_backward_input(d, n.grad.data(),
                                                      win->value.data(),
                                                      xin->ensure_grad().data());
                }
                if (win->requires_grad || bin->requires_grad) {
                  Tensor gw(win->value.shape());
                  Tensor gb(bin->value.shape());
                  kn::conv_transpose1d_backward_weight(d, n.grad.data(),
                                                       xin->value.data(),
                                                       gw.data(), gb.data());
                  if (win->requires_grad) {
                    auto& g = win->ensure_grad();
                    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += gw[i];
                  }
                  if (bin->requires_grad) {
                    auto& g = bin->ensure_grad();
                    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += gb[i];
                  }
                }
              });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  if (x.value().rank() == 0) throw DimensionError("linear: scalar input");
  if (w.value().rank() != 2) {
    throw DimensionError("linear: weight must be [Dout x Din], got " +
                         shape_str(w.shape()));
  }
  const std::size_t din = w.shape()[1];
  const std::size_t dout = w.shape()[0];
  if (x.shape().back() != din) {
    throw DimensionError("linear: trailing input axis " +
                         std::to_string(x.value().rank() - 1) + " = " +
                         std::to_string(x.shape().back()) +
                         " but weight axis 1 (Din) = " + std::to_string(din));
  }
  if (b.value().rank() != 1 || b.shape()[0] != dout) {
    throw DimensionError("linear: bias shape " + shape_str(b.shape()) +
                         " does not match weight axis 0 (Dout) = " +
                         std::to_string(dout));
  }
  kernels::LinearDims d{x.value().numel() / din, din, dout};
  Shape out_shape = x.shape();
  out_shape.back() = dout;
  Tensor out(out_shape);
  kn::linear_forward(d, x.value().data(), w.value().data(), b.value().data(),
                     out.data());
  return make(std::move(out), "linear", {x.node(), w.node(), b.node()},
              [d](Node& n) {
                auto& xin = n.inputs[0];
                auto& win = n.inputs[1];
                auto& bin = n.inputs[2];
                if (xin->requires_grad) {
                  kn::linear_backward_input(d, n.grad.data(), win->value.data(),
                                            xin->ensure_grad().data());
                }
                if (win->requires_grad || bin->requires_grad) {
                  Tensor gw(win->value.shape());
                  Tensor gb(bin->value.shape());
                  kn::linear_backward_weight(d, n.grad.data(), xin->value.data(),
                                             gw.data(), gb.data());
                  if (win->requires_grad) {
                    auto& g = win->ensure_grad();
                    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += gw[i];
                  }
                  if (bin->requires_grad) {
                    auto& g = bin->ensure_grad();
                    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += gb[i];
                  }
                }
              });
}

Var avg_pool_time(const Var& x, std::size_t factor) {
  if (factor == 0) throw ConfigError("avg_pool_time: factor must be >= 1");
  const auto xs = seq_shape(x.value(), "avg_pool_time input");
  const std::size_t windows = (xs.length + factor - 1) / factor;
  Shape out_shape = x.value().rank() == 2 ? Shape{windows, xs.channels}
                                          : Shape{xs.batch, windows, xs.channels};
  Tensor out(out_shape);
  const auto& in = x.value();
  for (std::size_t n = 0; n < xs.batch; ++n) {
    for (std::size_t w = 0; w < windows; ++w) {
      const std::size_t lo = w * factor;
      const std::size_t hi = std::min(lo + factor, xs.length);
      const double inv = 1.0 / static_cast<double>(hi - lo);
      double* y = &out[(n * windows + w) * xs.channels];
      for (std::size_t t = lo; t < hi; ++t) {
        const double* row = &in[(n * xs.length + t) * xs.channels];
        for (std::size_t c = 0; c < xs.channels; ++c) y[c] += row[c];
      }
      for (std::size_t c = 0; c < xs.channels; ++c) y[c] *= inv;
    }
  }
  return make(std::move(out), "avg_pool_time", {x.node()},
              [xs, windows, factor](Node& n) {
                auto& g = n.inputs[0]->ensure_grad();
                for (std::size_t b = 0; b < xs.batch; ++b) {
                  for (std::size_t w = 0; w < windows; ++w) {
                    const std::size_t lo = w * factor;
                    const std::size_t hi = std::min(lo + factor, xs.length);
                    const double inv = 1.0 / static_cast<double>(hi - lo);
                    const double* up = &n.grad[(b * windows + w) * xs.channels];
                    for (std::size_t t = lo; t < hi; ++t) {
                      double* row = &g[(b * xs.length + t) * xs.channels];
                      for (std::size_t c = 0; c < xs.channels; ++c) row[c] += inv * up[c];
                    }
                  }
                }
              });
}

Var crop_time(const Var& x, std::size_t length) {
  const auto xs = seq_shape(x.value(), "crop_time input");
  if (length > xs.length) {
    throw DimensionError("crop_time: length " + std::to_string(length) +
                         " exceeds input length " + std::to_string(xs.length));
  }
  Shape out_shape = x.value().rank() == 2 ? Shape{length, xs.channels}
                                          : Shape{xs.batch, length, xs.channels};
  Tensor out(out_shape);
  const std::size_t row = length * xs.channels;
  for (std::size_t b = 0; b < xs.batch; ++b) {
    std::copy_n(&x.value()[b * xs.length * xs.channels], row, &out[b * row]);
  }
  return make(std::move(out), "crop_time", {x.node()}, [xs, row](Node& n) {
    auto& g = n.inputs[0]->ensure_grad();
    for (std::size_t b = 0; b < xs.batch; ++b) {
      double* dst = &g[b * xs.length * xs.channels];
      const double* src = &n.grad[b * row];
      for (std::size_t i = 0; i < row; ++i) dst[i] += src[i];
    }
  });
}

Var straight_through(const Var& latent, const Tensor& quantized) {
  require_same_shape(latent.value(), quantized, "straight_through");
  return make(quantized, "straight_through", {latent.node()}, [](Node& n) {
    auto& g = n.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
  });
}

Var stop_gradient(const Var& a) { return Var(a.value(), false, "stop_gradient"); }

}  // namespace acd::ag
