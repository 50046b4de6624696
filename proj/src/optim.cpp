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

#include "acd/optim.hpp"

#include <cmath>

#include "acd/error.hpp"

namespace acd {

void adamw_step(std::span<double> param, std::span<const double> grad,
                AdamWState& state, const AdamWConfig& cfg) {
  if (state.m.empty() && state.v.empty() && state.step == 0) {
    state.m = Tensor({param.size()});
    state.v = Tensor({param.size()});
  }
  if (grad.size() != param.size() || state.m.numel() != param.size() ||
      state.v.numel() != param.size()) {
    throw DimensionError("adamw_step: parameter, gradient and moment sizes differ");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  const double decay = 1.0 - cfg.lr * cfg.weight_decay;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    double& m = state.m[i];
    double& v = state.v[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    param[i] = param[i] * decay - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

AdamW::AdamW(std::vector<NamedParam> params, AdamWConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  states_.reserve(params_.size());
  for (const auto& p : params_) {
    states_.push_back({Tensor(p.var.shape()), Tensor(p.var.shape()), 0});
  }
}

void AdamW::step() {
  for (const auto& p : params_) {
    if (p.var.has_grad() && !p.var.node()->grad.all_finite()) {
      throw NumericError("adamw: non-finite gradient in parameter '" + p.name +
                         "' at step " + std::to_string(steps_ + 1));
    }
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    const Tensor g = p.var.grad();
    adamw_step(p.var.mutable_value().data(), g.data(), states_[i], cfg_);
  }
  ++steps_;
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

}  // namespace acd
