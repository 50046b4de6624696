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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "acd/autograd.hpp"
#include "acd/tensor.hpp"

namespace acd {

struct AdamWConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.0;
  double eps = 1e-8;
};

struct AdamWState {
  Tensor m;
  Tensor v;
  std::int64_t step = 0;
};

// One decoupled-weight-decay Adam update of `param` in place. The step
// counter is incremented before bias correction. Empty moments of a fresh
// state are sized to the parameter.
void adamw_step(std::span<double> param, std::span<const double> grad,
                AdamWState& state, const AdamWConfig& cfg);

struct NamedParam {
  std::string name;
  ag::Var var;
};

class AdamW {
 public:
  AdamW(std::vector<NamedParam> params, AdamWConfig cfg);

  // Applies one update to every parameter. If any gradient is non-finite the
  // whole step is skipped and NumericError names the offending parameter.
  void step();
  void zero_grad();

  const AdamWConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }
  std::int64_t steps() const { return steps_; }
  const std::vector<NamedParam>& params() const { return params_; }
  const AdamWState& state(std::size_t i) const { return states_[i]; }

 private:
  std::vector<NamedParam> params_;
  std::vector<AdamWState> states_;
  AdamWConfig cfg_;
  std::int64_t steps_ = 0;
};

}  // namespace acd
