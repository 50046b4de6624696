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

#include <doctest.h>

#include <random>

#include "acd/error.hpp"
#include "acd/kernels.hpp"
#include "acd/tensor.hpp"
#include "support/testing.hpp"

using namespace acd;
using acd::testing::conv1d_oracle;
using acd::testing::conv_transpose1d_oracle;
using acd::testing::linear_oracle;
using acd::testing::max_abs_diff;
using acd::testing::rand_tensor;

TEST_CASE("tensor shape and storage agree") {
  Tensor t({2, 3, 4});
  CHECK(t.numel() == 24);
  CHECK(t.rank() == 3);
  CHECK(t.storage().size() == shape_numel(t.shape()));
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>(3)), DimensionError);
  t.at({1, 2, 3}) = 5.0;
  CHECK(t[23] == 5.0);
  CHECK_THROWS_AS(t.at({2, 0, 0}), IndexError);
  CHECK(t.reshaped({4, 6}).numel() == 24);
  CHECK_THROWS_AS(t.reshaped({5, 5}), DimensionError);
  CHECK(Tensor::scalar(2.5).item() == 2.5);
  CHECK_THROWS(t.item());
}

TEST_CASE("tensor random factories are deterministic per seed") {
  std::mt19937_64 a(11), b(11);
  CHECK(bitwise_equal(Tensor::randn({5, 5}, a), Tensor::randn({5, 5}, b)));
  Tensor nan({2}, std::vector<double>{1.0, std::nan("")});
  CHECK_FALSE(nan.all_finite());
}

TEST_CASE("conv1d hand examples") {
  const Tensor x = Tensor::ones({4, 1});
  const Tensor w = Tensor::ones({1, 1, 4});
  const Tensor b({1});
  auto d = kernels::make_conv1d_dims(1, 4, 1, 1, 4, 1, 0, 0);
  Tensor out({1, 1});
  kernels::parallel::conv1d_forward(d, x.data(), w.data(), b.data(), out.data());
  CHECK(out[0] == 4.0);

  const Tensor seq({5, 1}, {1, 2, 3, 4, 5});
  const Tensor tap({1, 1, 4}, {1, 0, 0, 0});
  d = kernels::make_conv1d_dims(1, 5, 1, 1, 4, 1, 0, 0);
  Tensor out2({2, 1});
  kernels::serial::conv1d_forward(d, seq.data(), tap.data(), b.data(), out2.data());
  CHECK(out2[0] == 1.0);
  CHECK(out2[1] == 2.0);

  CHECK_THROWS_AS(kernels::make_conv1d_dims(1, 3, 1, 1, 4, 1, 0, 0), DimensionError);
}

TEST_CASE("serial and parallel kernels match the nested-loop oracles") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t B = 1 + seed % 3, L = 10, Cin = 3, Cout = 8, K = 4;
    const std::size_t stride = 1 + seed % 2, pad = seed % 2 ? 0 : K - 1;
    const Tensor x = rand_tensor({B, L, Cin}, rng);
    const Tensor w = rand_tensor({Cout, Cin, K}, rng);
    const Tensor b = rand_tensor({Cout}, rng);
    const Tensor want = conv1d_oracle(x, w, b, stride, pad);
    const auto d = kernels::make_conv1d_dims(B, L, Cin, Cout, K, stride, pad, 0);
    CHECK(d.out_length == want.dim(1));
    Tensor s(want.shape()), p(want.shape());
    kernels::serial::conv1d_forward(d, x.data(), w.data(), b.data(), s.data());
    kernels::parallel::conv1d_forward(d, x.data(), w.data(), b.data(), p.data());
    CHECK(max_abs_diff(s, want) < 1e-12);
    CHECK(max_abs_diff(p, want) < 1e-12);

    // transposed conv
    const std::size_t ts = 1 + seed % 3;
    const Tensor xt = rand_tensor({B, 3, 5}, rng);
    const Tensor wt = rand_tensor({5, 4, ts + 1}, rng);
    const Tensor bt = rand_tensor({4}, rng);
    const Tensor want_t = conv_transpose1d_oracle(xt, wt, bt, ts);
    const auto dt = kernels::make_conv_transpose1d_dims(B, 3, 5, 4, ts + 1, ts);
    Tensor st(want_t.shape()), pt(want_t.shape());
    kernels::serial::conv_transpose1d_forward(dt, xt.data(), wt.data(), bt.data(), st.data());
    kernels::parallel::conv_transpose1d_forward(dt, xt.data(), wt.data(), bt.data(), pt.data());
    CHECK(max_abs_diff(st, want_t) < 1e-12);
    CHECK(max_abs_diff(pt, want_t) < 1e-12);

    // linear
    const Tensor xl = rand_tensor({7, 8}, rng);
    const Tensor wl = rand_tensor({5, 8}, rng);
    const Tensor bl = rand_tensor({5}, rng);
    const Tensor want_l = linear_oracle(xl, wl, bl);
    Tensor sl({7, 5}), pl({7, 5});
    kernels::LinearDims ld{7, 8, 5};
    kernels::serial::linear_forward(ld, xl.data(), wl.data(), bl.data(), sl.data());
    kernels::parallel::linear_forward(ld, xl.data(), wl.data(), bl.data(), pl.data());
    CHECK(max_abs_diff(sl, want_l) < 1e-12);
    CHECK(max_abs_diff(pl, want_l) < 1e-12);
  }
}

TEST_CASE("serial and parallel backward kernels agree") {
  std::mt19937_64 rng(3);
  const std::size_t B = 2, L = 9, Cin = 4, Cout = 6, K = 3, stride = 2;
  const auto d = kernels::make_conv1d_dims(B, L, Cin, Cout, K, stride, K - 1, 0);
  const Tensor x = rand_tensor({B, L, Cin}, rng);
  const Tensor w = rand_tensor({Cout, Cin, K}, rng);
  const Tensor g = rand_tensor({B, d.out_length, Cout}, rng);
  Tensor gi_s({B, L, Cin}), gi_p({B, L, Cin});
  kernels::serial::conv1d_backward_input(d, g.data(), w.data(), gi_s.data());
  kernels::parallel::conv1d_backward_input(d, g.data(), w.data(), gi_p.data());
  CHECK(max_abs_diff(gi_s, gi_p) < 1e-12);
  Tensor gw_s(w.shape()), gw_p(w.shape()), gb_s({Cout}), gb_p({Cout});
  kernels::serial::conv1d_backward_weight(d, g.data(), x.data(), gw_s.data(), gb_s.data());
  kernels::parallel::conv1d_backward_weight(d, g.data(), x.data(), gw_p.data(), gb_p.data());
  CHECK(max_abs_diff(gw_s, gw_p) < 1e-12);
  CHECK(max_abs_diff(gb_s, gb_p) < 1e-12);

  const auto dt = kernels::make_conv_transpose1d_dims(B, 3, Cin, Cout, 5, 5);
  const Tensor xt = rand_tensor({B, 3, Cin}, rng);
  const Tensor wt = rand_tensor({Cin, Cout, 5}, rng);
  const Tensor gt = rand_tensor({B, dt.out_length, Cout}, rng);
  Tensor ti_s(xt.shape()), ti_p(xt.shape());
  kernels::serial::conv_transpose1d_backward_input(dt, gt.data(), wt.data(), ti_s.data());
  kernels::parallel::conv_transpose1d_backward_input(dt, gt.data(), wt.data(), ti_p.data());
  CHECK(max_abs_diff(ti_s, ti_p) < 1e-12);
  Tensor tw_s(wt.shape()), tw_p(wt.shape()), tb_s({Cout}), tb_p({Cout});
  kernels::serial::conv_transpose1d_backward_weight(dt, gt.data(), xt.data(), tw_s.data(),
                                                    tb_s.data());
  kernels::parallel::conv_transpose1d_backward_weight(dt, gt.data(), xt.data(), tw_p.data(),
                                                      tb_p.data());
  CHECK(max_abs_diff(tw_s, tw_p) < 1e-12);
  CHECK(max_abs_diff(tb_s, tb_p) < 1e-12);
}

TEST_CASE("nearest_codes: serial and parallel agree exactly and ties go low") {
  std::mt19937_64 rng(5);
  const std::size_t rows = 300, dim = 3, k = 16;
  const Tensor q = rand_tensor({rows, dim}, rng);
  Tensor codes = rand_tensor({k, dim}, rng);
  // duplicate code: ties must resolve to the lower index
  for (std::size_t j = 0; j < dim; ++j) codes[9 * dim + j] = codes[4 * dim + j];
  std::vector<std::int64_t> is(rows), ip(rows);
  std::vector<double> ds(rows), dp(rows);
  kernels::serial::nearest_codes(rows, dim, q.data(), codes.data(), k, is, ds);
  kernels::parallel::nearest_codes(rows, dim, q.data(), codes.data(), k, ip, dp);
  CHECK(is == ip);
  CHECK(ds == dp);
  for (auto i : is) CHECK(i != 9);
}

TEST_CASE("parallel results do not depend on the thread count") {
  std::mt19937_64 rng(8);
  const auto d = kernels::make_conv1d_dims(4, 20, 6, 10, 4, 1, 3, 0);
  const Tensor x = rand_tensor({4, 20, 6}, rng);
  const Tensor w = rand_tensor({10, 6, 4}, rng);
  const Tensor b = rand_tensor({10}, rng);
  Tensor one({4, 20, 10}), many({4, 20, 10});
  const int saved = kernels::max_threads();
  kernels::set_num_threads(1);
  kernels::parallel::conv1d_forward(d, x.data(), w.data(), b.data(), one.data());
  kernels::set_num_threads(4);
  kernels::parallel::conv1d_forward(d, x.data(), w.data(), b.data(), many.data());
  kernels::set_num_threads(saved);
  CHECK(bitwise_equal(one, many));
}
