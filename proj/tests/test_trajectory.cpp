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

#include <cmath>
#include <cstring>
#include <numbers>
#include <random>
#include <sstream>

#include "acd/error.hpp"
#include "acd/trajectory.hpp"

using namespace acd;

namespace {

bool same_dataset(const Dataset& a, const Dataset& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].tag != b[i].tag || a[i].frames.size() != b[i].frames.size()) return false;
    if (std::memcmp(&a[i].sample_rate, &b[i].sample_rate, sizeof(double)) != 0) return false;
    if (std::memcmp(a[i].frames.data(), b[i].frames.data(),
                    a[i].frames.size() * sizeof(CommandFrame)) != 0) {
      return false;
    }
  }
  return true;
}

Dataset random_dataset(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> count(0, 5), len(1, 40);
  std::uniform_real_distribution<double> val(-1e3, 1e3);
  Dataset d(count(rng));
  for (auto& t : d) {
    t.frames.resize(len(rng));
    t.sample_rate = 1.0 + val(rng) * val(rng);
    t.sample_rate = std::abs(t.sample_rate) + 0.1;
    t.tag = "t" + std::to_string(rng() % 1000);
    for (auto& f : t.frames)
      for (auto& v : f) v = val(rng) * std::pow(10.0, static_cast<double>(rng() % 40) - 20.0);
  }
  return d;
}

}  // namespace

TEST_CASE("generators are deterministic per seed and differ across seeds") {
  for (auto kind : {SyntheticKind::kSineMixture, SyntheticKind::kPiecewiseConstant,
                    SyntheticKind::kPursuitDemo}) {
    const auto a = generate_synthetic(kind, 5, 60, 50.0, 3);
    const auto b = generate_synthetic(kind, 5, 60, 50.0, 3);
    const auto c = generate_synthetic(kind, 5, 60, 50.0, 4);
    CHECK(same_dataset(a, b));
    CHECK_FALSE(same_dataset(a, c));
    for (const auto& t : a) {
      CHECK(t.length() == 60);
      CHECK(t.frames.back()[kTerminate] == 1.0);
      for (std::size_t i = 0; i + 1 < t.length(); ++i) CHECK(t.frames[i][kTerminate] == 0.0);
      for (const auto& f : t.frames)
        for (double v : f) CHECK(std::isfinite(v));
    }
  }
  CHECK_THROWS_AS(generate_synthetic(SyntheticKind::kSineMixture, 0, 10, 50.0, 0), ConfigError);
  CHECK_THROWS_AS(generate_synthetic(SyntheticKind::kSineMixture, 1, 0, 50.0, 0), ConfigError);
  CHECK_THROWS_AS(generate_synthetic(SyntheticKind::kSineMixture, 1, 10, 0.0, 0), ConfigError);
  CHECK(parse_synthetic_kind("pursuit-demo") == SyntheticKind::kPursuitDemo);
  CHECK_FALSE(parse_synthetic_kind("sine").has_value());
}

TEST_CASE("sine-mixture power sits below a tenth of the sample rate") {
  const double rate = 50.0;
  const std::size_t n = 512;
  const auto data = generate_synthetic(SyntheticKind::kSineMixture, 20, n, rate, 11);
  double low = 0.0, high = 0.0;
  for (const auto& t : data) {
    for (std::size_t d = 0; d + 1 < kCommandDims; ++d) {
      double mean = 0.0;
      for (const auto& f : t.frames) mean += f[d] / static_cast<double>(n);
      // Hann-windowed DFT keeps leakage from spilling across the band edge
      for (std::size_t k = 1; k <= n / 2; ++k) {
        double re = 0.0, im = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double w = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * i / (n - 1));
          const double a = 2 * std::numbers::pi * k * i / n;
          re += w * (t.frames[i][d] - mean) * std::cos(a);
          im -= w * (t.frames[i][d] - mean) * std::sin(a);
        }
        const double freq = static_cast<double>(k) * rate / static_cast<double>(n);
        (freq <= rate / 10.0 + 2 * rate / n ? low : high) += re * re + im * im;
      }
    }
  }
  INFO("fraction above band " << high / (low + high));
  CHECK(high / (low + high) < 0.01);
}

TEST_CASE("pursuit-demo v_x follows the target offset") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 5; ++rep) {
    const auto ep = pursuit_episode(500, 50.0, rng);
    double agent = 0.0;
    std::vector<double> off, vx;
    for (std::size_t i = 0; i < 500; ++i) {
      off.push_back(ep.target[i] - agent);
      vx.push_back(ep.traj.frames[i][kVx]);
      agent += vx.back() / 50.0;
    }
    double mo = 0, mv = 0;
    for (std::size_t i = 0; i < 500; ++i) mo += off[i] / 500, mv += vx[i] / 500;
    double c = 0, so = 0, sv = 0;
    for (std::size_t i = 0; i < 500; ++i) {
      c += (off[i] - mo) * (vx[i] - mv);
      so += (off[i] - mo) * (off[i] - mo);
      sv += (vx[i] - mv) * (vx[i] - mv);
    }
    CHECK(c / std::sqrt(so * sv) > 0.9);
  }
}

TEST_CASE("chunk counts, starts and contents") {
  Trajectory t;
  for (int i = 0; i < 12; ++i) {
    CommandFrame f{};
    for (std::size_t d = 0; d < kCommandDims; ++d) f[d] = 100.0 * i + static_cast<double>(d);
    t.frames.push_back(f);
  }
  CHECK(chunk_starts(10, 10, 1) == std::vector<std::size_t>{0});
  CHECK(chunk_starts(12, 5, 5) == std::vector<std::size_t>{0, 5});
  CHECK(chunk(t, 13, 1).empty());
  for (std::size_t n = 1; n <= 12; ++n)
    for (std::size_t s = 1; s <= 6; ++s) {
      const auto cs = chunk(t, n, s);
      CHECK(cs.size() == (12 - n) / s + 1);
      std::vector<bool> covered(12, false);
      for (std::size_t c = 0; c < cs.size(); ++c) {
        const std::size_t start = c * s;
        for (std::size_t k = 0; k < n; ++k) {
          covered[start + k] = true;
          for (std::size_t d = 0; d < kCommandDims; ++d)
            CHECK(cs[c][k * kCommandDims + d] == t.frames[start + k][d]);
        }
      }
      if (s <= n) {
        // with stride <= N the windows cover everything up to the last window's end
        const std::size_t end = (cs.size() - 1) * s + n;
        for (std::size_t k = 0; k < end; ++k) CHECK(covered[k]);
      }
    }
  CHECK_THROWS_AS(chunk(t, 0, 1), ConfigError);
  CHECK_THROWS_AS(chunk(t, 2, 0), ConfigError);
}

TEST_CASE("normalization maps the range to [-1, 1] and roundtrips") {
  Dataset d(1);
  CommandFrame lo{}, hi{};
  lo[kVx] = -2.0;
  hi[kVx] = 2.0;
  lo[kVy] = 3.0;
  hi[kVy] = 7.0;
  d[0].frames = {lo, hi};
  const auto stats = fit_normalization(d);
  CHECK(stats.constant[kPitch]);
  CHECK_FALSE(stats.constant[kVx]);
  Tensor probe({3, kCommandDims});
  probe[kVx] = 0.0;
  probe[kCommandDims + kVx] = -2.0;
  probe[2 * kCommandDims + kVx] = 2.0;
  probe[kVy] = 3.0;
  probe[kCommandDims + kVy] = 7.0;
  probe[2 * kCommandDims + kVy] = 5.0;
  const Tensor n = normalize(probe, stats);
  CHECK(n[kVx] == 0.0);
  CHECK(n[kCommandDims + kVx] == -1.0);
  CHECK(n[2 * kCommandDims + kVx] == 1.0);
  CHECK(n[kVy] == -1.0);
  CHECK(n[kCommandDims + kVy] == 1.0);
  CHECK(n[2 * kCommandDims + kVy] == 0.0);
  CHECK(n[kPitch] == 0.0);

  const auto data = generate_synthetic(SyntheticKind::kSineMixture, 10, 50, 50.0, 2);
  const auto s2 = fit_normalization(data);
  for (const auto& t : data) {
    const Tensor x = t.to_tensor();
    const Tensor nx = normalize(x, s2);
    for (std::size_t i = 0; i < x.numel(); ++i) {
      CHECK(nx[i] >= -1.0);
      CHECK(nx[i] <= 1.0);
    }
    const Tensor back = denormalize(nx, s2);
    for (std::size_t i = 0; i < x.numel(); ++i) {
      if (s2.constant[i % kCommandDims]) continue;
      CHECK(std::abs(back[i] - x[i]) < 1e-12);
    }
  }
  CHECK_THROWS(fit_normalization(Dataset{}));
}

TEST_CASE(".traj write then read is bitwise identity") {
  std::mt19937_64 rng(77);
  for (int c = 0; c < 100; ++c) {
    const Dataset d = random_dataset(rng);
    std::stringstream ss;
    write_traj(ss, d);
    CHECK(same_dataset(read_traj(ss), d));
  }
}

TEST_CASE(".traj rejects malformed input") {
  std::stringstream bad("NOPE\n");
  CHECK_THROWS_AS(read_traj(bad), FormatError);
  const auto d = generate_synthetic(SyntheticKind::kPiecewiseConstant, 2, 10, 50.0, 1);
  std::stringstream ss;
  write_traj(ss, d);
  std::string bytes = ss.str();
  bytes.resize(bytes.size() - 3);
  std::stringstream cut(bytes);
  CHECK_THROWS_AS(read_traj(cut), FormatError);
  std::stringstream extra(ss.str() + "x");
  CHECK_THROWS_AS(read_traj(extra), FormatError);
  Dataset tagged(1);
  tagged[0].frames.resize(1);
  tagged[0].tag = "has space";
  std::stringstream out;
  CHECK_THROWS_AS(write_traj(out, tagged), FormatError);
}
