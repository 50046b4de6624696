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

#include "acd/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include "acd/binary_io.hpp"
#include "acd/error.hpp"

namespace acd {

Tensor Trajectory::to_tensor() const {
  Tensor t({frames.size(), kCommandDims});
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::copy(frames[i].begin(), frames[i].end(), &t[i * kCommandDims]);
  }
  return t;
}

std::optional<SyntheticKind> parse_synthetic_kind(std::string_view name) {
  if (name == "sine-mixture") return SyntheticKind::kSineMixture;
  if (name == "piecewise-constant") return SyntheticKind::kPiecewiseConstant;
  if (name == "pursuit-demo") return SyntheticKind::kPursuitDemo;
  return std::nullopt;
}

std::string_view synthetic_kind_name(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::kSineMixture: return "sine-mixture";
    case SyntheticKind::kPiecewiseConstant: return "piecewise-constant";
    case SyntheticKind::kPursuitDemo: return "pursuit-demo";
  }
  return "unknown";
}

double PursuitLaw::command(double offset) const {
  return std::clamp(gain * offset, -max_speed, max_speed);
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Nominal operating point and excursion of each non-terminal command.
struct DimRange {
  double center;
  double half_range;
};

constexpr std::array<DimRange, kCommandDims - 1> kRanges = {{
    {0.4, 0.8},     // v_x
    {0.0, 0.3},     // v_y
    {0.0, 0.8},     // omega_z
    {0.5, 0.5},     // theta1
    {0.25, 0.25},   // theta2
    {0.25, 0.25},   // theta3
    {2.5, 1.0},     // gait frequency
    {0.0, 0.1},     // body height offset
    {0.0, 0.3},     // pitch
    {0.25, 0.05},   // foot width
    {0.09, 0.04},   // foot height
}};

constexpr double kNoiseStd = 0.005;  // fraction of half-range

Trajectory sine_mixture(std::size_t length, double rate, std::mt19937_64& rng) {
  Trajectory traj;
  traj.sample_rate = rate;
  traj.tag = "sine-mixture";
  traj.frames.assign(length, CommandFrame{});

  // Band limit: every component stays at or below rate / 10. The log-frequency
  // is drawn from u^3 so slow command drifts dominate, as in teleoperated data.
  const double f_hi = rate / 10.0;
  const double f_lo = f_hi / 200.0;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> n_comp(1, 3);
  std::normal_distribution<double> noise(0.0, kNoiseStd);

  for (std::size_t d = 0; d + 1 < kCommandDims; ++d) {
    const int comps = n_comp(rng);
    std::array<double, 3> amp{}, freq{}, phase{};
    double amp_total = 0.0;
    for (int c = 0; c < comps; ++c) {
      amp[c] = 0.2 + unit(rng);
      amp_total += amp[c];
      const double u = unit(rng);
      freq[c] = f_lo * std::pow(f_hi / f_lo, u * u * u);
      phase[c] = kTwoPi * unit(rng);
    }
    const double level = 0.4 + 0.6 * unit(rng);
    for (int c = 0; c < comps; ++c) amp[c] *= level / amp_total;
    const double offset = (unit(rng) - 0.5) * (1.0 - level);
    for (std::size_t i = 0; i < length; ++i) {
      const double t = static_cast<double>(i) / rate;
      double s = offset;
      for (int c = 0; c < comps; ++c) s += amp[c] * std::sin(kTwoPi * freq[c] * t + phase[c]);
      s += noise(rng);
      traj.frames[i][d] = kRanges[d].center + kRanges[d].half_range * s;
    }
  }
  traj.frames.back()[kTerminate] = 1.0;
  return traj;
}

Trajectory piecewise_constant(std::size_t length, double rate,
                              std::mt19937_64& rng) {
  Trajectory traj;
  traj.sample_rate = rate;
  traj.tag = "piecewise-constant";
  traj.frames.assign(length, CommandFrame{});
  std::uniform_real_distribution<double> level(-1.0, 1.0);
  std::uniform_int_distribution<std::size_t> hold(5, 20);
  for (std::size_t d = 0; d + 1 < kCommandDims; ++d) {
    std::size_t i = 0;
    while (i < length) {
      const double v = kRanges[d].center + kRanges[d].half_range * level(rng);
      const std::size_t end = std::min(length, i + hold(rng));
      for (; i < end; ++i) traj.frames[i][d] = v;
    }
  }
  traj.frames.back()[kTerminate] = 1.0;
  return traj;
}

}  // namespace

PursuitEpisode pursuit_episode(std::size_t length, double rate, std::mt19937_64& rng) {
  PursuitEpisode ep;
  Trajectory& traj = ep.traj;
  ep.target.resize(length);
  traj.sample_rate = rate;
  traj.tag = "pursuit-demo";
  traj.frames.assign(length, CommandFrame{});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.01);
  const double amplitude = 0.5 + unit(rng);
  const double period = 3.0 + 3.0 * unit(rng);
  const double phase = kTwoPi * unit(rng);
  const PursuitLaw law;
  // fixed trot-like gait for the whole demo
  CommandFrame gait{};
  gait[kGaitPhase1] = 0.5;
  gait[kGaitFreq] = 2.0 + unit(rng);
  gait[kBodyHeight] = 0.05 * (unit(rng) - 0.5);
  gait[kFootWidth] = 0.25;
  gait[kFootHeight] = 0.08;

  double agent = 0.0;
  for (std::size_t i = 0; i < length; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double target = amplitude * std::sin(kTwoPi * t / period + phase);
    ep.target[i] = target;
    CommandFrame f = gait;
    f[kVx] = law.command(target - agent) + noise(rng);
    f[kVy] = noise(rng);
    f[kYawRate] = noise(rng);
    traj.frames[i] = f;
    agent += f[kVx] / rate;
  }
  traj.frames.back()[kTerminate] = 1.0;
  return ep;
}

Dataset generate_synthetic(SyntheticKind kind, std::size_t count,
                           std::size_t length, double sample_rate,
                           std::uint64_t seed) {
  if (count == 0 || length == 0) {
    throw ConfigError("generate_synthetic: count and length must be >= 1");
  }
  if (!(sample_rate > 0.0)) {
    throw ConfigError("generate_synthetic: sample rate must be positive");
  }
  std::mt19937_64 rng(seed);
  Dataset data;
  data.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    switch (kind) {
      case SyntheticKind::kSineMixture:
        data.push_back(sine_mixture(length, sample_rate, rng));
        break;
      case SyntheticKind::kPiecewiseConstant:
        data.push_back(piecewise_constant(length, sample_rate, rng));
        break;
      case SyntheticKind::kPursuitDemo:
        data.push_back(pursuit_episode(length, sample_rate, rng).traj);
        break;
    }
  }
  return data;
}

std::vector<std::size_t> chunk_starts(std::size_t length, std::size_t n,
                                      std::size_t stride) {
  if (n == 0 || stride == 0) throw ConfigError("chunk: length and stride must be >= 1");
  std::vector<std::size_t> starts;
  if (n > length) return starts;
  for (std::size_t s = 0; s + n <= length; s += stride) starts.push_back(s);
  return starts;
}

std::vector<Tensor> chunk(const Trajectory& traj, std::size_t n,
                          std::size_t stride) {
  const auto starts = chunk_starts(traj.length(), n, stride);
  if (starts.empty()) {
    std::clog << "warning: chunk length " << n << " exceeds trajectory length "
              << traj.length() << "; no chunks produced\n";
  }
  std::vector<Tensor> out;
  out.reserve(starts.size());
  for (auto s : starts) {
    Tensor c({n, kCommandDims});
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(traj.frames[s + i].begin(), traj.frames[s + i].end(),
                &c[i * kCommandDims]);
    }
    out.push_back(std::move(c));
  }
  return out;
}

NormalizationStats fit_normalization(const Dataset& data) {
  NormalizationStats st;
  st.min.fill(std::numeric_limits<double>::infinity());
  st.max.fill(-std::numeric_limits<double>::infinity());
  std::size_t frames = 0;
  for (const auto& traj : data) {
    for (const auto& f : traj.frames) {
      for (std::size_t d = 0; d < kCommandDims; ++d) {
        st.min[d] = std::min(st.min[d], f[d]);
        st.max[d] = std::max(st.max[d], f[d]);
      }
      ++frames;
    }
  }
  if (frames == 0) throw ConfigError("fit_normalization: dataset has no frames");
  for (std::size_t d = 0; d < kCommandDims; ++d) {
    st.constant[d] = !(st.max[d] > st.min[d]);
  }
  return st;
}

namespace {

void require_command_axis(const Tensor& t, const char* what) {
  if (t.rank() == 0 || t.shape().back() != kCommandDims) {
    throw DimensionError(std::string(what) + ": trailing axis must be " +
                         std::to_string(kCommandDims) + ", got shape " +
                         shape_str(t.shape()));
  }
}

}  // namespace

Tensor normalize(const Tensor& frames, const NormalizationStats& stats) {
  require_command_axis(frames, "normalize");
  Tensor out = frames;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const std::size_t d = i % kCommandDims;
    if (stats.constant[d]) {
      out[i] = 0.0;
    } else {
      out[i] = 2.0 * (out[i] - stats.min[d]) / (stats.max[d] - stats.min[d]) - 1.0;
    }
  }
  return out;
}

Tensor denormalize(const Tensor& frames, const NormalizationStats& stats) {
  require_command_axis(frames, "denormalize");
  Tensor out = frames;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const std::size_t d = i % kCommandDims;
    if (stats.constant[d]) {
      out[i] = stats.min[d];
    } else {
      out[i] = stats.min[d] + (out[i] + 1.0) * 0.5 * (stats.max[d] - stats.min[d]);
    }
  }
  return out;
}

namespace {

constexpr std::string_view kTrajMagic = "ACDTRAJ";

std::string dim_list() {
  std::string s;
  for (std::size_t d = 0; d < kCommandDims; ++d) {
    if (d) s += ',';
    s += kCommandNames[d];
  }
  return s;
}

}  // namespace

void write_traj(std::ostream& os, const Dataset& data) {
  os << kTrajMagic << " version=1 count=" << data.size() << " dims=" << dim_list()
     << '\n';
  for (const auto& traj : data) {
    if (traj.tag.find_first_of(" \t\r\n=") != std::string::npos) {
      throw FormatError("trajectory tag '" + traj.tag +
                        "' contains whitespace or '='");
    }
    os << "TRAJ frames=" << traj.frames.size()
       << " rate=" << io::format_double(traj.sample_rate)
       << " tag=" << traj.tag << '\n';
    for (const auto& f : traj.frames) io::write_f64_le(os, f);
  }
}

Dataset read_traj(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || !line.starts_with(kTrajMagic)) {
    throw FormatError("not a .traj file (missing ACDTRAJ header)");
  }
  auto header = io::parse_fields(line);
  if (header["version"] != "1") {
    throw FormatError("unsupported .traj version '" + header["version"] + "'");
  }
  if (header["dims"] != dim_list()) {
    throw FormatError("unexpected dimension list '" + header["dims"] + "'");
  }
  const std::size_t count = io::parse_u64(header["count"]);
  Dataset data;
  data.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(is, line) || !line.starts_with("TRAJ ")) {
      throw FormatError("missing TRAJ record " + std::to_string(i));
    }
    auto fields = io::parse_fields(line);
    Trajectory traj;
    const std::size_t frames = io::parse_u64(fields["frames"]);
    traj.sample_rate = io::parse_double(fields["rate"]);
    traj.tag = fields["tag"];
    traj.frames.resize(frames);
    for (auto& f : traj.frames) io::read_f64_le(is, f);
    data.push_back(std::move(traj));
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw FormatError(".traj has trailing bytes after the last record");
  }
  return data;
}

void write_traj(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  write_traj(os, data);
  if (!os) throw Error("write failed for '" + path.string() + "'");
}

Dataset read_traj(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path.string() + "'");
  return read_traj(is);
}

void write_traj_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  os << "trajectory,frame,time";
  for (auto name : kCommandNames) os << ',' << name;
  os << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& traj = data[i];
    for (std::size_t k = 0; k < traj.frames.size(); ++k) {
      os << i << ',' << k << ','
         << io::format_double(static_cast<double>(k) / traj.sample_rate);
      for (double v : traj.frames[k]) os << ',' << io::format_double(v);
      os << '\n';
    }
  }
}

}  // namespace acd
