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

// High-level command space of a legged robot: three body velocities, three
// gait-pattern phases, gait frequency, body height, pitch, foot width, foot
// height and a termination flag. Trajectories are sequences of such frames;
// chunks are fixed-length windows used by the codec.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "acd/tensor.hpp"

namespace acd {

inline constexpr std::size_t kCommandDims = 12;

enum CommandDim : std::size_t {
  kVx = 0,
  kVy,
  kYawRate,
  kGaitPhase1,
  kGaitPhase2,
  kGaitPhase3,
  kGaitFreq,
  kBodyHeight,
  kPitch,
  kFootWidth,
  kFootHeight,
  kTerminate,
};

inline constexpr std::array<std::string_view, kCommandDims> kCommandNames = {
    "v_x",       "v_y",        "omega_z",   "theta1",
    "theta2",    "theta3",     "gait_freq", "body_height",
    "pitch",     "foot_width", "foot_height", "terminate"};

using CommandFrame = std::array<double, kCommandDims>;

struct Trajectory {
  std::vector<CommandFrame> frames;
  double sample_rate = 50.0;
  std::string tag;

  std::size_t length() const { return frames.size(); }
  // [length x 12]
  Tensor to_tensor() const;
};

using Dataset = std::vector<Trajectory>;

enum class SyntheticKind { kSineMixture, kPiecewiseConstant, kPursuitDemo };

std::optional<SyntheticKind> parse_synthetic_kind(std::string_view name);
std::string_view synthetic_kind_name(SyntheticKind kind);

// Deterministic per seed. Throws ConfigError when count or length is zero or
// the rate is not positive.
Dataset generate_synthetic(SyntheticKind kind, std::size_t count,
                           std::size_t length, double sample_rate,
                           std::uint64_t seed);

// Parameters of the scripted pursuit task shared by the pursuit-demo
// generator and the control-loop simulator.
struct PursuitLaw {
  double gain = 4.0;        // 1/s
  double max_speed = 3.0;   // m/s
  double command(double offset) const;
};

// One pursuit-demo trajectory with the target position at each frame. The
// agent starts at 0 and integrates the commanded v_x.
struct PursuitEpisode {
  Trajectory traj;
  std::vector<double> target;
};
PursuitEpisode pursuit_episode(std::size_t length, double rate, std::mt19937_64& rng);

// Sliding windows [start, start + n) for start = 0, stride, 2*stride, ...
// Returns an empty list (and logs a warning) when n exceeds the length.
std::vector<Tensor> chunk(const Trajectory& traj, std::size_t n,
                          std::size_t stride);
std::vector<std::size_t> chunk_starts(std::size_t length, std::size_t n,
                                      std::size_t stride);

struct NormalizationStats {
  CommandFrame min{};
  CommandFrame max{};
  std::array<bool, kCommandDims> constant{};

  bool operator==(const NormalizationStats&) const = default;
};

// Per-dimension min/max over every frame. Dimensions with max == min are
// flagged constant and normalize to 0.
NormalizationStats fit_normalization(const Dataset& data);

// Affine map of the trailing 12-wide axis to [-1, 1] and back.
Tensor normalize(const Tensor& frames, const NormalizationStats& stats);
Tensor denormalize(const Tensor& frames, const NormalizationStats& stats);

// Binary dataset container; see README for the byte layout.
void write_traj(const std::filesystem::path& path, const Dataset& data);
Dataset read_traj(const std::filesystem::path& path);
void write_traj(std::ostream& os, const Dataset& data);
Dataset read_traj(std::istream& is);
void write_traj_csv(const std::filesystem::path& path, const Dataset& data);

}  // namespace acd
