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

// Discrete-time model of a chunked policy feeding a fixed-rate controller.
// The policy runs inference at most f_m times per second; each completed
// inference deposits l_ac command frames into a FIFO buffer, and the
// controller pops one frame per tick at f_l. An empty buffer holds the last
// executed frame. A 1-D agent integrates the executed v_x while a scripted
// target moves sinusoidally.

#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "acd/trajectory.hpp"

namespace acd {

class Codec;
class PolicyHead;
class FeatureProjector;

enum class PolicyKind { kOraclePursuit, kTrainedHead };

std::optional<PolicyKind> parse_policy_kind(std::string_view name);
std::string_view policy_kind_name(PolicyKind kind);

struct SimConfig {
  double f_l = 50.0;         // controller ticks per second
  double f_m = 5.0;          // policy inference starts per second (upper bound)
  std::size_t l_ac = 10;     // frames per inference
  double latency = -1.0;     // seconds; negative means 1 / f_m
  PolicyKind policy = PolicyKind::kOraclePursuit;
  double duration = 60.0;    // seconds
  std::uint64_t seed = 0;
  bool preempt = false;      // a new chunk replaces whatever is still queued
  double target_amplitude = 1.0;  // m
  double target_period = 4.0;     // s
  double observation_noise = 0.01;  // std of observed target position, m

  double effective_latency() const { return latency < 0.0 ? 1.0 / f_m : latency; }
  std::size_t ticks() const;
  void validate() const;  // throws ConfigError
};

struct Observation {
  double time = 0.0;
  double target = 0.0;           // observed (noisy) position
  double target_velocity = 0.0;  // observed velocity
  double agent = 0.0;
  std::vector<CommandFrame> history;  // recently executed frames, oldest first
  std::vector<double> pending_vx;     // v_x of frames still queued, FIFO order
  double held_vx = 0.0;               // v_x currently being executed
};

// Produces one chunk of frames per inference.
class ChunkPolicy {
 public:
  virtual ~ChunkPolicy() = default;
  virtual std::vector<CommandFrame> plan(const Observation& obs, const SimConfig& cfg) = 0;
};

// Rolls the agent forward through the frames that will execute before the
// new chunk does, then commands the predicted target velocity plus the
// pursuit-law correction toward the predicted target position at each
// frame's execution time.
class OraclePursuitPolicy : public ChunkPolicy {
 public:
  std::vector<CommandFrame> plan(const Observation& obs, const SimConfig& cfg) override;
};

// Feeds the executed-frame history through a trained head and the frozen
// codec; uses the first l_ac frames of each decoded chunk.
class TrainedHeadPolicy : public ChunkPolicy {
 public:
  TrainedHeadPolicy(const PolicyHead& head, const Codec& codec,
                    const FeatureProjector& features);
  std::vector<CommandFrame> plan(const Observation& obs, const SimConfig& cfg) override;

 private:
  const PolicyHead& head_;
  const Codec& codec_;
  const FeatureProjector& features_;
};

// Default command frame for the pursuit task (fixed gait, given v_x).
CommandFrame pursuit_frame(double vx);

struct BufferedFrame {
  CommandFrame frame;
  double obs_time = 0.0;
};

class ChunkBuffer {
 public:
  void deposit(const std::vector<CommandFrame>& frames, double obs_time, bool preempt);
  std::optional<BufferedFrame> pop();
  std::size_t depth() const { return queue_.size(); }
  std::vector<double> pending_vx() const;
  std::uint64_t produced() const { return produced_; }
  std::uint64_t consumed() const { return consumed_; }
  std::uint64_t dropped() const { return dropped_; }

 private:
  std::deque<BufferedFrame> queue_;
  std::uint64_t produced_ = 0;
  std::uint64_t consumed_ = 0;
  std::uint64_t dropped_ = 0;
};

struct TickRecord {
  double time = 0.0;
  double action = 0.0;     // executed v_x
  double staleness = 0.0;  // time minus observation time of the executed frame
  std::size_t depth = 0;   // buffer depth after this tick's pop
  std::uint64_t produced = 0;
  std::uint64_t consumed = 0;
  std::uint64_t dropped = 0;
  double target = 0.0;
  double agent = 0.0;      // position before this tick's action
  bool warm = false;       // at least one chunk has arrived
  bool starved = false;    // warm and the buffer was empty
  bool fresh = false;      // a frame was popped (not held)
};

struct SimSummary {
  SimConfig config;
  std::size_t ticks = 0;
  std::size_t launches = 0;     // inferences started before the episode end
  std::size_t completions = 0;  // chunks deposited during the episode
  double delivery_rate = 0.0;   // l_ac * launches / duration, frames per second
  double warmup_time = 0.0;     // time of the first deposit
  double starvation_fraction = 0.0;  // over warm ticks
  double mean_staleness = 0.0;  // over warm ticks
  double max_staleness = 0.0;
  double tracking_rmse = 0.0;   // target - agent over every tick

  std::string to_kv() const;
  static std::string csv_header();
  std::string to_csv_row() const;
};

struct SimTrace {
  std::vector<TickRecord> ticks;
  std::vector<double> fresh_staleness;  // one entry per popped frame
  SimSummary summary;

  std::string to_csv() const;
};

// Runs the oracle policy (or `policy` when given).
SimTrace run_sim(const SimConfig& cfg, ChunkPolicy* policy = nullptr);

std::vector<SimSummary> sweep(const std::vector<SimConfig>& configs);
std::string sweep_csv(const std::vector<SimSummary>& rows);

struct StalenessProfile {
  std::vector<double> edges;        // bins + 1 edges
  std::vector<std::size_t> counts;  // bins
  double max = 0.0;
  double mean = 0.0;
  std::size_t samples = 0;

  std::string to_kv() const;
};

// Histogram of staleness over popped frames. Throws Error for an empty trace.
StalenessProfile staleness_profile(const SimTrace& trace, std::size_t bins = 20);

}  // namespace acd
