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

#include "acd/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "acd/binary_io.hpp"
#include "acd/codec.hpp"
#include "acd/error.hpp"
#include "acd/policy.hpp"

namespace acd {

namespace {

constexpr double kTimeEps = 1e-9;
constexpr std::size_t kHistory = 16;

}  // namespace

std::optional<PolicyKind> parse_policy_kind(std::string_view name) {
  if (name == "oracle-pursuit") return PolicyKind::kOraclePursuit;
  if (name == "trained-head") return PolicyKind::kTrainedHead;
  return std::nullopt;
}

std::string_view policy_kind_name(PolicyKind kind) {
  return kind == PolicyKind::kOraclePursuit ? "oracle-pursuit" : "trained-head";
}

std::size_t SimConfig::ticks() const {
  return static_cast<std::size_t>(std::llround(duration * f_l));
}

void SimConfig::validate() const {
  if (!(f_l > 0.0) || !std::isfinite(f_l)) throw ConfigError("sim: f_l must be positive");
  if (!(f_m > 0.0) || !std::isfinite(f_m)) throw ConfigError("sim: f_m must be positive");
  if (l_ac == 0) throw ConfigError("sim: l_ac must be >= 1");
  if (!std::isfinite(latency)) throw ConfigError("sim: latency must be finite");
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw ConfigError("sim: duration must be positive");
  }
  if (!(target_period > 0.0)) throw ConfigError("sim: target period must be positive");
  if (ticks() == 0) throw ConfigError("sim: episode shorter than one controller tick");
}

CommandFrame pursuit_frame(double vx) {
  CommandFrame f{};
  f[kVx] = vx;
  f[kGaitPhase1] = 0.5;
  f[kGaitFreq] = 2.5;
  f[kFootWidth] = 0.25;
  f[kFootHeight] = 0.08;
  return f;
}

std::vector<CommandFrame> OraclePursuitPolicy::plan(const Observation& obs,
                                                    const SimConfig& cfg) {
  const PursuitLaw law;
  const double dt = 1.0 / cfg.f_l;
  const double arrive = obs.time + cfg.effective_latency();
  auto first_tick_at_or_after = [&](double t) {
    return static_cast<std::int64_t>(std::ceil(t * cfg.f_l - kTimeEps));
  };
  const std::int64_t now_tick = first_tick_at_or_after(obs.time);
  const std::int64_t arrive_tick = first_tick_at_or_after(arrive);

  // Until the chunk lands the controller drains the queue, then holds.
  double agent = obs.agent;
  double held = obs.held_vx;
  std::size_t next = 0;
  for (std::int64_t i = now_tick; i < arrive_tick; ++i) {
    if (next < obs.pending_vx.size()) held = obs.pending_vx[next++];
    agent += held * dt;
  }
  std::int64_t tick = arrive_tick;
  if (!cfg.preempt) {
    for (; next < obs.pending_vx.size(); ++next, ++tick) agent += obs.pending_vx[next] * dt;
  }

  // The period of the target is known; position and velocity at the
  // observation fix its phase, so the prediction is harmonic.
  const double omega = 2.0 * std::numbers::pi / cfg.target_period;
  std::vector<CommandFrame> out;
  out.reserve(cfg.l_ac);
  for (std::size_t j = 0; j < cfg.l_ac; ++j, ++tick) {
    const double lead = static_cast<double>(tick) * dt - obs.time;
    const double c = std::cos(omega * lead);
    const double s = std::sin(omega * lead);
    const double pos = obs.target * c + obs.target_velocity / omega * s;
    const double vel = obs.target_velocity * c - obs.target * omega * s;
    const double v = std::clamp(vel + law.gain * (pos - agent), -law.max_speed, law.max_speed);
    agent += v * dt;
    out.push_back(pursuit_frame(v));
  }
  return out;
}

TrainedHeadPolicy::TrainedHeadPolicy(const PolicyHead& head, const Codec& codec,
                                     const FeatureProjector& features)
    : head_(head), codec_(codec), features_(features) {}

std::vector<CommandFrame> TrainedHeadPolicy::plan(const Observation& obs,
                                                  const SimConfig& cfg) {
  if (cfg.l_ac > codec_.config().chunk_len) {
    throw ConfigError("trained-head policy: l_ac " + std::to_string(cfg.l_ac) +
                      " exceeds the codec chunk length " +
                      std::to_string(codec_.config().chunk_len));
  }
  const std::size_t ctx = features_.config().context;
  Tensor raw({ctx, kCommandDims});
  // pad the front with the oldest known frame (or the idle command)
  const std::size_t have = obs.history.size();
  for (std::size_t i = 0; i < ctx; ++i) {
    CommandFrame f = pursuit_frame(0.0);
    if (have > 0) {
      const std::size_t from_end = ctx - 1 - i;
      f = from_end < have ? obs.history[have - 1 - from_end] : obs.history.front();
    }
    std::copy(f.begin(), f.end(), &raw[i * kCommandDims]);
  }
  const Tensor norm = normalize(raw, codec_.normalization());
  const auto feat = features_(norm, ctx - 1);
  const Tensor chunk = infer_chunk(head_, feat, codec_);
  std::vector<CommandFrame> out(cfg.l_ac);
  for (std::size_t j = 0; j < cfg.l_ac; ++j) {
    std::copy_n(&chunk[j * kCommandDims], kCommandDims, out[j].begin());
  }
  return out;
}

void ChunkBuffer::deposit(const std::vector<CommandFrame>& frames, double obs_time,
                          bool preempt) {
  if (preempt) {
    dropped_ += queue_.size();
    queue_.clear();
  }
  for (const auto& f : frames) queue_.push_back({f, obs_time});
  produced_ += frames.size();
}

std::vector<double> ChunkBuffer::pending_vx() const {
  std::vector<double> out;
  out.reserve(queue_.size());
  for (const auto& f : queue_) out.push_back(f.frame[kVx]);
  return out;
}

std::optional<BufferedFrame> ChunkBuffer::pop() {
  if (queue_.empty()) return std::nullopt;
  BufferedFrame f = queue_.front();
  queue_.pop_front();
  ++consumed_;
  return f;
}

SimTrace run_sim(const SimConfig& cfg, ChunkPolicy* policy) {
  cfg.validate();
  OraclePursuitPolicy oracle;
  if (policy == nullptr) {
    if (cfg.policy != PolicyKind::kOraclePursuit) {
      throw ConfigError("run_sim: trained-head policy requires a head and codec");
    }
    policy = &oracle;
  }
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> obs_noise(0.0, cfg.observation_noise);
  const double phase = 2.0 * std::numbers::pi * unit(rng);
  const double omega = 2.0 * std::numbers::pi / cfg.target_period;
  auto target_at = [&](double t) { return cfg.target_amplitude * std::sin(omega * t + phase); };
  auto target_vel = [&](double t) {
    return cfg.target_amplitude * omega * std::cos(omega * t + phase);
  };

  const std::size_t n = cfg.ticks();
  const double dt = 1.0 / cfg.f_l;
  const double latency = cfg.effective_latency();
  const double period = 1.0 / cfg.f_m;

  SimTrace trace;
  trace.ticks.reserve(n);
  ChunkBuffer buffer;
  std::deque<CommandFrame> history;
  CommandFrame held = pursuit_frame(0.0);
  double held_obs_time = 0.0;
  double agent = 0.0;
  bool warm = false;
  double warm_time = 0.0;

  // Policy state: at most one inference in flight.
  std::uint64_t job = 0;  // index of the next inference to start
  bool busy = false;
  double busy_until = 0.0;
  double job_obs_time = 0.0;
  std::vector<CommandFrame> job_frames;
  std::size_t completions = 0;

  auto observe = [&](double t) {
    Observation o;
    o.time = t;
    o.target = target_at(t) + (cfg.observation_noise > 0.0 ? obs_noise(rng) : 0.0);
    o.target_velocity = target_vel(t);
    o.agent = agent;
    o.history.assign(history.begin(), history.end());
    o.pending_vx = buffer.pending_vx();
    o.held_vx = held[kVx];
    return o;
  };
  // Runs every policy event scheduled at or before `now`; the policy acts
  // before the controller at equal times.
  auto run_policy_until = [&](double now) {
    for (;;) {
      if (busy && busy_until <= now + kTimeEps) {
        buffer.deposit(job_frames, job_obs_time, cfg.preempt);
        ++completions;
        if (!warm) {
          warm = true;
          warm_time = busy_until;
        }
        busy = false;
        continue;
      }
      if (busy) return;
      const double start = std::max(static_cast<double>(job) * period, busy_until);
      if (start > now + kTimeEps) return;
      const Observation obs = observe(start);
      job_frames = policy->plan(obs, cfg);
      if (job_frames.size() != cfg.l_ac) {
        throw Error("policy produced " + std::to_string(job_frames.size()) +
                    " frames, expected " + std::to_string(cfg.l_ac));
      }
      job_obs_time = start;
      busy_until = start + latency;
      busy = true;
      ++job;
    }
  };

  double sq_err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;
    run_policy_until(t);
    TickRecord r;
    r.time = t;
    r.target = target_at(t);
    r.agent = agent;
    r.warm = warm;
    if (auto f = buffer.pop()) {
      held = f->frame;
      held_obs_time = f->obs_time;
      r.fresh = true;
      trace.fresh_staleness.push_back(t - f->obs_time);
    } else {
      r.starved = warm;
    }
    r.action = held[kVx];
    r.staleness = warm ? t - held_obs_time : 0.0;
    r.depth = buffer.depth();
    r.produced = buffer.produced();
    r.consumed = buffer.consumed();
    r.dropped = buffer.dropped();
    const double e = r.target - agent;
    sq_err += e * e;
    if (r.fresh) {
      history.push_back(held);
      if (history.size() > kHistory) history.pop_front();
    }
    agent += held[kVx] * dt;
    trace.ticks.push_back(r);
  }

  SimSummary& s = trace.summary;
  s.config = cfg;
  s.ticks = n;
  s.completions = completions;
  s.launches = job;
  s.delivery_rate = static_cast<double>(cfg.l_ac) * static_cast<double>(job) / cfg.duration;
  s.warmup_time = warm_time;
  std::size_t warm_ticks = 0, starved = 0;
  double stale_sum = 0.0;
  for (const auto& r : trace.ticks) {
    if (!r.warm) continue;
    ++warm_ticks;
    starved += r.starved;
    stale_sum += r.staleness;
    s.max_staleness = std::max(s.max_staleness, r.staleness);
  }
  if (warm_ticks > 0) {
    s.starvation_fraction = static_cast<double>(starved) / static_cast<double>(warm_ticks);
    s.mean_staleness = stale_sum / static_cast<double>(warm_ticks);
  }
  s.tracking_rmse = std::sqrt(sq_err / static_cast<double>(n));
  return trace;
}

std::string SimSummary::to_kv() const {
  std::ostringstream os;
  os << "f_l=" << io::format_double(config.f_l) << '\n'
     << "f_m=" << io::format_double(config.f_m) << '\n'
     << "l_ac=" << config.l_ac << '\n'
     << "latency=" << io::format_double(config.effective_latency()) << '\n'
     << "policy=" << policy_kind_name(config.policy) << '\n'
     << "preempt=" << (config.preempt ? 1 : 0) << '\n'
     << "duration=" << io::format_double(config.duration) << '\n'
     << "seed=" << config.seed << '\n'
     << "ticks=" << ticks << '\n'
     << "launches=" << launches << '\n'
     << "completions=" << completions << '\n'
     << "delivery_rate=" << io::format_double(delivery_rate) << '\n'
     << "warmup_time=" << io::format_double(warmup_time) << '\n'
     << "starvation_fraction=" << io::format_double(starvation_fraction) << '\n'
     << "mean_staleness=" << io::format_double(mean_staleness) << '\n'
     << "max_staleness=" << io::format_double(max_staleness) << '\n'
     << "tracking_rmse=" << io::format_double(tracking_rmse) << '\n';
  return os.str();
}

std::string SimSummary::csv_header() {
  return "f_l,f_m,l_ac,latency,policy,preempt,duration,seed,ticks,launches,completions,"
         "delivery_rate,warmup_time,starvation_fraction,mean_staleness,max_staleness,"
         "tracking_rmse";
}

std::string SimSummary::to_csv_row() const {
  std::ostringstream os;
  os << io::format_double(config.f_l) << ',' << io::format_double(config.f_m) << ','
     << config.l_ac << ',' << io::format_double(config.effective_latency()) << ','
     << policy_kind_name(config.policy) << ',' << (config.preempt ? 1 : 0) << ','
     << io::format_double(config.duration) << ',' << config.seed << ',' << ticks << ','
     << launches << ',' << completions << ',' << io::format_double(delivery_rate) << ','
     << io::format_double(warmup_time) << ',' << io::format_double(starvation_fraction)
     << ',' << io::format_double(mean_staleness) << ','
     << io::format_double(max_staleness) << ',' << io::format_double(tracking_rmse);
  return os.str();
}

std::string SimTrace::to_csv() const {
  std::ostringstream os;
  os << "time,action,staleness,depth,produced,consumed,dropped,target,agent,warm,starved,"
        "fresh\n";
  for (const auto& r : ticks) {
    os << io::format_double(r.time) << ',' << io::format_double(r.action) << ','
       << io::format_double(r.staleness) << ',' << r.depth << ',' << r.produced << ','
       << r.consumed << ',' << r.dropped << ',' << io::format_double(r.target) << ','
       << io::format_double(r.agent) << ',' << r.warm << ',' << r.starved << ','
       << r.fresh << '\n';
  }
  return os.str();
}

std::vector<SimSummary> sweep(const std::vector<SimConfig>& configs) {
  if (configs.empty()) throw ConfigError("sweep: no configurations");
  std::vector<SimSummary> rows;
  rows.reserve(configs.size());
  for (const auto& c : configs) rows.push_back(run_sim(c).summary);
  return rows;
}

std::string sweep_csv(const std::vector<SimSummary>& rows) {
  std::string out = SimSummary::csv_header() + "\n";
  for (const auto& r : rows) out += r.to_csv_row() + "\n";
  return out;
}

std::string StalenessProfile::to_kv() const {
  std::ostringstream os;
  os << "samples=" << samples << '\n'
     << "mean=" << io::format_double(mean) << '\n'
     << "max=" << io::format_double(max) << '\n';
  for (std::size_t b = 0; b < counts.size(); ++b) {
    os << "bin[" << io::format_double(edges[b]) << ',' << io::format_double(edges[b + 1])
       << ")=" << counts[b] << '\n';
  }
  return os.str();
}

StalenessProfile staleness_profile(const SimTrace& trace, std::size_t bins) {
  if (trace.fresh_staleness.empty()) {
    throw Error("staleness_profile: trace executed no frames");
  }
  if (bins == 0) throw ConfigError("staleness_profile: bins must be >= 1");
  StalenessProfile p;
  p.samples = trace.fresh_staleness.size();
  double sum = 0.0;
  for (double s : trace.fresh_staleness) {
    p.max = std::max(p.max, s);
    sum += s;
  }
  p.mean = sum / static_cast<double>(p.samples);
  const double width = p.max > 0.0 ? p.max / static_cast<double>(bins) : 1.0;
  p.edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) p.edges[b] = width * static_cast<double>(b);
  p.counts.assign(bins, 0);
  for (double s : trace.fresh_staleness) {
    auto b = static_cast<std::size_t>(s / width);
    p.counts[std::min(b, bins - 1)]++;
  }
  return p;
}

}  // namespace acd
