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

#include "acd/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "acd/binary_io.hpp"
#include "acd/error.hpp"
#include "acd/optim.hpp"

namespace acd {

FeatureProjector::FeatureProjector(const FeatureConfig& cfg) : cfg_(cfg) {
  if (cfg_.width == 0 || cfg_.context == 0) {
    throw ConfigError("feature width and context must be >= 1");
  }
  std::mt19937_64 rng(cfg_.seed);
  projection_ = Tensor::randn({cfg_.width, cfg_.context * kCommandDims}, rng, 1.0);
}

std::vector<double> FeatureProjector::operator()(const Tensor& frames,
                                                 std::size_t start) const {
  if (frames.rank() != 2 || frames.dim(1) != kCommandDims) {
    throw DimensionError("features: expected [length x 12] frames, got " +
                         shape_str(frames.shape()));
  }
  if (start >= frames.dim(0)) throw IndexError("features: start beyond trajectory end");
  const std::size_t in = cfg_.context * kCommandDims;
  std::vector<double> window(in, 0.0);
  for (std::size_t j = 0; j < cfg_.context; ++j) {
    const std::size_t back = cfg_.context - 1 - j;
    if (back > start) continue;
    const std::size_t t = start - back;
    std::copy_n(&frames[t * kCommandDims], kCommandDims, &window[j * kCommandDims]);
  }
  const double inv = 1.0 / std::sqrt(static_cast<double>(in));
  std::vector<double> out(cfg_.width);
  for (std::size_t i = 0; i < cfg_.width; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < in; ++j) s += projection_[i * in + j] * window[j];
    out[i] = std::tanh(s * inv);
  }
  return out;
}

CodeIndices LabeledDataset::indices(std::size_t sample, std::size_t layers) const {
  if (sample >= size()) throw IndexError("labeled sample out of range");
  if (layers == 0 || groups % layers != 0) throw DimensionError("bad layer count");
  CodeIndices idx(groups / layers, layers);
  for (std::size_t g = 0; g < groups; ++g) {
    idx.at(g / layers, g % layers) = targets[sample * groups + g];
  }
  return idx;
}

LabeledDataset LabeledDataset::head(std::size_t count) const {
  count = std::min(count, size());
  LabeledDataset out;
  out.groups = groups;
  const std::size_t w = features.dim(1);
  std::vector<double> f(features.data().begin(),
                        features.data().begin() + static_cast<std::ptrdiff_t>(count * w));
  out.features = Tensor({count, w}, std::move(f));
  out.targets.assign(targets.begin(),
                     targets.begin() + static_cast<std::ptrdiff_t>(count * groups));
  out.chunks.assign(chunks.begin(), chunks.begin() + static_cast<std::ptrdiff_t>(count));
  return out;
}

LabeledDataset label_dataset(const Codec& codec, const Dataset& data,
                             const FeatureProjector& features,
                             std::size_t stride) {
  const CodecConfig& cfg = codec.config();
  if (stride == 0) throw ConfigError("label_dataset: stride must be >= 1");
  LabeledDataset out;
  out.groups = cfg.tokens_per_chunk();
  std::vector<double> feats;
  for (const auto& traj : data) {
    if (traj.length() < cfg.chunk_len) continue;
    const Tensor frames = normalize(traj.to_tensor(), codec.normalization());
    for (std::size_t s : chunk_starts(traj.length(), cfg.chunk_len, stride)) {
      const auto f = features(frames, s);
      feats.insert(feats.end(), f.begin(), f.end());
      std::vector<double> c(frames.data().begin() + static_cast<std::ptrdiff_t>(s * kCommandDims),
                            frames.data().begin() +
                                static_cast<std::ptrdiff_t>((s + cfg.chunk_len) * kCommandDims));
      out.chunks.emplace_back(Shape{cfg.chunk_len, kCommandDims}, std::move(c));
    }
  }
  if (out.chunks.empty()) {
    throw ConfigError("label_dataset: no trajectory holds a chunk of length " +
                      std::to_string(cfg.chunk_len));
  }
  const std::size_t width = features.config().width;
  out.features = Tensor({out.chunks.size(), width}, std::move(feats));
  out.targets.reserve(out.chunks.size() * out.groups);
  // batched through the frozen codec; quantize is row-independent
  constexpr std::size_t kBatch = 256;
  for (std::size_t lo = 0; lo < out.chunks.size(); lo += kBatch) {
    const std::size_t hi = std::min(out.chunks.size(), lo + kBatch);
    std::vector<Tensor> part(out.chunks.begin() + static_cast<std::ptrdiff_t>(lo),
                             out.chunks.begin() + static_cast<std::ptrdiff_t>(hi));
    const auto q = codec.quantize(codec.encode(stack_chunks(part)));
    const auto tok = q.indices.tokens();
    out.targets.insert(out.targets.end(), tok.begin(), tok.end());
  }
  return out;
}

PolicyHead::PolicyHead(const PolicyHeadConfig& cfg) : cfg_(cfg) {
  if (cfg_.feature_width == 0 || cfg_.hidden == 0 || cfg_.groups == 0 ||
      cfg_.codebook_size == 0) {
    throw ConfigError("policy head dimensions must be >= 1");
  }
  std::mt19937_64 rng(cfg_.seed);
  const std::size_t out = cfg_.groups * cfg_.codebook_size;
  w1_ = ag::Var(Tensor::randn({cfg_.hidden, cfg_.feature_width}, rng,
                              std::sqrt(2.0 / static_cast<double>(cfg_.feature_width))),
                true, "param");
  b1_ = ag::Var(Tensor({cfg_.hidden}), true, "param");
  w2_ = ag::Var(Tensor::randn({out, cfg_.hidden}, rng,
                              1.0 / std::sqrt(static_cast<double>(cfg_.hidden))),
                true, "param");
  b2_ = ag::Var(Tensor({out}), true, "param");
}

PolicyHead PolicyHead::for_codec(const Codec& codec, const FeatureConfig& features,
                                 std::size_t hidden, std::uint64_t seed) {
  PolicyHeadConfig c;
  c.feature_width = features.width;
  c.hidden = hidden;
  c.groups = codec.config().tokens_per_chunk();
  c.codebook_size = codec.config().codebook_size;
  c.seed = seed;
  return PolicyHead(c);
}

ag::Var PolicyHead::forward(const ag::Var& features) const {
  if (features.value().rank() != 2 || features.shape()[1] != cfg_.feature_width) {
    throw DimensionError("policy head: expected [B x " + std::to_string(cfg_.feature_width) +
                         "] features, got " + shape_str(features.shape()));
  }
  const std::size_t b = features.shape()[0];
  ag::Var h = ag::relu(ag::linear(features, w1_, b1_));
  ag::Var y = ag::linear(h, w2_, b2_);
  return ag::reshape(y, {b, cfg_.groups, cfg_.codebook_size});
}

Tensor PolicyHead::logits(const Tensor& features) const {
  ag::NoGradGuard guard;
  return forward(ag::Var(features)).value();
}

std::vector<std::int64_t> PolicyHead::predict(const Tensor& features) const {
  const Tensor l = logits(features);
  const std::size_t k = cfg_.codebook_size;
  const std::size_t rows = l.numel() / k;
  std::vector<std::int64_t> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = &l[r * k];
    out[r] = std::max_element(row, row + k) - row;  // first maximum wins ties
  }
  return out;
}

std::vector<NamedParam> PolicyHead::parameters() const {
  return {{"head.fc1.weight", w1_}, {"head.fc1.bias", b1_},
          {"head.fc2.weight", w2_}, {"head.fc2.bias", b2_}};
}

Container PolicyHead::to_container() const {
  Container c;
  c.kind = "policy";
  c.set("feature_width", std::to_string(cfg_.feature_width));
  c.set("hidden", std::to_string(cfg_.hidden));
  c.set("groups", std::to_string(cfg_.groups));
  c.set("codebook_size", std::to_string(cfg_.codebook_size));
  c.set("seed", std::to_string(cfg_.seed));
  for (const auto& p : parameters()) c.add_block(p.name, p.var.value());
  return c;
}

PolicyHead PolicyHead::from_container(const Container& c) {
  if (c.kind != "policy") {
    throw FormatError("checkpoint kind is '" + c.kind + "', expected 'policy'");
  }
  PolicyHeadConfig cfg;
  cfg.feature_width = io::parse_u64(c.get("feature_width"));
  cfg.hidden = io::parse_u64(c.get("hidden"));
  cfg.groups = io::parse_u64(c.get("groups"));
  cfg.codebook_size = io::parse_u64(c.get("codebook_size"));
  cfg.seed = io::parse_u64(c.get("seed"));
  PolicyHead head(cfg);
  for (auto& p : head.parameters()) {
    const Tensor& t = c.block(p.name);
    if (t.shape() != p.var.shape()) {
      throw FormatError("checkpoint block '" + p.name + "' has shape " + shape_str(t.shape()));
    }
    p.var.mutable_value() = t;
  }
  return head;
}

void PolicyHead::save(const std::filesystem::path& path) const {
  save_container(path, to_container());
}

PolicyHead PolicyHead::load(const std::filesystem::path& path) {
  return from_container(load_container(path));
}

ag::Var stage2_loss(const ag::Var& logits, std::span<const std::int64_t> targets) {
  if (logits.value().rank() != 3) {
    throw DimensionError("stage2_loss: expected [B x groups x K] logits, got " +
                         shape_str(logits.shape()));
  }
  return ag::cross_entropy_logits(logits, targets);
}

double token_accuracy(const PolicyHead& head, const LabeledDataset& data) {
  if (data.size() == 0) return 0.0;
  const auto pred = head.predict(data.features);
  if (pred.size() != data.targets.size()) {
    throw DimensionError("token_accuracy: head emits " + std::to_string(pred.size()) +
                         " tokens for " + std::to_string(data.targets.size()) + " targets");
  }
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == data.targets[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

namespace {

double batch_loss(const PolicyHead& head, const LabeledDataset& data) {
  ag::NoGradGuard guard;
  return stage2_loss(head.forward(ag::Var(data.features)), data.targets).value().item();
}

}  // namespace

PolicyTrainResult train_policy(PolicyHead& head, const LabeledDataset& data,
                               const PolicyTrainConfig& cfg,
                               const std::function<void(const PolicyRecord&)>& on_record) {
  if (data.size() == 0) throw ConfigError("train_policy: labeled dataset is empty");
  if (data.groups != head.config().groups) {
    throw ConfigError("train_policy: head emits " + std::to_string(head.config().groups) +
                      " groups but labels have " + std::to_string(data.groups));
  }
  AdamWConfig opt_cfg;
  opt_cfg.lr = cfg.lr;
  opt_cfg.weight_decay = cfg.weight_decay;
  AdamW opt(head.parameters(), opt_cfg);
  std::mt19937_64 rng(cfg.seed);
  const std::size_t m = data.size();
  const std::size_t w = data.features.dim(1);
  const bool full = cfg.batch_size == 0 || cfg.batch_size >= m;
  const std::size_t log_every = std::max<std::size_t>(1, cfg.log_every);

  PolicyTrainResult result;
  auto record = [&](std::int64_t step, double loss) {
    PolicyRecord r{step, loss, token_accuracy(head, data)};
    if (on_record) on_record(r);
    result.history.push_back(r);
    result.final_accuracy = r.accuracy;
  };
  record(0, batch_loss(head, data));

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::uniform_int_distribution<std::size_t> pick(0, m - 1);
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    ag::Var logits;
    double loss_value = 0.0;
    ag::Var loss;
    if (full) {
      logits = head.forward(ag::Var(data.features));
      loss = stage2_loss(logits, data.targets);
    } else {
      const std::size_t b = cfg.batch_size;
      Tensor f({b, w});
      std::vector<std::int64_t> t(b * data.groups);
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t s = pick(rng);
        std::copy_n(&data.features[s * w], w, &f[i * w]);
        std::copy_n(&data.targets[s * data.groups], data.groups, &t[i * data.groups]);
      }
      logits = head.forward(ag::Var(std::move(f)));
      loss = stage2_loss(logits, t);
    }
    loss_value = loss.value().item();
    if (!std::isfinite(loss_value)) {
      throw NumericError("train_policy: non-finite loss at step " + std::to_string(step));
    }
    opt.zero_grad();
    ag::backward(loss);
    opt.step();
    if (step % log_every == 0 || step == cfg.steps) {
      record(static_cast<std::int64_t>(step), loss_value);
      if (cfg.stop_at_accuracy > 0.0 && result.final_accuracy >= cfg.stop_at_accuracy) break;
    }
  }
  return result;
}

Tensor infer_chunk(const PolicyHead& head, std::span<const double> feature,
                   const Codec& codec) {
  const auto& hc = head.config();
  if (feature.size() != hc.feature_width) {
    throw DimensionError("infer_chunk: feature width " + std::to_string(feature.size()) +
                         " != head width " + std::to_string(hc.feature_width));
  }
  if (hc.groups != codec.config().tokens_per_chunk() ||
      hc.codebook_size != codec.config().codebook_size) {
    throw ConfigError("infer_chunk: head token layout does not match the codec");
  }
  const Tensor f({1, hc.feature_width}, std::vector<double>(feature.begin(), feature.end()));
  const auto tokens = head.predict(f);
  const std::size_t layers = codec.config().num_quantizers;
  CodeIndices idx(hc.groups / layers, layers);
  for (std::size_t g = 0; g < hc.groups; ++g) idx.at(g / layers, g % layers) = tokens[g];
  return denormalize(codec.detokenize(idx), codec.normalization());
}

}  // namespace acd
