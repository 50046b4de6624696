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

#include "acd/codec.hpp"

#include <algorithm>
#include <cmath>

#include "acd/binary_io.hpp"
#include "acd/error.hpp"

namespace acd {

CodecConfig CodecConfig::full_size() {
  CodecConfig c;
  c.latent_dim = 512;
  c.codebook_size = 512;
  return c;
}

std::size_t CodecConfig::compressed_len() const {
  return (chunk_len + pool_factor - 1) / pool_factor;
}

void CodecConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("codec config: " + m); };
  if (chunk_len == 0) fail("chunk_len must be >= 1");
  if (encoder_layers == 0) fail("encoder_layers must be >= 1");
  if (kernel_size == 0) fail("kernel_size must be >= 1");
  // Temporal compression comes from pooling; strided encoder convs would
  // need a matching decoder upsampling schedule.
  if (stride != 1) fail("only encoder stride 1 is supported");
  if (pool_factor == 0) fail("pool_factor must be >= 1");
  if (hidden == 0 || latent_dim == 0) fail("hidden and latent_dim must be >= 1");
  if (codebook_size == 0) fail("codebook_size must be >= 1");
  if (num_quantizers == 0) fail("num_quantizers must be >= 1");
  if (!(beta >= 0.0)) fail("beta must be >= 0");
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) fail("ema_decay must lie in (0, 1)");
  if (dead_code_window == 0) fail("dead_code_window must be >= 1");
  if (!(lr >= 0.0)) fail("lr must be >= 0");
  if (batch_size == 0) fail("batch_size must be >= 1");
}

void CodecConfig::to_container(Container& c) const {
  c.set("chunk_len", std::to_string(chunk_len));
  c.set("encoder_layers", std::to_string(encoder_layers));
  c.set("kernel_size", std::to_string(kernel_size));
  c.set("stride", std::to_string(stride));
  c.set("pool_factor", std::to_string(pool_factor));
  c.set("hidden", std::to_string(hidden));
  c.set("latent_dim", std::to_string(latent_dim));
  c.set("codebook_size", std::to_string(codebook_size));
  c.set("num_quantizers", std::to_string(num_quantizers));
  c.set("beta", io::format_double(beta));
  c.set("ema_decay", io::format_double(ema_decay));
  c.set("dead_code_threshold", io::format_double(dead_code_threshold));
  c.set("dead_code_window", std::to_string(dead_code_window));
  c.set("lr", io::format_double(lr));
  c.set("weight_decay", io::format_double(weight_decay));
  c.set("batch_size", std::to_string(batch_size));
  c.set("steps", std::to_string(steps));
  c.set("seed", std::to_string(seed));
}

CodecConfig CodecConfig::from_container(const Container& c) {
  CodecConfig cfg;
  auto u = [&](const char* k) { return static_cast<std::size_t>(io::parse_u64(c.get(k))); };
  auto d = [&](const char* k) { return io::parse_double(c.get(k)); };
  cfg.chunk_len = u("chunk_len");
  cfg.encoder_layers = u("encoder_layers");
  cfg.kernel_size = u("kernel_size");
  cfg.stride = u("stride");
  cfg.pool_factor = u("pool_factor");
  cfg.hidden = u("hidden");
  cfg.latent_dim = u("latent_dim");
  cfg.codebook_size = u("codebook_size");
  cfg.num_quantizers = u("num_quantizers");
  cfg.beta = d("beta");
  cfg.ema_decay = d("ema_decay");
  cfg.dead_code_threshold = d("dead_code_threshold");
  cfg.dead_code_window = u("dead_code_window");
  cfg.lr = d("lr");
  cfg.weight_decay = d("weight_decay");
  cfg.batch_size = u("batch_size");
  cfg.steps = u("steps");
  cfg.seed = io::parse_u64(c.get("seed"));
  return cfg;
}

namespace {

ag::Var param(Tensor t) { return ag::Var(std::move(t), true, "param"); }

ag::Var conv_weight(std::size_t a, std::size_t b, std::size_t k,
                    std::size_t fan_in, std::mt19937_64& rng) {
  return param(Tensor::randn({a, b, k}, rng, 1.0 / std::sqrt(static_cast<double>(fan_in))));
}

}  // namespace

Codec::Codec(const CodecConfig& config) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  const std::size_t k = config_.kernel_size;
  const std::size_t h = config_.hidden;
  const std::size_t d = config_.latent_dim;

  for (std::size_t i = 0; i < config_.encoder_layers; ++i) {
    const std::size_t cin = i == 0 ? kCommandDims : h;
    const std::size_t cout = i + 1 == config_.encoder_layers ? d : h;
    encoder_.push_back({conv_weight(cout, cin, k, cin * k, rng), param(Tensor({cout}))});
  }
  const std::size_t pf = config_.pool_factor;
  upsample_ = {conv_weight(d, h, pf, d, rng), param(Tensor({h}))};
  for (std::size_t i = 0; i < config_.encoder_layers; ++i) {
    const std::size_t cout = i + 1 == config_.encoder_layers ? kCommandDims : h;
    decoder_.push_back({conv_weight(cout, h, k, h * k, rng), param(Tensor({cout}))});
  }
  codebook_ = Codebook(config_.num_quantizers, config_.codebook_size, d);
  for (std::size_t i = 0; i < kCommandDims; ++i) {
    norm_.min[i] = -1.0;
    norm_.max[i] = 1.0;
  }
}

Codec Codec::clone() const { return from_container(to_container()); }

ag::Var Codec::encode(const ag::Var& x) const {
  if (x.value().rank() != 3 || x.shape()[1] != config_.chunk_len ||
      x.shape()[2] != kCommandDims) {
    throw DimensionError("encode: expected [B x " + std::to_string(config_.chunk_len) +
                         " x 12] chunks, got " + shape_str(x.shape()));
  }
  ag::Var h = x;
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    h = ag::conv1d(h, encoder_[i].weight, encoder_[i].bias, config_.stride,
                   ag::Padding::kCausal);
    if (i + 1 < encoder_.size()) h = ag::gelu(h);
  }
  return ag::avg_pool_time(h, config_.pool_factor);
}

ag::Var Codec::decode(const ag::Var& z) const {
  const std::size_t c = config_.compressed_len();
  if (z.value().rank() != 3 || z.shape()[1] != c || z.shape()[2] != config_.latent_dim) {
    throw DimensionError("decode: expected [B x " + std::to_string(c) + " x " +
                         std::to_string(config_.latent_dim) + "] latents, got " +
                         shape_str(z.shape()));
  }
  ag::Var h = ag::conv_transpose1d(z, upsample_.weight, upsample_.bias,
                                   config_.pool_factor);
  h = ag::gelu(ag::crop_time(h, config_.chunk_len));
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    h = ag::conv1d(h, decoder_[i].weight, decoder_[i].bias, 1, ag::Padding::kCausal);
    if (i + 1 < decoder_.size()) h = ag::gelu(h);
  }
  return h;
}

namespace {

Tensor as_batch(const Tensor& t) {
  if (t.rank() == 2) return t.reshaped({1, t.dim(0), t.dim(1)});
  return t;
}

}  // namespace

Tensor Codec::encode(const Tensor& chunk) const {
  ag::NoGradGuard guard;
  if (chunk.rank() != 2 && chunk.rank() != 3) {
    throw DimensionError("encode: expected [N x 12] or [B x N x 12], got " +
                         shape_str(chunk.shape()));
  }
  Tensor z = encode(ag::Var(as_batch(chunk))).value();
  if (chunk.rank() == 2) return z.reshaped({z.dim(1), z.dim(2)});
  return z;
}

Tensor Codec::decode(const Tensor& quantized) const {
  ag::NoGradGuard guard;
  if (quantized.rank() != 2 && quantized.rank() != 3) {
    throw DimensionError("decode: expected [C x D] or [B x C x D], got " +
                         shape_str(quantized.shape()));
  }
  Tensor y = decode(ag::Var(as_batch(quantized))).value();
  if (quantized.rank() == 2) return y.reshaped({y.dim(1), y.dim(2)});
  return y;
}

QuantizeResult Codec::quantize(const Tensor& latent, std::size_t layers) const {
  return acd::quantize(latent, codebook_, layers);
}

Tensor Codec::dequantize(const CodeIndices& indices) const {
  return acd::dequantize(indices, codebook_);
}

Tensor Codec::reconstruct(const Tensor& chunks, std::size_t layers) const {
  const Tensor z = encode(chunks);
  const auto q = quantize(z, layers);
  return decode(q.quantized);
}

CodeIndices Codec::tokenize(const Tensor& chunk) const {
  if (chunk.rank() != 2) {
    throw DimensionError("tokenize: expected one [N x 12] chunk, got " +
                         shape_str(chunk.shape()));
  }
  return quantize(encode(chunk)).indices;
}

Tensor Codec::detokenize(const CodeIndices& indices) const {
  if (indices.positions() != config_.compressed_len() ||
      indices.layers() != config_.num_quantizers) {
    throw DimensionError("detokenize: expected " + std::to_string(config_.compressed_len()) +
                         " x " + std::to_string(config_.num_quantizers) + " indices");
  }
  return decode(dequantize(indices));
}

std::vector<NamedParam> Codec::encoder_params() const {
  std::vector<NamedParam> out;
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    out.push_back({"encoder.conv" + std::to_string(i) + ".weight", encoder_[i].weight});
    out.push_back({"encoder.conv" + std::to_string(i) + ".bias", encoder_[i].bias});
  }
  return out;
}

std::vector<NamedParam> Codec::decoder_params() const {
  std::vector<NamedParam> out;
  out.push_back({"decoder.upsample.weight", upsample_.weight});
  out.push_back({"decoder.upsample.bias", upsample_.bias});
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    out.push_back({"decoder.conv" + std::to_string(i) + ".weight", decoder_[i].weight});
    out.push_back({"decoder.conv" + std::to_string(i) + ".bias", decoder_[i].bias});
  }
  return out;
}

std::vector<NamedParam> Codec::parameters() const {
  auto out = encoder_params();
  for (auto& p : decoder_params()) out.push_back(std::move(p));
  return out;
}

Container Codec::to_container() const {
  Container c;
  c.kind = "codec";
  config_.to_container(c);
  c.set("train.steps", std::to_string(meta_.steps));
  c.set("train.final_rec", io::format_double(meta_.final_rec));
  c.set("train.final_com", io::format_double(meta_.final_com));
  c.set("train.final_total", io::format_double(meta_.final_total));
  c.set("codebook.window_steps", std::to_string(codebook_.window_steps()));
  std::string names;
  for (std::size_t d = 0; d < kCommandDims; ++d) {
    if (d) names += ',';
    names += kCommandNames[d];
  }
  c.set("norm.dims", names);
  for (const auto& p : parameters()) c.add_block(p.name, p.var.value());
  for (std::size_t i = 0; i < codebook_.num_layers(); ++i) {
    c.add_block("codebook.layer" + std::to_string(i), codebook_.layer(i));
  }
  c.add_block("codebook.ema_count", codebook_.ema_count());
  c.add_block("codebook.ema_sum", codebook_.ema_sum());
  c.add_block("codebook.window_usage", codebook_.window_usage());
  Tensor mn({kCommandDims}), mx({kCommandDims}), cst({kCommandDims});
  for (std::size_t d = 0; d < kCommandDims; ++d) {
    mn[d] = norm_.min[d];
    mx[d] = norm_.max[d];
    cst[d] = norm_.constant[d] ? 1.0 : 0.0;
  }
  c.add_block("norm.min", mn);
  c.add_block("norm.max", mx);
  c.add_block("norm.constant", cst);
  return c;
}

Codec Codec::from_container(const Container& c) {
  if (c.kind != "codec") {
    throw FormatError("checkpoint kind is '" + c.kind + "', expected 'codec'");
  }
  Codec codec(CodecConfig::from_container(c));
  for (auto& p : codec.parameters()) {
    const Tensor& t = c.block(p.name);
    if (t.shape() != p.var.shape()) {
      throw FormatError("checkpoint block '" + p.name + "' has shape " +
                        shape_str(t.shape()) + ", expected " + shape_str(p.var.shape()));
    }
    p.var.mutable_value() = t;
  }
  auto& cb = codec.codebook_;
  auto load_exact = [&](const std::string& name, Tensor& dst) {
    const Tensor& t = c.block(name);
    if (t.shape() != dst.shape()) {
      throw FormatError("checkpoint block '" + name + "' has shape " + shape_str(t.shape()));
    }
    dst = t;
  };
  for (std::size_t i = 0; i < cb.num_layers(); ++i) {
    load_exact("codebook.layer" + std::to_string(i), cb.layer(i));
  }
  load_exact("codebook.ema_count", cb.ema_count());
  load_exact("codebook.ema_sum", cb.ema_sum());
  load_exact("codebook.window_usage", cb.window_usage());
  cb.set_window_steps(static_cast<std::int64_t>(io::parse_u64(c.get("codebook.window_steps"))));
  const Tensor& mn = c.block("norm.min");
  const Tensor& mx = c.block("norm.max");
  const Tensor& cst = c.block("norm.constant");
  if (mn.numel() != kCommandDims || mx.numel() != kCommandDims || cst.numel() != kCommandDims) {
    throw FormatError("checkpoint normalization blocks must have 12 entries");
  }
  for (std::size_t d = 0; d < kCommandDims; ++d) {
    codec.norm_.min[d] = mn[d];
    codec.norm_.max[d] = mx[d];
    codec.norm_.constant[d] = cst[d] != 0.0;
  }
  codec.meta_.steps = static_cast<std::int64_t>(io::parse_u64(c.get("train.steps")));
  codec.meta_.final_rec = io::parse_double(c.get("train.final_rec"));
  codec.meta_.final_com = io::parse_double(c.get("train.final_com"));
  codec.meta_.final_total = io::parse_double(c.get("train.final_total"));
  return codec;
}

void Codec::save(const std::filesystem::path& path) const {
  save_container(path, to_container());
}

Codec Codec::load(const std::filesystem::path& path) {
  return from_container(load_container(path));
}

bool Codec::same_state(const Codec& other) const {
  const Container a = to_container();
  const Container b = other.to_container();
  if (a.kind != b.kind || a.meta != b.meta || a.blocks.size() != b.blocks.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.blocks.size(); ++i) {
    if (a.blocks[i].first != b.blocks[i].first ||
        !bitwise_equal(a.blocks[i].second, b.blocks[i].second)) {
      return false;
    }
  }
  return true;
}

Stage1Loss stage1_loss(const ag::Var& chunk, const ag::Var& reconstruction,
                       const ag::Var& latent, const Tensor& quantized,
                       double beta) {
  require_same_shape(chunk.value(), reconstruction.value(), "stage1_loss reconstruction");
  require_same_shape(latent.value(), quantized, "stage1_loss latent");
  Stage1Loss out;
  out.rec = ag::mse(reconstruction, chunk);
  out.com = ag::mse(latent, ag::Var(quantized, false, "stop_gradient"));
  out.total = ag::add(out.rec, ag::scale(out.com, beta));
  return out;
}

Tensor stack_chunks(const std::vector<Tensor>& chunks) {
  if (chunks.empty()) throw DimensionError("stack_chunks: no chunks");
  const Shape& s = chunks.front().shape();
  Shape out_shape{chunks.size()};
  out_shape.insert(out_shape.end(), s.begin(), s.end());
  Tensor out(out_shape);
  const std::size_t n = chunks.front().numel();
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    if (chunks[i].shape() != s) {
      throw DimensionError("stack_chunks: chunk " + std::to_string(i) + " has shape " +
                           shape_str(chunks[i].shape()) + ", expected " + shape_str(s));
    }
    std::copy(chunks[i].data().begin(), chunks[i].data().end(), &out[i * n]);
  }
  return out;
}

std::vector<Tensor> dataset_chunks(const Dataset& data,
                                   const NormalizationStats& stats,
                                   std::size_t n, std::size_t stride) {
  std::vector<Tensor> out;
  for (const auto& traj : data) {
    for (auto& c : chunk(traj, n, stride)) out.push_back(normalize(c, stats));
  }
  return out;
}

std::vector<TrainRecord> train_codec_inplace(Codec& codec,
                                             const std::vector<Tensor>& chunks,
                                             const TrainOptions& options) {
  const CodecConfig& cfg = codec.config();
  if (chunks.empty()) throw ConfigError("train_codec: dataset is empty");
  for (const auto& c : chunks) {
    if (c.rank() != 2 || c.dim(0) != cfg.chunk_len || c.dim(1) != kCommandDims) {
      throw DimensionError("train_codec: chunk of shape " + shape_str(c.shape()) +
                           " does not match chunk length " + std::to_string(cfg.chunk_len));
    }
  }
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_int_distribution<std::size_t> pick(0, chunks.size() - 1);
  AdamWConfig opt_cfg;
  opt_cfg.lr = cfg.lr;
  opt_cfg.weight_decay = cfg.weight_decay;
  AdamW opt(codec.parameters(), opt_cfg);
  EmaConfig ema{cfg.ema_decay, 1e-5, cfg.dead_code_threshold,
                static_cast<std::int64_t>(cfg.dead_code_window)};

  const std::size_t total_steps = cfg.steps;
  if (total_steps > 0 && codec.meta().steps == 0) {
    // data-dependent codebook initialization
    const std::size_t n = std::min<std::size_t>(chunks.size(), 1024);
    std::vector<Tensor> sample;
    sample.reserve(n);
    for (std::size_t i = 0; i < n; ++i) sample.push_back(chunks[pick(rng)]);
    init_codebook_from_latents(codec.codebook(), codec.encode(stack_chunks(sample)), rng);
  }

  std::vector<TrainRecord> history;
  const std::size_t layers = cfg.num_quantizers;
  std::vector<std::vector<double>> usage(layers, std::vector<double>(cfg.codebook_size, 0.0));
  double acc_rec = 0.0, acc_com = 0.0, acc_total = 0.0;
  std::size_t acc_n = 0, acc_reseeded = 0;
  TrainingMeta meta = codec.meta();
  Codec last_good = codec.clone();

  std::vector<Tensor> batch(cfg.batch_size);
  for (std::size_t step = 1; step <= total_steps; ++step) {
    for (auto& b : batch) b = chunks[pick(rng)];
    ag::Var x(stack_chunks(batch));
    ag::Var z = codec.encode(x);
    auto q = codec.quantize(z.value());
    ag::Var zq = ag::straight_through(z, q.quantized);
    ag::Var recon = codec.decode(zq);
    auto loss = stage1_loss(x, recon, z, q.quantized, cfg.beta);
    const double total = loss.total.value().item();
    if (!std::isfinite(total)) {
      throw TrainingAborted("train_codec: non-finite loss at step " +
                                std::to_string(meta.steps + 1),
                            meta.steps + 1, std::move(last_good));
    }
    opt.zero_grad();
    ag::backward(loss.total);
    try {
      opt.step();
    } catch (const NumericError& e) {
      throw TrainingAborted(std::string(e.what()), meta.steps + 1, std::move(last_good));
    }
    auto st = codebook_update_ema(codec.codebook(), q, ema, rng);

    ++meta.steps;
    meta.final_rec = loss.rec.value().item();
    meta.final_com = loss.com.value().item();
    meta.final_total = total;
    codec.set_meta(meta);

    acc_rec += meta.final_rec;
    acc_com += meta.final_com;
    acc_total += total;
    ++acc_n;
    for (std::size_t i = 0; i < layers; ++i) {
      acc_reseeded += st.reseeded[i];
      for (std::size_t k = 0; k < cfg.codebook_size; ++k) {
        usage[i][k] += static_cast<double>(st.counts[i][k]);
      }
    }
    if (step % options.log_every == 0 || step == total_steps) {
      TrainRecord r;
      r.step = meta.steps;
      r.rec = acc_rec / static_cast<double>(acc_n);
      r.com = acc_com / static_cast<double>(acc_n);
      r.total = acc_total / static_cast<double>(acc_n);
      r.reseeded = acc_reseeded;
      for (auto& u : usage) {
        r.perplexity.push_back(metrics::perplexity(u));
        std::fill(u.begin(), u.end(), 0.0);
      }
      acc_rec = acc_com = acc_total = 0.0;
      acc_n = acc_reseeded = 0;
      if (options.on_record) options.on_record(r);
      history.push_back(std::move(r));
      last_good = codec.clone();
    }
  }
  return history;
}

CodecTrainResult train_codec(const std::vector<Tensor>& chunks,
                             const NormalizationStats& stats,
                             const CodecConfig& config,
                             const TrainOptions& options) {
  CodecTrainResult result{Codec(config), {}};
  result.codec.set_normalization(stats);
  result.history = train_codec_inplace(result.codec, chunks, options);
  return result;
}

metrics::ReconstructionReport evaluate_codec(const Codec& codec,
                                             const std::vector<Tensor>& chunks,
                                             std::size_t batch) {
  if (chunks.empty()) throw ConfigError("evaluate_codec: no chunks");
  const std::size_t n = chunks.front().numel();
  Tensor all = stack_chunks(chunks);
  Tensor recon(all.shape());
  const std::size_t layers = codec.config().num_quantizers;
  std::vector<std::vector<double>> usage(layers,
                                         std::vector<double>(codec.config().codebook_size, 0.0));
  for (std::size_t lo = 0; lo < chunks.size(); lo += batch) {
    const std::size_t hi = std::min(chunks.size(), lo + batch);
    std::vector<Tensor> part(chunks.begin() + static_cast<std::ptrdiff_t>(lo),
                             chunks.begin() + static_cast<std::ptrdiff_t>(hi));
    const Tensor z = codec.encode(stack_chunks(part));
    const auto q = codec.quantize(z);
    const Tensor y = codec.decode(q.quantized);
    std::copy(y.data().begin(), y.data().end(), &recon[lo * n]);
    for (std::size_t r = 0; r < q.indices.positions(); ++r) {
      for (std::size_t i = 0; i < layers; ++i) {
        usage[i][static_cast<std::size_t>(q.indices.at(r, i))] += 1.0;
      }
    }
  }
  // metrics over [frames x 12] with frames = chunks * N
  const Tensor x2 = all.reshaped({all.numel() / kCommandDims, kCommandDims});
  const Tensor y2 = recon.reshaped({recon.numel() / kCommandDims, kCommandDims});
  auto report = metrics::make_report(x2, y2, metrics::kNormalizedPeak);
  for (const auto& u : usage) report.perplexity.push_back(metrics::perplexity(u));
  return report;
}

}  // namespace acd
