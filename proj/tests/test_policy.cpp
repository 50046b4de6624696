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
#include <limits>
#include <random>
#include <sstream>

#include "acd/error.hpp"
#include "acd/policy.hpp"
#include "support/testing.hpp"

using namespace acd;
using acd::testing::rand_tensor;

namespace {

struct Fixture {
  Dataset data;
  Codec codec;
  FeatureProjector features;
};

Fixture make_fixture() {
  CodecConfig cfg;
  cfg.hidden = 8;
  cfg.latent_dim = 4;
  cfg.codebook_size = 16;
  cfg.batch_size = 16;
  cfg.steps = 100;
  cfg.seed = 1;
  auto data = generate_synthetic(SyntheticKind::kSineMixture, 20, 60, 50.0, 5);
  const auto stats = fit_normalization(data);
  auto res = train_codec(dataset_chunks(data, stats, cfg.chunk_len, 5), stats, cfg);
  return {std::move(data), std::move(res.codec), FeatureProjector()};
}

const Fixture& fixture() {
  static const Fixture f = make_fixture();
  return f;
}

}  // namespace

TEST_CASE("feature projector windows the past and zero-pads before the start") {
  FeatureConfig fc;
  fc.width = 5;
  fc.context = 3;
  const FeatureProjector p(fc);
  std::mt19937_64 rng(1);
  const Tensor frames = rand_tensor({6, kCommandDims}, rng);
  const auto f = p(frames, 4);
  CHECK(f.size() == 5);
  for (double v : f) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }
  // frames after `start` do not influence the feature
  Tensor future = frames;
  future[5 * kCommandDims] += 3.0;
  CHECK(p(future, 4) == f);
  // at start 0 only frame 0 matters
  Tensor first_only({1, kCommandDims});
  std::copy_n(&frames[0], kCommandDims, &first_only[0]);
  CHECK(p(first_only, 0) == p(frames, 0));
  CHECK(FeatureProjector(fc)(frames, 2) == p(frames, 2));
  CHECK_THROWS_AS(p(frames, 6), IndexError);
}

TEST_CASE("labels are deterministic, in range and grouped time-major") {
  const auto& fx = fixture();
  const auto a = label_dataset(fx.codec, fx.data, fx.features, 5);
  const auto b = label_dataset(fx.codec, fx.data, fx.features, 5);
  CHECK(a.targets == b.targets);
  CHECK(bitwise_equal(a.features, b.features));
  CHECK(a.groups == 4);
  CHECK(a.targets.size() == a.size() * 4);
  CHECK(a.size() == 20 * ((60 - 10) / 5 + 1));
  for (auto t : a.targets) {
    CHECK(t >= 0);
    CHECK(t < 16);
  }
  for (std::size_t s = 0; s < a.size(); s += 17) {
    CHECK(a.indices(s, 2) == fx.codec.tokenize(a.chunks[s]));
  }
  // identical chunks get identical labels
  Dataset twice{fx.data[0], fx.data[0]};
  const auto t = label_dataset(fx.codec, twice, fx.features, 5);
  const std::size_t half = t.size() / 2;
  for (std::size_t i = 0; i < half * 4; ++i) CHECK(t.targets[i] == t.targets[half * 4 + i]);

  Dataset short_data(1);
  short_data[0].frames.resize(5);
  CHECK_THROWS_AS(label_dataset(fx.codec, short_data, fx.features, 1), ConfigError);
  CHECK(a.head(7).size() == 7);
  CHECK(a.head(7).targets.size() == 28);
}

TEST_CASE("stage-2 loss closed forms and oracle") {
  const std::size_t K = 8;
  const std::vector<std::int64_t> targets{3, 0, 7, 5};
  CHECK(stage2_loss(ag::Var(Tensor({2, 2, K})), targets).value().item() ==
        doctest::Approx(std::log(8.0)).epsilon(1e-14));

  Tensor sharp({2, 2, K}, -50.0);
  for (std::size_t g = 0; g < 4; ++g) sharp[g * K + targets[g]] = 50.0;
  CHECK(stage2_loss(ag::Var(sharp), targets).value().item() < 1e-30);

  std::mt19937_64 rng(2);
  const Tensor l = rand_tensor({2, 2, K}, rng, -3.0, 3.0);
  double want = 0.0;
  for (std::size_t g = 0; g < 4; ++g) {
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(l[g * K + k]);
    want += (std::log(z) - l[g * K + targets[g]]) / 4.0;
  }
  CHECK(stage2_loss(ag::Var(l), targets).value().item() == doctest::Approx(want).epsilon(1e-13));
  CHECK_THROWS_AS(stage2_loss(ag::Var(l), std::vector<std::int64_t>{1, 2}), DimensionError);
  CHECK_THROWS_AS(stage2_loss(ag::Var(Tensor({4, K})), targets), DimensionError);
}

TEST_CASE("head emits one logit group per token") {
  const auto& fx = fixture();
  const auto head = PolicyHead::for_codec(fx.codec, fx.features.config(), 32, 0);
  const Tensor logits = head.logits(Tensor({3, 16}));
  CHECK(logits.shape() == Shape{3, 4, 16});
  CHECK(head.predict(Tensor({3, 16})).size() == 12);
  CHECK_THROWS_AS(head.logits(Tensor({3, 15})), DimensionError);
}

TEST_CASE("memorizes a small deterministic dataset and leaves the codec frozen") {
  const auto& fx = fixture();
  const std::string before = [&] {
    std::stringstream ss;
    save_container(ss, fx.codec.to_container());
    return ss.str();
  }();
  const auto data = label_dataset(fx.codec, fx.data, fx.features, 5).head(60);
  auto head = PolicyHead::for_codec(fx.codec, fx.features.config(), 128, 0);
  PolicyTrainConfig cfg;
  cfg.steps = 1500;
  const auto res = train_policy(head, data, cfg);
  CHECK(res.history.front().step == 0);
  CHECK(res.final_accuracy >= 0.99);
  std::stringstream after;
  save_container(after, fx.codec.to_container());
  CHECK(after.str() == before);

  // argmax hits the label, so inference equals the codec's own reconstruction
  for (std::size_t s = 0; s < data.size(); ++s) {
    std::span<const double> f(&data.features[s * 16], 16);
    const Tensor want = denormalize(fx.codec.reconstruct(data.chunks[s]), fx.codec.normalization());
    const Tensor got = infer_chunk(head, f, fx.codec);
    if (head.predict(Tensor({1, 16}, {f.begin(), f.end()})) ==
        std::vector<std::int64_t>(data.targets.begin() + s * 4, data.targets.begin() + s * 4 + 4)) {
      CHECK(bitwise_equal(got, want));
    }
  }
}

TEST_CASE("random labels stay near chance on held-out samples") {
  const auto& fx = fixture();
  auto all = label_dataset(fx.codec, fx.data, fx.features, 1);
  std::mt19937_64 rng(3);
  for (auto& t : all.targets) t = static_cast<std::int64_t>(rng() % 16);
  const std::size_t split = all.size() * 3 / 4;
  const auto train = all.head(split);
  LabeledDataset held;
  held.groups = all.groups;
  const std::size_t n = all.size() - split;
  held.features = Tensor({n, 16}, std::vector<double>(all.features.data().begin() + split * 16,
                                                      all.features.data().end()));
  held.targets.assign(all.targets.begin() + split * 4, all.targets.end());
  held.chunks.assign(all.chunks.begin() + split, all.chunks.end());
  auto head = PolicyHead::for_codec(fx.codec, fx.features.config(), 64, 1);
  PolicyTrainConfig cfg;
  cfg.steps = 300;
  train_policy(head, train, cfg);
  const double acc = token_accuracy(head, held);
  INFO("held-out accuracy " << acc << " over " << held.targets.size() << " tokens");
  CHECK(acc < 2.0 / 16.0);
}

TEST_CASE("lr 0 keeps accuracy at its initial value") {
  const auto& fx = fixture();
  const auto data = label_dataset(fx.codec, fx.data, fx.features, 5).head(40);
  auto head = PolicyHead::for_codec(fx.codec, fx.features.config(), 32, 2);
  PolicyTrainConfig cfg;
  cfg.lr = 0.0;
  cfg.steps = 100;
  cfg.log_every = 25;
  const auto res = train_policy(head, data, cfg);
  REQUIRE(res.history.size() == 5);
  for (const auto& r : res.history) CHECK(r.accuracy == res.history[0].accuracy);
}

TEST_CASE("minibatch training is deterministic per seed and early stop works") {
  const auto& fx = fixture();
  const auto data = label_dataset(fx.codec, fx.data, fx.features, 5).head(40);
  auto run = [&] {
    auto head = PolicyHead::for_codec(fx.codec, fx.features.config(), 32, 4);
    PolicyTrainConfig cfg;
    cfg.steps = 2000;
    cfg.batch_size = 8;
    cfg.seed = 9;
    cfg.lr = 3e-3;
    cfg.stop_at_accuracy = 0.5;
    return train_policy(head, data, cfg).history;
  };
  const auto a = run(), b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].loss == b[i].loss);
    CHECK(a[i].accuracy == b[i].accuracy);
  }
  CHECK(a.back().accuracy >= 0.5);
  CHECK(a.back().step < 2000);
}

TEST_CASE("inference factors into argmax, dequantize, decode, denormalize") {
  const auto& fx = fixture();
  const auto head = PolicyHead::for_codec(fx.codec, fx.features.config(), 32, 5);
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    const Tensor f = rand_tensor({1, 16}, rng);
    const Tensor logits = head.logits(f);
    CodeIndices idx(2, 2);
    for (std::size_t g = 0; g < 4; ++g) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < 16; ++k)
        if (logits[g * 16 + k] > logits[g * 16 + best]) best = k;
      idx.at(g / 2, g % 2) = static_cast<std::int64_t>(best);
    }
    const Tensor composed = denormalize(
        fx.codec.decode(acd::dequantize(idx, fx.codec.codebook())), fx.codec.normalization());
    const Tensor got = infer_chunk(head, f.data(), fx.codec);
    CHECK(got.shape() == Shape{10, kCommandDims});
    CHECK(bitwise_equal(got, composed));
  }
  CHECK_THROWS_AS(infer_chunk(head, std::vector<double>(3), fx.codec), DimensionError);
}

TEST_CASE("errors: group mismatch and non-finite features") {
  const auto& fx = fixture();
  auto data = label_dataset(fx.codec, fx.data, fx.features, 5).head(10);
  PolicyHeadConfig hc;
  hc.groups = 3;
  hc.codebook_size = 16;
  PolicyHead wrong(hc);
  CHECK_THROWS_AS(train_policy(wrong, data, {}), ConfigError);
  data.features[0] = std::numeric_limits<double>::quiet_NaN();
  auto head = PolicyHead::for_codec(fx.codec, fx.features.config(), 16, 0);
  PolicyTrainConfig cfg;
  cfg.steps = 3;
  CHECK_THROWS_AS(train_policy(head, data, cfg), NumericError);
}

TEST_CASE("head checkpoint roundtrips") {
  const auto& fx = fixture();
  const auto head = PolicyHead::for_codec(fx.codec, fx.features.config(), 24, 8);
  std::stringstream ss;
  save_container(ss, head.to_container());
  const std::string bytes = ss.str();
  const auto back = PolicyHead::from_container(load_container(ss));
  CHECK(back.config() == head.config());
  std::stringstream again;
  save_container(again, back.to_container());
  CHECK(again.str() == bytes);
}
