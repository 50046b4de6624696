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

#include <cstring>
#include <random>
#include <sstream>

#include "acd/container.hpp"
#include "acd/error.hpp"

using namespace acd;

namespace {

bool bitwise_same(const Container& a, const Container& b) {
  if (a.kind != b.kind || a.meta != b.meta || a.blocks.size() != b.blocks.size()) return false;
  for (std::size_t i = 0; i < a.blocks.size(); ++i) {
    const auto& [na, ta] = a.blocks[i];
    const auto& [nb, tb] = b.blocks[i];
    if (na != nb || ta.shape() != tb.shape()) return false;
    if (std::memcmp(ta.data().data(), tb.data().data(), ta.numel() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

double random_bits(std::mt19937_64& rng) {
  // any bit pattern, including NaN payloads, infinities and subnormals
  const std::uint64_t bits = rng();
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

Container random_container(std::mt19937_64& rng) {
  Container c;
  c.kind = "kind" + std::to_string(rng() % 10);
  const std::size_t nmeta = rng() % 6;
  for (std::size_t i = 0; i < nmeta; ++i) {
    c.set("key." + std::to_string(i), "value with spaces = " + std::to_string(rng()));
  }
  const std::size_t nblocks = rng() % 5;
  for (std::size_t i = 0; i < nblocks; ++i) {
    Shape s;
    const std::size_t rank = rng() % 4;
    for (std::size_t r = 0; r < rank; ++r) s.push_back(rng() % 5);
    Tensor t(s);
    for (auto& v : t.storage()) v = random_bits(rng);
    c.add_block("block" + std::to_string(i), std::move(t));
  }
  return c;
}

}  // namespace

TEST_CASE("randomized containers roundtrip bitwise") {
  std::mt19937_64 rng(2024);
  for (int n = 0; n < 100; ++n) {
    const Container c = random_container(rng);
    std::stringstream ss;
    save_container(ss, c);
    const std::string first = ss.str();
    const Container back = load_container(ss);
    CHECK(bitwise_same(back, c));
    std::stringstream again;
    save_container(again, back);
    CHECK(again.str() == first);
  }
}

TEST_CASE("metadata access") {
  Container c;
  c.set("a", "1");
  c.set("a", "2");
  CHECK(c.meta.size() == 1);
  CHECK(c.get("a") == "2");
  CHECK_FALSE(c.has("b"));
  CHECK_THROWS_AS(c.get("b"), FormatError);
  CHECK_THROWS_AS(c.block("w"), FormatError);
}

TEST_CASE("corruption and malformed headers are rejected") {
  Container c;
  c.kind = "codec";
  c.set("x", "1");
  c.add_block("w", Tensor({2, 2}, {1, 2, 3, 4}));
  std::stringstream ss;
  save_container(ss, c);
  const std::string good = ss.str();

  auto load = [](std::string bytes) {
    std::stringstream is(bytes);
    return load_container(is);
  };
  CHECK(bitwise_same(load(good), c));

  std::string flipped = good;
  flipped.back() ^= 0x01;
  CHECK_THROWS_AS(load(flipped), FormatError);
  CHECK_THROWS_AS(load(good.substr(0, good.size() - 8)), FormatError);
  CHECK_THROWS_AS(load(good + "x"), FormatError);
  CHECK_THROWS_AS(load("garbage\n"), FormatError);
  std::string version = good;
  version.replace(version.find("version=1"), 9, "version=9");
  CHECK_THROWS_AS(load(version), FormatError);
  CHECK_THROWS_AS(load(good.substr(0, good.find("@end"))), FormatError);

  Container bad = c;
  bad.set("bad key", "v");
  std::stringstream out;
  CHECK_THROWS_AS(save_container(out, bad), FormatError);
}
