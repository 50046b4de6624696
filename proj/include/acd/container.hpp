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

// Self-describing parameter container used for codec and policy-head
// checkpoints: a text header of key=value metadata and block descriptors,
// followed by the named blocks as raw little-endian f64.
//
//   ACDCKPT version=1 kind=<kind>
//   <key>=<value>                      (zero or more, insertion order)
//   @block name=<name> shape=<d0>x<d1>...   (one per block, payload order)
//   @end checksum=<fnv1a-64 of payload, 16 hex digits>
//   <payload: every block's values, 8 bytes each, little-endian>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "acd/tensor.hpp"

namespace acd {

struct Container {
  std::string kind;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, Tensor>> blocks;

  void set(const std::string& key, std::string value);
  bool has(const std::string& key) const;
  // Throws FormatError naming the key when absent.
  const std::string& get(const std::string& key) const;

  void add_block(std::string name, Tensor t);
  bool has_block(const std::string& name) const;
  const Tensor& block(const std::string& name) const;

  bool operator==(const Container&) const = default;
};

void save_container(std::ostream& os, const Container& c);
Container load_container(std::istream& is);
void save_container(const std::filesystem::path& path, const Container& c);
Container load_container(const std::filesystem::path& path);

}  // namespace acd
