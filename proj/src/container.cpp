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

#include "acd/container.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "acd/binary_io.hpp"
#include "acd/error.hpp"

namespace acd {

void Container::set(const std::string& key, std::string value) {
  for (auto& [k, v] : meta) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  meta.emplace_back(key, std::move(value));
}

bool Container::has(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return true;
  }
  return false;
}

const std::string& Container::get(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return v;
  }
  throw FormatError("checkpoint is missing key '" + key + "'");
}

void Container::add_block(std::string name, Tensor t) {
  blocks.emplace_back(std::move(name), std::move(t));
}

bool Container::has_block(const std::string& name) const {
  for (const auto& [n, t] : blocks) {
    if (n == name) return true;
  }
  return false;
}

const Tensor& Container::block(const std::string& name) const {
  for (const auto& [n, t] : blocks) {
    if (n == name) return t;
  }
  throw FormatError("checkpoint is missing block '" + name + "'");
}

namespace {

constexpr std::string_view kMagic = "ACDCKPT";

bool valid_token(const std::string& s, bool allow_spaces) {
  for (char ch : s) {
    if (ch == '\n' || ch == '\r') return false;
    if (!allow_spaces && (ch == ' ' || ch == '=')) return false;
  }
  return true;
}

std::string shape_field(const Shape& s) {
  if (s.empty()) return "scalar";
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(s[i]);
  }
  return out;
}

Shape parse_shape_field(const std::string& text) {
  Shape s;
  if (text == "scalar") return s;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('x', pos);
    if (end == std::string::npos) end = text.size();
    s.push_back(io::parse_u64(std::string_view(text).substr(pos, end - pos)));
    pos = end + 1;
  }
  return s;
}

std::uint64_t payload_checksum(const Container& c) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& [name, t] : c.blocks) h = io::fnv1a(t.data(), h);
  return h;
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

void save_container(std::ostream& os, const Container& c) {
  if (!valid_token(c.kind, false)) throw FormatError("invalid container kind");
  os << kMagic << " version=1 kind=" << c.kind << '\n';
  for (const auto& [k, v] : c.meta) {
    if (k.empty() || k[0] == '@' || !valid_token(k, false) || !valid_token(v, true)) {
      throw FormatError("invalid metadata entry '" + k + "'");
    }
    os << k << '=' << v << '\n';
  }
  for (const auto& [name, t] : c.blocks) {
    if (!valid_token(name, false)) throw FormatError("invalid block name '" + name + "'");
    os << "@block name=" << name << " shape=" << shape_field(t.shape()) << '\n';
  }
  os << "@end checksum=" << hex16(payload_checksum(c)) << '\n';
  for (const auto& [name, t] : c.blocks) io::write_f64_le(os, t.data());
}

Container load_container(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || !line.starts_with(kMagic)) {
    throw FormatError("not a checkpoint (missing ACDCKPT header)");
  }
  auto head = io::parse_fields(line);
  if (head["version"] != "1") {
    throw FormatError("unsupported checkpoint version '" + head["version"] + "'");
  }
  Container c;
  c.kind = head["kind"];
  std::vector<std::pair<std::string, Shape>> layout;
  std::string checksum;
  bool ended = false;
  while (std::getline(is, line)) {
    if (line.starts_with("@block ")) {
      auto f = io::parse_fields(line);
      if (!f.count("name") || !f.count("shape")) {
        throw FormatError("malformed block descriptor: " + line);
      }
      layout.emplace_back(f["name"], parse_shape_field(f["shape"]));
    } else if (line.starts_with("@end")) {
      auto f = io::parse_fields(line);
      checksum = f["checksum"];
      ended = true;
      break;
    } else {
      auto eq = line.find('=');
      if (eq == std::string::npos) throw FormatError("malformed header line: " + line);
      c.meta.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }
  }
  if (!ended) throw FormatError("checkpoint header is truncated (no @end line)");
  for (auto& [name, shape] : layout) {
    Tensor t(shape);
    try {
      io::read_f64_le(is, t.data());
    } catch (const FormatError& e) {
      throw FormatError("checkpoint payload truncated in block '" + name +
                        "': " + e.what());
    }
    c.blocks.emplace_back(name, std::move(t));
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw FormatError("checkpoint has trailing bytes after the payload");
  }
  if (hex16(payload_checksum(c)) != checksum) {
    throw FormatError("checkpoint integrity check failed (checksum mismatch)");
  }
  return c;
}

void save_container(const std::filesystem::path& path, const Container& c) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  save_container(os, c);
  if (!os) throw Error("write failed for '" + path.string() + "'");
}

Container load_container(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path.string() + "'");
  return load_container(is);
}

}  // namespace acd
