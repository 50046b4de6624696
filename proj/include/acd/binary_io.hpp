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

// Little-endian f64 block I/O and exact text formatting of doubles, shared
// by the .traj and checkpoint containers.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace acd::io {

void write_f64_le(std::ostream& os, std::span<const double> values);
// Throws FormatError on a short read.
void read_f64_le(std::istream& is, std::span<double> values);

// Shortest text that parses back to the identical double.
std::string format_double(double v);
double parse_double(std::string_view text);
std::uint64_t parse_u64(std::string_view text);

// 64-bit FNV-1a over the raw bytes of the values.
std::uint64_t fnv1a(std::span<const double> values,
                    std::uint64_t seed = 0xcbf29ce484222325ull);

// "key=value key=value" tokens after a fixed leading word.
std::map<std::string, std::string> parse_fields(std::string_view line);

}  // namespace acd::io
