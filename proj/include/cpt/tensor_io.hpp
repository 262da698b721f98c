// Copyright 2026 The CPT Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpt/error.hpp"
#include "cpt/grid.hpp"

// Grid file layout:
//   "CPTGRID1"                 8-byte magic
//   u32 little-endian          header length in bytes
//   UTF-8 JSON header          {"dims":[C,H,W],"dtype":"f32"|"f64","order":"row-major-channel-outer"}
//   raw little-endian values   C*H*W of them, channel-major outermost

namespace cpt {

inline constexpr char kGridMagic[8] = {'C', 'P', 'T', 'G', 'R', 'I', 'D', '1'};
inline constexpr const char* kGridOrder = "row-major-channel-outer";

enum class Dtype { kF32, kF64 };

inline const char* dtype_name(Dtype d) { return d == Dtype::kF32 ? "f32" : "f64"; }

namespace detail {

template <typename U>
void put_le(std::ostream& out, U bits) {
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U get_le(const unsigned char* bytes) {
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(bytes[i]) << (8 * i);
  return bits;
}

inline void read_exact(std::istream& in, void* dst, std::size_t n, const char* what) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw InputError(std::string("grid file truncated while reading ") + what);
  }
}

}  // namespace detail

template <typename T>
void write_grid(std::ostream& out, const DenseGrid<T>& grid, Dtype dtype = Dtype::kF64) {
  nlohmann::json header = {{"dims", {grid.channels(), grid.height(), grid.width()}},
                           {"dtype", dtype_name(dtype)},
                           {"order", kGridOrder}};
  const std::string text = header.dump();
  out.write(kGridMagic, sizeof(kGridMagic));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const T& v : grid.values()) {
    if (dtype == Dtype::kF32) {
      detail::put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    } else {
      detail::put_le(out, std::bit_cast<std::uint64_t>(static_cast<double>(v)));
    }
  }
  if (!out) throw InputError("failed writing grid");
}

struct GridFile {
  Grid grid;
  Dtype dtype = Dtype::kF64;
};

inline GridFile read_grid_file(std::istream& in) {
  char magic[8];
  detail::read_exact(in, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kGridMagic, sizeof(magic)) != 0) throw InputError("not a grid file (bad magic)");
  unsigned char len_bytes[4];
  detail::read_exact(in, len_bytes, 4, "header length");
  const auto header_len = detail::get_le<std::uint32_t>(len_bytes);
  if (header_len > (1u << 20)) throw InputError("grid header implausibly large");
  std::string text(header_len, '\0');
  detail::read_exact(in, text.data(), header_len, "header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("grid header: ") + e.what());
  }
  if (!header.contains("dims") || !header["dims"].is_array() || header["dims"].size() != 3) {
    throw InputError("grid header: 'dims' must be [C,H,W]");
  }
  if (header.value("order", std::string(kGridOrder)) != kGridOrder) {
    throw InputError("grid header: unsupported 'order'");
  }
  const std::string dtype_text = header.value("dtype", std::string());
  Dtype dtype;
  if (dtype_text == "f32") {
    dtype = Dtype::kF32;
  } else if (dtype_text == "f64") {
    dtype = Dtype::kF64;
  } else {
    throw InputError("grid header: 'dtype' must be f32 or f64");
  }
  const int c = header["dims"][0].get<int>();
  const int h = header["dims"][1].get<int>();
  const int w = header["dims"][2].get<int>();
  require(c >= 1 && h >= 1 && w >= 1, "grid header: dims must be >= 1");

  const std::size_t count = static_cast<std::size_t>(c) * h * w;
  const std::size_t width = dtype == Dtype::kF32 ? 4 : 8;
  std::vector<unsigned char> raw(count * width);
  detail::read_exact(in, raw.data(), raw.size(), "values");
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned char* p = raw.data() + i * width;
    values[i] = dtype == Dtype::kF32 ? static_cast<double>(std::bit_cast<float>(detail::get_le<std::uint32_t>(p)))
                                     : std::bit_cast<double>(detail::get_le<std::uint64_t>(p));
  }
  return {Grid(c, h, w, std::move(values)), dtype};
}

inline Grid read_grid(std::istream& in) { return read_grid_file(in).grid; }

template <typename T>
void save_grid(const std::filesystem::path& path, const DenseGrid<T>& grid, Dtype dtype = Dtype::kF64) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open for writing: " + path.string());
  write_grid(out, grid, dtype);
}

inline Grid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open grid file: " + path.string());
  return read_grid(in);
}

}  // namespace cpt
