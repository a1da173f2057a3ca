/*
 * kslab: k-space artefact simulation, detection and correction for cine CMR
 *
 * Copyright 2026 The kslab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "kslab/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace kslab::io {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

void put_f32(std::vector<std::uint8_t>& out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

double get_f32(const std::uint8_t* p) {
  return static_cast<double>(std::bit_cast<float>(get_u32(p)));
}

json base_header(const char* dtype, std::vector<std::int64_t> shape) {
  return json{{"dtype", dtype}, {"shape", std::move(shape)}, {"layout", "row-major"}, {"endianness", "little"}};
}

std::size_t element_size(const std::string& dtype) {
  if (dtype == "f32") return 4;
  if (dtype == "c64") return 8;
  if (dtype == "u8") return 1;
  throw ValidationError("unsupported dtype '" + dtype + "'");
}

struct Checked {
  std::string dtype;
  std::vector<std::int64_t> shape;
};

Checked validate_header(const json& h, std::size_t payload_bytes, const fs::path& stem) {
  try {
    Checked c{h.at("dtype").get<std::string>(), h.at("shape").get<std::vector<std::int64_t>>()};
    if (h.value("layout", "row-major") != "row-major") throw ValidationError("only row-major layout is supported");
    if (h.value("endianness", "little") != "little") throw ValidationError("only little-endian payloads are supported");
    std::size_t count = 1;
    for (auto e : c.shape) {
      if (e < 0) throw ValidationError("negative extent in shape");
      count *= std::size_t(e);
    }
    if (count * element_size(c.dtype) != payload_bytes) {
      throw ValidationError("payload of " + stem.string() + " has " + std::to_string(payload_bytes) +
                            " bytes, header implies " + std::to_string(count * element_size(c.dtype)));
    }
    return c;
  } catch (const json::exception& e) {
    throw ValidationError("malformed container header " + header_path(stem).string() + ": " + e.what());
  }
}

Dims dims3(const Checked& c, const fs::path& stem) {
  if (c.shape.size() != 3) throw ValidationError(stem.string() + " is not a T x H x W sequence");
  return Dims{int(c.shape[0]), int(c.shape[1]), int(c.shape[2])};
}

void expect_dtype(const Checked& c, const char* dtype, const fs::path& stem) {
  if (c.dtype != dtype) {
    throw ValidationError(stem.string() + " has dtype " + c.dtype + ", expected " + dtype);
  }
}

std::vector<std::uint8_t> encode_complex(const std::vector<cplx>& values) {
  std::vector<std::uint8_t> out;
  out.reserve(values.size() * 8);
  for (const cplx& v : values) {
    put_f32(out, v.real());
    put_f32(out, v.imag());
  }
  return out;
}

std::vector<cplx> decode_complex(const std::vector<std::uint8_t>& bytes) {
  std::vector<cplx> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = cplx(get_f32(&bytes[8 * i]), get_f32(&bytes[8 * i + 4]));
  return out;
}

}  // namespace

fs::path header_path(const fs::path& stem) { return fs::path(stem.string() + ".json"); }
fs::path payload_path(const fs::path& stem) { return fs::path(stem.string() + ".bin"); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(text.data(), std::streamsize(text.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_container(const fs::path& stem, const json& header, std::span<const std::uint8_t> payload) {
  json h = header;
  h["payload"] = payload_path(stem).filename().string();
  write_text(header_path(stem), h.dump(2) + "\n");
  write_text(payload_path(stem), std::string(reinterpret_cast<const char*>(payload.data()), payload.size()));
}

json read_header(const fs::path& stem) {
  try {
    return json::parse(read_text(header_path(stem)));
  } catch (const json::exception& e) {
    throw ValidationError("malformed container header " + header_path(stem).string() + ": " + e.what());
  }
}

Container read_container(const fs::path& stem) {
  Container c;
  c.header = read_header(stem);
  const std::string bytes = read_text(payload_path(stem));
  c.payload.assign(bytes.begin(), bytes.end());
  validate_header(c.header, c.payload.size(), stem);
  return c;
}

void save(const fs::path& stem, const ImageSequence& img) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(img.size() * 4);
  for (double v : img.values()) put_f32(bytes, v);
  json h = base_header("f32", {img.frames(), img.rows(), img.cols()});
  h["kind"] = "image";
  write_container(stem, h, bytes);
}

void save(const fs::path& stem, const ComplexImageSequence& seq) {
  json h = base_header("c64", {seq.frames(), seq.rows(), seq.cols()});
  h["kind"] = "complex_image";
  write_container(stem, h, encode_complex(seq.values()));
}

void save(const fs::path& stem, const KSpaceSequence& ks) {
  json h = base_header("c64", {ks.frames(), ks.rows(), ks.cols()});
  h["kind"] = "kspace";
  write_container(stem, h, encode_complex(ks.values()));
}

void save(const fs::path& stem, const SegmentationMap& labels) {
  json h = base_header("u8", {labels.frames(), labels.rows(), labels.cols()});
  h["kind"] = "labels";
  write_container(stem, h, labels.values());
}

void save(const fs::path& stem, const LineMask& mask) {
  json h = base_header("u8", {mask.frames(), mask.lines()});
  h["kind"] = "line_mask";
  write_container(stem, h, mask.values());
}

ImageSequence load_image(const fs::path& stem) {
  Container c = read_container(stem);
  Checked k = validate_header(c.header, c.payload.size(), stem);
  expect_dtype(k, "f32", stem);
  std::vector<double> values(c.payload.size() / 4);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = get_f32(&c.payload[4 * i]);
  return ImageSequence(dims3(k, stem), std::move(values));
}

ComplexImageSequence load_complex_image(const fs::path& stem) {
  Container c = read_container(stem);
  Checked k = validate_header(c.header, c.payload.size(), stem);
  expect_dtype(k, "c64", stem);
  return ComplexImageSequence(dims3(k, stem), decode_complex(c.payload));
}

KSpaceSequence load_kspace(const fs::path& stem) {
  Container c = read_container(stem);
  Checked k = validate_header(c.header, c.payload.size(), stem);
  expect_dtype(k, "c64", stem);
  return KSpaceSequence(dims3(k, stem), decode_complex(c.payload));
}

SegmentationMap load_labels(const fs::path& stem) {
  Container c = read_container(stem);
  Checked k = validate_header(c.header, c.payload.size(), stem);
  expect_dtype(k, "u8", stem);
  return SegmentationMap(dims3(k, stem), std::move(c.payload));
}

LineMask load_mask(const fs::path& stem) {
  Container c = read_container(stem);
  Checked k = validate_header(c.header, c.payload.size(), stem);
  expect_dtype(k, "u8", stem);
  if (k.shape.size() != 2) throw ValidationError(stem.string() + " is not a T x H line mask");
  return LineMask(int(k.shape[0]), int(k.shape[1]), std::move(c.payload));
}

void save_f32(const fs::path& stem, std::span<const double> values, json extra) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(values.size() * 4);
  for (double v : values) put_f32(bytes, v);
  json h = base_header("f32", {std::int64_t(values.size())});
  for (auto it = extra.begin(); it != extra.end(); ++it) h[it.key()] = it.value();
  write_container(stem, h, bytes);
}

std::vector<double> load_f32(const fs::path& stem, json* header) {
  Container c = read_container(stem);
  Checked k = validate_header(c.header, c.payload.size(), stem);
  expect_dtype(k, "f32", stem);
  std::vector<double> values(c.payload.size() / 4);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = get_f32(&c.payload[4 * i]);
  if (header) *header = std::move(c.header);
  return values;
}

}  // namespace kslab::io
