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

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "kslab/tensor.hpp"

namespace kslab::io {

// On-disk sequence container: `<stem>.json` holds
//   {"dtype": "f32"|"c64"|"u8", "shape": [...], "layout": "row-major",
//    "endianness": "little", ...}
// and `<stem>.bin` the raw little-endian payload. c64 is interleaved (re, im)
// float32 pairs. Extra header keys (kind, model metadata) are preserved.

struct Container {
  nlohmann::json header;
  std::vector<std::uint8_t> payload;
};

std::filesystem::path header_path(const std::filesystem::path& stem);
std::filesystem::path payload_path(const std::filesystem::path& stem);

void write_container(const std::filesystem::path& stem, const nlohmann::json& header,
                     std::span<const std::uint8_t> payload);
Container read_container(const std::filesystem::path& stem);

void save(const std::filesystem::path& stem, const ImageSequence& img);
void save(const std::filesystem::path& stem, const ComplexImageSequence& seq);
void save(const std::filesystem::path& stem, const KSpaceSequence& ks);
void save(const std::filesystem::path& stem, const SegmentationMap& labels);
void save(const std::filesystem::path& stem, const LineMask& mask);

ImageSequence load_image(const std::filesystem::path& stem);
ComplexImageSequence load_complex_image(const std::filesystem::path& stem);
KSpaceSequence load_kspace(const std::filesystem::path& stem);
SegmentationMap load_labels(const std::filesystem::path& stem);
LineMask load_mask(const std::filesystem::path& stem);

/// Flat f32 tensor with arbitrary extra header fields (model weights).
void save_f32(const std::filesystem::path& stem, std::span<const double> values, nlohmann::json extra);
std::vector<double> load_f32(const std::filesystem::path& stem, nlohmann::json* header = nullptr);

/// Reads just the JSON header.
nlohmann::json read_header(const std::filesystem::path& stem);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace kslab::io
