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

#include "kslab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace kslab {

void validate_dims(const Dims& dims) {
  if (dims.frames < kMinFrames || dims.rows < kMinRows || dims.cols < kMinCols) {
    throw ValidationError("invalid sequence geometry " + std::to_string(dims.frames) + "x" +
                          std::to_string(dims.rows) + "x" + std::to_string(dims.cols) +
                          " (need T>=1, H>=4, W>=4)");
  }
}

SegmentationMap::SegmentationMap(Dims dims, std::vector<std::uint8_t> values)
    : Grid3(checked(dims), std::move(values)) {
  for (auto v : data_) {
    if (v >= kClassCount) throw ValidationError("segmentation label outside {0,1,2,3}");
  }
}

LineMask::LineMask(int frames, int lines, std::uint8_t fill)
    : frames_(frames), lines_(lines) {
  if (frames < 1 || lines < 1) throw ValidationError("line mask needs positive extents");
  if (fill > 1) throw ValidationError("line mask entries must be 0 or 1");
  data_.assign(std::size_t(frames) * std::size_t(lines), fill);
}

LineMask::LineMask(int frames, int lines, std::vector<std::uint8_t> values)
    : frames_(frames), lines_(lines), data_(std::move(values)) {
  if (frames < 1 || lines < 1) throw ValidationError("line mask needs positive extents");
  if (data_.size() != std::size_t(frames) * std::size_t(lines)) {
    throw ValidationError("line mask payload size does not match its shape");
  }
  if (std::any_of(data_.begin(), data_.end(), [](std::uint8_t v) { return v > 1; })) {
    throw ValidationError("line mask entries must be 0 or 1");
  }
}

std::size_t LineMask::count() const {
  return std::accumulate(data_.begin(), data_.end(), std::size_t{0});
}

ImageSequence magnitude(const ComplexImageSequence& seq) {
  ImageSequence out(seq.dims());
  std::transform(seq.values().begin(), seq.values().end(), out.values().begin(),
                 [](const cplx& v) { return std::abs(v); });
  return out;
}

ComplexImageSequence to_complex(const ImageSequence& img) {
  ComplexImageSequence out(img.dims());
  std::transform(img.values().begin(), img.values().end(), out.values().begin(),
                 [](double v) { return cplx(v, 0.0); });
  return out;
}

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError(std::string(what) + " contains non-finite values");
  }
}

void require_finite(std::span<const cplx> values, const char* what) {
  for (const cplx& v : values) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      throw ValidationError(std::string(what) + " contains non-finite values");
    }
  }
}

}  // namespace kslab
