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

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "kslab/errors.hpp"

namespace kslab {

using cplx = std::complex<double>;

/// Extents of a 2D+time sequence: frames (T), rows (H), columns (W).
struct Dims {
  int frames = 0;
  int rows = 0;
  int cols = 0;

  std::size_t frame_size() const { return std::size_t(rows) * std::size_t(cols); }
  std::size_t size() const { return std::size_t(frames) * frame_size(); }
  bool operator==(const Dims&) const = default;
};

// Cartesian phase-encode lines run along the row axis: line l of frame t is
// row l, and a frame holds `rows` lines of `cols` samples each.
inline constexpr int kLineAxis = 1;
inline constexpr int kMinFrames = 1;
inline constexpr int kMinRows = 4;
inline constexpr int kMinCols = 4;

/// Throws ValidationError unless T >= 1, H >= 4, W >= 4.
void validate_dims(const Dims& dims);

/// Dense row-major T x H x W array. Base of every sequence type.
template <typename V>
class Grid3 {
 public:
  using value_type = V;

  Grid3() = default;
  explicit Grid3(Dims dims, V fill = V{}) : dims_(dims), data_(dims.size(), fill) {}
  Grid3(Dims dims, std::vector<V> values) : dims_(dims), data_(std::move(values)) {
    if (data_.size() != dims_.size()) {
      throw ValidationError("sequence payload size does not match its shape");
    }
  }

  const Dims& dims() const { return dims_; }
  int frames() const { return dims_.frames; }
  int rows() const { return dims_.rows; }
  int cols() const { return dims_.cols; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  V& operator()(int t, int r, int c) { return data_[index(t, r, c)]; }
  const V& operator()(int t, int r, int c) const { return data_[index(t, r, c)]; }

  std::span<V> frame(int t) { return {data_.data() + std::size_t(t) * dims_.frame_size(), dims_.frame_size()}; }
  std::span<const V> frame(int t) const {
    return {data_.data() + std::size_t(t) * dims_.frame_size(), dims_.frame_size()};
  }
  std::span<V> row(int t, int r) { return {&(*this)(t, r, 0), std::size_t(dims_.cols)}; }
  std::span<const V> row(int t, int r) const { return {&(*this)(t, r, 0), std::size_t(dims_.cols)}; }

  std::vector<V>& values() { return data_; }
  const std::vector<V>& values() const { return data_; }

  bool operator==(const Grid3&) const = default;

 protected:
  std::size_t index(int t, int r, int c) const {
    return (std::size_t(t) * std::size_t(dims_.rows) + std::size_t(r)) * std::size_t(dims_.cols) + std::size_t(c);
  }

  Dims dims_{};
  std::vector<V> data_;
};

/// Real intensities, normalised to [0, 1] for phantom data.
class ImageSequence : public Grid3<double> {
 public:
  ImageSequence() = default;
  explicit ImageSequence(Dims dims, double fill = 0.0) : Grid3(checked(dims), fill) {}
  ImageSequence(Dims dims, std::vector<double> values) : Grid3(checked(dims), std::move(values)) {}

 private:
  static Dims checked(Dims d) { validate_dims(d); return d; }
};

/// Complex image sequence; real and imaginary parts are the two channels.
class ComplexImageSequence : public Grid3<cplx> {
 public:
  ComplexImageSequence() = default;
  explicit ComplexImageSequence(Dims dims, cplx fill = {}) : Grid3(checked(dims), fill) {}
  ComplexImageSequence(Dims dims, std::vector<cplx> values) : Grid3(checked(dims), std::move(values)) {}

 private:
  static Dims checked(Dims d) { validate_dims(d); return d; }
};

/// Centred k-space of a ComplexImageSequence. Row l of frame t is Cartesian line l.
class KSpaceSequence : public Grid3<cplx> {
 public:
  KSpaceSequence() = default;
  explicit KSpaceSequence(Dims dims, cplx fill = {}) : Grid3(checked(dims), fill) {}
  KSpaceSequence(Dims dims, std::vector<cplx> values) : Grid3(checked(dims), std::move(values)) {}

  int line_count() const { return rows(); }
  std::span<cplx> line(int t, int l) { return row(t, l); }
  std::span<const cplx> line(int t, int l) const { return row(t, l); }

 private:
  static Dims checked(Dims d) { validate_dims(d); return d; }
};

enum class TissueClass : std::uint8_t { kBackground = 0, kLV = 1, kMyo = 2, kRV = 3 };
inline constexpr int kClassCount = 4;

/// Per-pixel labels in {0: background, 1: LV, 2: Myo, 3: RV}.
class SegmentationMap : public Grid3<std::uint8_t> {
 public:
  SegmentationMap() = default;
  explicit SegmentationMap(Dims dims, std::uint8_t fill = 0) : Grid3(checked(dims), fill) {}
  SegmentationMap(Dims dims, std::vector<std::uint8_t> values);

 private:
  static Dims checked(Dims d) { validate_dims(d); return d; }
};

/// T x H line indicator: 1 = corrupted, 0 = clean.
class LineMask {
 public:
  LineMask() = default;
  LineMask(int frames, int lines, std::uint8_t fill = 0);
  LineMask(int frames, int lines, std::vector<std::uint8_t> values);

  int frames() const { return frames_; }
  int lines() const { return lines_; }
  std::size_t size() const { return data_.size(); }

  std::uint8_t& operator()(int t, int l) { return data_[std::size_t(t) * std::size_t(lines_) + std::size_t(l)]; }
  std::uint8_t operator()(int t, int l) const { return data_[std::size_t(t) * std::size_t(lines_) + std::size_t(l)]; }

  std::size_t count() const;
  bool matches(const Dims& dims) const { return frames_ == dims.frames && lines_ == dims.rows; }

  std::vector<std::uint8_t>& values() { return data_; }
  const std::vector<std::uint8_t>& values() const { return data_; }

  bool operator==(const LineMask&) const = default;

 private:
  int frames_ = 0;
  int lines_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Per-pixel complex modulus.
ImageSequence magnitude(const ComplexImageSequence& seq);

/// Real image lifted to the complex plane with zero imaginary part.
ComplexImageSequence to_complex(const ImageSequence& img);

/// Throws ValidationError on the first NaN or infinity.
void require_finite(std::span<const double> values, const char* what);
void require_finite(std::span<const cplx> values, const char* what);

}  // namespace kslab
