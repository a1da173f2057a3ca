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
#include <optional>
#include <span>
#include <string>

#include "kslab/tensor.hpp"

namespace kslab {

/// Mean absolute difference over all T*H*W pixels.
double mae(const ImageSequence& x, const ImageSequence& y);

/// 20 log10(max(truth)) - 10 log10(MSE). Returns +infinity when MSE is 0;
/// throws ValidationError when max(truth) <= 0.
double psnr(const ImageSequence& truth, const ImageSequence& test);

struct SsimConfig {
  int window = 11;
  double sigma = 1.5;
  double dynamic_range = 1.0;  // L; c1 = (0.01 L)^2, c2 = (0.03 L)^2
};

/// Gaussian-windowed SSIM per pixel (symmetric boundary extension), averaged
/// over every pixel of every frame.
double ssim(const ImageSequence& x, const ImageSequence& y, const SsimConfig& cfg = {});

/// Normalised 1D Gaussian window used by ssim().
std::vector<double> gaussian_window(int size, double sigma);

struct SharpnessConfig {
  int surrogates = 64;
  std::uint64_t seed = 0;
};

struct SharpnessResult {
  double value = 0.0;
  bool degenerate = false;  // some frame had zero surrogate spread; it contributed 0
};

/// Anisotropic total variation of one frame with periodic boundaries.
double periodic_total_variation(std::span<const double> frame, int rows, int cols);

/// log10 of the standard normal upper tail, accurate far into the tail.
double log10_normal_upper_tail(double z);

/// Per frame: SI = -log10 Q((mu - TV) / sigma), with (mu, sigma) the mean and
/// standard deviation of TV over random-phase surrogates (|FFT| kept, phases
/// taken from FFT of white noise). Each frame reuses the same seeded noise, so
/// a frame's index never changes its score. Frames are averaged.
SharpnessResult sharpness_index(const ImageSequence& x, const SharpnessConfig& cfg = {});

struct MetricsReport {
  std::string run_id;
  std::string config_hash;
  std::string stage;
  int z = 0;
  double j_sigma = 0.0;
  double lambda = 0.0;
  double mae = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double sharpness_index = 0.0;
  std::optional<double> dice_lv;
  std::optional<double> dice_myo;
  std::optional<double> dice_rv;
};

struct ReportContext {
  std::string run_id;
  std::string config_hash;
  std::string stage;
  int z = 0;
  double j_sigma = 0.0;
  double lambda = 0.0;
  SharpnessConfig sharpness{};
  bool with_sharpness = true;  // SI is left NaN when false
};

/// Image metrics of `test` against `reference`, plus per-class Dice when both
/// label maps are given.
MetricsReport assemble_report(const ImageSequence& reference, const ImageSequence& test, const ReportContext& ctx,
                              const SegmentationMap* predicted = nullptr, const SegmentationMap* truth = nullptr);

/// "run_id,stage,z,j_sigma,lambda,mae,psnr,ssim,si,dice_lv,dice_myo,dice_rv"
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsReport& r);

/// Fixed six-decimal rendering; "inf"/"-inf"/"nan" for non-finite values.
std::string format_number(double v);

}  // namespace kslab
