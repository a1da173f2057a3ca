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

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "kslab/tensor.hpp"

namespace kslab {

/// Beating-heart phantom: LV blood pool disc, myocardial annulus around it,
/// and an RV crescent (ellipse minus LV and myocardium) against the septum.
/// Coordinates are (row, col) in pixels.
struct PhantomSpec {
  int frames = 25;
  int rows = 176;
  int cols = 132;
  double lv_center_row = 88.0;
  double lv_center_col = 80.0;
  double lv_radius_systole = 11.0;
  double lv_radius_diastole = 18.0;
  double myo_thickness = 6.0;
  double rv_center_row = 88.0;
  double rv_center_col = 50.0;
  double rv_axis_row = 30.0;
  double rv_axis_col = 16.0;
  double contraction_phase = 0.35;  // fraction of the cycle at end-systole
  std::array<double, kClassCount> intensity{0.2, 0.95, 0.45, 0.7};  // background, LV, Myo, RV
  double texture_sigma = 0.02;
  double bias_amplitude = 0.05;  // linear multiplicative bias field
  std::uint64_t rng_seed = 0;

  /// 176 x 132, 25 frames.
  static PhantomSpec standard();
  /// 32 x 32, 8 frames, for gradient checks and fast training.
  static PhantomSpec tiny();

  Dims dims() const { return {frames, rows, cols}; }

  /// Systole-to-diastole fraction in [0, 1] of frame t (0 at end-systole).
  double cycle(int t) const;
  double lv_radius(int t) const;
  /// RV semi-axis scale of frame t.
  double rv_scale(int t) const;

  /// Throws ValidationError unless every structure keeps a 2-pixel margin to
  /// the frame border over the whole cycle and all parameters are in range.
  void validate() const;

  nlohmann::json to_json() const;
  static PhantomSpec from_json(const nlohmann::json& j);
};

inline constexpr double kPhantomMargin = 2.0;

/// Tissue class of pixel (r, c) in frame t from the analytic shapes.
TissueClass analytic_class(const PhantomSpec& spec, int t, double r, double c);

struct Phantom {
  ImageSequence image;       // min-max normalised to [0, 1]
  SegmentationMap labels;
};

Phantom generate_phantom(const PhantomSpec& spec);

enum class Split { kTrain, kVal, kTest };
const char* split_name(Split s);
Split parse_split(const std::string& name);

struct CorpusEntry {
  std::string id;  // case_%04d
  Split split = Split::kTrain;
  PhantomSpec spec;
};

/// Deterministic jittered specs (LV radii and RV axes +-20%, heart centre
/// +-5 px, class intensities +-0.1) and a shuffled 60/20/20 split. Draws that
/// violate the geometry margin are redrawn.
std::vector<CorpusEntry> plan_corpus(int n, const PhantomSpec& tmpl, std::uint64_t seed);

/// Writes <root>/manifest.json and <root>/case_%04d/{image,labels}.{json,bin}.
nlohmann::json generate_corpus(const std::filesystem::path& root, int n, const PhantomSpec& tmpl, std::uint64_t seed);

struct CorpusCase {
  std::string id;
  Split split = Split::kTrain;
  std::filesystem::path image_stem;
  std::filesystem::path labels_stem;
};

std::vector<CorpusCase> load_manifest(const std::filesystem::path& root);

}  // namespace kslab
