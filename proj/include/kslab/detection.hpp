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
#include <vector>

#include "kslab/optim.hpp"
#include "kslab/tensor.hpp"

namespace kslab {

inline constexpr int kLineFeatureCount = 6;

/// Per-line statistics, T x H x F, standardised per sequence.
///   0 line energy sum |k|^2      3 L1 distance to the same line, previous frame
///   1 log(1 + energy)            4 L1 distance to the same line, next frame
///   2 max |k|                    5 line index / (H - 1)
/// Temporal neighbours are clamped at the first and last frame.
struct LineFeatures {
  int frames = 0;
  int lines = 0;
  std::vector<double> values;

  double& operator()(int t, int l, int f) { return values[(std::size_t(t) * lines + l) * kLineFeatureCount + f]; }
  double operator()(int t, int l, int f) const {
    return values[(std::size_t(t) * lines + l) * kLineFeatureCount + f];
  }
  std::size_t line_count() const { return std::size_t(frames) * std::size_t(lines); }
};

/// Raw (unstandardised) statistics; extract_line_features standardises these.
LineFeatures raw_line_features(const KSpaceSequence& ks);
LineFeatures extract_line_features(const KSpaceSequence& ks);

/// P(corrupted) per line, T x H.
struct LineProbabilities {
  int frames = 0;
  int lines = 0;
  std::vector<double> values;

  double operator()(int t, int l) const { return values[std::size_t(t) * lines + l]; }
};

/// Two-layer perceptron applied independently to every line:
///   p = sigmoid(w2 . relu(W1^T f + b1) + b2)
class DetectionModel {
 public:
  static constexpr int kHidden = 16;
  enum Slot : std::size_t { kW1 = 0, kB1 = 1, kW2 = 2, kB2 = 3 };

  DetectionModel();

  /// Every parameter drawn from N(0, 1).
  static DetectionModel random_init(std::uint64_t seed);

  ParameterPack& params() { return params_; }
  const ParameterPack& params() const { return params_; }

  bool operator==(const DetectionModel&) const = default;

 private:
  ParameterPack params_;
};

LineProbabilities predict_line_probs(const DetectionModel& model, const LineFeatures& feats);

/// mask = probs >= threshold; threshold must lie in (0, 1).
LineMask threshold_mask(const LineProbabilities& probs, double threshold = 0.5);

inline constexpr double kProbabilityClamp = 1e-7;

/// Mean binary cross-entropy over all T*H lines, pr clamped to [eps, 1 - eps].
/// labels: 1 = corrupted, pr = P(corrupted).
double detection_loss(const LineProbabilities& probs, const LineMask& labels);

/// Loss and its analytic gradient with respect to every model parameter.
struct DetectionLossGrad {
  double loss = 0.0;
  std::vector<double> grad;  // same layout as DetectionModel::params()
};
DetectionLossGrad detection_loss_and_grad(const DetectionModel& model, const LineFeatures& feats,
                                          const LineMask& labels);

struct LabeledLines {
  LineFeatures features;
  LineMask labels;
};

struct DetectorTrainConfig {
  int epochs = 200;
  double learning_rate = 5e-4;
  int batch = 10;  // sequences per step
  std::uint64_t seed = 0;
};

struct DetectorTrainResult {
  DetectionModel model;
  std::vector<double> loss_trace;  // mean training loss per epoch
};

/// Adam on detection_loss; batch order shuffled from `seed`. Throws
/// NumericError if the loss becomes NaN.
DetectorTrainResult train_detector(std::span<const LabeledLines> corpus, const DetectorTrainConfig& cfg);

/// Fraction of lines whose thresholded prediction equals the label.
double line_accuracy(const LineProbabilities& probs, const LineMask& labels, double threshold = 0.5);

void save_detector(const std::filesystem::path& stem, const DetectionModel& model);
DetectionModel load_detector(const std::filesystem::path& stem);

}  // namespace kslab
