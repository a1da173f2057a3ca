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

/// Per-pixel class scores, T x H x W x 4 (class index fastest).
struct ClassField {
  Dims dims{};
  std::vector<double> values;

  double& operator()(int t, int r, int c, int k) { return values[index(t, r, c) + std::size_t(k)]; }
  double operator()(int t, int r, int c, int k) const { return values[index(t, r, c) + std::size_t(k)]; }
  std::size_t pixel_count() const { return dims.size(); }

 private:
  std::size_t index(int t, int r, int c) const {
    return ((std::size_t(t) * dims.rows + r) * dims.cols + c) * kClassCount;
  }
};

inline constexpr double kSegProbabilityClamp = 1e-7;

using ClassLogits = ClassField;
using ClassProbabilities = ClassField;

/// Miniature U-net applied frame by frame to magnitude images:
///
///   enc1  conv3x3 1->8   + relu  --------------------------------+ skip
///   pool  2x2 max                                                |
///   enc2  conv3x3 8->16  + relu  ----------------+ skip           |
///   pool  2x2 max                                |               |
///   mid   conv3x3 16->32 + relu                  |               |
///   up    nearest x2, concat(32 + 16)  <---------+               |
///   dec1  conv3x3 48->16 + relu                                  |
///   up    nearest x2, concat(16 + 8)   <-------------------------+
///   dec2  conv3x3 24->8  + relu
///   head  conv1x1 8->4
///
/// Convolutions are zero-padded to keep the spatial size; H and W must be
/// multiples of 4.
class SegModel {
 public:
  enum Slot : std::size_t {
    kEnc1W, kEnc1B, kEnc2W, kEnc2B, kMidW, kMidB, kDec1W, kDec1B, kDec2W, kDec2B, kHeadW, kHeadB
  };

  SegModel();

  /// He-normal weights (std sqrt(2 / fan_in)), zero biases.
  static SegModel random_init(std::uint64_t seed);

  ParameterPack& params() { return params_; }
  const ParameterPack& params() const { return params_; }

  bool operator==(const SegModel&) const = default;

 private:
  ParameterPack params_;
};

/// Throws ValidationError unless rows and cols are multiples of 4.
void require_poolable(const Dims& dims);

ClassLogits segment_logits(const SegModel& model, const ImageSequence& img);

/// Per-pixel softmax over the 4 classes.
ClassProbabilities softmax(const ClassLogits& logits);

/// Arg-max per pixel; ties go to the lower class index.
SegmentationMap argmax_labels(const ClassField& scores);

struct SegmentationOutput {
  ClassProbabilities probs;
  SegmentationMap labels;
};

SegmentationOutput segment(const SegModel& model, const ImageSequence& img);

/// -mean over pixels of log(max(p_true, 1e-7)).
double segmentation_loss(const ClassProbabilities& probs, const SegmentationMap& truth);

/// 2|A n B| / (|A| + |B|) for one class over all frames; 1 when both are empty.
double dice(const SegmentationMap& pred, const SegmentationMap& truth, int class_id);

struct SegLossGrad {
  double loss = 0.0;
  std::vector<double> grad;  // same layout as SegModel::params()
};

/// segmentation_loss of segment(model, img) and its gradient by backpropagation.
SegLossGrad segmentation_loss_and_grad(const SegModel& model, const ImageSequence& img, const SegmentationMap& truth);

struct LabeledImage {
  ImageSequence image;
  SegmentationMap truth;
};

struct SegTrainConfig {
  int epochs = 300;
  double learning_rate = 5e-4;
  int batch = 10;  // sequences per step
  std::uint64_t seed = 0;
};

struct SegTrainResult {
  SegModel model;
  std::vector<double> loss_trace;  // mean training loss per epoch
};

/// Adam on segmentation_loss; single-threaded, batch order shuffled from `seed`.
SegTrainResult train_segmenter(std::span<const LabeledImage> corpus, const SegTrainConfig& cfg);

void save_segmenter(const std::filesystem::path& stem, const SegModel& model);
SegModel load_segmenter(const std::filesystem::path& stem);

}  // namespace kslab
