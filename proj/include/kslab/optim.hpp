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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace kslab {

/// Named view into a flat parameter vector.
struct TensorSlot {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
  bool operator==(const TensorSlot&) const = default;
};

/// All trainable weights of a model in one contiguous vector, addressed by
/// named slots. Gradients use the same layout.
class ParameterPack {
 public:
  void add(std::string name, std::vector<int> shape);

  std::span<double> tensor(std::size_t slot) { return {values_.data() + slots_[slot].offset, slots_[slot].size}; }
  std::span<const double> tensor(std::size_t slot) const {
    return {values_.data() + slots_[slot].offset, slots_[slot].size};
  }
  const std::vector<TensorSlot>& slots() const { return slots_; }
  std::size_t slot_index(const std::string& name) const;

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  /// {"name": ..., "shape": [...]} per slot, used in model headers.
  nlohmann::json layout_json() const;
  /// Throws ValidationError unless `layout` matches this pack's slots.
  void check_layout(const nlohmann::json& layout) const;

  bool operator==(const ParameterPack&) const = default;

 private:
  std::vector<TensorSlot> slots_;
  std::vector<double> values_;
};

struct AdamConfig {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment gradient descent with bias correction.
class Adam {
 public:
  Adam(std::size_t parameter_count, AdamConfig config);

  void step(std::span<double> params, std::span<const double> grads);
  long steps_taken() const { return step_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  long step_ = 0;
};

}  // namespace kslab
