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

#include "kslab/optim.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "kslab/errors.hpp"

namespace kslab {

void ParameterPack::add(std::string name, std::vector<int> shape) {
  const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                        [](std::size_t a, int b) { return a * std::size_t(b); });
  slots_.push_back({std::move(name), std::move(shape), values_.size(), n});
  values_.resize(values_.size() + n, 0.0);
}

std::size_t ParameterPack::slot_index(const std::string& name) const {
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (slots_[i].name == name) return i;
  }
  throw ValidationError("unknown parameter tensor '" + name + "'");
}

nlohmann::json ParameterPack::layout_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : slots_) out.push_back({{"name", s.name}, {"shape", s.shape}});
  return out;
}

void ParameterPack::check_layout(const nlohmann::json& layout) const {
  if (!layout.is_array() || layout.size() != slots_.size()) throw ValidationError("model tensor layout mismatch");
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (layout[i].value("name", "") != slots_[i].name ||
        layout[i].value("shape", std::vector<int>{}) != slots_[i].shape) {
      throw ValidationError("model tensor layout mismatch at '" + slots_[i].name + "'");
    }
  }
}

Adam::Adam(std::size_t parameter_count, AdamConfig config)
    : config_(config), m_(parameter_count, 0.0), v_(parameter_count, 0.0) {
  if (!(config.learning_rate > 0.0)) throw ValidationError("learning rate must be > 0");
}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw ValidationError("Adam: size mismatch");
  ++step_;
  const double c1 = 1.0 - std::pow(config_.beta1, double(step_));
  const double c2 = 1.0 - std::pow(config_.beta2, double(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i] * grads[i];
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    params[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
  }
}

}  // namespace kslab
