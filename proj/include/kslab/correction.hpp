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

#include <vector>

#include "kslab/detection.hpp"
#include "kslab/tensor.hpp"

namespace kslab {

struct CorrectionConfig {
  int iterations = 10;
  double temporal_weight = 1.0;
  double spatial_tv_weight = 0.05;
  // Fraction of 1/L, L = 8 * temporal_weight the Lipschitz constant of the
  // temporal term; the raw gradient step is step_size itself when temporal_weight is 0.
  double step_size = 0.5;

  void validate() const;
  double gradient_step() const;
};

/// Smoothing constant of the total-variation term, sqrt(d^2 + delta^2).
inline constexpr double kTvDelta = 1e-6;

struct CorrectionResult {
  ComplexImageSequence corrected;
  KSpaceSequence corrected_kspace;
  LineMask mask_used;
  /// ||P_clean(fft2(x) - acquired)|| / ||P_clean(acquired)|| after each regularisation step.
  std::vector<double> per_iteration_residuals;
  /// Regularisation energy of each data-consistent iterate, starting with ifft2(acquired).
  std::vector<double> energy_trace;
  double step_size_used = 0.0;
  bool step_halved = false;
};

/// Line (t, l) of the output is the estimate where mask(t, l) == 1 and the
/// acquired line otherwise, copied exactly.
KSpaceSequence hard_data_consistency(const KSpaceSequence& estimate, const KSpaceSequence& acquired,
                                     const LineMask& mask);

/// E(x) = w_t * sum_t ||x_t - x_{t-1}||^2 (circular in t)
///      + w_tv * sum over real and imaginary parts of sum sqrt(d^2 + delta^2),
/// d running over horizontal and vertical neighbour differences within a frame.
double regularization_energy(const ComplexImageSequence& x, const CorrectionConfig& cfg);
ComplexImageSequence regularization_gradient(const ComplexImageSequence& x, const CorrectionConfig& cfg);

/// Alternates a gradient step on E with projection onto the lines marked
/// clean, cfg.iterations times, then projects once more. If the energy of the
/// data-consistent iterates rises more than once, or by more than 1e-6
/// relative, the run is repeated once with half the step. Throws NumericError
/// when the residual grows tenfold three iterations in a row.
CorrectionResult correct(const KSpaceSequence& acquired, const LineMask& mask, const CorrectionConfig& cfg);

/// Mean squared error over every pixel of every frame.
double reconstruction_loss(const ImageSequence& recon, const ImageSequence& target);

/// gamma * detection_loss + (1 - gamma) * reconstruction_loss; gamma in [0, 1].
double correction_loss(const ImageSequence& recon, const ImageSequence& target, const LineProbabilities& probs,
                       const LineMask& labels, double gamma = 0.3);

}  // namespace kslab
