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
#include <span>
#include <vector>

#include "json.hpp"
#include "kslab/tensor.hpp"

namespace kslab {

// ---------------------------------------------------------------------------
// Synthetic phase for magnitude-only images
// ---------------------------------------------------------------------------

struct PhaseGenSpec {
  double noise_sigma = 0.01;         // fraction of max(img)
  double lowpass_keep = 0.125;       // fraction of central lines passed unattenuated
  double lowpass_taper_sigma = 4.0;  // Gaussian roll-off outside the band, in lines
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// 1D low-pass weights over `n` centred k-space indices: 1 on the central
/// ceil(keep * n) samples, exp(-d^2 / 2 sigma^2) at distance d outside.
std::vector<double> lowpass_profile(int n, double keep, double taper_sigma);

/// img * exp(i phi), where phi = arg(ifft2(lowpass(fft2(img + noise)))).
///
/// The noise is complex white Gaussian, drawn in row-major (t, r, c) order as
/// (re, im) pairs with std noise_sigma * max(img). The low-pass filter is the
/// separable product of lowpass_profile over rows and columns; when it passes
/// everything the transform pair is skipped. |output| == img bit for bit.
ComplexImageSequence synthesize_phase(const ImageSequence& img, const PhaseGenSpec& spec);

// ---------------------------------------------------------------------------
// Mistriggering corruption by cross-frame line replacement
// ---------------------------------------------------------------------------

struct CorruptionSpec {
  int z = 4;                  // one in z lines of every frame is replaced
  double offset_sigma = 3.0;  // std of the donor frame offset j, in frames
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct CorruptionEntry {
  int frame = 0;
  int line = 0;
  int source = 0;

  bool operator==(const CorruptionEntry&) const = default;
};

struct CorruptionRecord {
  CorruptionSpec spec;
  std::vector<CorruptionEntry> entries;
  LineMask mask;

  /// Fraction of all lines that were replaced.
  double corrupted_fraction() const;

  /// {"z", "offset_sigma", "seed", "entries": [[t, l, s], ...]}
  nlohmann::json to_json() const;
  static CorruptionRecord from_json(const nlohmann::json& j, int frames, int lines);
};

struct CorruptedKSpace {
  KSpaceSequence kspace;
  CorruptionRecord record;
};

/// For each frame t a residue r ~ U[0, z) is drawn and every line l = r (mod z)
/// is overwritten by line l of donor frame s = clamp(round(t + j), 0, T-1),
/// j ~ N(0, offset_sigma^2), redrawn until s != t. Draw order: per frame, r
/// then one offset per line. Requires T >= 2.
CorruptedKSpace corrupt_kspace(const KSpaceSequence& ks, const CorruptionSpec& spec);

struct SeverityLevel {
  int z = 0;
  KSpaceSequence kspace;
  CorruptionRecord record;
};

/// One independent corruption per z; seeds are derive_seed(tmpl.rng_seed, z).
std::vector<SeverityLevel> severity_sweep(const KSpaceSequence& ks, std::span<const int> z_values,
                                          const CorruptionSpec& tmpl);

/// Severity levels used throughout the experiments.
inline constexpr int kStandardSeverities[] = {2, 4, 8, 16, 32};

}  // namespace kslab
