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

#include "kslab/artefact.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kslab/fft.hpp"
#include "kslab/rng.hpp"

namespace kslab {
namespace {

// Builds a + ib with |a + ib| == mag exactly. Rounding in mag*cos and mag*sin
// can leave hypot one or two ulps away; nudge the dominant component.
cplx polar_exact(double mag, double phase) {
  double re = mag * std::cos(phase);
  double im = mag * std::sin(phase);
  if (std::abs(cplx(re, im)) == mag) return {re, im};
  const bool re_dominant = std::abs(re) >= std::abs(im);
  double& big = re_dominant ? re : im;
  const double small = re_dominant ? im : re;
  const double start = big;
  for (int k = 1; k <= 64; ++k) {
    for (double dir : {1.0, -1.0}) {
      double v = start;
      for (int s = 0; s < k; ++s) v = std::nextafter(v, dir * INFINITY);
      const cplx cand = re_dominant ? cplx(v, small) : cplx(small, v);
      if (std::abs(cand) == mag) return cand;
    }
  }
  // Unreachable in practice; fall back to a real-axis value with the exact modulus.
  return {std::copysign(mag, std::cos(phase)), 0.0};
}

}  // namespace

void PhaseGenSpec::validate() const {
  if (!std::isfinite(noise_sigma) || noise_sigma < 0.0) throw ValidationError("noise_sigma must be finite and >= 0");
  if (!(lowpass_keep > 0.0 && lowpass_keep <= 1.0)) throw ValidationError("lowpass_keep must lie in (0, 1]");
  if (!std::isfinite(lowpass_taper_sigma) || lowpass_taper_sigma <= 0.0) {
    throw ValidationError("lowpass_taper_sigma must be > 0");
  }
}

std::vector<double> lowpass_profile(int n, double keep, double taper_sigma) {
  if (n < 1) throw ValidationError("low-pass profile needs n >= 1");
  if (!(keep > 0.0 && keep <= 1.0)) throw ValidationError("lowpass_keep must lie in (0, 1]");
  if (!(taper_sigma > 0.0)) throw ValidationError("lowpass_taper_sigma must be > 0");
  const int kept = std::clamp(int(std::ceil(keep * n - 1e-9)), 1, n);
  const int first = n / 2 - kept / 2;
  const int last = first + kept - 1;
  std::vector<double> w(std::size_t(n), 1.0);
  for (int i = 0; i < n; ++i) {
    const int d = i < first ? first - i : (i > last ? i - last : 0);
    if (d > 0) w[std::size_t(i)] = std::exp(-double(d) * double(d) / (2.0 * taper_sigma * taper_sigma));
  }
  return w;
}

ComplexImageSequence synthesize_phase(const ImageSequence& img, const PhaseGenSpec& spec) {
  spec.validate();
  validate_dims(img.dims());
  require_finite(img.values(), "phase synthesis input");

  const double peak = img.values().empty() ? 0.0 : *std::max_element(img.values().begin(), img.values().end());
  const double noise_std = spec.noise_sigma * std::abs(peak);

  Rng rng(spec.rng_seed);
  ComplexImageSequence noisy(img.dims());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double re = noise_std * rng.normal();
    const double im = noise_std * rng.normal();
    noisy.values()[i] = cplx(img.values()[i] + re, im);
  }
  require_finite(noisy.values(), "noisy image (noise_sigma too large)");

  const auto row_w = lowpass_profile(img.rows(), spec.lowpass_keep, spec.lowpass_taper_sigma);
  const auto col_w = lowpass_profile(img.cols(), spec.lowpass_keep, spec.lowpass_taper_sigma);
  const bool passes_all = std::all_of(row_w.begin(), row_w.end(), [](double w) { return w == 1.0; }) &&
                          std::all_of(col_w.begin(), col_w.end(), [](double w) { return w == 1.0; });

  ComplexImageSequence& filtered = noisy;
  if (!passes_all) {
    std::vector<cplx> spectrum(img.dims().frame_size());
    for (int t = 0; t < img.frames(); ++t) {
      fft2_frame(noisy.frame(t), spectrum, img.rows(), img.cols());
      for (int r = 0; r < img.rows(); ++r) {
        for (int c = 0; c < img.cols(); ++c) {
          spectrum[std::size_t(r) * img.cols() + c] *= row_w[std::size_t(r)] * col_w[std::size_t(c)];
        }
      }
      ifft2_frame(spectrum, filtered.frame(t), img.rows(), img.cols());
    }
  }

  ComplexImageSequence out(img.dims());
  for (std::size_t i = 0; i < img.size(); ++i) {
    out.values()[i] = polar_exact(img.values()[i], std::arg(filtered.values()[i]));
  }
  return out;
}

void CorruptionSpec::validate() const {
  if (z < 1) throw ValidationError("z must be >= 1");
  if (!std::isfinite(offset_sigma) || offset_sigma <= 0.0) throw ValidationError("offset_sigma must be > 0");
}

double CorruptionRecord::corrupted_fraction() const {
  return mask.size() == 0 ? 0.0 : double(mask.count()) / double(mask.size());
}

nlohmann::json CorruptionRecord::to_json() const {
  nlohmann::json entries_json = nlohmann::json::array();
  for (const auto& e : entries) entries_json.push_back({e.frame, e.line, e.source});
  return {{"z", spec.z}, {"offset_sigma", spec.offset_sigma}, {"seed", spec.rng_seed}, {"entries", entries_json}};
}

CorruptionRecord CorruptionRecord::from_json(const nlohmann::json& j, int frames, int lines) {
  CorruptionRecord rec;
  try {
    rec.spec.z = j.at("z").get<int>();
    rec.spec.offset_sigma = j.at("offset_sigma").get<double>();
    rec.spec.rng_seed = j.at("seed").get<std::uint64_t>();
    rec.mask = LineMask(frames, lines);
    for (const auto& e : j.at("entries")) {
      CorruptionEntry entry{e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<int>()};
      if (entry.frame < 0 || entry.frame >= frames || entry.line < 0 || entry.line >= lines ||
          entry.source < 0 || entry.source >= frames || entry.source == entry.frame) {
        throw ValidationError("corruption record entry out of range");
      }
      rec.entries.push_back(entry);
      rec.mask(entry.frame, entry.line) = 1;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed corruption record: ") + e.what());
  }
  return rec;
}

CorruptedKSpace corrupt_kspace(const KSpaceSequence& ks, const CorruptionSpec& spec) {
  spec.validate();
  validate_dims(ks.dims());
  const int frames = ks.frames();
  if (frames < 2) throw ValidationError("no donor frame: corruption needs at least two frames");

  CorruptedKSpace out{ks, {spec, {}, LineMask(frames, ks.line_count())}};
  Rng rng(spec.rng_seed);
  constexpr int kMaxRedraws = 10000;
  for (int t = 0; t < frames; ++t) {
    const int residue = int(rng.below(std::uint64_t(spec.z)));
    for (int l = residue; l < ks.line_count(); l += spec.z) {
      int source = t;
      for (int attempt = 0; attempt < kMaxRedraws && source == t; ++attempt) {
        const double j = spec.offset_sigma * rng.normal();
        source = std::clamp(int(std::lround(double(t) + j)), 0, frames - 1);
      }
      if (source == t) source = t + 1 < frames ? t + 1 : t - 1;
      const auto donor = ks.line(source, l);
      std::copy(donor.begin(), donor.end(), out.kspace.line(t, l).begin());
      out.record.entries.push_back({t, l, source});
      out.record.mask(t, l) = 1;
    }
  }
  return out;
}

std::vector<SeverityLevel> severity_sweep(const KSpaceSequence& ks, std::span<const int> z_values,
                                          const CorruptionSpec& tmpl) {
  if (z_values.empty()) throw ValidationError("severity sweep needs at least one z value");
  std::vector<SeverityLevel> levels;
  levels.reserve(z_values.size());
  for (int z : z_values) {
    CorruptionSpec spec = tmpl;
    spec.z = z;
    spec.rng_seed = derive_seed(tmpl.rng_seed, std::uint64_t(z));
    auto result = corrupt_kspace(ks, spec);
    levels.push_back({z, std::move(result.kspace), std::move(result.record)});
  }
  return levels;
}

}  // namespace kslab
