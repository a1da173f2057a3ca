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

#include "kslab/correction.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kslab/fft.hpp"

namespace kslab {
namespace {

void check_mask(const KSpaceSequence& ks, const LineMask& mask) {
  if (!mask.matches(ks.dims())) throw ValidationError("line mask does not match the k-space geometry");
}

double tv_term(double d) { return std::sqrt(d * d + kTvDelta * kTvDelta); }
double tv_slope(double d) { return d / std::sqrt(d * d + kTvDelta * kTvDelta); }

double data_residual(const KSpaceSequence& estimate, const KSpaceSequence& acquired, const LineMask& mask) {
  double num = 0.0, den = 0.0;
  for (int t = 0; t < acquired.frames(); ++t) {
    for (int l = 0; l < acquired.line_count(); ++l) {
      if (mask(t, l)) continue;
      const auto e = estimate.line(t, l);
      const auto a = acquired.line(t, l);
      for (std::size_t w = 0; w < a.size(); ++w) {
        num += std::norm(e[w] - a[w]);
        den += std::norm(a[w]);
      }
    }
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

bool energy_descent_violated(const std::vector<double>& energy) {
  int violations = 0;
  for (std::size_t k = 1; k < energy.size(); ++k) {
    const double rise = energy[k] - energy[k - 1];
    if (rise <= 0.0) continue;
    ++violations;
    if (rise > 1e-6 * std::max(1.0, std::abs(energy[k - 1]))) return true;
  }
  return violations > 1;
}

CorrectionResult run_iterations(const KSpaceSequence& acquired, const LineMask& mask, const CorrectionConfig& cfg,
                                double step) {
  CorrectionResult res;
  res.mask_used = mask;
  res.step_size_used = step;
  ComplexImageSequence x = ifft2(acquired);
  res.energy_trace.push_back(regularization_energy(x, cfg));
  int growth_streak = 0;
  for (int k = 0; k < cfg.iterations; ++k) {
    const ComplexImageSequence grad = regularization_gradient(x, cfg);
    for (std::size_t i = 0; i < x.size(); ++i) x.values()[i] -= step * grad.values()[i];
    const KSpaceSequence estimate = fft2(x);
    const double residual = data_residual(estimate, acquired, mask);
    if (!std::isfinite(residual)) throw NumericError("correction produced non-finite values");
    if (!res.per_iteration_residuals.empty() && residual > 10.0 * res.per_iteration_residuals.back()) {
      if (++growth_streak >= 3) {
        throw NumericError("correction diverged: residual grew tenfold for 3 consecutive iterations (iteration " +
                           std::to_string(k + 1) + ")");
      }
    } else {
      growth_streak = 0;
    }
    res.per_iteration_residuals.push_back(residual);
    x = ifft2(hard_data_consistency(estimate, acquired, mask));
    res.energy_trace.push_back(regularization_energy(x, cfg));
  }
  res.corrected_kspace = hard_data_consistency(fft2(x), acquired, mask);
  res.corrected = ifft2(res.corrected_kspace);
  return res;
}

}  // namespace

void CorrectionConfig::validate() const {
  if (iterations < 1) throw ValidationError("correction needs at least one iteration");
  if (!std::isfinite(temporal_weight) || temporal_weight < 0.0) throw ValidationError("temporal_weight must be >= 0");
  if (!std::isfinite(spatial_tv_weight) || spatial_tv_weight < 0.0) throw ValidationError("tv weight must be >= 0");
  if (!std::isfinite(step_size) || step_size <= 0.0) throw ValidationError("step_size must be > 0");
}

double CorrectionConfig::gradient_step() const {
  if (temporal_weight <= 0.0) return step_size;
  return step_size / (8.0 * temporal_weight);
}

KSpaceSequence hard_data_consistency(const KSpaceSequence& estimate, const KSpaceSequence& acquired,
                                     const LineMask& mask) {
  if (estimate.dims() != acquired.dims()) throw ValidationError("estimate and acquired k-space differ in shape");
  check_mask(acquired, mask);
  KSpaceSequence out = acquired;
  for (int t = 0; t < acquired.frames(); ++t) {
    for (int l = 0; l < acquired.line_count(); ++l) {
      if (!mask(t, l)) continue;
      const auto src = estimate.line(t, l);
      std::copy(src.begin(), src.end(), out.line(t, l).begin());
    }
  }
  return out;
}

double regularization_energy(const ComplexImageSequence& x, const CorrectionConfig& cfg) {
  const int frames = x.frames(), rows = x.rows(), cols = x.cols();
  double temporal = 0.0;
  if (cfg.temporal_weight > 0.0 && frames > 1) {
    for (int t = 0; t < frames; ++t) {
      const auto cur = x.frame(t);
      const auto prev = x.frame((t + frames - 1) % frames);
      for (std::size_t i = 0; i < cur.size(); ++i) temporal += std::norm(cur[i] - prev[i]);
    }
  }
  double tv = 0.0;
  if (cfg.spatial_tv_weight > 0.0) {
    for (int t = 0; t < frames; ++t) {
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          const cplx v = x(t, r, c);
          if (c + 1 < cols) {
            const cplx d = x(t, r, c + 1) - v;
            tv += tv_term(d.real()) + tv_term(d.imag());
          }
          if (r + 1 < rows) {
            const cplx d = x(t, r + 1, c) - v;
            tv += tv_term(d.real()) + tv_term(d.imag());
          }
        }
      }
    }
  }
  return cfg.temporal_weight * temporal + cfg.spatial_tv_weight * tv;
}

ComplexImageSequence regularization_gradient(const ComplexImageSequence& x, const CorrectionConfig& cfg) {
  const int frames = x.frames(), rows = x.rows(), cols = x.cols();
  ComplexImageSequence g(x.dims());
  if (cfg.temporal_weight > 0.0 && frames > 1) {
    const double w = 2.0 * cfg.temporal_weight;
    for (int t = 0; t < frames; ++t) {
      const auto cur = x.frame(t);
      const auto prev = x.frame((t + frames - 1) % frames);
      const auto next = x.frame((t + 1) % frames);
      auto out = g.frame(t);
      for (std::size_t i = 0; i < cur.size(); ++i) out[i] += w * (2.0 * cur[i] - prev[i] - next[i]);
    }
  }
  if (cfg.spatial_tv_weight > 0.0) {
    const double w = cfg.spatial_tv_weight;
    for (int t = 0; t < frames; ++t) {
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          const cplx v = x(t, r, c);
          if (c + 1 < cols) {
            const cplx d = x(t, r, c + 1) - v;
            const cplx s(w * tv_slope(d.real()), w * tv_slope(d.imag()));
            g(t, r, c) -= s;
            g(t, r, c + 1) += s;
          }
          if (r + 1 < rows) {
            const cplx d = x(t, r + 1, c) - v;
            const cplx s(w * tv_slope(d.real()), w * tv_slope(d.imag()));
            g(t, r, c) -= s;
            g(t, r + 1, c) += s;
          }
        }
      }
    }
  }
  return g;
}

CorrectionResult correct(const KSpaceSequence& acquired, const LineMask& mask, const CorrectionConfig& cfg) {
  cfg.validate();
  validate_dims(acquired.dims());
  check_mask(acquired, mask);
  require_finite(acquired.values(), "acquired k-space");

  CorrectionResult res = run_iterations(acquired, mask, cfg, cfg.gradient_step());
  if (energy_descent_violated(res.energy_trace)) {
    res = run_iterations(acquired, mask, cfg, 0.5 * cfg.gradient_step());
    res.step_halved = true;
  }
  return res;
}

double reconstruction_loss(const ImageSequence& recon, const ImageSequence& target) {
  if (recon.dims() != target.dims()) throw ValidationError("reconstruction and target differ in shape");
  double sum = 0.0;
  for (std::size_t i = 0; i < recon.size(); ++i) {
    const double d = recon.values()[i] - target.values()[i];
    sum += d * d;
  }
  return sum / double(recon.size());
}

double correction_loss(const ImageSequence& recon, const ImageSequence& target, const LineProbabilities& probs,
                       const LineMask& labels, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("gamma must lie in [0, 1]");
  return gamma * detection_loss(probs, labels) + (1.0 - gamma) * reconstruction_loss(recon, target);
}

}  // namespace kslab
