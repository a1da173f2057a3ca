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

#include "kslab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "kslab/fft.hpp"
#include "kslab/rng.hpp"
#include "kslab/segmentation.hpp"

namespace kslab {
namespace {

void check_pair(const ImageSequence& x, const ImageSequence& y) {
  if (x.dims() != y.dims()) throw ValidationError("metric inputs differ in shape");
}

int reflect(int i, int n) {
  if (i < 0) return -i - 1;
  if (i >= n) return 2 * n - i - 1;
  return i;
}

// Separable filtering with symmetric extension; `tmp` is scratch of the same size.
void gaussian_blur(std::span<const double> in, std::span<double> out, std::span<double> tmp, int rows, int cols,
                   const std::vector<double>& w) {
  const int radius = int(w.size()) / 2;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += w[std::size_t(k + radius)] * in[std::size_t(r) * cols + reflect(c + k, cols)];
      tmp[std::size_t(r) * cols + c] = acc;
    }
  }
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += w[std::size_t(k + radius)] * tmp[std::size_t(reflect(r + k, rows)) * cols + c];
      out[std::size_t(r) * cols + c] = acc;
    }
  }
}

}  // namespace

double mae(const ImageSequence& x, const ImageSequence& y) {
  check_pair(x, y);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += std::abs(x.values()[i] - y.values()[i]);
  return sum / double(x.size());
}

double psnr(const ImageSequence& truth, const ImageSequence& test) {
  check_pair(truth, test);
  const double peak = *std::max_element(truth.values().begin(), truth.values().end());
  if (!(peak > 0.0)) throw ValidationError("PSNR needs a ground truth with positive maximum");
  double sse = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = truth.values()[i] - test.values()[i];
    sse += d * d;
  }
  const double mse = sse / double(truth.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(peak) - 10.0 * std::log10(mse);
}

std::vector<double> gaussian_window(int size, double sigma) {
  if (size < 1 || size % 2 == 0) throw ValidationError("SSIM window size must be odd and positive");
  if (!(sigma > 0.0)) throw ValidationError("SSIM window sigma must be > 0");
  std::vector<double> w(static_cast<std::size_t>(size));
  const int radius = size / 2;
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    w[std::size_t(i + radius)] = std::exp(-double(i * i) / (2.0 * sigma * sigma));
    sum += w[std::size_t(i + radius)];
  }
  for (double& v : w) v /= sum;
  return w;
}

double ssim(const ImageSequence& x, const ImageSequence& y, const SsimConfig& cfg) {
  check_pair(x, y);
  if (cfg.window > x.rows() || cfg.window > x.cols()) {
    throw ValidationError("SSIM window (" + std::to_string(cfg.window) + ") is larger than the image");
  }
  const auto w = gaussian_window(cfg.window, cfg.sigma);
  const double c1 = (0.01 * cfg.dynamic_range) * (0.01 * cfg.dynamic_range);
  const double c2 = (0.03 * cfg.dynamic_range) * (0.03 * cfg.dynamic_range);
  const int rows = x.rows(), cols = x.cols();
  const std::size_t n = x.dims().frame_size();
  std::vector<double> xx(n), yy(n), xy(n), mx(n), my(n), exx(n), eyy(n), exy(n), tmp(n);
  double total = 0.0;
  for (int t = 0; t < x.frames(); ++t) {
    const auto fx = x.frame(t);
    const auto fy = y.frame(t);
    for (std::size_t i = 0; i < n; ++i) {
      xx[i] = fx[i] * fx[i];
      yy[i] = fy[i] * fy[i];
      xy[i] = fx[i] * fy[i];
    }
    gaussian_blur(fx, mx, tmp, rows, cols, w);
    gaussian_blur(fy, my, tmp, rows, cols, w);
    gaussian_blur(xx, exx, tmp, rows, cols, w);
    gaussian_blur(yy, eyy, tmp, rows, cols, w);
    gaussian_blur(xy, exy, tmp, rows, cols, w);
    for (std::size_t i = 0; i < n; ++i) {
      const double vx = exx[i] - mx[i] * mx[i];
      const double vy = eyy[i] - my[i] * my[i];
      const double cov = exy[i] - mx[i] * my[i];
      const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2);
      const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
      total += num / den;
    }
  }
  return total / double(x.size());
}

double periodic_total_variation(std::span<const double> frame, int rows, int cols) {
  double tv = 0.0;
  for (int r = 0; r < rows; ++r) {
    const int rn = (r + 1) % rows;
    for (int c = 0; c < cols; ++c) {
      const int cn = (c + 1) % cols;
      const double v = frame[std::size_t(r) * cols + c];
      tv += std::abs(frame[std::size_t(r) * cols + cn] - v) + std::abs(frame[std::size_t(rn) * cols + c] - v);
    }
  }
  return tv;
}

double log10_normal_upper_tail(double z) {
  if (z < 35.0) return std::log10(0.5 * std::erfc(z / std::numbers::sqrt2));
  // Q(z) ~ phi(z)/z * (1 - 1/z^2 + 3/z^4 - 15/z^6)
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
  const double ln_q = -0.5 * z2 - std::log(z) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
  return ln_q / std::numbers::ln10;
}

SharpnessResult sharpness_index(const ImageSequence& x, const SharpnessConfig& cfg) {
  validate_dims(x.dims());
  if (cfg.surrogates < 2) throw ValidationError("sharpness index needs at least two surrogates");
  require_finite(x.values(), "sharpness index input");
  const int rows = x.rows(), cols = x.cols();
  const std::size_t n = x.dims().frame_size();
  std::vector<cplx> spectrum(n), buffer(n), surrogate(n);
  std::vector<double> real_part(n);
  std::vector<double> tvs(std::size_t(cfg.surrogates));

  // Unit phasors of the noise spectra, shared by every frame.
  std::vector<std::vector<cplx>> phases(std::size_t(cfg.surrogates), std::vector<cplx>(n));
  Rng rng(cfg.seed);
  for (auto& phase : phases) {
    for (std::size_t i = 0; i < n; ++i) buffer[i] = cplx(rng.normal(), 0.0);
    fft2_frame(buffer, phase, rows, cols);
    for (cplx& p : phase) {
      const double a = std::abs(p);
      p = a > 0.0 ? p / a : cplx(1.0, 0.0);
    }
  }

  SharpnessResult result;
  double sum = 0.0;
  for (int t = 0; t < x.frames(); ++t) {
    const auto frame = x.frame(t);
    for (std::size_t i = 0; i < n; ++i) buffer[i] = cplx(frame[i], 0.0);
    fft2_frame(buffer, spectrum, rows, cols);
    const double tv = periodic_total_variation(frame, rows, cols);
    for (std::size_t m = 0; m < phases.size(); ++m) {
      for (std::size_t i = 0; i < n; ++i) surrogate[i] = std::abs(spectrum[i]) * phases[m][i];
      ifft2_frame(surrogate, surrogate, rows, cols);
      for (std::size_t i = 0; i < n; ++i) real_part[i] = surrogate[i].real();
      tvs[m] = periodic_total_variation(real_part, rows, cols);
    }
    double mu = 0.0;
    for (double v : tvs) mu += v;
    mu /= double(tvs.size());
    double var = 0.0;
    for (double v : tvs) var += (v - mu) * (v - mu);
    const double sd = std::sqrt(var / double(tvs.size() - 1));
    if (!(sd > 1e-12 * std::max(1.0, mu))) {
      result.degenerate = true;
      continue;
    }
    sum += -log10_normal_upper_tail((mu - tv) / sd);
  }
  result.value = sum / double(x.frames());
  return result;
}

MetricsReport assemble_report(const ImageSequence& reference, const ImageSequence& test, const ReportContext& ctx,
                              const SegmentationMap* predicted, const SegmentationMap* truth) {
  MetricsReport r;
  r.run_id = ctx.run_id;
  r.config_hash = ctx.config_hash;
  r.stage = ctx.stage;
  r.z = ctx.z;
  r.j_sigma = ctx.j_sigma;
  r.lambda = ctx.lambda;
  r.mae = mae(reference, test);
  r.psnr = psnr(reference, test);
  r.ssim = ssim(reference, test);
  r.sharpness_index = ctx.with_sharpness ? sharpness_index(test, ctx.sharpness).value
                                         : std::numeric_limits<double>::quiet_NaN();
  if (predicted && truth) {
    r.dice_lv = dice(*predicted, *truth, int(TissueClass::kLV));
    r.dice_myo = dice(*predicted, *truth, int(TissueClass::kMyo));
    r.dice_rv = dice(*predicted, *truth, int(TissueClass::kRV));
  }
  return r;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string metrics_csv_header() { return "run_id,stage,z,j_sigma,lambda,mae,psnr,ssim,si,dice_lv,dice_myo,dice_rv"; }

std::string metrics_csv_row(const MetricsReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  return r.run_id + "," + r.stage + "," + std::to_string(r.z) + "," + format_number(r.j_sigma) + "," +
         format_number(r.lambda) + "," + format_number(r.mae) + "," + format_number(r.psnr) + "," +
         format_number(r.ssim) + "," + format_number(r.sharpness_index) + "," + opt(r.dice_lv) + "," +
         opt(r.dice_myo) + "," + opt(r.dice_rv);
}

}  // namespace kslab
