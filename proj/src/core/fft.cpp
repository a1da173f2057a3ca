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

#include "kslab/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <utility>

namespace kslab {
namespace {

struct FftwDeleter {
  void operator()(fftw_complex* p) const { fftw_free(p); }
};
using FftwBuffer = std::unique_ptr<fftw_complex[], FftwDeleter>;

FftwBuffer alloc_buffer(std::size_t n) {
  FftwBuffer buf(fftw_alloc_complex(n));
  if (!buf) throw std::bad_alloc();
  return buf;
}

// FFTW's planner is not re-entrant; executing an existing plan on new arrays
// is. Plans are created once per (rows, cols, sign) and never destroyed.
fftw_plan plan_for(int rows, int cols, int sign) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, int>, fftw_plan> plans;
  std::lock_guard lock(mutex);
  auto key = std::make_tuple(rows, cols, sign);
  if (auto it = plans.find(key); it != plans.end()) return it->second;
  auto in = alloc_buffer(std::size_t(rows) * cols);
  auto out = alloc_buffer(std::size_t(rows) * cols);
  fftw_plan plan = fftw_plan_dft_2d(rows, cols, in.get(), out.get(), sign, FFTW_ESTIMATE);
  if (plan == nullptr) throw Error("FFTW failed to create a plan");
  plans.emplace(key, plan);
  return plan;
}

struct Workspace {
  FftwBuffer in;
  FftwBuffer out;
  std::size_t capacity = 0;

  void reserve(std::size_t n) {
    if (n <= capacity) return;
    in = alloc_buffer(n);
    out = alloc_buffer(n);
    capacity = n;
  }
};

Workspace& workspace(std::size_t n) {
  thread_local Workspace ws;
  ws.reserve(n);
  return ws;
}

void check_frame(std::span<const cplx> in, std::span<cplx> out, int rows, int cols) {
  if (rows < 1 || cols < 1) throw ValidationError("FFT frame needs positive extents");
  const std::size_t n = std::size_t(rows) * std::size_t(cols);
  if (in.size() != n || out.size() != n) throw ValidationError("FFT frame buffer does not match its geometry");
}

}  // namespace

void fft2_frame(std::span<const cplx> in, std::span<cplx> out, int rows, int cols) {
  check_frame(in, out, rows, cols);
  const std::size_t n = in.size();
  Workspace& ws = workspace(n);
  for (std::size_t i = 0; i < n; ++i) {
    ws.in[i][0] = in[i].real();
    ws.in[i][1] = in[i].imag();
  }
  fftw_execute_dft(plan_for(rows, cols, FFTW_FORWARD), ws.in.get(), ws.out.get());
  const double scale = 1.0 / std::sqrt(double(n));
  const int hr = rows / 2;
  const int hc = cols / 2;
  for (int r = 0; r < rows; ++r) {
    const int sr = (r + hr) % rows;
    for (int c = 0; c < cols; ++c) {
      const int sc = (c + hc) % cols;
      const fftw_complex& v = ws.out[std::size_t(r) * cols + c];
      out[std::size_t(sr) * cols + sc] = cplx(v[0] * scale, v[1] * scale);
    }
  }
}

void ifft2_frame(std::span<const cplx> in, std::span<cplx> out, int rows, int cols) {
  check_frame(in, out, rows, cols);
  const std::size_t n = in.size();
  Workspace& ws = workspace(n);
  const int hr = rows / 2;
  const int hc = cols / 2;
  for (int r = 0; r < rows; ++r) {
    const int sr = (r + hr) % rows;
    for (int c = 0; c < cols; ++c) {
      const int sc = (c + hc) % cols;
      const cplx& v = in[std::size_t(sr) * cols + sc];
      ws.in[std::size_t(r) * cols + c][0] = v.real();
      ws.in[std::size_t(r) * cols + c][1] = v.imag();
    }
  }
  fftw_execute_dft(plan_for(rows, cols, FFTW_BACKWARD), ws.in.get(), ws.out.get());
  const double scale = 1.0 / std::sqrt(double(n));
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = cplx(ws.out[i][0] * scale, ws.out[i][1] * scale);
  }
}

KSpaceSequence fft2(const ComplexImageSequence& seq) {
  validate_dims(seq.dims());
  require_finite(seq.values(), "fft2 input");
  KSpaceSequence ks(seq.dims());
  for (int t = 0; t < seq.frames(); ++t) fft2_frame(seq.frame(t), ks.frame(t), seq.rows(), seq.cols());
  return ks;
}

ComplexImageSequence ifft2(const KSpaceSequence& ks) {
  validate_dims(ks.dims());
  if (ks.values().size() != ks.dims().size()) throw ValidationError("k-space payload does not match its shape");
  require_finite(ks.values(), "ifft2 input");
  ComplexImageSequence seq(ks.dims());
  for (int t = 0; t < ks.frames(); ++t) ifft2_frame(ks.frame(t), seq.frame(t), ks.rows(), ks.cols());
  return seq;
}

}  // namespace kslab
