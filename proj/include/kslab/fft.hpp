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

#include <span>

#include "kslab/tensor.hpp"

namespace kslab {

// Centred, orthonormal 2D DFT applied frame by frame.
//
//   K[t] = fftshift(F(x[t])) / sqrt(H * W)
//
// The DC coefficient lands at (H/2, W/2) (integer division); image-domain
// samples are not shifted. ifft2 is the exact adjoint, so Parseval holds.

/// Throws ValidationError on non-finite input.
KSpaceSequence fft2(const ComplexImageSequence& seq);
ComplexImageSequence ifft2(const KSpaceSequence& ks);

// Single-frame variants over row-major rows x cols buffers. `in` and `out`
// may alias.
void fft2_frame(std::span<const cplx> in, std::span<cplx> out, int rows, int cols);
void ifft2_frame(std::span<const cplx> in, std::span<cplx> out, int rows, int cols);

}  // namespace kslab
