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

#include "kslab/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Core>

#include "kslab/container.hpp"
#include "kslab/rng.hpp"

namespace kslab {
namespace {

constexpr int kEnc1 = 8, kEnc2 = 16, kMid = 32, kDec1 = 16, kDec2 = 8;

struct Map {
  int channels = 0, rows = 0, cols = 0;
  std::vector<double> data;

  Map() = default;
  Map(int c, int r, int w) : channels(c), rows(r), cols(w), data(std::size_t(c) * r * w, 0.0) {}
  double* plane(int c) { return data.data() + std::size_t(c) * rows * cols; }
  const double* plane(int c) const { return data.data() + std::size_t(c) * rows * cols; }
  std::size_t plane_size() const { return std::size_t(rows) * cols; }
};

Map padded(const Map& in) {
  Map p(in.channels, in.rows + 2, in.cols + 2);
  for (int c = 0; c < in.channels; ++c) {
    for (int r = 0; r < in.rows; ++r) {
      std::copy_n(in.plane(c) + std::size_t(r) * in.cols, in.cols, p.plane(c) + std::size_t(r + 1) * p.cols + 1);
    }
  }
  return p;
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixView = Eigen::Map<const RowMatrix>;
using MatrixView = Eigen::Map<RowMatrix>;

// Patch matrix [in_channels * 9][rows * cols] of the zero-padded input;
// row (i * 9 + ky * 3 + kx) holds input channel i shifted by (ky - 1, kx - 1).
RowMatrix im2col(const Map& in) {
  const Map p = padded(in);
  RowMatrix cols(Eigen::Index(in.channels) * 9, Eigen::Index(in.plane_size()));
  for (int i = 0; i < in.channels; ++i) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* dst = cols.row(Eigen::Index(i) * 9 + ky * 3 + kx).data();
        for (int r = 0; r < in.rows; ++r) {
          std::copy_n(p.plane(i) + std::size_t(r + ky) * p.cols + kx, in.cols, dst + std::size_t(r) * in.cols);
        }
      }
    }
  }
  return cols;
}

// 3x3 zero-padded convolution (cross-correlation), weights [out][in][3][3].
Map conv3x3(const Map& in, std::span<const double> w, std::span<const double> b, int out_channels) {
  const RowMatrix patches = im2col(in);
  Map out(out_channels, in.rows, in.cols);
  const ConstMatrixView weights(w.data(), out_channels, Eigen::Index(in.channels) * 9);
  MatrixView result(out.data.data(), out_channels, Eigen::Index(out.plane_size()));
  result.noalias() = weights * patches;
  for (int o = 0; o < out_channels; ++o) result.row(o).array() += b[std::size_t(o)];
  return out;
}

// Accumulates weight and bias gradients; returns the gradient w.r.t. the input.
Map conv3x3_backward(const Map& in, const Map& grad_out, std::span<const double> w, std::span<double> gw,
                     std::span<double> gb, bool need_input_grad) {
  const RowMatrix patches = im2col(in);
  const Eigen::Index k = Eigen::Index(in.channels) * 9;
  const ConstMatrixView go(grad_out.data.data(), grad_out.channels, Eigen::Index(grad_out.plane_size()));
  MatrixView(gw.data(), grad_out.channels, k).noalias() += go * patches.transpose();
  for (int o = 0; o < grad_out.channels; ++o) gb[std::size_t(o)] += go.row(o).sum();
  if (!need_input_grad) return {};

  const ConstMatrixView weights(w.data(), grad_out.channels, k);
  const RowMatrix gpatches = weights.transpose() * go;
  // col2im: scatter every patch row back onto the padded input grid.
  Map gp(in.channels, in.rows + 2, in.cols + 2);
  for (int i = 0; i < in.channels; ++i) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* src = gpatches.row(Eigen::Index(i) * 9 + ky * 3 + kx).data();
        for (int r = 0; r < in.rows; ++r) {
          double* d = gp.plane(i) + std::size_t(r + ky) * gp.cols + kx;
          const double* g = src + std::size_t(r) * in.cols;
          for (int c = 0; c < in.cols; ++c) d[c] += g[c];
        }
      }
    }
  }
  Map gin(in.channels, in.rows, in.cols);
  for (int c = 0; c < in.channels; ++c) {
    for (int r = 0; r < in.rows; ++r) {
      std::copy_n(gp.plane(c) + std::size_t(r + 1) * gp.cols + 1, in.cols, gin.plane(c) + std::size_t(r) * in.cols);
    }
  }
  return gin;
}

void relu_inplace(Map& m) {
  for (double& v : m.data) v = v < 0.0 ? 0.0 : v;  // keeps NaN visible to the loss check
}

// Zeroes gradient entries where the rectified activation was not positive.
void relu_backward(const Map& activation, Map& grad) {
  for (std::size_t i = 0; i < grad.data.size(); ++i) {
    if (!(activation.data[i] > 0.0)) grad.data[i] = 0.0;
  }
}

// 2x2 max-pool; `argmax` receives the flat source index of each output (first max wins).
Map maxpool(const Map& in, std::vector<std::size_t>& argmax) {
  Map out(in.channels, in.rows / 2, in.cols / 2);
  argmax.assign(out.data.size(), 0);
  for (int c = 0; c < in.channels; ++c) {
    for (int r = 0; r < out.rows; ++r) {
      for (int q = 0; q < out.cols; ++q) {
        std::size_t best = (std::size_t(c) * in.rows + 2 * r) * in.cols + 2 * q;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (std::size_t(c) * in.rows + 2 * r + dy) * in.cols + 2 * q + dx;
            if (in.data[idx] > in.data[best]) best = idx;
          }
        }
        const std::size_t o = (std::size_t(c) * out.rows + r) * out.cols + q;
        out.data[o] = in.data[best];
        argmax[o] = best;
      }
    }
  }
  return out;
}

Map maxpool_backward(const Map& grad_out, const std::vector<std::size_t>& argmax, int rows, int cols) {
  Map gin(grad_out.channels, rows, cols);
  for (std::size_t o = 0; o < grad_out.data.size(); ++o) gin.data[argmax[o]] += grad_out.data[o];
  return gin;
}

// Nearest-neighbour x2 upsample of `low` stacked on top of `skip` along channels.
Map upsample_concat(const Map& low, const Map& skip) {
  Map out(low.channels + skip.channels, skip.rows, skip.cols);
  for (int c = 0; c < low.channels; ++c) {
    double* dst = out.plane(c);
    const double* src = low.plane(c);
    for (int r = 0; r < skip.rows; ++r) {
      for (int q = 0; q < skip.cols; ++q) dst[std::size_t(r) * skip.cols + q] = src[std::size_t(r / 2) * low.cols + q / 2];
    }
  }
  std::copy(skip.data.begin(), skip.data.end(), out.data.begin() + std::ptrdiff_t(std::size_t(low.channels) * out.plane_size()));
  return out;
}

// Splits the concat gradient: returns the gradient of `low`, adds the skip part into grad_skip.
Map upsample_concat_backward(const Map& grad, int low_channels, int low_rows, int low_cols, Map& grad_skip) {
  Map gl(low_channels, low_rows, low_cols);
  for (int c = 0; c < low_channels; ++c) {
    const double* src = grad.plane(c);
    double* dst = gl.plane(c);
    for (int r = 0; r < grad.rows; ++r) {
      for (int q = 0; q < grad.cols; ++q) dst[std::size_t(r / 2) * low_cols + q / 2] += src[std::size_t(r) * grad.cols + q];
    }
  }
  const std::size_t offset = std::size_t(low_channels) * grad.plane_size();
  for (std::size_t i = 0; i < grad_skip.data.size(); ++i) grad_skip.data[i] += grad.data[offset + i];
  return gl;
}

struct FrameCache {
  Map x, a1, p1, a2, p2, a3, c1, a4, c2, a5, logits;
  std::vector<std::size_t> idx1, idx2;
};

FrameCache forward_frame(const ParameterPack& p, std::span<const double> frame, int rows, int cols) {
  using S = SegModel::Slot;
  FrameCache f;
  f.x = Map(1, rows, cols);
  std::copy(frame.begin(), frame.end(), f.x.data.begin());
  f.a1 = conv3x3(f.x, p.tensor(S::kEnc1W), p.tensor(S::kEnc1B), kEnc1);
  relu_inplace(f.a1);
  f.p1 = maxpool(f.a1, f.idx1);
  f.a2 = conv3x3(f.p1, p.tensor(S::kEnc2W), p.tensor(S::kEnc2B), kEnc2);
  relu_inplace(f.a2);
  f.p2 = maxpool(f.a2, f.idx2);
  f.a3 = conv3x3(f.p2, p.tensor(S::kMidW), p.tensor(S::kMidB), kMid);
  relu_inplace(f.a3);
  f.c1 = upsample_concat(f.a3, f.a2);
  f.a4 = conv3x3(f.c1, p.tensor(S::kDec1W), p.tensor(S::kDec1B), kDec1);
  relu_inplace(f.a4);
  f.c2 = upsample_concat(f.a4, f.a1);
  f.a5 = conv3x3(f.c2, p.tensor(S::kDec2W), p.tensor(S::kDec2B), kDec2);
  relu_inplace(f.a5);

  const auto hw = p.tensor(S::kHeadW);
  const auto hb = p.tensor(S::kHeadB);
  f.logits = Map(kClassCount, rows, cols);
  for (int k = 0; k < kClassCount; ++k) {
    double* dst = f.logits.plane(k);
    std::fill_n(dst, f.logits.plane_size(), hb[std::size_t(k)]);
    for (int c = 0; c < kDec2; ++c) {
      const double wv = hw[std::size_t(k * kDec2 + c)];
      const double* src = f.a5.plane(c);
      for (std::size_t i = 0; i < f.logits.plane_size(); ++i) dst[i] += wv * src[i];
    }
  }
  return f;
}

void backward_frame(const ParameterPack& p, const FrameCache& f, Map& dlogits, std::vector<double>& grad) {
  using S = SegModel::Slot;
  auto slot = [&](S s) {
    const auto& sl = p.slots()[s];
    return std::span<double>(grad.data() + sl.offset, sl.size);
  };
  const auto hw = p.tensor(S::kHeadW);
  auto ghw = slot(S::kHeadW);
  auto ghb = slot(S::kHeadB);
  Map da5(kDec2, f.a5.rows, f.a5.cols);
  for (int k = 0; k < kClassCount; ++k) {
    const double* g = dlogits.plane(k);
    ghb[std::size_t(k)] += std::accumulate(g, g + dlogits.plane_size(), 0.0);
    for (int c = 0; c < kDec2; ++c) {
      const double* a = f.a5.plane(c);
      double* d = da5.plane(c);
      const double wv = hw[std::size_t(k * kDec2 + c)];
      double acc = 0.0;
      for (std::size_t i = 0; i < dlogits.plane_size(); ++i) {
        acc += g[i] * a[i];
        d[i] += wv * g[i];
      }
      ghw[std::size_t(k * kDec2 + c)] += acc;
    }
  }
  relu_backward(f.a5, da5);
  Map dc2 = conv3x3_backward(f.c2, da5, p.tensor(S::kDec2W), slot(S::kDec2W), slot(S::kDec2B), true);
  Map da1(kEnc1, f.a1.rows, f.a1.cols);
  Map da4 = upsample_concat_backward(dc2, kDec1, f.a4.rows, f.a4.cols, da1);
  relu_backward(f.a4, da4);
  Map dc1 = conv3x3_backward(f.c1, da4, p.tensor(S::kDec1W), slot(S::kDec1W), slot(S::kDec1B), true);
  Map da2(kEnc2, f.a2.rows, f.a2.cols);
  Map da3 = upsample_concat_backward(dc1, kMid, f.a3.rows, f.a3.cols, da2);
  relu_backward(f.a3, da3);
  Map dp2 = conv3x3_backward(f.p2, da3, p.tensor(S::kMidW), slot(S::kMidW), slot(S::kMidB), true);
  Map pooled2 = maxpool_backward(dp2, f.idx2, f.a2.rows, f.a2.cols);
  for (std::size_t i = 0; i < da2.data.size(); ++i) da2.data[i] += pooled2.data[i];
  relu_backward(f.a2, da2);
  Map dp1 = conv3x3_backward(f.p1, da2, p.tensor(S::kEnc2W), slot(S::kEnc2W), slot(S::kEnc2B), true);
  Map pooled1 = maxpool_backward(dp1, f.idx1, f.a1.rows, f.a1.cols);
  for (std::size_t i = 0; i < da1.data.size(); ++i) da1.data[i] += pooled1.data[i];
  relu_backward(f.a1, da1);
  conv3x3_backward(f.x, da1, p.tensor(S::kEnc1W), slot(S::kEnc1W), slot(S::kEnc1B), false);
}

void check_truth(const Dims& dims, const SegmentationMap& truth) {
  if (truth.dims() != dims) throw ValidationError("segmentation truth does not match the image shape");
}

// Softmax of one pixel's logits, max-shifted.
void pixel_softmax(const double* logits, std::size_t stride, double* out) {
  double peak = logits[0];
  for (int k = 1; k < kClassCount; ++k) peak = std::max(peak, logits[std::size_t(k) * stride]);
  double sum = 0.0;
  for (int k = 0; k < kClassCount; ++k) {
    out[k] = std::exp(logits[std::size_t(k) * stride] - peak);
    sum += out[k];
  }
  for (int k = 0; k < kClassCount; ++k) out[k] /= sum;
}

// Summed (not averaged) loss of one frame; writes d(sum)/d(logits) into dlogits.
double frame_loss_and_dlogits(const FrameCache& f, std::span<const std::uint8_t> truth, Map& dlogits) {
  const std::size_t n = f.logits.plane_size();
  dlogits = Map(kClassCount, f.logits.rows, f.logits.cols);
  double total = 0.0;
  double prob[kClassCount];
  for (std::size_t i = 0; i < n; ++i) {
    pixel_softmax(f.logits.data.data() + i, n, prob);
    const int y = truth[i];
    if (prob[y] < kSegProbabilityClamp) {
      total += -std::log(kSegProbabilityClamp);
      continue;
    }
    total += -std::log(prob[y]);
    for (int k = 0; k < kClassCount; ++k) dlogits.data[std::size_t(k) * n + i] = prob[k] - (k == y ? 1.0 : 0.0);
  }
  return total;
}

}  // namespace

SegModel::SegModel() {
  params_.add("enc1.w", {kEnc1, 1, 3, 3});
  params_.add("enc1.b", {kEnc1});
  params_.add("enc2.w", {kEnc2, kEnc1, 3, 3});
  params_.add("enc2.b", {kEnc2});
  params_.add("mid.w", {kMid, kEnc2, 3, 3});
  params_.add("mid.b", {kMid});
  params_.add("dec1.w", {kDec1, kMid + kEnc2, 3, 3});
  params_.add("dec1.b", {kDec1});
  params_.add("dec2.w", {kDec2, kDec1 + kEnc1, 3, 3});
  params_.add("dec2.b", {kDec2});
  params_.add("head.w", {kClassCount, kDec2});
  params_.add("head.b", {kClassCount});
}

SegModel SegModel::random_init(std::uint64_t seed) {
  SegModel m;
  Rng rng(seed);
  for (std::size_t s = 0; s < m.params_.slots().size(); ++s) {
    const auto& slot = m.params_.slots()[s];
    if (slot.shape.size() < 2) continue;  // biases stay zero
    int fan_in = 1;
    for (std::size_t d = 1; d < slot.shape.size(); ++d) fan_in *= slot.shape[d];
    const double sd = std::sqrt(2.0 / double(fan_in));
    for (double& v : m.params_.tensor(s)) v = sd * rng.normal();
  }
  return m;
}

void require_poolable(const Dims& dims) {
  validate_dims(dims);
  if (dims.rows % 4 != 0 || dims.cols % 4 != 0) {
    throw ValidationError("segmentation needs H and W divisible by 4 (got " + std::to_string(dims.rows) + "x" +
                          std::to_string(dims.cols) + "); pad the image to a multiple of 4");
  }
}

ClassLogits segment_logits(const SegModel& model, const ImageSequence& img) {
  require_poolable(img.dims());
  require_finite(img.values(), "segmentation input");
  ClassLogits out{img.dims(), std::vector<double>(img.size() * kClassCount)};
  const std::size_t n = img.dims().frame_size();
  for (int t = 0; t < img.frames(); ++t) {
    const FrameCache f = forward_frame(model.params(), img.frame(t), img.rows(), img.cols());
    double* dst = out.values.data() + std::size_t(t) * n * kClassCount;
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 0; k < kClassCount; ++k) dst[i * kClassCount + std::size_t(k)] = f.logits.data[std::size_t(k) * n + i];
    }
  }
  return out;
}

ClassProbabilities softmax(const ClassLogits& logits) {
  ClassProbabilities out{logits.dims, std::vector<double>(logits.values.size())};
  for (std::size_t i = 0; i < logits.pixel_count(); ++i) {
    pixel_softmax(logits.values.data() + i * kClassCount, 1, out.values.data() + i * kClassCount);
  }
  return out;
}

SegmentationMap argmax_labels(const ClassField& scores) {
  SegmentationMap labels(scores.dims);
  for (std::size_t i = 0; i < scores.pixel_count(); ++i) {
    const double* s = scores.values.data() + i * kClassCount;
    int best = 0;
    for (int k = 1; k < kClassCount; ++k) {
      if (s[k] > s[best]) best = k;
    }
    labels.values()[i] = std::uint8_t(best);
  }
  return labels;
}

SegmentationOutput segment(const SegModel& model, const ImageSequence& img) {
  ClassProbabilities probs = softmax(segment_logits(model, img));
  SegmentationMap labels = argmax_labels(probs);
  return {std::move(probs), std::move(labels)};
}

double segmentation_loss(const ClassProbabilities& probs, const SegmentationMap& truth) {
  check_truth(probs.dims, truth);
  double total = 0.0;
  for (std::size_t i = 0; i < probs.pixel_count(); ++i) {
    const double p = probs.values[i * kClassCount + truth.values()[i]];
    total += -std::log(std::max(p, kSegProbabilityClamp));
  }
  return total / double(probs.pixel_count());
}

double dice(const SegmentationMap& pred, const SegmentationMap& truth, int class_id) {
  if (class_id < 0 || class_id >= kClassCount) throw ValidationError("unknown class id " + std::to_string(class_id));
  if (pred.dims() != truth.dims()) throw ValidationError("dice inputs differ in shape");
  std::size_t a = 0, b = 0, both = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool in_a = pred.values()[i] == class_id;
    const bool in_b = truth.values()[i] == class_id;
    a += in_a;
    b += in_b;
    both += in_a && in_b;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * double(both) / double(a + b);
}

SegLossGrad segmentation_loss_and_grad(const SegModel& model, const ImageSequence& img, const SegmentationMap& truth) {
  require_poolable(img.dims());
  check_truth(img.dims(), truth);
  SegLossGrad out{0.0, std::vector<double>(model.params().size(), 0.0)};
  Map dlogits;
  for (int t = 0; t < img.frames(); ++t) {
    const FrameCache f = forward_frame(model.params(), img.frame(t), img.rows(), img.cols());
    out.loss += frame_loss_and_dlogits(f, truth.frame(t), dlogits);
    backward_frame(model.params(), f, dlogits, out.grad);
  }
  const double n = double(img.size());
  out.loss /= n;
  for (double& g : out.grad) g /= n;
  return out;
}

SegTrainResult train_segmenter(std::span<const LabeledImage> corpus, const SegTrainConfig& cfg) {
  if (corpus.empty()) throw ValidationError("segmenter training corpus is empty");
  if (cfg.epochs < 0 || cfg.batch < 1) throw ValidationError("segmenter training needs epochs >= 0 and batch >= 1");
  for (const auto& item : corpus) {
    require_poolable(item.image.dims());
    check_truth(item.image.dims(), item.truth);
  }

  SegTrainResult result{SegModel::random_init(derive_seed(cfg.seed, 0)), {}};
  if (cfg.epochs == 0) return result;

  Adam adam(result.model.params().size(), AdamConfig{cfg.learning_rate});
  Rng shuffle(derive_seed(cfg.seed, 1));
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(result.model.params().size());
  Map dlogits;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
    double epoch_loss = 0.0, epoch_pixels = 0.0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch)) {
      const std::size_t stop = std::min(order.size(), start + std::size_t(cfg.batch));
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0, batch_pixels = 0.0;
      for (std::size_t b = start; b < stop; ++b) {
        const LabeledImage& item = corpus[order[b]];
        for (int t = 0; t < item.image.frames(); ++t) {
          const FrameCache f = forward_frame(result.model.params(), item.image.frame(t), item.image.rows(),
                                             item.image.cols());
          batch_loss += frame_loss_and_dlogits(f, item.truth.frame(t), dlogits);
          backward_frame(result.model.params(), f, dlogits, grad);
        }
        batch_pixels += double(item.image.size());
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericError("segmenter training loss became non-finite at epoch " + std::to_string(epoch));
      }
      for (double& g : grad) g /= batch_pixels;
      adam.step(result.model.params().values(), grad);
      epoch_loss += batch_loss;
      epoch_pixels += batch_pixels;
    }
    result.loss_trace.push_back(epoch_loss / epoch_pixels);
  }
  return result;
}

void save_segmenter(const std::filesystem::path& stem, const SegModel& model) {
  io::save_f32(stem, model.params().values(),
               {{"kind", "segmentation_model"}, {"widths", {kEnc1, kEnc2, kMid, kDec1, kDec2}},
                {"tensors", model.params().layout_json()}});
}

SegModel load_segmenter(const std::filesystem::path& stem) {
  nlohmann::json header;
  std::vector<double> values = io::load_f32(stem, &header);
  if (header.value("kind", "") != "segmentation_model") {
    throw ValidationError(stem.string() + " is not a segmentation model");
  }
  SegModel model;
  model.params().check_layout(header.value("tensors", nlohmann::json::array()));
  if (values.size() != model.params().size()) throw ValidationError("segmentation model payload has wrong size");
  require_finite(values, "segmentation model weights");
  model.params().values() = std::move(values);
  return model;
}

}  // namespace kslab
