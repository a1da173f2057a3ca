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

#include "kslab/detection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kslab/container.hpp"
#include "kslab/rng.hpp"

namespace kslab {
namespace {

constexpr int H = DetectionModel::kHidden;
constexpr int F = kLineFeatureCount;

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double clamp_prob(double p) { return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp); }

void check_shapes(const LineProbabilities& probs, const LineMask& labels) {
  if (probs.frames != labels.frames() || probs.lines != labels.lines() ||
      probs.values.size() != labels.size()) {
    throw ValidationError("probabilities and labels differ in shape");
  }
}

void check_features(const DetectionModel& model, const LineFeatures& feats) {
  if (feats.values.size() != feats.line_count() * F) throw ValidationError("line feature tensor has wrong size");
  if (model.params().size() != std::size_t(F * H + H + H + 1)) throw ValidationError("detection model has wrong size");
}

// Forward pass for one line: fills the hidden activations and returns the logit.
double forward_line(const ParameterPack& p, const double* x, double* hidden) {
  const auto w1 = p.tensor(DetectionModel::kW1);
  const auto b1 = p.tensor(DetectionModel::kB1);
  const auto w2 = p.tensor(DetectionModel::kW2);
  double logit = p.tensor(DetectionModel::kB2)[0];
  for (int j = 0; j < H; ++j) {
    double a = b1[std::size_t(j)];
    for (int f = 0; f < F; ++f) a += x[f] * w1[std::size_t(f * H + j)];
    hidden[j] = a < 0.0 ? 0.0 : a;  // NaN passes through so training can detect it
    logit += hidden[j] * w2[std::size_t(j)];
  }
  return logit;
}

double line_bce(double p, int label) {
  const double pc = clamp_prob(p);
  return label ? -std::log(pc) : -std::log(1.0 - pc);
}

// Accumulates d(sum of per-line losses)/d(theta) into grad; returns the summed loss.
double accumulate_grad(const DetectionModel& model, const LineFeatures& feats, const LineMask& labels,
                       std::vector<double>& grad) {
  const ParameterPack& p = model.params();
  const auto w2 = p.tensor(DetectionModel::kW2);
  const std::size_t o_w1 = p.slots()[DetectionModel::kW1].offset;
  const std::size_t o_b1 = p.slots()[DetectionModel::kB1].offset;
  const std::size_t o_w2 = p.slots()[DetectionModel::kW2].offset;
  const std::size_t o_b2 = p.slots()[DetectionModel::kB2].offset;
  double total = 0.0;
  double hidden[H];
  for (int t = 0; t < feats.frames; ++t) {
    for (int l = 0; l < feats.lines; ++l) {
      const double* x = &feats.values[(std::size_t(t) * feats.lines + l) * F];
      const double pr = sigmoid(forward_line(p, x, hidden));
      const int k = labels(t, l);
      total += line_bce(pr, k);
      // The clamp is flat outside [eps, 1 - eps].
      if (pr < kProbabilityClamp || pr > 1.0 - kProbabilityClamp) continue;
      const double dlogit = pr - double(k);
      grad[o_b2] += dlogit;
      for (int j = 0; j < H; ++j) {
        grad[o_w2 + std::size_t(j)] += dlogit * hidden[j];
        if (hidden[j] <= 0.0) continue;
        const double dh = dlogit * w2[std::size_t(j)];
        grad[o_b1 + std::size_t(j)] += dh;
        for (int f = 0; f < F; ++f) grad[o_w1 + std::size_t(f * H + j)] += dh * x[f];
      }
    }
  }
  return total;
}

}  // namespace

LineFeatures raw_line_features(const KSpaceSequence& ks) {
  validate_dims(ks.dims());
  LineFeatures out{ks.frames(), ks.line_count(), std::vector<double>(std::size_t(ks.frames()) * ks.line_count() * F)};
  const int last = ks.frames() - 1;
  const double index_scale = ks.line_count() > 1 ? 1.0 / double(ks.line_count() - 1) : 0.0;
  for (int t = 0; t < ks.frames(); ++t) {
    const int prev = std::max(t - 1, 0);
    const int next = std::min(t + 1, last);
    for (int l = 0; l < ks.line_count(); ++l) {
      const auto line = ks.line(t, l);
      const auto before = ks.line(prev, l);
      const auto after = ks.line(next, l);
      double energy = 0.0, peak = 0.0, d_prev = 0.0, d_next = 0.0;
      for (std::size_t w = 0; w < line.size(); ++w) {
        const double m = std::abs(line[w]);
        energy += std::norm(line[w]);
        peak = std::max(peak, m);
        d_prev += std::abs(line[w] - before[w]);
        d_next += std::abs(line[w] - after[w]);
      }
      out(t, l, 0) = energy;
      out(t, l, 1) = std::log1p(energy);
      out(t, l, 2) = peak;
      out(t, l, 3) = d_prev;
      out(t, l, 4) = d_next;
      out(t, l, 5) = double(l) * index_scale;
    }
  }
  return out;
}

LineFeatures extract_line_features(const KSpaceSequence& ks) {
  LineFeatures feats = raw_line_features(ks);
  const std::size_t n = feats.line_count();
  for (int f = 0; f < F; ++f) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += feats.values[i * F + std::size_t(f)];
    mean /= double(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = feats.values[i * F + std::size_t(f)] - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / double(n));
    const bool flat = sd <= 1e-12 * std::max(1.0, std::abs(mean));
    for (std::size_t i = 0; i < n; ++i) {
      double& v = feats.values[i * F + std::size_t(f)];
      v = flat ? 0.0 : (v - mean) / sd;
    }
  }
  return feats;
}

DetectionModel::DetectionModel() {
  params_.add("w1", {F, H});
  params_.add("b1", {H});
  params_.add("w2", {H, 1});
  params_.add("b2", {1});
}

DetectionModel DetectionModel::random_init(std::uint64_t seed) {
  DetectionModel m;
  Rng rng(seed);
  for (double& v : m.params_.values()) v = rng.normal();
  return m;
}

LineProbabilities predict_line_probs(const DetectionModel& model, const LineFeatures& feats) {
  check_features(model, feats);
  LineProbabilities out{feats.frames, feats.lines, std::vector<double>(feats.line_count())};
  double hidden[H];
  for (std::size_t i = 0; i < feats.line_count(); ++i) {
    out.values[i] = sigmoid(forward_line(model.params(), &feats.values[i * F], hidden));
  }
  return out;
}

LineMask threshold_mask(const LineProbabilities& probs, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("detector threshold must lie in (0, 1)");
  LineMask mask(probs.frames, probs.lines);
  for (std::size_t i = 0; i < probs.values.size(); ++i) mask.values()[i] = probs.values[i] >= threshold ? 1 : 0;
  return mask;
}

double detection_loss(const LineProbabilities& probs, const LineMask& labels) {
  check_shapes(probs, labels);
  double total = 0.0;
  for (std::size_t i = 0; i < probs.values.size(); ++i) total += line_bce(probs.values[i], labels.values()[i]);
  return total / double(probs.values.size());
}

DetectionLossGrad detection_loss_and_grad(const DetectionModel& model, const LineFeatures& feats,
                                          const LineMask& labels) {
  check_features(model, feats);
  if (labels.frames() != feats.frames || labels.lines() != feats.lines) {
    throw ValidationError("features and labels differ in shape");
  }
  DetectionLossGrad out{0.0, std::vector<double>(model.params().size(), 0.0)};
  const double n = double(feats.line_count());
  out.loss = accumulate_grad(model, feats, labels, out.grad) / n;
  for (double& g : out.grad) g /= n;
  return out;
}

DetectorTrainResult train_detector(std::span<const LabeledLines> corpus, const DetectorTrainConfig& cfg) {
  if (corpus.empty()) throw ValidationError("detector training corpus is empty");
  if (cfg.epochs < 0 || cfg.batch < 1) throw ValidationError("detector training needs epochs >= 0 and batch >= 1");
  for (const auto& item : corpus) {
    if (item.labels.frames() != item.features.frames || item.labels.lines() != item.features.lines) {
      throw ValidationError("training item features and labels differ in shape");
    }
  }

  DetectorTrainResult result{DetectionModel::random_init(derive_seed(cfg.seed, 0)), {}};
  if (cfg.epochs == 0) return result;

  Adam adam(result.model.params().size(), AdamConfig{cfg.learning_rate});
  Rng shuffle(derive_seed(cfg.seed, 1));
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(result.model.params().size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
    double epoch_loss = 0.0;
    double epoch_lines = 0.0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch)) {
      const std::size_t stop = std::min(order.size(), start + std::size_t(cfg.batch));
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      double batch_lines = 0.0;
      for (std::size_t b = start; b < stop; ++b) {
        const LabeledLines& item = corpus[order[b]];
        batch_loss += accumulate_grad(result.model, item.features, item.labels, grad);
        batch_lines += double(item.features.line_count());
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericError("detector training loss became non-finite at epoch " + std::to_string(epoch));
      }
      for (double& g : grad) g /= batch_lines;
      adam.step(result.model.params().values(), grad);
      epoch_loss += batch_loss;
      epoch_lines += batch_lines;
    }
    result.loss_trace.push_back(epoch_loss / epoch_lines);
  }
  return result;
}

double line_accuracy(const LineProbabilities& probs, const LineMask& labels, double threshold) {
  check_shapes(probs, labels);
  const LineMask predicted = threshold_mask(probs, threshold);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted.values()[i] == labels.values()[i];
  return double(hits) / double(predicted.size());
}

void save_detector(const std::filesystem::path& stem, const DetectionModel& model) {
  io::save_f32(stem, model.params().values(),
               {{"kind", "detection_model"}, {"features", F}, {"hidden", H}, {"tensors", model.params().layout_json()}});
}

DetectionModel load_detector(const std::filesystem::path& stem) {
  nlohmann::json header;
  std::vector<double> values = io::load_f32(stem, &header);
  if (header.value("kind", "") != "detection_model") throw ValidationError(stem.string() + " is not a detection model");
  DetectionModel model;
  model.params().check_layout(header.value("tensors", nlohmann::json::array()));
  if (values.size() != model.params().size()) throw ValidationError("detection model payload has wrong size");
  require_finite(values, "detection model weights");
  model.params().values() = std::move(values);
  return model;
}

}  // namespace kslab
