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

// Acceptance checks. Each criterion prints exactly one PASS or FAIL line;
// run one with --criterion N or all of them without arguments. Every limit
// below is pinned here and nowhere else.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "kslab/artefact.hpp"
#include "kslab/correction.hpp"
#include "kslab/detection.hpp"
#include "kslab/fft.hpp"
#include "kslab/metrics.hpp"
#include "kslab/phantom.hpp"
#include "kslab/pipeline.hpp"
#include "kslab/rng.hpp"
#include "kslab/segmentation.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace kslab;
using kslab::testing::TempDir;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Verdict within_budget(Verdict v, const Stopwatch& sw, double budget_s) {
  const double s = sw.seconds();
  v.detail += "; " + fmt("%.1f", s) + " s of " + fmt("%.0f", budget_s) + " s";
  v.pass = v.pass && s < budget_s;
  return v;
}

// 1 -------------------------------------------------------------------------

Verdict fft_fidelity() {
  constexpr double kTol = 1e-8;
  Stopwatch sw;
  Rng dims_rng(101);
  double worst_rt = 0.0, worst_parseval = 0.0;
  for (int s = 0; s < 100; ++s) {
    const Dims d{1 + int(dims_rng.below(25)), 4 + int(dims_rng.below(173)), 4 + int(dims_rng.below(129))};
    const auto x = kslab::testing::random_complex(d, derive_seed(2024, std::uint64_t(s)));
    const auto k = fft2(x);
    const auto back = ifft2(k);
    double ex = 0.0, ek = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      worst_rt = std::max(worst_rt, std::abs(back.values()[i] - x.values()[i]));
      ex += std::norm(x.values()[i]);
      ek += std::norm(k.values()[i]);
    }
    worst_parseval = std::max(worst_parseval, std::abs(ek - ex) / ex);
  }
  Verdict v{worst_rt < kTol && worst_parseval < kTol,
            "max round-trip error " + fmt("%.2e", worst_rt) + ", max Parseval error " + fmt("%.2e", worst_parseval) +
                " over 100 sequences"};
  return within_budget(v, sw, 10.0);
}

// 2 -------------------------------------------------------------------------

Verdict corruption_exactness() {
  const Dims d{25, 176, 132};
  const std::vector<int> zs{2, 4, 8, 16, 32};
  Stopwatch sw;
  const auto x = kslab::testing::random_complex(d, 77);
  const KSpaceSequence ks = fft2(x);
  int bad_counts = 0, bad_sets = 0, bad_lines = 0, checked = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    for (int z : zs) {
      CorruptionSpec spec;
      spec.z = z;
      spec.rng_seed = seed;
      const auto out = corrupt_kspace(ks, spec);
      std::vector<std::vector<int>> listed(std::size_t(d.frames));
      for (const auto& e : out.record.entries) listed[std::size_t(e.frame)].push_back(e.line);
      for (int t = 0; t < d.frames; ++t) {
        auto& lines = listed[std::size_t(t)];
        std::sort(lines.begin(), lines.end());
        // Enumeration oracle: every line l with l = r (mod z) for one residue r.
        bool matched = false;
        std::size_t oracle_count = 0;
        for (int r = 0; r < z && !matched; ++r) {
          std::vector<int> expect;
          for (int l = r; l < d.rows; l += z) expect.push_back(l);
          if (expect == lines) {
            matched = true;
            oracle_count = expect.size();
          }
        }
        if (!matched) ++bad_sets;
        if (!matched || oracle_count != lines.size()) ++bad_counts;
        for (int l = 0; l < d.rows; ++l) {
          if (std::binary_search(lines.begin(), lines.end(), l)) continue;
          const auto a = out.kspace.row(t, l), b = ks.row(t, l);
          if (!std::equal(a.begin(), a.end(), b.begin())) ++bad_lines;
        }
        ++checked;
      }
    }
  }
  Verdict v{bad_counts == 0 && bad_sets == 0 && bad_lines == 0,
            std::to_string(checked) + " frames: " + std::to_string(bad_counts) + " count mismatches, " +
                std::to_string(bad_sets) + " non-enumerable line sets, " + std::to_string(bad_lines) +
                " altered unlisted lines"};
  return within_budget(v, sw, 30.0);
}

// 3 -------------------------------------------------------------------------

Verdict hard_data_consistency_exact() {
  Stopwatch sw;
  Rng rng(303);
  int splice_bad = 0, idem_bad = 0;
  constexpr int kCases = 300;
  for (int s = 0; s < kCases; ++s) {
    const Dims d{1 + int(rng.below(6)), 4 + int(rng.below(37)), 4 + int(rng.below(37))};
    const auto est = fft2(kslab::testing::random_complex(d, rng.next()));
    const auto acq = fft2(kslab::testing::random_complex(d, rng.next()));
    LineMask mask(d.frames, d.rows);
    const double p = rng.uniform();
    for (auto& m : mask.values()) m = rng.uniform() < p ? 1 : 0;

    const auto out = hard_data_consistency(est, acq, mask);
    KSpaceSequence naive(d);
    for (int t = 0; t < d.frames; ++t) {
      for (int l = 0; l < d.rows; ++l) {
        const auto& src = mask(t, l) ? est : acq;
        for (int c = 0; c < d.cols; ++c) naive(t, l, c) = src(t, l, c);
      }
    }
    if (!(out == naive)) ++splice_bad;
    if (!(hard_data_consistency(out, acq, mask) == out)) ++idem_bad;
  }
  Verdict v{splice_bad == 0 && idem_bad == 0, std::to_string(kCases) + " random instances: " +
                                                  std::to_string(splice_bad) + " splice mismatches, " +
                                                  std::to_string(idem_bad) + " idempotence failures"};
  return within_budget(v, sw, 5.0);
}

// 4 -------------------------------------------------------------------------

/// Cases of one split of an in-memory corpus; the other splits are never generated.
std::vector<CaseData> split_cases(int n, const PhantomSpec& tmpl, std::uint64_t seed, Split which) {
  std::vector<CaseData> out;
  const auto planned = plan_corpus(n, tmpl, seed);
  for (std::size_t i = 0; i < planned.size(); ++i) {
    if (planned[i].split != which) continue;
    Phantom ph = generate_phantom(planned[i].spec);
    out.push_back({planned[i].id, planned[i].split, i, std::move(ph.image), std::move(ph.labels)});
  }
  return out;
}

Verdict correction_efficacy() {
  ::setenv("KSLAB_THREADS", "1", 1);
  RunConfig cfg;
  cfg.corpus_n = 250;  // 60/20/20 split: 50 test cases
  cfg.split = "test";
  cfg.detector_source = "oracle";
  cfg.segmenter_source = "none";
  cfg.sharpness = false;
  cfg.seed = 4;
  Stopwatch sw;
  const auto cases = split_cases(cfg.corpus_n, PhantomSpec::standard(), cfg.corpus_seed, Split::kTest);
  const auto s = run_pipeline(cfg, cases, PreparedModels{});
  int improved = 0;
  double gain = 0.0;
  for (const auto& c : s.cases) {
    if (c.ok && c.corrected.psnr > c.corrupted.psnr) ++improved;
    gain += c.corrected.ssim - c.corrupted.ssim;
  }
  const double n = double(s.cases.size());
  gain /= n;
  const double frac = double(improved) / n;
  Verdict v{s.cases.size() == 50 && s.failed == 0 && frac >= 0.90 && gain >= 0.02,
            std::to_string(improved) + "/" + std::to_string(s.cases.size()) + " cases improve PSNR (" +
                fmt("%.2f", s.mean_corrupted.psnr) + " -> " + fmt("%.2f", s.mean_corrected.psnr) +
                " dB), mean SSIM gain " + fmt("%.4f", gain) + " (" + fmt("%.4f", s.mean_corrupted.ssim) + " -> " +
                fmt("%.4f", s.mean_corrected.ssim) + ")"};
  return within_budget(v, sw, 300.0);
}

// 5 -------------------------------------------------------------------------

Verdict no_harm() {
  RunConfig cfg;
  cfg.corpus_n = 10;
  cfg.split = "all";
  cfg.max_cases = 5;
  cfg.corruption.z = 0;
  cfg.detector_source = "oracle";
  cfg.segmenter_source = "none";
  cfg.sharpness = false;
  const auto s = run_pipeline(cfg);
  bool exact = s.failed == 0 && !s.cases.empty();
  for (const auto& c : s.cases) {
    exact = exact && c.corrupted.mae == 0.0 && c.corrupted.ssim == 1.0 && c.corrected.mae == 0.0 &&
            c.corrected.ssim == 1.0;
  }
  return {exact, std::to_string(s.cases.size()) + " standard phantoms at z = 0: mean MAE " +
                     fmt("%.3g", s.mean_corrected.mae) + ", mean SSIM " + fmt("%.17g", s.mean_corrected.ssim)};
}

// 6 -------------------------------------------------------------------------

Verdict gradient_checks() {
  constexpr double kTol = 1e-4;
  Stopwatch sw;
  const Dims d{2, 8, 8};
  double worst = 0.0;
  std::string worst_name;
  int tensors = 0;
  auto track = [&](const std::vector<kslab::testing::TensorGradError>& errs, const char* model) {
    for (const auto& e : errs) {
      ++tensors;
      if (e.relative_error >= worst) {
        worst = e.relative_error;
        worst_name = std::string(model) + "." + e.name;
      }
    }
  };
  for (std::uint64_t seed : {1u, 2u}) {
    // Detector on line features of an 8 x 8, 2-frame k-space.
    const auto ks = fft2(kslab::testing::random_complex(d, 600 + seed));
    const auto feats = extract_line_features(ks);
    LineMask labels(d.frames, d.rows);
    Rng rng(700 + seed);
    for (auto& m : labels.values()) m = std::uint8_t(rng.below(2));
    DetectionModel det = DetectionModel::random_init(seed);
    const auto dg = detection_loss_and_grad(det, feats, labels);
    track(kslab::testing::finite_difference_check(
              det.params(), dg.grad, [&] { return detection_loss(predict_line_probs(det, feats), labels); }),
          "detector");

    // Segmenter on an 8 x 8, 2-frame image with random labels.
    const auto img = kslab::testing::random_image(d, 800 + seed);
    SegmentationMap truth(d);
    for (auto& v : truth.values()) v = std::uint8_t(rng.below(4));
    SegModel seg = SegModel::random_init(seed);
    const auto sg = segmentation_loss_and_grad(seg, img, truth);
    track(kslab::testing::finite_difference_check(
              seg.params(), sg.grad, [&] { return segmentation_loss(segment(seg, img).probs, truth); }),
          "segmenter");
  }
  Verdict v{worst < kTol, std::to_string(tensors) + " tensor checks, worst relative error " + fmt("%.2e", worst) +
                              " (" + worst_name + ")"};
  return within_budget(v, sw, 60.0);
}

// 7 -------------------------------------------------------------------------

/// Lines whose label is a linear threshold of the two temporal-difference
/// features, kept at least `margin` away from the boundary; the remaining
/// features are noise.
std::vector<LabeledLines> separable_corpus(int sequences, std::uint64_t seed) {
  constexpr int kFrames = 8, kLines = 32;
  constexpr double kMargin = 0.5;
  std::vector<LabeledLines> out;
  Rng rng(seed);
  for (int s = 0; s < sequences; ++s) {
    LabeledLines ex;
    ex.features.frames = kFrames;
    ex.features.lines = kLines;
    ex.features.values.resize(std::size_t(kFrames) * kLines * kLineFeatureCount);
    ex.labels = LineMask(kFrames, kLines);
    for (int t = 0; t < kFrames; ++t) {
      for (int l = 0; l < kLines; ++l) {
        for (int f = 0; f < kLineFeatureCount; ++f) ex.features(t, l, f) = rng.normal();
        const bool corrupted = rng.uniform() < 0.25;
        // Push the decision value s = (f3 + f4)/sqrt(2) to the right side of 0.8 by the margin.
        const double score = (ex.features(t, l, 3) + ex.features(t, l, 4)) / std::numbers::sqrt2;
        const double target = corrupted ? std::max(score, 0.8 + kMargin) : std::min(score, 0.8 - kMargin);
        const double shift = (target - score) / std::numbers::sqrt2;
        ex.features(t, l, 3) += shift;
        ex.features(t, l, 4) += shift;
        ex.labels(t, l) = corrupted ? 1 : 0;
      }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

Verdict detector_trainability() {
  Stopwatch sw;
  const auto train = separable_corpus(40, 71);
  const auto held_out = separable_corpus(10, 72);
  DetectorTrainConfig cfg;  // default epochs and learning rate, one sequence per Adam step
  cfg.batch = 1;
  cfg.seed = 7;
  const auto r = train_detector(train, cfg);
  double correct = 0.0, total = 0.0;
  for (const auto& ex : held_out) {
    const double n = double(ex.labels.size());
    correct += line_accuracy(predict_line_probs(r.model, ex.features), ex.labels) * n;
    total += n;
  }
  const double acc = correct / total;
  Verdict v{acc >= 0.95, "held-out line accuracy " + fmt("%.4f", acc) + " on " + fmt("%.0f", total) +
                             " lines (200 epochs, batch 1); training loss " + fmt("%.4f", r.loss_trace.front()) + " -> " +
                             fmt("%.4f", r.loss_trace.back())};
  return within_budget(v, sw, 120.0);
}

// 8 -------------------------------------------------------------------------

double mean_dice(const SegModel& model, std::span<const CaseData> cases, int cls) {
  double acc = 0.0;
  for (const auto& c : cases) acc += dice(segment(model, c.image).labels, c.labels, cls);
  return acc / double(cases.size());
}

Verdict segmenter_trainability() {
  Stopwatch sw;
  RunConfig cfg;
  cfg.corpus_n = 40;
  cfg.corpus_preset = "tiny";
  cfg.split = "test";
  cfg.detector_source = "oracle";
  cfg.segmenter_source = "train";
  cfg.segmenter_training.epochs = 300;
  cfg.sharpness = false;
  cfg.seed = 8;
  const auto corpus = load_cases(cfg);
  const auto models = prepare_models(cfg, corpus);
  std::vector<CaseData> held_out;
  for (const auto& c : corpus) {
    if (c.split != Split::kTrain) held_out.push_back(c);
  }
  const double lv = mean_dice(*models.segmenter, held_out, 1);
  const double myo = mean_dice(*models.segmenter, held_out, 2);
  const double rv = mean_dice(*models.segmenter, held_out, 3);

  // Direction of effect on the corrupted test split.
  const auto s = run_pipeline(cfg, corpus, models);
  const MetricsReport& a = s.mean_corrupted;
  const MetricsReport& b = s.mean_corrected;
  const bool ordered = a.dice_lv && a.dice_myo && a.dice_rv && b.dice_lv && b.dice_myo && b.dice_rv &&
                       *b.dice_lv > *a.dice_lv && *b.dice_myo > *a.dice_myo && *b.dice_rv > *a.dice_rv;
  std::string detail = "held-out Dice LV/Myo/RV " + fmt("%.3f", lv) + "/" + fmt("%.3f", myo) + "/" +
                       fmt("%.3f", rv) + " on " + std::to_string(held_out.size()) + " cases";
  if (a.dice_lv && b.dice_lv && a.dice_myo && b.dice_myo && a.dice_rv && b.dice_rv) {
    detail += "; corrupted -> corrected " + fmt("%.3f", *a.dice_lv) + "->" + fmt("%.3f", *b.dice_lv) + ", " +
              fmt("%.3f", *a.dice_myo) + "->" + fmt("%.3f", *b.dice_myo) + ", " + fmt("%.3f", *a.dice_rv) + "->" +
              fmt("%.3f", *b.dice_rv);
  }
  Verdict v{lv >= 0.90 && myo >= 0.80 && rv >= 0.80 && ordered && s.failed == 0, detail};
  return within_budget(v, sw, 600.0);
}

// 9 -------------------------------------------------------------------------

Verdict loss_algebra() {
  constexpr double kTol = 1e-12;
  Stopwatch sw;
  const int T = 3, H = 8;
  LineProbabilities half{T, H, std::vector<double>(std::size_t(T) * H, 0.5)};
  LineMask labels(T, H);
  Rng rng(9);
  for (auto& m : labels.values()) m = std::uint8_t(rng.below(2));
  const double det = detection_loss(half, labels);

  const Dims d{2, 4, 4};
  ClassProbabilities uniform{d, std::vector<double>(4 * d.size(), 0.25)};
  SegmentationMap truth(d);
  for (auto& v : truth.values()) v = std::uint8_t(rng.below(4));
  const double seg = segmentation_loss(uniform, truth);

  const double ls = 0.7319, lc = 0.2113;
  bool exact = total_loss(ls, lc, {0.0, 0.3}) == ls && total_loss(ls, lc, {1.0, 0.3}) == lc;

  const auto recon = kslab::testing::random_image(Dims{T, H, 5}, 10);
  const auto target = kslab::testing::random_image(Dims{T, H, 5}, 11);
  LineProbabilities probs{T, H, {}};
  for (int i = 0; i < T * H; ++i) probs.values.push_back(0.05 + 0.9 * rng.uniform());
  exact = exact && correction_loss(recon, target, probs, labels, 0.0) == reconstruction_loss(recon, target) &&
          correction_loss(recon, target, probs, labels, 1.0) == detection_loss(probs, labels);

  const double e_det = std::abs(det - std::numbers::ln2), e_seg = std::abs(seg - 2.0 * std::numbers::ln2);
  Verdict v{e_det < kTol && e_seg < kTol && exact, "|L_det - ln 2| = " + fmt("%.1e", e_det) +
                                                       ", |L_seg - ln 4| = " + fmt("%.1e", e_seg) +
                                                       ", lambda/gamma endpoints " + (exact ? "exact" : "NOT exact")};
  return within_budget(v, sw, 1.0);
}

// 10 ------------------------------------------------------------------------

Verdict severity_monotonicity() {
  constexpr double kViolationTol = 0.005;
  const std::vector<int> zs{32, 16, 8, 4, 2};
  Stopwatch sw;
  const auto planned = plan_corpus(20, PhantomSpec::standard(), 10);
  std::vector<double> mean(zs.size(), 0.0);
  for (std::size_t i = 0; i < planned.size(); ++i) {
    const Phantom ph = generate_phantom(planned[i].spec);
    PhaseGenSpec phase;
    phase.rng_seed = derive_seed(100, i);
    const KSpaceSequence ks = fft2(synthesize_phase(ph.image, phase));
    const ImageSequence ref = magnitude(ifft2(ks));
    CorruptionSpec tmpl;
    tmpl.rng_seed = derive_seed(200, i);
    const auto levels = severity_sweep(ks, zs, tmpl);
    for (std::size_t k = 0; k < zs.size(); ++k) mean[k] += ssim(ref, magnitude(ifft2(levels[k].kspace)));
  }
  int violations = 0;
  double worst = 0.0;
  std::string trace;
  for (std::size_t k = 0; k < zs.size(); ++k) {
    mean[k] /= double(planned.size());
    trace += (k ? ", " : "") + std::string("z=") + std::to_string(zs[k]) + ":" + fmt("%.4f", mean[k]);
    if (k > 0 && mean[k] > mean[k - 1]) {
      ++violations;
      worst = std::max(worst, mean[k] - mean[k - 1]);
    }
  }
  Verdict v{violations <= 1 && worst <= kViolationTol,
            "mean corrupted SSIM over 20 sequences " + trace + "; " + std::to_string(violations) + " rises"};
  return within_budget(v, sw, 180.0);
}

// 11 ------------------------------------------------------------------------

/// Separable Gaussian blur with clamped borders, frame by frame.
ImageSequence blur(const ImageSequence& x, double sigma) {
  const int radius = int(std::ceil(3.0 * sigma));
  std::vector<double> w;
  for (int i = -radius; i <= radius; ++i) w.push_back(std::exp(-0.5 * i * i / (sigma * sigma)));
  double sum = 0.0;
  for (double v : w) sum += v;
  for (double& v : w) v /= sum;
  const int H = x.rows(), W = x.cols();
  ImageSequence tmp(x.dims()), out(x.dims());
  for (int t = 0; t < x.frames(); ++t) {
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) acc += w[std::size_t(i + radius)] * x(t, r, std::clamp(c + i, 0, W - 1));
        tmp(t, r, c) = acc;
      }
    }
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) acc += w[std::size_t(i + radius)] * tmp(t, std::clamp(r + i, 0, H - 1), c);
        out(t, r, c) = acc;
      }
    }
  }
  return out;
}

Verdict sharpness_ordering() {
  Stopwatch sw;
  PhantomSpec tmpl = PhantomSpec::standard();
  tmpl.frames = 3;
  const auto planned = plan_corpus(20, tmpl, 11);
  int ordered = 0;
  bool deterministic = true;
  double min_gap = 1e300;
  for (std::size_t i = 0; i < planned.size(); ++i) {
    const Phantom ph = generate_phantom(planned[i].spec);
    const ImageSequence soft = blur(ph.image, 2.0);
    SharpnessConfig sc;
    sc.seed = derive_seed(11, i);
    const double sharp = sharpness_index(ph.image, sc).value;
    const double blurred = sharpness_index(soft, sc).value;
    if (sharp > blurred) ++ordered;
    min_gap = std::min(min_gap, sharp - blurred);
    deterministic = deterministic && sharpness_index(ph.image, sc).value == sharp;
  }
  Verdict v{ordered == 20 && deterministic, std::to_string(ordered) + "/20 pairs ordered (smallest gap " +
                                                fmt("%.2f", min_gap) + "), repeat runs " +
                                                (deterministic ? "bit-identical" : "DIFFER")};
  return within_budget(v, sw, 60.0);
}

// 12 ------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Verdict cli_determinism(const std::string& cli) {
  if (cli.empty()) return {false, "CLI path not given (--cli or KSLAB_CLI_PATH)"};
  TempDir dir("accept");
  {
    std::ofstream cfg(dir / "config.json");
    cfg << R"({"corpus": {"n": 10, "preset": "tiny", "seed": 12}, "split": "test", "seed": 12,
               "metrics": {"surrogates": 16}})";
  }
  // The second run uses a different worker count: scheduling must not leak into the results.
  int codes[2];
  const char* threads[2] = {"1", "3"};
  for (int i = 0; i < 2; ++i) {
    const std::string cmd = "KSLAB_THREADS=" + std::string(threads[i]) + " \"" + cli + "\" run --config \"" +
                            (dir / "config.json").string() + "\" --out \"" + (dir / ("run" + std::to_string(i))).string() +
                            "\" --train-detector --detector-epochs 5 --train-segmenter --seg-epochs 3 > /dev/null 2>&1";
    codes[i] = std::system(cmd.c_str());
  }
  if (codes[0] != 0 || codes[1] != 0) return {false, "run exited with status " + std::to_string(codes[0]) + "/" + std::to_string(codes[1])};
  std::vector<std::string> differing;
  int compared = 0;
  for (const auto& entry : fs::directory_iterator(dir / "run0")) {
    if (entry.path().extension() != ".csv") continue;
    ++compared;
    const fs::path other = dir / "run1" / entry.path().filename();
    if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) differing.push_back(entry.path().filename().string());
  }
  std::string detail = std::to_string(compared) + " aggregate CSVs compared";
  for (const auto& f : differing) detail += "; differs: " + f;
  return {compared >= 4 && differing.empty(), detail};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  std::string cli = std::getenv("KSLAB_CLI_PATH") ? std::getenv("KSLAB_CLI_PATH") : "";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criterion" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else if (a == "--cli" && i + 1 < argc) {
      cli = argv[++i];
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N] [--cli PATH]\n", argv[0]);
      return 2;
    }
  }
  const std::vector<Criterion> all{
      {1, "FFT fidelity", fft_fidelity},
      {2, "corruption exactness", corruption_exactness},
      {3, "hard data consistency", hard_data_consistency_exact},
      {4, "correction efficacy", correction_efficacy},
      {5, "no harm on clean input", no_harm},
      {6, "gradient checks", gradient_checks},
      {7, "detector trainability", detector_trainability},
      {8, "segmenter trainability", segmenter_trainability},
      {9, "loss algebra", loss_algebra},
      {10, "severity monotonicity", severity_monotonicity},
      {11, "sharpness ordering", sharpness_ordering},
      {12, "determinism", [&] { return cli_determinism(cli); }},
  };
  int failed = 0, ran = 0;
  for (const auto& c : all) {
    if (only != 0 && c.id != only) continue;
    ++ran;
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s [%2d] %s: %s\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str());
    std::fflush(stdout);
    if (!v.pass) ++failed;
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion %d\n", only);
    return 2;
  }
  return failed == 0 ? 0 : 1;
}
