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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "kslab/artefact.hpp"
#include "kslab/correction.hpp"
#include "kslab/detection.hpp"
#include "kslab/metrics.hpp"
#include "kslab/phantom.hpp"
#include "kslab/segmentation.hpp"

namespace kslab {

struct LossWeights {
  double lambda = 0.8;  // weight of the correction loss in the total
  double gamma = 0.3;   // weight of the detection loss inside the correction loss
  void validate() const;
};

/// (1 - lambda) * seg_loss + lambda * corr_loss.
double total_loss(double seg_loss, double corr_loss, const LossWeights& w);

enum class SweepAxis { kLambda, kZ, kJSigma };
const char* axis_name(SweepAxis a);
SweepAxis parse_axis(const std::string& name);

/// Everything a run depends on. JSON layout (all keys optional):
///
///   {"dataset": "<corpus root>" | null,
///    "corpus": {"n": 10, "preset": "standard"|"tiny", "seed": 0},
///    "split": "test"|"val"|"train"|"all", "max_cases": 0,
///    "phase": {"noise_sigma", "lowpass_keep", "lowpass_taper_sigma"},
///    "corruption": {"z": 4, "offset_sigma": 3.0},          z = 0 disables it
///    "detector": {"source": "oracle"|"train"|<model stem>, "threshold",
///                 "epochs", "learning_rate", "batch"},
///    "segmenter": {"source": "train"|"none"|<model stem>, "epochs", ...},
///    "correction": {"iterations", "temporal_weight", "tv_weight", "step_size"},
///    "loss": {"lambda", "gamma"},
///    "metrics": {"sharpness": true, "surrogates": 64},
///    "sweep": {"lambda": [...], "z": [...], "j_sigma": [...]},
///    "output": "<dir>", "save_cases": true, "seed": 0, "failure_threshold": 0.1}
///
/// Without "dataset" the corpus is generated in memory.
struct RunConfig {
  std::filesystem::path dataset;
  int corpus_n = 10;
  std::string corpus_preset = "standard";
  std::uint64_t corpus_seed = 0;
  std::string split = "test";
  int max_cases = 0;  // 0 = every case of the split

  PhaseGenSpec phase;
  CorruptionSpec corruption;  // rng_seed is derived per case

  std::string detector_source = "oracle";
  double detector_threshold = 0.5;
  DetectorTrainConfig detector_training;

  std::string segmenter_source = "train";
  SegTrainConfig segmenter_training;

  CorrectionConfig correction;
  LossWeights weights;

  bool sharpness = true;
  int sharpness_surrogates = 64;

  std::vector<double> lambda_values;
  std::vector<int> z_values;
  std::vector<double> j_sigma_values;

  std::filesystem::path output;
  bool save_cases = true;
  std::uint64_t seed = 0;
  double failure_threshold = 0.1;

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; wrong types raise ValidationError.
  static RunConfig from_json(const nlohmann::json& j);
  /// FNV-1a 64 of the canonical JSON without the output directory, as hex.
  std::string hash() const;
};

struct CaseData {
  std::string id;
  Split split = Split::kTest;
  std::size_t index = 0;  // position in the corpus; selects the case seeds
  ImageSequence image;
  SegmentationMap labels;
};

/// The whole corpus named by the config, from disk or generated in memory.
std::vector<CaseData> load_cases(const RunConfig& cfg);

struct PreparedModels {
  std::optional<DetectionModel> detector;  // empty for oracle masks
  std::optional<SegModel> segmenter;       // empty when segmentation is off
  std::vector<double> detector_loss_trace;
  std::vector<double> segmenter_loss_trace;
};

/// Loads or trains the models on the train split, as the config asks.
PreparedModels prepare_models(const RunConfig& cfg, std::span<const CaseData> corpus);

struct CaseLosses {
  double detection = 0.0;
  double reconstruction = 0.0;
  double correction = 0.0;
  double segmentation = 0.0;  // NaN without a segmenter
  double total = 0.0;
};

struct CaseOutcome {
  std::string id;
  bool ok = false;
  std::string error;
  MetricsReport corrupted;
  MetricsReport corrected;
  CaseLosses losses;
  std::size_t flagged_lines = 0;
  std::size_t corrupted_lines = 0;
  std::vector<double> residuals;
  std::vector<double> energy;
};

struct RunSummary {
  std::string config_hash;
  std::vector<CaseOutcome> cases;
  MetricsReport mean_corrupted;
  MetricsReport mean_corrected;
  CaseLosses mean_losses;
  int failed = 0;
  bool over_failure_threshold = false;
};

/// Every selected case: synthesise phase, corrupt, detect, correct, segment,
/// and score both the corrupted and the corrected stage against the clean
/// reconstruction. A failing case is recorded and skipped. Writes the run
/// directory when cfg.output is set.
RunSummary run_pipeline(const RunConfig& cfg);
RunSummary run_pipeline(const RunConfig& cfg, std::span<const CaseData> corpus, const PreparedModels& models);

/// Per-case rows for both stages followed by the two mean rows.
std::string metrics_csv(const RunSummary& summary);

struct SweepRow {
  SweepAxis axis = SweepAxis::kZ;
  double value = 0.0;
  RunSummary summary;
};

/// One run per value with the shared base seed; models are prepared once.
/// Writes <output>/sweep_<axis>.csv and one sub-directory per value.
std::vector<SweepRow> sweep(const RunConfig& cfg, SweepAxis axis, std::span<const double> values);

/// axis,value,mae_corrupted,mae_corrected,psnr_corrupted,psnr_corrected,
/// ssim_corrupted,ssim_corrected,si_corrupted,si_corrected,dice_lv,dice_myo,
/// dice_rv,l_total,failed
std::string sweep_csv(std::span<const SweepRow> rows);

/// Plain-text table of the mean rows of a run directory's metrics.csv.
std::string format_report(const std::filesystem::path& run_dir);

/// Worker count: hardware concurrency capped by KSLAB_THREADS when set.
int worker_count();

}  // namespace kslab
