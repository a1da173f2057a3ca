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

// kslab command-line front end. Talks to the library only through kslab.h.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kslab/kslab.h"

namespace {

using nlohmann::json;

// Exit codes: 0 ok, 1 internal/io/numeric, 2 validation, 3 run failures.
int exit_code(kslab_status s) {
  switch (s) {
    case KSLAB_OK: return 0;
    case KSLAB_ERR_VALIDATION: return 2;
    case KSLAB_ERR_RUN_FAILURES: return 3;
    default: return 1;
  }
}

struct Failure {
  kslab_status status;
};

void check(kslab_status s) {
  if (s != KSLAB_OK) throw Failure{s};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  kslab_string_free(s);
  return out;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text)) {
    std::fprintf(stderr, "kslab: cannot write %s\n", path.c_str());
    throw Failure{KSLAB_ERR_IO};
  }
}

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    std::fprintf(stderr, "kslab: cannot read %s\n", path.c_str());
    throw Failure{KSLAB_ERR_VALIDATION};
  }
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    std::fprintf(stderr, "kslab: %s: %s\n", path.c_str(), e.what());
    throw Failure{KSLAB_ERR_VALIDATION};
  }
}

std::string join(const std::string& dir, const std::string& name) { return dir + "/" + name; }

// Flag overrides shared by `run` and `sweep`.
struct RunFlags {
  std::string config;
  std::optional<std::string> dataset, out, detector_model, seg_model, split;
  std::optional<std::uint64_t> seed;
  std::optional<int> z, dc_iterations, max_cases, seg_epochs, det_epochs;
  std::optional<double> j_sigma, lambda, gamma, temporal_weight, tv_weight, step_size, threshold;
  bool train_detector = false, train_segmenter = false, no_segmenter = false, no_sharpness = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "Run configuration (JSON)");
    app->add_option("--dataset", dataset, "Corpus directory (overrides the config)");
    app->add_option("--out", out, "Output directory");
    app->add_option("--split", split, "Cases to evaluate: train, val, test or all");
    app->add_option("--max-cases", max_cases, "Evaluate at most this many cases");
    app->add_option("--seed", seed, "Master seed");
    app->add_option("--z", z, "Corrupt one in z lines (0 disables corruption)");
    app->add_option("--j-sigma", j_sigma, "Std of the mistriggering frame offset");
    app->add_option("--lambda", lambda, "Weight of the correction loss in the total loss");
    app->add_option("--gamma", gamma, "Weight of the detection loss in the correction loss");
    app->add_option("--dc-iterations", dc_iterations, "Data-consistency iterations");
    app->add_option("--temporal-weight", temporal_weight, "Temporal smoothness weight");
    app->add_option("--tv-weight", tv_weight, "Spatial total-variation weight");
    app->add_option("--step-size", step_size, "Gradient step as a fraction of 1/L of the temporal term");
    app->add_option("--detector-threshold", threshold, "Probability above which a line is flagged");
    app->add_flag("--train-detector", train_detector, "Train the line detector on the train split");
    app->add_option("--detector-model", detector_model, "Saved detector model stem");
    app->add_option("--detector-epochs", det_epochs, "Detector training epochs");
    app->add_flag("--train-segmenter", train_segmenter, "Train the segmenter on the train split");
    app->add_option("--seg-model", seg_model, "Saved segmenter model stem");
    app->add_option("--seg-epochs", seg_epochs, "Segmenter training epochs");
    app->add_flag("--no-segmenter", no_segmenter, "Skip segmentation");
    app->add_flag("--no-sharpness", no_sharpness, "Skip the sharpness index");
  }

  json build() const {
    json cfg = config.empty() ? json::object() : read_json_file(config);
    if (!cfg.is_object()) {
      std::fprintf(stderr, "kslab: run config must be a JSON object\n");
      throw Failure{KSLAB_ERR_VALIDATION};
    }
    auto put = [&](const char* sec, const char* key, const auto& v) {
      if (v) cfg[sec][key] = *v;
    };
    if (dataset) cfg["dataset"] = *dataset;
    if (out) cfg["output"] = *out;
    if (split) cfg["split"] = *split;
    if (max_cases) cfg["max_cases"] = *max_cases;
    if (seed) cfg["seed"] = *seed;
    put("corruption", "z", z);
    put("corruption", "offset_sigma", j_sigma);
    put("loss", "lambda", lambda);
    put("loss", "gamma", gamma);
    put("correction", "iterations", dc_iterations);
    put("correction", "temporal_weight", temporal_weight);
    put("correction", "tv_weight", tv_weight);
    put("correction", "step_size", step_size);
    put("detector", "threshold", threshold);
    put("detector", "epochs", det_epochs);
    put("segmenter", "epochs", seg_epochs);
    if (train_detector) cfg["detector"]["source"] = "train";
    if (detector_model) cfg["detector"]["source"] = *detector_model;
    if (train_segmenter) cfg["segmenter"]["source"] = "train";
    if (seg_model) cfg["segmenter"]["source"] = *seg_model;
    if (no_segmenter) cfg["segmenter"]["source"] = "none";
    if (no_sharpness) cfg["metrics"]["sharpness"] = false;
    return cfg;
  }
};

void print_summary(const std::string& summary_text) {
  const json s = json::parse(summary_text);
  std::printf("config %s: %d case(s), %d failed\n", s.at("config_hash").get<std::string>().c_str(),
              s.at("cases").get<int>(), s.at("failed").get<int>());
  // Non-finite values arrive as strings ("nan", "inf").
  auto num = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  for (const char* stage : {"corrupted", "corrected"}) {
    const json& r = s.at(stage);
    std::printf("  %-9s mae=%s psnr=%s ssim=%s si=%s", stage, num(r.at("mae")).c_str(), num(r.at("psnr")).c_str(),
                num(r.at("ssim")).c_str(), num(r.at("si")).c_str());
    if (r.contains("dice_lv")) {
      std::printf(" dice=%s/%s/%s", num(r.at("dice_lv")).c_str(), num(r.at("dice_myo")).c_str(),
                  num(r.at("dice_rv")).c_str());
    }
    std::printf("\n");
  }
  std::printf("  L_total=%s\n", num(s.at("losses").at("total")).c_str());
}

// Loads a real image, or the magnitude of a complex one.
kslab_image* load_any_image(const std::string& stem) {
  kslab_image* img = nullptr;
  if (kslab_image_load(stem.c_str(), &img) == KSLAB_OK) return img;
  kslab_cimage* c = nullptr;
  check(kslab_cimage_load(stem.c_str(), &c));
  const kslab_status s = kslab_cimage_magnitude(c, &img);
  kslab_cimage_free(c);
  check(s);
  return img;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kslab: k-space artefact simulation, detection and correction for cine CMR"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kslab_version());

  // phantom gen
  auto* phantom = app.add_subcommand("phantom", "Phantom generation");
  phantom->require_subcommand(1);
  auto* gen = phantom->add_subcommand("gen", "Generate a phantom corpus");
  std::string gen_out, gen_preset = "standard";
  int gen_n = 10;
  std::uint64_t gen_seed = 0;
  gen->add_option("--out", gen_out, "Corpus directory")->required();
  gen->add_option("-n,--count", gen_n, "Number of phantoms");
  gen->add_option("--preset", gen_preset, "standard (176x132, 25 frames) or tiny (32x32, 8 frames)");
  gen->add_option("--seed", gen_seed, "Corpus seed");

  // corrupt
  auto* corrupt = app.add_subcommand("corrupt", "Synthesise phase and corrupt k-space of an image sequence");
  std::string cor_image, cor_out;
  int cor_z = 4;
  double cor_sigma = 3.0;
  std::uint64_t cor_seed = 0;
  corrupt->add_option("--image", cor_image, "Image sequence stem")->required();
  corrupt->add_option("--out", cor_out, "Output directory")->required();
  corrupt->add_option("--z", cor_z, "Corrupt one in z lines per frame");
  corrupt->add_option("--j-sigma", cor_sigma, "Std of the donor frame offset");
  corrupt->add_option("--seed", cor_seed, "Seed for phase and corruption");

  // detect
  auto* detect = app.add_subcommand("detect", "Flag corrupted k-space lines");
  std::string det_kspace, det_out, det_model, det_dataset, det_save, det_probs;
  double det_threshold = 0.5;
  bool det_train = false;
  int det_epochs = 200;
  std::uint64_t det_seed = 0;
  detect->add_option("--kspace", det_kspace, "k-space stem")->required();
  detect->add_option("--out", det_out, "Mask output stem")->required();
  detect->add_option("--model", det_model, "Detector model stem");
  detect->add_flag("--train-detector", det_train, "Train a detector on --dataset first");
  detect->add_option("--dataset", det_dataset, "Corpus used with --train-detector");
  detect->add_option("--epochs", det_epochs, "Training epochs");
  detect->add_option("--seed", det_seed, "Training seed");
  detect->add_option("--save-model", det_save, "Where to store a trained detector");
  detect->add_option("--detector-threshold", det_threshold, "Probability above which a line is flagged");
  detect->add_option("--probs", det_probs, "Write per-line probabilities as CSV");

  // correct
  auto* correct = app.add_subcommand("correct", "Correct flagged lines under hard data consistency");
  std::string corr_kspace, corr_mask, corr_out;
  json corr_params = json::object();
  std::optional<int> corr_iters;
  std::optional<double> corr_tw, corr_tv, corr_step;
  correct->add_option("--kspace", corr_kspace, "Acquired k-space stem")->required();
  correct->add_option("--mask", corr_mask, "Line mask stem")->required();
  correct->add_option("--out", corr_out, "Output directory")->required();
  correct->add_option("--dc-iterations", corr_iters, "Data-consistency iterations");
  correct->add_option("--temporal-weight", corr_tw, "Temporal smoothness weight");
  correct->add_option("--tv-weight", corr_tv, "Spatial total-variation weight");
  correct->add_option("--step-size", corr_step, "Gradient step as a fraction of 1/L of the temporal term");

  // segment
  auto* segment = app.add_subcommand("segment", "Segment an image sequence into LV, Myo and RV");
  std::string seg_image, seg_out, seg_model, seg_dataset, seg_save;
  bool seg_train = false;
  int seg_epochs = 300;
  std::uint64_t seg_seed = 0;
  segment->add_option("--image", seg_image, "Image stem (complex images are reduced to magnitude)")->required();
  segment->add_option("--out", seg_out, "Label map output stem")->required();
  segment->add_option("--seg-model", seg_model, "Segmenter model stem");
  segment->add_flag("--train-segmenter", seg_train, "Train a segmenter on --dataset first");
  segment->add_option("--dataset", seg_dataset, "Corpus used with --train-segmenter");
  segment->add_option("--epochs", seg_epochs, "Training epochs");
  segment->add_option("--seed", seg_seed, "Training seed");
  segment->add_option("--save-model", seg_save, "Where to store a trained segmenter");

  // run / sweep / report
  auto* run = app.add_subcommand("run", "Run the full pipeline");
  RunFlags run_flags;
  run_flags.attach(run);

  auto* sweep = app.add_subcommand("sweep", "Repeat the pipeline over one parameter");
  RunFlags sweep_flags;
  sweep_flags.attach(sweep);
  std::string sweep_axis;
  std::vector<double> sweep_values;
  sweep->add_option("--axis", sweep_axis, "lambda, z or j_sigma")->required();
  sweep->add_option("--values", sweep_values, "Values (defaults to the config's sweep list)")->delimiter(',');

  auto* report = app.add_subcommand("report", "Summarise a run directory");
  std::string report_dir;
  report->add_option("--run", report_dir, "Run output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      check(kslab_corpus_generate(gen_out.c_str(), gen_n, gen_preset.c_str(), gen_seed));
      std::printf("wrote %d phantom(s) to %s\n", gen_n, gen_out.c_str());
    } else if (corrupt->parsed()) {
      kslab_image* img = load_any_image(cor_image);
      kslab_cimage* cimg = nullptr;
      const std::string params = json{{"seed", cor_seed}}.dump();
      const kslab_status s = kslab_synthesize_phase(img, params.c_str(), &cimg);
      kslab_image_free(img);
      check(s);
      kslab_kspace* clean = nullptr;
      check(kslab_fft2(cimg, &clean));
      kslab_cimage_free(cimg);
      kslab_kspace* corrupted = nullptr;
      kslab_mask* mask = nullptr;
      char* record = nullptr;
      check(kslab_corrupt(clean, cor_z, cor_sigma, cor_seed ^ 0x9E3779B97F4A7C15ULL, &corrupted, &mask, &record));
      const std::string rec = take(record);
      check(kslab_kspace_save(clean, join(cor_out, "clean_kspace").c_str()));
      check(kslab_kspace_save(corrupted, join(cor_out, "kspace").c_str()));
      check(kslab_mask_save(mask, join(cor_out, "mask").c_str()));
      write_file(join(cor_out, "corruption.json"), json::parse(rec).dump(2) + "\n");
      kslab_kspace_free(clean);
      kslab_kspace_free(corrupted);
      kslab_mask_free(mask);
      std::printf("wrote %s/{kspace,clean_kspace,mask,corruption.json}\n", cor_out.c_str());
    } else if (detect->parsed()) {
      kslab_detector* det = nullptr;
      if (det_train) {
        if (det_dataset.empty()) {
          std::fprintf(stderr, "kslab: --train-detector needs --dataset\n");
          return 2;
        }
        const std::string params = json{{"epochs", det_epochs}, {"seed", det_seed}}.dump();
        char* rep = nullptr;
        check(kslab_detector_train(det_dataset.c_str(), params.c_str(), &det, &rep));
        take(rep);
        if (!det_save.empty()) check(kslab_detector_save(det, det_save.c_str()));
      } else if (!det_model.empty()) {
        check(kslab_detector_load(det_model.c_str(), &det));
      } else {
        std::fprintf(stderr, "kslab: detect needs --model or --train-detector\n");
        return 2;
      }
      kslab_kspace* ks = nullptr;
      check(kslab_kspace_load(det_kspace.c_str(), &ks));
      int frames = 0, rows = 0, cols = 0;
      check(kslab_kspace_dims(ks, &frames, &rows, &cols));
      std::vector<double> probs(std::size_t(frames) * std::size_t(rows));
      kslab_mask* mask = nullptr;
      check(kslab_detect(det, ks, det_threshold, &mask, probs.data(), probs.size()));
      check(kslab_mask_save(mask, det_out.c_str()));
      if (!det_probs.empty()) {
        std::string csv = "frame,line,probability\n";
        char buf[96];
        for (int t = 0; t < frames; ++t) {
          for (int l = 0; l < rows; ++l) {
            std::snprintf(buf, sizeof buf, "%d,%d,%.6f\n", t, l, probs[std::size_t(t) * rows + l]);
            csv += buf;
          }
        }
        write_file(det_probs, csv);
      }
      kslab_mask_free(mask);
      kslab_kspace_free(ks);
      kslab_detector_free(det);
    } else if (correct->parsed()) {
      if (corr_iters) corr_params["iterations"] = *corr_iters;
      if (corr_tw) corr_params["temporal_weight"] = *corr_tw;
      if (corr_tv) corr_params["tv_weight"] = *corr_tv;
      if (corr_step) corr_params["step_size"] = *corr_step;
      kslab_kspace* ks = nullptr;
      kslab_mask* mask = nullptr;
      check(kslab_kspace_load(corr_kspace.c_str(), &ks));
      check(kslab_mask_load(corr_mask.c_str(), &mask));
      kslab_cimage* fixed = nullptr;
      char* rep = nullptr;
      const std::string params = corr_params.dump();
      check(kslab_correct(ks, mask, params.c_str(), &fixed, &rep));
      const json r = json::parse(take(rep));
      kslab_image* mag = nullptr;
      check(kslab_cimage_magnitude(fixed, &mag));
      check(kslab_cimage_save(fixed, join(corr_out, "corrected").c_str()));
      check(kslab_image_save(mag, join(corr_out, "magnitude").c_str()));
      std::string csv = "iteration,residual\n";
      const auto& res = r.at("residuals");
      for (std::size_t i = 0; i < res.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%zu,%.6e\n", i, res[i].get<double>());
        csv += buf;
      }
      write_file(join(corr_out, "residuals.csv"), csv);
      std::printf("step %.6g%s, %zu iteration(s)\n", r.at("step_size_used").get<double>(),
                  r.at("step_halved").get<bool>() ? " (halved)" : "", res.size());
      kslab_image_free(mag);
      kslab_cimage_free(fixed);
      kslab_mask_free(mask);
      kslab_kspace_free(ks);
    } else if (segment->parsed()) {
      kslab_segmenter* seg = nullptr;
      if (seg_train) {
        if (seg_dataset.empty()) {
          std::fprintf(stderr, "kslab: --train-segmenter needs --dataset\n");
          return 2;
        }
        const std::string params = json{{"epochs", seg_epochs}, {"seed", seg_seed}}.dump();
        char* rep = nullptr;
        check(kslab_segmenter_train(seg_dataset.c_str(), params.c_str(), &seg, &rep));
        take(rep);
        if (!seg_save.empty()) check(kslab_segmenter_save(seg, seg_save.c_str()));
      } else if (!seg_model.empty()) {
        check(kslab_segmenter_load(seg_model.c_str(), &seg));
      } else {
        std::fprintf(stderr, "kslab: segment needs --seg-model or --train-segmenter\n");
        return 2;
      }
      kslab_image* img = load_any_image(seg_image);
      kslab_labels* labels = nullptr;
      check(kslab_segment(seg, img, &labels));
      check(kslab_labels_save(labels, seg_out.c_str()));
      kslab_labels_free(labels);
      kslab_image_free(img);
      kslab_segmenter_free(seg);
    } else if (run->parsed()) {
      const std::string cfg = run_flags.build().dump();
      char* summary = nullptr;
      const kslab_status s = kslab_run(cfg.c_str(), &summary);
      if (summary) print_summary(take(summary));
      check(s);
    } else if (sweep->parsed()) {
      json cfg = sweep_flags.build();
      if (sweep_values.empty() && cfg.contains("sweep") && cfg["sweep"].contains(sweep_axis)) {
        sweep_values = cfg["sweep"][sweep_axis].get<std::vector<double>>();
      }
      const std::string text = cfg.dump();
      char* summary = nullptr;
      const kslab_status s =
          kslab_sweep(text.c_str(), sweep_axis.c_str(), sweep_values.data(), sweep_values.size(), &summary);
      if (summary) std::fputs(json::parse(take(summary)).at("csv").get<std::string>().c_str(), stdout);
      check(s);
    } else if (report->parsed()) {
      char* text = nullptr;
      check(kslab_report(report_dir.c_str(), &text));
      std::fputs(take(text).c_str(), stdout);
    }
  } catch (const Failure& f) {
    if (*kslab_last_error()) std::fprintf(stderr, "kslab: %s\n", kslab_last_error());
    return exit_code(f.status);
  } catch (const json::exception& e) {
    std::fprintf(stderr, "kslab: %s\n", e.what());
    return 2;
  }
  return 0;
}
