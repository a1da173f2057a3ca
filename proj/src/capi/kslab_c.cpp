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

#include "kslab/kslab.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <string>

#include "kslab/artefact.hpp"
#include "kslab/container.hpp"
#include "kslab/correction.hpp"
#include "kslab/detection.hpp"
#include "kslab/fft.hpp"
#include "kslab/metrics.hpp"
#include "kslab/phantom.hpp"
#include "kslab/pipeline.hpp"
#include "kslab/segmentation.hpp"

struct kslab_image { kslab::ImageSequence v; };
struct kslab_cimage { kslab::ComplexImageSequence v; };
struct kslab_kspace { kslab::KSpaceSequence v; };
struct kslab_mask { kslab::LineMask v; };
struct kslab_labels { kslab::SegmentationMap v; };
struct kslab_detector { kslab::DetectionModel v; };
struct kslab_segmenter { kslab::SegModel v; };

namespace {

using nlohmann::json;

thread_local std::string g_last_error;

kslab_status fail(kslab_status s, const char* what) {
  g_last_error = what;
  return s;
}

template <typename F>
kslab_status guarded(F&& body) {
  try {
    return body();
  } catch (const kslab::ValidationError& e) {
    return fail(KSLAB_ERR_VALIDATION, e.what());
  } catch (const kslab::IoError& e) {
    return fail(KSLAB_ERR_IO, e.what());
  } catch (const kslab::NumericError& e) {
    return fail(KSLAB_ERR_NUMERIC, e.what());
  } catch (const json::exception& e) {
    return fail(KSLAB_ERR_VALIDATION, e.what());
  } catch (const std::exception& e) {
    return fail(KSLAB_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(KSLAB_ERR_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw kslab::ValidationError(what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json parse_params(const char* text) {
  if (!text || !*text) return json::object();
  json j = json::parse(text);
  require(j.is_object(), "parameters must be a JSON object");
  return j;
}

kslab::Dims dims_of(int frames, int rows, int cols) {
  const kslab::Dims d{frames, rows, cols};
  kslab::validate_dims(d);
  return d;
}

template <typename Src, typename Dst>
void copy_out(const std::vector<Src>& from, Dst* to, std::size_t count) {
  require(to != nullptr, "output buffer is null");
  require(count == from.size(), "output buffer size does not match the object");
  for (std::size_t i = 0; i < count; ++i) to[i] = Dst(from[i]);
}

void copy_complex(const std::vector<kslab::cplx>& from, double* to, std::size_t count) {
  require(to != nullptr, "output buffer is null");
  require(count == 2 * from.size(), "output buffer must hold 2 doubles per sample");
  for (std::size_t i = 0; i < from.size(); ++i) {
    to[2 * i] = from[i].real();
    to[2 * i + 1] = from[i].imag();
  }
}

json report_json(const kslab::MetricsReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(kslab::format_number(v)); };
  json j = {{"stage", r.stage}, {"mae", num(r.mae)},   {"psnr", num(r.psnr)},
            {"ssim", num(r.ssim)}, {"si", num(r.sharpness_index)}};
  if (r.dice_lv) j["dice_lv"] = *r.dice_lv;
  if (r.dice_myo) j["dice_myo"] = *r.dice_myo;
  if (r.dice_rv) j["dice_rv"] = *r.dice_rv;
  return j;
}

json summary_json(const kslab::RunSummary& s) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(kslab::format_number(v)); };
  return {{"config_hash", s.config_hash},
          {"cases", s.cases.size()},
          {"failed", s.failed},
          {"over_failure_threshold", s.over_failure_threshold},
          {"corrupted", report_json(s.mean_corrupted)},
          {"corrected", report_json(s.mean_corrected)},
          {"losses",
           {{"detection", num(s.mean_losses.detection)},
            {"reconstruction", num(s.mean_losses.reconstruction)},
            {"correction", num(s.mean_losses.correction)},
            {"segmentation", num(s.mean_losses.segmentation)},
            {"total", num(s.mean_losses.total)}}}};
}

std::string report_json_text(const kslab::MetricsReport& r) { return report_json(r).dump(2); }
std::string summary_json_text(const kslab::RunSummary& s) { return summary_json(s).dump(2); }

void set_string(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

kslab::RunConfig training_config(const char* corpus_root, const json& p) {
  require(corpus_root != nullptr, "corpus root is null");
  kslab::RunConfig cfg;
  cfg.dataset = corpus_root;
  cfg.detector_source = "oracle";
  cfg.segmenter_source = "none";
  cfg.seed = p.value("seed", std::uint64_t{0});
  cfg.corruption.z = p.value("z", cfg.corruption.z);
  cfg.corruption.offset_sigma = p.value("offset_sigma", cfg.corruption.offset_sigma);
  return cfg;
}

}  // namespace

extern "C" {

const char* kslab_version(void) { return "0.1.0"; }
const char* kslab_last_error(void) { return g_last_error.c_str(); }
void kslab_string_free(char* s) { std::free(s); }

// ---- sequences -------------------------------------------------------------

kslab_status kslab_image_create(int frames, int rows, int cols, const double* values, kslab_image** out) {
  return guarded([&] {
    require(out != nullptr, "output handle is null");
    const auto d = dims_of(frames, rows, cols);
    auto* h = new kslab_image{kslab::ImageSequence(d)};
    if (values) std::copy(values, values + d.size(), h->v.values().begin());
    *out = h;
    return KSLAB_OK;
  });
}

kslab_status kslab_image_dims(const kslab_image* img, int* frames, int* rows, int* cols) {
  return guarded([&] {
    require(img && frames && rows && cols, "null argument");
    *frames = img->v.frames();
    *rows = img->v.rows();
    *cols = img->v.cols();
    return KSLAB_OK;
  });
}

kslab_status kslab_image_copy(const kslab_image* img, double* values, size_t count) {
  return guarded([&] {
    require(img != nullptr, "image handle is null");
    copy_out(img->v.values(), values, count);
    return KSLAB_OK;
  });
}

kslab_status kslab_image_load(const char* stem, kslab_image** out) {
  return guarded([&] {
    require(stem && out, "null argument");
    *out = new kslab_image{kslab::io::load_image(stem)};
    return KSLAB_OK;
  });
}

kslab_status kslab_image_save(const kslab_image* img, const char* stem) {
  return guarded([&] {
    require(img && stem, "null argument");
    kslab::io::save(stem, img->v);
    return KSLAB_OK;
  });
}

void kslab_image_free(kslab_image* img) { delete img; }

kslab_status kslab_cimage_create(int frames, int rows, int cols, const double* values, kslab_cimage** out) {
  return guarded([&] {
    require(out != nullptr, "output handle is null");
    const auto d = dims_of(frames, rows, cols);
    auto* h = new kslab_cimage{kslab::ComplexImageSequence(d)};
    if (values) {
      for (std::size_t i = 0; i < d.size(); ++i) h->v.values()[i] = {values[2 * i], values[2 * i + 1]};
    }
    *out = h;
    return KSLAB_OK;
  });
}

kslab_status kslab_cimage_copy(const kslab_cimage* img, double* values, size_t count) {
  return guarded([&] {
    require(img != nullptr, "image handle is null");
    copy_complex(img->v.values(), values, count);
    return KSLAB_OK;
  });
}

kslab_status kslab_cimage_magnitude(const kslab_cimage* img, kslab_image** out) {
  return guarded([&] {
    require(img && out, "null argument");
    *out = new kslab_image{kslab::magnitude(img->v)};
    return KSLAB_OK;
  });
}

kslab_status kslab_cimage_load(const char* stem, kslab_cimage** out) {
  return guarded([&] {
    require(stem && out, "null argument");
    *out = new kslab_cimage{kslab::io::load_complex_image(stem)};
    return KSLAB_OK;
  });
}

kslab_status kslab_cimage_save(const kslab_cimage* img, const char* stem) {
  return guarded([&] {
    require(img && stem, "null argument");
    kslab::io::save(stem, img->v);
    return KSLAB_OK;
  });
}

void kslab_cimage_free(kslab_cimage* img) { delete img; }

kslab_status kslab_kspace_dims(const kslab_kspace* ks, int* frames, int* rows, int* cols) {
  return guarded([&] {
    require(ks && frames && rows && cols, "null argument");
    *frames = ks->v.frames();
    *rows = ks->v.rows();
    *cols = ks->v.cols();
    return KSLAB_OK;
  });
}

kslab_status kslab_kspace_copy(const kslab_kspace* ks, double* values, size_t count) {
  return guarded([&] {
    require(ks != nullptr, "k-space handle is null");
    copy_complex(ks->v.values(), values, count);
    return KSLAB_OK;
  });
}

kslab_status kslab_kspace_load(const char* stem, kslab_kspace** out) {
  return guarded([&] {
    require(stem && out, "null argument");
    *out = new kslab_kspace{kslab::io::load_kspace(stem)};
    return KSLAB_OK;
  });
}

kslab_status kslab_kspace_save(const kslab_kspace* ks, const char* stem) {
  return guarded([&] {
    require(ks && stem, "null argument");
    kslab::io::save(stem, ks->v);
    return KSLAB_OK;
  });
}

void kslab_kspace_free(kslab_kspace* ks) { delete ks; }

kslab_status kslab_fft2(const kslab_cimage* img, kslab_kspace** out) {
  return guarded([&] {
    require(img && out, "null argument");
    *out = new kslab_kspace{kslab::fft2(img->v)};
    return KSLAB_OK;
  });
}

kslab_status kslab_ifft2(const kslab_kspace* ks, kslab_cimage** out) {
  return guarded([&] {
    require(ks && out, "null argument");
    *out = new kslab_cimage{kslab::ifft2(ks->v)};
    return KSLAB_OK;
  });
}

kslab_status kslab_mask_create(int frames, int lines, const uint8_t* values, kslab_mask** out) {
  return guarded([&] {
    require(out != nullptr, "output handle is null");
    require(frames >= 1 && lines >= 1, "mask extents must be positive");
    std::vector<std::uint8_t> v(std::size_t(frames) * std::size_t(lines), 0);
    if (values) v.assign(values, values + v.size());
    *out = new kslab_mask{kslab::LineMask(frames, lines, std::move(v))};
    return KSLAB_OK;
  });
}

kslab_status kslab_mask_dims(const kslab_mask* mask, int* frames, int* lines) {
  return guarded([&] {
    require(mask && frames && lines, "null argument");
    *frames = mask->v.frames();
    *lines = mask->v.lines();
    return KSLAB_OK;
  });
}

kslab_status kslab_mask_copy(const kslab_mask* mask, uint8_t* values, size_t count) {
  return guarded([&] {
    require(mask != nullptr, "mask handle is null");
    copy_out(mask->v.values(), values, count);
    return KSLAB_OK;
  });
}

kslab_status kslab_mask_load(const char* stem, kslab_mask** out) {
  return guarded([&] {
    require(stem && out, "null argument");
    *out = new kslab_mask{kslab::io::load_mask(stem)};
    return KSLAB_OK;
  });
}

kslab_status kslab_mask_save(const kslab_mask* mask, const char* stem) {
  return guarded([&] {
    require(mask && stem, "null argument");
    kslab::io::save(stem, mask->v);
    return KSLAB_OK;
  });
}

void kslab_mask_free(kslab_mask* mask) { delete mask; }

kslab_status kslab_labels_copy(const kslab_labels* labels, uint8_t* values, size_t count) {
  return guarded([&] {
    require(labels != nullptr, "labels handle is null");
    copy_out(labels->v.values(), values, count);
    return KSLAB_OK;
  });
}

kslab_status kslab_labels_load(const char* stem, kslab_labels** out) {
  return guarded([&] {
    require(stem && out, "null argument");
    *out = new kslab_labels{kslab::io::load_labels(stem)};
    return KSLAB_OK;
  });
}

kslab_status kslab_labels_save(const kslab_labels* labels, const char* stem) {
  return guarded([&] {
    require(labels && stem, "null argument");
    kslab::io::save(stem, labels->v);
    return KSLAB_OK;
  });
}

void kslab_labels_free(kslab_labels* labels) { delete labels; }

// ---- phantoms --------------------------------------------------------------

kslab_status kslab_phantom_generate(const char* spec_json, kslab_image** image, kslab_labels** labels) {
  return guarded([&] {
    require(image && labels, "null argument");
    json j = parse_params(spec_json);
    kslab::PhantomSpec spec;
    if (j.contains("preset") || !j.contains("frames")) {
      const std::string preset = j.value("preset", std::string("standard"));
      require(preset == "standard" || preset == "tiny", "preset must be 'standard' or 'tiny'");
      json base = (preset == "tiny" ? kslab::PhantomSpec::tiny() : kslab::PhantomSpec::standard()).to_json();
      j.erase("preset");
      base.update(j);
      spec = kslab::PhantomSpec::from_json(base);
    } else {
      spec = kslab::PhantomSpec::from_json(j);
    }
    kslab::Phantom ph = kslab::generate_phantom(spec);
    *image = new kslab_image{std::move(ph.image)};
    *labels = new kslab_labels{std::move(ph.labels)};
    return KSLAB_OK;
  });
}

kslab_status kslab_corpus_generate(const char* root, int n, const char* preset, uint64_t seed) {
  return guarded([&] {
    require(root != nullptr, "corpus root is null");
    const std::string p = preset ? preset : "standard";
    require(p == "standard" || p == "tiny", "preset must be 'standard' or 'tiny'");
    kslab::generate_corpus(root, n, p == "tiny" ? kslab::PhantomSpec::tiny() : kslab::PhantomSpec::standard(), seed);
    return KSLAB_OK;
  });
}

// ---- artefact simulation ---------------------------------------------------

kslab_status kslab_synthesize_phase(const kslab_image* img, const char* params_json, kslab_cimage** out) {
  return guarded([&] {
    require(img && out, "null argument");
    const json p = parse_params(params_json);
    kslab::PhaseGenSpec spec;
    spec.noise_sigma = p.value("noise_sigma", spec.noise_sigma);
    spec.lowpass_keep = p.value("lowpass_keep", spec.lowpass_keep);
    spec.lowpass_taper_sigma = p.value("lowpass_taper_sigma", spec.lowpass_taper_sigma);
    spec.rng_seed = p.value("seed", spec.rng_seed);
    *out = new kslab_cimage{kslab::synthesize_phase(img->v, spec)};
    return KSLAB_OK;
  });
}

kslab_status kslab_corrupt(const kslab_kspace* ks, int z, double offset_sigma, uint64_t seed,
                           kslab_kspace** corrupted, kslab_mask** mask, char** record_json) {
  return guarded([&] {
    require(ks && corrupted && mask, "null argument");
    kslab::CorruptedKSpace c = kslab::corrupt_kspace(ks->v, {z, offset_sigma, seed});
    const std::string record = c.record.to_json().dump();
    auto* k = new kslab_kspace{std::move(c.kspace)};
    auto* m = new kslab_mask{std::move(c.record.mask)};
    try {
      set_string(record_json, record);
    } catch (...) {
      delete k;
      delete m;
      throw;
    }
    *corrupted = k;
    *mask = m;
    return KSLAB_OK;
  });
}

// ---- detection -------------------------------------------------------------

kslab_status kslab_detector_load(const char* stem, kslab_detector** out) {
  return guarded([&] {
    require(stem && out, "null argument");
    *out = new kslab_detector{kslab::load_detector(stem)};
    return KSLAB_OK;
  });
}

kslab_status kslab_detector_save(const kslab_detector* det, const char* stem) {
  return guarded([&] {
    require(det && stem, "null argument");
    kslab::save_detector(stem, det->v);
    return KSLAB_OK;
  });
}

kslab_status kslab_detector_train(const char* corpus_root, const char* params_json, kslab_detector** out,
                                  char** report_json) {
  return guarded([&] {
    require(out != nullptr, "output handle is null");
    const json p = parse_params(params_json);
    kslab::RunConfig cfg = training_config(corpus_root, p);
    cfg.detector_source = "train";
    cfg.detector_training.epochs = p.value("epochs", cfg.detector_training.epochs);
    cfg.detector_training.learning_rate = p.value("learning_rate", cfg.detector_training.learning_rate);
    cfg.detector_training.batch = p.value("batch", cfg.detector_training.batch);
    cfg.validate();
    const auto corpus = kslab::load_cases(cfg);
    kslab::PreparedModels m = kslab::prepare_models(cfg, corpus);
    const std::string report = json{{"loss_trace", m.detector_loss_trace}}.dump();
    auto* h = new kslab_detector{std::move(*m.detector)};
    try {
      set_string(report_json, report);
    } catch (...) {
      delete h;
      throw;
    }
    *out = h;
    return KSLAB_OK;
  });
}

kslab_status kslab_detect(const kslab_detector* det, const kslab_kspace* ks, double threshold, kslab_mask** mask,
                          double* probs, size_t probs_count) {
  return guarded([&] {
    require(det && ks && mask, "null argument");
    const kslab::LineProbabilities p = kslab::predict_line_probs(det->v, kslab::extract_line_features(ks->v));
    kslab::LineMask m = kslab::threshold_mask(p, threshold);
    if (probs) copy_out(p.values, probs, probs_count);
    *mask = new kslab_mask{std::move(m)};
    return KSLAB_OK;
  });
}

void kslab_detector_free(kslab_detector* det) { delete det; }

// ---- correction ------------------------------------------------------------

kslab_status kslab_correct(const kslab_kspace* acquired, const kslab_mask* mask, const char* params_json,
                           kslab_cimage** corrected, char** report_json) {
  return guarded([&] {
    require(acquired && mask && corrected, "null argument");
    const json p = parse_params(params_json);
    kslab::CorrectionConfig cfg;
    cfg.iterations = p.value("iterations", cfg.iterations);
    cfg.temporal_weight = p.value("temporal_weight", cfg.temporal_weight);
    cfg.spatial_tv_weight = p.value("tv_weight", cfg.spatial_tv_weight);
    cfg.step_size = p.value("step_size", cfg.step_size);
    kslab::CorrectionResult r = kslab::correct(acquired->v, mask->v, cfg);
    const std::string report = json{{"residuals", r.per_iteration_residuals},
                                    {"energy", r.energy_trace},
                                    {"step_size_used", r.step_size_used},
                                    {"step_halved", r.step_halved}}
                                   .dump();
    auto* h = new kslab_cimage{std::move(r.corrected)};
    try {
      set_string(report_json, report);
    } catch (...) {
      delete h;
      throw;
    }
    *corrected = h;
    return KSLAB_OK;
  });
}

// ---- segmentation ----------------------------------------------------------

kslab_status kslab_segmenter_load(const char* stem, kslab_segmenter** out) {
  return guarded([&] {
    require(stem && out, "null argument");
    *out = new kslab_segmenter{kslab::load_segmenter(stem)};
    return KSLAB_OK;
  });
}

kslab_status kslab_segmenter_save(const kslab_segmenter* seg, const char* stem) {
  return guarded([&] {
    require(seg && stem, "null argument");
    kslab::save_segmenter(stem, seg->v);
    return KSLAB_OK;
  });
}

kslab_status kslab_segmenter_train(const char* corpus_root, const char* params_json, kslab_segmenter** out,
                                   char** report_json) {
  return guarded([&] {
    require(out != nullptr, "output handle is null");
    const json p = parse_params(params_json);
    kslab::RunConfig cfg = training_config(corpus_root, p);
    cfg.segmenter_source = "train";
    cfg.segmenter_training.epochs = p.value("epochs", cfg.segmenter_training.epochs);
    cfg.segmenter_training.learning_rate = p.value("learning_rate", cfg.segmenter_training.learning_rate);
    cfg.segmenter_training.batch = p.value("batch", cfg.segmenter_training.batch);
    cfg.validate();
    const auto corpus = kslab::load_cases(cfg);
    kslab::PreparedModels m = kslab::prepare_models(cfg, corpus);
    const std::string report = json{{"loss_trace", m.segmenter_loss_trace}}.dump();
    auto* h = new kslab_segmenter{std::move(*m.segmenter)};
    try {
      set_string(report_json, report);
    } catch (...) {
      delete h;
      throw;
    }
    *out = h;
    return KSLAB_OK;
  });
}

kslab_status kslab_segment(const kslab_segmenter* seg, const kslab_image* img, kslab_labels** out) {
  return guarded([&] {
    require(seg && img && out, "null argument");
    *out = new kslab_labels{kslab::segment(seg->v, img->v).labels};
    return KSLAB_OK;
  });
}

void kslab_segmenter_free(kslab_segmenter* seg) { delete seg; }

// ---- metrics and runs ------------------------------------------------------

kslab_status kslab_metrics(const kslab_image* reference, const kslab_image* test, const kslab_labels* pred,
                           const kslab_labels* truth, char** report_json) {
  return guarded([&] {
    require(reference && test && report_json, "null argument");
    require((pred == nullptr) == (truth == nullptr), "pass both label maps or neither");
    kslab::ReportContext ctx;
    ctx.stage = "metrics";
    const kslab::MetricsReport r =
        kslab::assemble_report(reference->v, test->v, ctx, pred ? &pred->v : nullptr, truth ? &truth->v : nullptr);
    *report_json = dup_string(report_json_text(r));
    return KSLAB_OK;
  });
}

kslab_status kslab_run(const char* config_json, char** summary_json) {
  return guarded([&] {
    require(config_json != nullptr, "config is null");
    const kslab::RunConfig cfg = kslab::RunConfig::from_json(json::parse(config_json));
    const kslab::RunSummary s = kslab::run_pipeline(cfg);
    set_string(summary_json, summary_json_text(s));
    if (s.over_failure_threshold) {
      return fail(KSLAB_ERR_RUN_FAILURES, (std::to_string(s.failed) + " of " + std::to_string(s.cases.size()) +
                                           " cases failed")
                                              .c_str());
    }
    return KSLAB_OK;
  });
}

kslab_status kslab_sweep(const char* config_json, const char* axis, const double* values, size_t count,
                         char** summary_json) {
  return guarded([&] {
    require(config_json && axis, "null argument");
    require(values != nullptr || count == 0, "values are null");
    const kslab::RunConfig cfg = kslab::RunConfig::from_json(json::parse(config_json));
    const auto rows = kslab::sweep(cfg, kslab::parse_axis(axis), std::span<const double>(values, count));
    json out = {{"axis", axis}, {"csv", kslab::sweep_csv(rows)}, {"runs", json::array()}};
    bool over = false;
    for (const auto& r : rows) {
      out["runs"].push_back({{"value", r.value}, {"summary", json::parse(summary_json_text(r.summary))}});
      over = over || r.summary.over_failure_threshold;
    }
    set_string(summary_json, out.dump(2));
    if (over) return fail(KSLAB_ERR_RUN_FAILURES, "a sweep run exceeded the failure threshold");
    return KSLAB_OK;
  });
}

kslab_status kslab_report(const char* run_dir, char** text) {
  return guarded([&] {
    require(run_dir && text, "null argument");
    *text = dup_string(kslab::format_report(run_dir));
    return KSLAB_OK;
  });
}

}  // extern "C"
