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

#include "kslab/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <thread>

#include "kslab/container.hpp"
#include "kslab/fft.hpp"
#include "kslab/rng.hpp"

namespace kslab {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_keyword(const std::string& s, std::initializer_list<const char*> words) {
  for (const char* w : words) {
    if (s == w) return true;
  }
  return false;
}

template <typename V>
void read_opt(const json& j, const char* key, V& out) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config key '") + key + "': " + e.what());
  }
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw ValidationError(std::string("config key '") + key + "' must be an object");
  return j.at(key);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

void LossWeights::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("lambda must lie in [0, 1]");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("gamma must lie in [0, 1]");
}

double total_loss(double seg_loss, double corr_loss, const LossWeights& w) {
  w.validate();
  return (1.0 - w.lambda) * seg_loss + w.lambda * corr_loss;
}

const char* axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::kLambda: return "lambda";
    case SweepAxis::kZ: return "z";
    case SweepAxis::kJSigma: return "j_sigma";
  }
  return "z";
}

SweepAxis parse_axis(const std::string& name) {
  if (name == "lambda") return SweepAxis::kLambda;
  if (name == "z") return SweepAxis::kZ;
  if (name == "j_sigma" || name == "j") return SweepAxis::kJSigma;
  throw ValidationError("unknown sweep axis '" + name + "' (lambda, z, j_sigma)");
}

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::validate() const {
  weights.validate();
  phase.validate();
  if (corruption.z < 0) throw ValidationError("corruption z must be >= 0 (0 disables corruption)");
  if (corruption.z > 0) corruption.validate();
  if (!(detector_threshold > 0.0 && detector_threshold < 1.0)) {
    throw ValidationError("detector threshold must lie in (0, 1)");
  }
  correction.validate();
  if (!(failure_threshold >= 0.0 && failure_threshold <= 1.0)) {
    throw ValidationError("failure_threshold must lie in [0, 1]");
  }
  if (!is_keyword(split, {"train", "val", "test", "all"})) throw ValidationError("unknown split '" + split + "'");
  if (max_cases < 0) throw ValidationError("max_cases must be >= 0");
  if (sharpness && sharpness_surrogates < 2) throw ValidationError("sharpness needs at least two surrogates");
  if (dataset.empty()) {
    if (corpus_n < 1) throw ValidationError("corpus n must be >= 1");
    if (!is_keyword(corpus_preset, {"standard", "tiny"})) {
      throw ValidationError("unknown phantom preset '" + corpus_preset + "'");
    }
  } else if (!fs::exists(dataset / "manifest.json")) {
    throw ValidationError("dataset has no manifest.json: " + dataset.string());
  }
  if (!is_keyword(detector_source, {"oracle", "train"}) && !fs::exists(io::header_path(detector_source))) {
    throw ValidationError("detector model not found: " + detector_source);
  }
  if (!is_keyword(segmenter_source, {"train", "none"}) && !fs::exists(io::header_path(segmenter_source))) {
    throw ValidationError("segmenter model not found: " + segmenter_source);
  }
  for (double l : lambda_values) LossWeights{l, weights.gamma}.validate();
  for (int z : z_values) {
    if (z < 0) throw ValidationError("sweep z values must be >= 0");
  }
  for (double s : j_sigma_values) {
    if (!(s > 0.0)) throw ValidationError("sweep j_sigma values must be positive");
  }
  if (detector_training.epochs < 1 || detector_training.batch < 1 || segmenter_training.epochs < 1 ||
      segmenter_training.batch < 1) {
    throw ValidationError("training epochs and batch sizes must be >= 1");
  }
}

json RunConfig::to_json() const {
  return {
      {"dataset", dataset.empty() ? json(nullptr) : json(dataset.string())},
      {"corpus", {{"n", corpus_n}, {"preset", corpus_preset}, {"seed", corpus_seed}}},
      {"split", split},
      {"max_cases", max_cases},
      {"phase",
       {{"noise_sigma", phase.noise_sigma},
        {"lowpass_keep", phase.lowpass_keep},
        {"lowpass_taper_sigma", phase.lowpass_taper_sigma}}},
      {"corruption", {{"z", corruption.z}, {"offset_sigma", corruption.offset_sigma}}},
      {"detector",
       {{"source", detector_source},
        {"threshold", detector_threshold},
        {"epochs", detector_training.epochs},
        {"learning_rate", detector_training.learning_rate},
        {"batch", detector_training.batch}}},
      {"segmenter",
       {{"source", segmenter_source},
        {"epochs", segmenter_training.epochs},
        {"learning_rate", segmenter_training.learning_rate},
        {"batch", segmenter_training.batch}}},
      {"correction",
       {{"iterations", correction.iterations},
        {"temporal_weight", correction.temporal_weight},
        {"tv_weight", correction.spatial_tv_weight},
        {"step_size", correction.step_size}}},
      {"loss", {{"lambda", weights.lambda}, {"gamma", weights.gamma}}},
      {"metrics", {{"sharpness", sharpness}, {"surrogates", sharpness_surrogates}}},
      {"sweep", {{"lambda", lambda_values}, {"z", z_values}, {"j_sigma", j_sigma_values}}},
      {"output", output.string()},
      {"save_cases", save_cases},
      {"seed", seed},
      {"failure_threshold", failure_threshold},
  };
}

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("run config must be a JSON object");
  RunConfig c;
  std::string dataset;
  read_opt(j, "dataset", dataset);
  c.dataset = dataset;
  const json& corpus = section(j, "corpus");
  read_opt(corpus, "n", c.corpus_n);
  read_opt(corpus, "preset", c.corpus_preset);
  read_opt(corpus, "seed", c.corpus_seed);
  read_opt(j, "split", c.split);
  read_opt(j, "max_cases", c.max_cases);

  const json& phase = section(j, "phase");
  read_opt(phase, "noise_sigma", c.phase.noise_sigma);
  read_opt(phase, "lowpass_keep", c.phase.lowpass_keep);
  read_opt(phase, "lowpass_taper_sigma", c.phase.lowpass_taper_sigma);

  const json& corr = section(j, "corruption");
  read_opt(corr, "z", c.corruption.z);
  read_opt(corr, "offset_sigma", c.corruption.offset_sigma);

  const json& det = section(j, "detector");
  read_opt(det, "source", c.detector_source);
  read_opt(det, "threshold", c.detector_threshold);
  read_opt(det, "epochs", c.detector_training.epochs);
  read_opt(det, "learning_rate", c.detector_training.learning_rate);
  read_opt(det, "batch", c.detector_training.batch);

  const json& seg = section(j, "segmenter");
  read_opt(seg, "source", c.segmenter_source);
  read_opt(seg, "epochs", c.segmenter_training.epochs);
  read_opt(seg, "learning_rate", c.segmenter_training.learning_rate);
  read_opt(seg, "batch", c.segmenter_training.batch);

  const json& cc = section(j, "correction");
  read_opt(cc, "iterations", c.correction.iterations);
  read_opt(cc, "temporal_weight", c.correction.temporal_weight);
  read_opt(cc, "tv_weight", c.correction.spatial_tv_weight);
  read_opt(cc, "step_size", c.correction.step_size);

  const json& loss = section(j, "loss");
  read_opt(loss, "lambda", c.weights.lambda);
  read_opt(loss, "gamma", c.weights.gamma);

  const json& metrics = section(j, "metrics");
  read_opt(metrics, "sharpness", c.sharpness);
  read_opt(metrics, "surrogates", c.sharpness_surrogates);

  const json& sw = section(j, "sweep");
  read_opt(sw, "lambda", c.lambda_values);
  read_opt(sw, "z", c.z_values);
  read_opt(sw, "j_sigma", c.j_sigma_values);

  std::string output;
  read_opt(j, "output", output);
  c.output = output;
  read_opt(j, "save_cases", c.save_cases);
  read_opt(j, "seed", c.seed);
  read_opt(j, "failure_threshold", c.failure_threshold);
  return c;
}

std::string RunConfig::hash() const {
  json j = to_json();
  j.erase("output");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return hex64(h);
}

// ---------------------------------------------------------------------------
// Data and models

std::vector<CaseData> load_cases(const RunConfig& cfg) {
  std::vector<CaseData> cases;
  if (!cfg.dataset.empty()) {
    const auto listed = load_manifest(cfg.dataset);
    for (std::size_t i = 0; i < listed.size(); ++i) {
      cases.push_back({listed[i].id, listed[i].split, i, io::load_image(listed[i].image_stem),
                       io::load_labels(listed[i].labels_stem)});
    }
    return cases;
  }
  const PhantomSpec tmpl = cfg.corpus_preset == "tiny" ? PhantomSpec::tiny() : PhantomSpec::standard();
  const auto planned = plan_corpus(cfg.corpus_n, tmpl, cfg.corpus_seed);
  for (std::size_t i = 0; i < planned.size(); ++i) {
    Phantom ph = generate_phantom(planned[i].spec);
    cases.push_back({planned[i].id, planned[i].split, i, std::move(ph.image), std::move(ph.labels)});
  }
  return cases;
}

namespace {

std::uint64_t case_seed(const RunConfig& cfg, const CaseData& c) { return derive_seed(cfg.seed, c.index); }

struct Acquisition {
  KSpaceSequence clean_kspace;
  ImageSequence clean;  // magnitude of ifft2(clean_kspace)
  KSpaceSequence acquired;
  LineMask truth;
};

Acquisition acquire(const RunConfig& cfg, const CaseData& c) {
  const std::uint64_t seed = case_seed(cfg, c);
  PhaseGenSpec ph = cfg.phase;
  ph.rng_seed = derive_seed(seed, 0);
  Acquisition a;
  a.clean_kspace = fft2(synthesize_phase(c.image, ph));
  a.clean = magnitude(ifft2(a.clean_kspace));
  if (cfg.corruption.z > 0) {
    CorruptionSpec cs = cfg.corruption;
    cs.rng_seed = derive_seed(seed, 1);
    CorruptedKSpace corrupted = corrupt_kspace(a.clean_kspace, cs);
    a.acquired = std::move(corrupted.kspace);
    a.truth = std::move(corrupted.record.mask);
  } else {
    a.acquired = a.clean_kspace;
    a.truth = LineMask(c.image.frames(), c.image.rows());
  }
  return a;
}

std::vector<const CaseData*> select(std::span<const CaseData> corpus, const std::string& split) {
  std::vector<const CaseData*> out;
  for (const auto& c : corpus) {
    if (split == "all" || split_name(c.split) == split) out.push_back(&c);
  }
  return out;
}

}  // namespace

PreparedModels prepare_models(const RunConfig& cfg, std::span<const CaseData> corpus) {
  PreparedModels m;
  const auto train = select(corpus, "train");

  if (cfg.detector_source == "train") {
    if (train.empty()) throw ValidationError("detector training needs at least one train-split case");
    RunConfig tc = cfg;
    if (tc.corruption.z == 0) tc.corruption.z = CorruptionSpec{}.z;
    std::vector<LabeledLines> data;
    for (const CaseData* c : train) {
      Acquisition a = acquire(tc, *c);
      data.push_back({extract_line_features(a.acquired), std::move(a.truth)});
    }
    DetectorTrainConfig dc = cfg.detector_training;
    dc.seed = derive_seed(cfg.seed, 0xD7);
    DetectorTrainResult r = train_detector(data, dc);
    m.detector = std::move(r.model);
    m.detector_loss_trace = std::move(r.loss_trace);
  } else if (cfg.detector_source != "oracle") {
    m.detector = load_detector(cfg.detector_source);
  }

  if (cfg.segmenter_source == "train") {
    if (train.empty()) throw ValidationError("segmenter training needs at least one train-split case");
    std::vector<LabeledImage> data;
    for (const CaseData* c : train) data.push_back({c->image, c->labels});
    SegTrainConfig sc = cfg.segmenter_training;
    sc.seed = derive_seed(cfg.seed, 0x5E);
    SegTrainResult r = train_segmenter(data, sc);
    m.segmenter = std::move(r.model);
    m.segmenter_loss_trace = std::move(r.loss_trace);
  } else if (cfg.segmenter_source != "none") {
    m.segmenter = load_segmenter(cfg.segmenter_source);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Per-case evaluation

namespace {

ImageSequence normalised_difference(const ImageSequence& x, const ImageSequence& ref) {
  const double peak = *std::max_element(ref.values().begin(), ref.values().end());
  ImageSequence d(ref.dims());
  for (std::size_t i = 0; i < d.size(); ++i) {
    d.values()[i] = std::abs(x.values()[i] - ref.values()[i]) / (peak > 0.0 ? peak : 1.0);
  }
  return d;
}

/// Detector output, or the true corruption mask in oracle mode; fills `probs` either way.
LineMask choose_mask(const RunConfig& cfg, const Acquisition& a, const PreparedModels& models,
                     LineProbabilities& probs) {
  if (models.detector) {
    probs = predict_line_probs(*models.detector, extract_line_features(a.acquired));
    return threshold_mask(probs, cfg.detector_threshold);
  }
  probs.values.assign(a.truth.values().begin(), a.truth.values().end());
  return a.truth;
}

CaseOutcome evaluate_case(const RunConfig& cfg, const std::string& hash, const CaseData& c,
                          const PreparedModels& models) {
  CaseOutcome out;
  out.id = c.id;
  const Acquisition a = acquire(cfg, c);
  const int frames = c.image.frames(), lines = c.image.rows();

  LineProbabilities probs{frames, lines, {}};
  const LineMask mask = choose_mask(cfg, a, models, probs);

  const CorrectionResult fix = correct(a.acquired, mask, cfg.correction);
  const ImageSequence corrupted = magnitude(ifft2(a.acquired));
  const ImageSequence corrected = magnitude(fix.corrected);

  std::optional<SegmentationOutput> seg_corrupted, seg_corrected;
  if (models.segmenter) {
    seg_corrupted = segment(*models.segmenter, corrupted);
    seg_corrected = segment(*models.segmenter, corrected);
  }

  ReportContext ctx;
  ctx.run_id = c.id;
  ctx.config_hash = hash;
  ctx.z = cfg.corruption.z;
  ctx.j_sigma = cfg.corruption.offset_sigma;
  ctx.lambda = cfg.weights.lambda;
  ctx.sharpness = {cfg.sharpness_surrogates, derive_seed(cfg.seed, 0x51)};
  ctx.with_sharpness = cfg.sharpness;
  ctx.stage = "corrupted";
  out.corrupted = assemble_report(a.clean, corrupted, ctx, seg_corrupted ? &seg_corrupted->labels : nullptr,
                                  seg_corrupted ? &c.labels : nullptr);
  ctx.stage = "corrected";
  out.corrected = assemble_report(a.clean, corrected, ctx, seg_corrected ? &seg_corrected->labels : nullptr,
                                  seg_corrected ? &c.labels : nullptr);

  out.losses.detection = detection_loss(probs, a.truth);
  out.losses.reconstruction = reconstruction_loss(corrected, a.clean);
  out.losses.correction = correction_loss(corrected, a.clean, probs, a.truth, cfg.weights.gamma);
  out.losses.segmentation = seg_corrected ? segmentation_loss(seg_corrected->probs, c.labels) : kNaN;
  out.losses.total = total_loss(out.losses.segmentation, out.losses.correction, cfg.weights);
  out.flagged_lines = mask.count();
  out.corrupted_lines = a.truth.count();
  out.residuals = fix.per_iteration_residuals;
  out.energy = fix.energy_trace;

  if (cfg.save_cases && !cfg.output.empty()) {
    const fs::path dir = cfg.output / "cases" / c.id;
    io::save(dir / "corrected", fix.corrected);
    io::save(dir / "corrected_magnitude", corrected);
    io::save(dir / "mask", mask);
    io::save(dir / "diff_corrected", normalised_difference(corrected, a.clean));
    io::save(dir / "diff_corrupted", normalised_difference(corrupted, a.clean));
    if (seg_corrected) io::save(dir / "labels", seg_corrected->labels);
  }
  out.ok = true;
  return out;
}

MetricsReport mean_report(const std::vector<const MetricsReport*>& rows, const std::string& stage,
                          const RunConfig& cfg, const std::string& hash) {
  MetricsReport m;
  m.run_id = "mean";
  m.config_hash = hash;
  m.stage = stage;
  m.z = cfg.corruption.z;
  m.j_sigma = cfg.corruption.offset_sigma;
  m.lambda = cfg.weights.lambda;
  if (rows.empty()) {
    m.mae = m.psnr = m.ssim = m.sharpness_index = kNaN;
    return m;
  }
  double lv = 0.0, myo = 0.0, rv = 0.0;
  bool dice = true;
  for (const MetricsReport* r : rows) {
    m.mae += r->mae;
    m.psnr += r->psnr;
    m.ssim += r->ssim;
    m.sharpness_index += r->sharpness_index;
    if (r->dice_lv && r->dice_myo && r->dice_rv) {
      lv += *r->dice_lv;
      myo += *r->dice_myo;
      rv += *r->dice_rv;
    } else {
      dice = false;
    }
  }
  const double n = double(rows.size());
  m.mae /= n;
  m.psnr /= n;
  m.ssim /= n;
  m.sharpness_index /= n;
  if (dice) {
    m.dice_lv = lv / n;
    m.dice_myo = myo / n;
    m.dice_rv = rv / n;
  }
  return m;
}

std::string losses_csv(const RunSummary& s) {
  std::string out = "run_id,l_detection,l_reconstruction,l_correction,l_segmentation,l_total\n";
  auto row = [&](const std::string& id, const CaseLosses& l) {
    out += id + "," + format_number(l.detection) + "," + format_number(l.reconstruction) + "," +
           format_number(l.correction) + "," + format_number(l.segmentation) + "," + format_number(l.total) + "\n";
  };
  for (const auto& c : s.cases) {
    if (c.ok) row(c.id, c.losses);
  }
  row("mean", s.mean_losses);
  return out;
}

std::string residuals_csv(const RunSummary& s) {
  std::string out = "run_id,iteration,residual,energy\n";
  for (const auto& c : s.cases) {
    if (!c.ok) continue;
    const std::size_t n = std::max(c.residuals.size(), c.energy.size());
    for (std::size_t i = 0; i < n; ++i) {
      out += c.id + "," + std::to_string(i) + "," + format_number(i < c.residuals.size() ? c.residuals[i] : kNaN) +
             "," + format_number(i < c.energy.size() ? c.energy[i] : kNaN) + "\n";
    }
  }
  return out;
}

std::string training_csv(const PreparedModels& m) {
  std::string out = "model,epoch,loss\n";
  for (std::size_t i = 0; i < m.detector_loss_trace.size(); ++i) {
    out += "detector," + std::to_string(i + 1) + "," + format_number(m.detector_loss_trace[i]) + "\n";
  }
  for (std::size_t i = 0; i < m.segmenter_loss_trace.size(); ++i) {
    out += "segmenter," + std::to_string(i + 1) + "," + format_number(m.segmenter_loss_trace[i]) + "\n";
  }
  return out;
}

void write_run(const RunConfig& cfg, const RunSummary& s, const PreparedModels& models) {
  io::write_text(cfg.output / "metrics.csv", metrics_csv(s));
  io::write_text(cfg.output / "losses.csv", losses_csv(s));
  io::write_text(cfg.output / "residuals.csv", residuals_csv(s));
  io::write_text(cfg.output / "training.csv", training_csv(models));
  if (models.detector && cfg.detector_source == "train") save_detector(cfg.output / "models" / "detector", *models.detector);
  if (models.segmenter && cfg.segmenter_source == "train") {
    save_segmenter(cfg.output / "models" / "segmenter", *models.segmenter);
  }
  json cases = json::array();
  for (const auto& c : s.cases) {
    json e = {{"id", c.id}, {"status", c.ok ? "ok" : "failed"}};
    if (!c.ok) e["error"] = c.error;
    else {
      e["flagged_lines"] = c.flagged_lines;
      e["corrupted_lines"] = c.corrupted_lines;
    }
    cases.push_back(e);
  }
  const json manifest = {{"config", cfg.to_json()},
                         {"config_hash", s.config_hash},
                         {"cases", cases},
                         {"failed", s.failed},
                         {"failure_threshold", cfg.failure_threshold},
                         {"over_failure_threshold", s.over_failure_threshold}};
  io::write_text(cfg.output / "run.json", manifest.dump(2) + "\n");
}

}  // namespace

int worker_count() {
  int n = int(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("KSLAB_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) n = std::min<long>(n, cap);
  }
  return n;
}

RunSummary run_pipeline(const RunConfig& cfg, std::span<const CaseData> corpus, const PreparedModels& models) {
  cfg.validate();
  RunSummary s;
  s.config_hash = cfg.hash();
  auto chosen = select(corpus, cfg.split);
  if (cfg.max_cases > 0 && chosen.size() > std::size_t(cfg.max_cases)) chosen.resize(std::size_t(cfg.max_cases));
  if (chosen.empty()) throw ValidationError("no cases in split '" + cfg.split + "'");
  if (!cfg.output.empty()) {
    std::error_code ec;
    fs::create_directories(cfg.output, ec);
    if (!fs::is_directory(cfg.output)) throw IoError("cannot create output directory " + cfg.output.string());
  }

  s.cases.resize(chosen.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < chosen.size(); i = next++) {
      try {
        s.cases[i] = evaluate_case(cfg, s.config_hash, *chosen[i], models);
      } catch (const std::exception& e) {
        s.cases[i] = CaseOutcome{};
        s.cases[i].id = chosen[i]->id;
        s.cases[i].error = e.what();
      }
    }
  };
  const int workers = std::min<int>(worker_count(), int(chosen.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<const MetricsReport*> corrupted, corrected;
  for (const auto& c : s.cases) {
    if (!c.ok) {
      ++s.failed;
      continue;
    }
    corrupted.push_back(&c.corrupted);
    corrected.push_back(&c.corrected);
    s.mean_losses.detection += c.losses.detection;
    s.mean_losses.reconstruction += c.losses.reconstruction;
    s.mean_losses.correction += c.losses.correction;
    s.mean_losses.segmentation += c.losses.segmentation;
    s.mean_losses.total += c.losses.total;
  }
  const double ok = double(corrupted.size());
  for (double* v : {&s.mean_losses.detection, &s.mean_losses.reconstruction, &s.mean_losses.correction,
                    &s.mean_losses.segmentation, &s.mean_losses.total}) {
    *v = ok > 0 ? *v / ok : kNaN;
  }
  s.mean_corrupted = mean_report(corrupted, "corrupted", cfg, s.config_hash);
  s.mean_corrected = mean_report(corrected, "corrected", cfg, s.config_hash);
  s.over_failure_threshold = double(s.failed) > cfg.failure_threshold * double(s.cases.size());
  if (!cfg.output.empty()) write_run(cfg, s, models);
  return s;
}

RunSummary run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  const auto corpus = load_cases(cfg);
  const PreparedModels models = prepare_models(cfg, corpus);
  return run_pipeline(cfg, corpus, models);
}

std::string metrics_csv(const RunSummary& s) {
  std::string out = metrics_csv_header() + "\n";
  for (const auto& c : s.cases) {
    if (!c.ok) continue;
    out += metrics_csv_row(c.corrupted) + "\n";
    out += metrics_csv_row(c.corrected) + "\n";
  }
  out += metrics_csv_row(s.mean_corrupted) + "\n";
  out += metrics_csv_row(s.mean_corrected) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps and reports

std::vector<SweepRow> sweep(const RunConfig& cfg, SweepAxis axis, std::span<const double> values) {
  if (values.empty()) throw ValidationError(std::string("sweep over ") + axis_name(axis) + " needs values");
  std::vector<RunConfig> runs;
  for (double v : values) {
    RunConfig rc = cfg;
    char name[64];
    switch (axis) {
      case SweepAxis::kLambda:
        rc.weights.lambda = v;
        std::snprintf(name, sizeof name, "lambda_%.2f", v);
        break;
      case SweepAxis::kZ:
        if (v != std::floor(v) || v < 0) throw ValidationError("z sweep values must be non-negative integers");
        rc.corruption.z = int(v);
        std::snprintf(name, sizeof name, "z_%d", int(v));
        break;
      case SweepAxis::kJSigma:
        rc.corruption.offset_sigma = v;
        std::snprintf(name, sizeof name, "j_sigma_%g", v);
        break;
    }
    if (!cfg.output.empty()) rc.output = cfg.output / name;
    rc.validate();
    runs.push_back(std::move(rc));
  }
  cfg.validate();
  const auto corpus = load_cases(cfg);
  PreparedModels models = prepare_models(cfg, corpus);
  // Lambda only weights the reported total loss, so one segmenter trained on
  // corrected train-split images stands in for retraining at every value.
  if (axis == SweepAxis::kLambda && cfg.segmenter_source == "train") {
    std::vector<LabeledImage> data;
    for (const CaseData* c : select(corpus, "train")) {
      const Acquisition a = acquire(cfg, *c);
      LineProbabilities probs{c->image.frames(), c->image.rows(), {}};
      const LineMask mask = choose_mask(cfg, a, models, probs);
      data.push_back({magnitude(correct(a.acquired, mask, cfg.correction).corrected), c->labels});
    }
    SegTrainConfig sc = cfg.segmenter_training;
    sc.seed = derive_seed(cfg.seed, 0x5E);
    SegTrainResult r = train_segmenter(data, sc);
    models.segmenter = std::move(r.model);
    models.segmenter_loss_trace = std::move(r.loss_trace);
  }

  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    rows.push_back({axis, values[i], run_pipeline(runs[i], corpus, models)});
  }
  if (!cfg.output.empty()) {
    io::write_text(cfg.output / (std::string("sweep_") + axis_name(axis) + ".csv"), sweep_csv(rows));
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out =
      "axis,value,mae_corrupted,mae_corrected,psnr_corrupted,psnr_corrected,ssim_corrupted,ssim_corrected,"
      "si_corrupted,si_corrected,dice_lv,dice_myo,dice_rv,l_total,failed\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  for (const auto& r : rows) {
    const MetricsReport& a = r.summary.mean_corrupted;
    const MetricsReport& b = r.summary.mean_corrected;
    out += std::string(axis_name(r.axis)) + "," + format_number(r.value) + "," + format_number(a.mae) + "," +
           format_number(b.mae) + "," + format_number(a.psnr) + "," + format_number(b.psnr) + "," +
           format_number(a.ssim) + "," + format_number(b.ssim) + "," + format_number(a.sharpness_index) + "," +
           format_number(b.sharpness_index) + "," + opt(b.dice_lv) + "," + opt(b.dice_myo) + "," + opt(b.dice_rv) +
           "," + format_number(r.summary.mean_losses.total) + "," + std::to_string(r.summary.failed) + "\n";
  }
  return out;
}

std::string format_report(const fs::path& run_dir) {
  std::istringstream in(io::read_text(run_dir / "metrics.csv"));
  std::string line;
  if (!std::getline(in, line) || line != metrics_csv_header()) {
    throw ValidationError("not a metrics table: " + (run_dir / "metrics.csv").string());
  }
  std::vector<std::vector<std::string>> rows;
  int cases = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.empty()) continue;
    if (cells[0] == "mean") {
      rows.push_back(cells);
    } else if (cells.size() > 1 && cells[1] == "corrected") {
      ++cases;
    }
  }
  if (rows.empty()) throw ValidationError("metrics table has no mean rows");

  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "run %s: %d case(s), z=%s, j_sigma=%s, lambda=%s\n\n", run_dir.string().c_str(),
                cases, rows[0][2].c_str(), rows[0][3].c_str(), rows[0][4].c_str());
  out += buf;
  std::snprintf(buf, sizeof buf, "%-10s %10s %10s %10s %10s %9s %9s %9s\n", "stage", "MAE", "PSNR", "SSIM", "SI",
                "Dice LV", "Dice Myo", "Dice RV");
  out += buf;
  for (const auto& r : rows) {
    auto at = [&](std::size_t i) { return i < r.size() && !r[i].empty() ? r[i] : std::string("-"); };
    std::snprintf(buf, sizeof buf, "%-10s %10s %10s %10s %10s %9s %9s %9s\n", at(1).c_str(), at(5).c_str(),
                  at(6).c_str(), at(7).c_str(), at(8).c_str(), at(9).c_str(), at(10).c_str(), at(11).c_str());
    out += buf;
  }
  return out;
}

}  // namespace kslab
