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

#include "kslab/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "kslab/container.hpp"
#include "kslab/rng.hpp"

namespace kslab {
namespace fs = std::filesystem;

PhantomSpec PhantomSpec::standard() { return PhantomSpec{}; }

PhantomSpec PhantomSpec::tiny() {
  PhantomSpec s;
  s.frames = 8;
  s.rows = 32;
  s.cols = 32;
  s.lv_center_row = 16.0;
  s.lv_center_col = 19.0;
  s.lv_radius_systole = 2.5;
  s.lv_radius_diastole = 4.5;
  s.myo_thickness = 2.0;
  s.rv_center_row = 16.0;
  s.rv_center_col = 11.0;
  s.rv_axis_row = 6.0;
  s.rv_axis_col = 3.5;
  return s;
}

double PhantomSpec::cycle(int t) const {
  const double phase = double(t) / double(frames) - contraction_phase;
  return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * phase));
}

double PhantomSpec::lv_radius(int t) const {
  return lv_radius_systole + (lv_radius_diastole - lv_radius_systole) * cycle(t);
}

double PhantomSpec::rv_scale(int t) const { return 0.85 + 0.15 * cycle(t); }

void PhantomSpec::validate() const {
  validate_dims(dims());
  if (!(lv_radius_systole > 0.0 && lv_radius_diastole >= lv_radius_systole)) {
    throw ValidationError("LV radii must satisfy 0 < systole <= diastole");
  }
  if (!(myo_thickness > 0.0 && rv_axis_row > 0.0 && rv_axis_col > 0.0)) {
    throw ValidationError("myocardial thickness and RV axes must be positive");
  }
  for (double v : intensity) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("class intensities must lie in [0, 1]");
  }
  if (!(texture_sigma >= 0.0) || !(bias_amplitude >= 0.0 && bias_amplitude < 1.0)) {
    throw ValidationError("texture_sigma must be >= 0 and bias_amplitude in [0, 1)");
  }
  auto inside = [&](double lo, double hi, int extent) {
    return lo >= kPhantomMargin && hi <= double(extent - 1) - kPhantomMargin;
  };
  for (int t = 0; t < frames; ++t) {
    const double outer = lv_radius(t) + myo_thickness;
    const double ar = rv_axis_row * rv_scale(t), ac = rv_axis_col * rv_scale(t);
    if (!inside(lv_center_row - outer, lv_center_row + outer, rows) ||
        !inside(lv_center_col - outer, lv_center_col + outer, cols) ||
        !inside(rv_center_row - ar, rv_center_row + ar, rows) ||
        !inside(rv_center_col - ac, rv_center_col + ac, cols)) {
      throw ValidationError("phantom geometry overflows the frame in frame " + std::to_string(t));
    }
  }
}

nlohmann::json PhantomSpec::to_json() const {
  return {{"frames", frames},
          {"rows", rows},
          {"cols", cols},
          {"lv_center", {lv_center_row, lv_center_col}},
          {"lv_radius_range", {lv_radius_systole, lv_radius_diastole}},
          {"myo_thickness", myo_thickness},
          {"rv_center", {rv_center_row, rv_center_col}},
          {"rv_axes", {rv_axis_row, rv_axis_col}},
          {"contraction_phase", contraction_phase},
          {"intensity_map", intensity},
          {"texture_sigma", texture_sigma},
          {"bias_amplitude", bias_amplitude},
          {"rng_seed", rng_seed}};
}

PhantomSpec PhantomSpec::from_json(const nlohmann::json& j) {
  PhantomSpec s;
  try {
    s.frames = j.at("frames").get<int>();
    s.rows = j.at("rows").get<int>();
    s.cols = j.at("cols").get<int>();
    s.lv_center_row = j.at("lv_center").at(0).get<double>();
    s.lv_center_col = j.at("lv_center").at(1).get<double>();
    s.lv_radius_systole = j.at("lv_radius_range").at(0).get<double>();
    s.lv_radius_diastole = j.at("lv_radius_range").at(1).get<double>();
    s.myo_thickness = j.at("myo_thickness").get<double>();
    s.rv_center_row = j.at("rv_center").at(0).get<double>();
    s.rv_center_col = j.at("rv_center").at(1).get<double>();
    s.rv_axis_row = j.at("rv_axes").at(0).get<double>();
    s.rv_axis_col = j.at("rv_axes").at(1).get<double>();
    s.contraction_phase = j.at("contraction_phase").get<double>();
    s.intensity = j.at("intensity_map").get<std::array<double, kClassCount>>();
    s.texture_sigma = j.at("texture_sigma").get<double>();
    s.bias_amplitude = j.value("bias_amplitude", s.bias_amplitude);
    s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed phantom spec: ") + e.what());
  }
  return s;
}

TissueClass analytic_class(const PhantomSpec& spec, int t, double r, double c) {
  const double d = std::hypot(r - spec.lv_center_row, c - spec.lv_center_col);
  const double radius = spec.lv_radius(t);
  if (d <= radius) return TissueClass::kLV;
  if (d <= radius + spec.myo_thickness) return TissueClass::kMyo;
  const double s = spec.rv_scale(t);
  const double er = (r - spec.rv_center_row) / (spec.rv_axis_row * s);
  const double ec = (c - spec.rv_center_col) / (spec.rv_axis_col * s);
  if (er * er + ec * ec <= 1.0) return TissueClass::kRV;
  return TissueClass::kBackground;
}

Phantom generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const Dims dims = spec.dims();
  Phantom out{ImageSequence(dims), SegmentationMap(dims)};

  // Static tissue texture, drawn row-major once per phantom.
  Rng rng(spec.rng_seed);
  std::vector<double> texture(dims.frame_size(), 0.0);
  if (spec.texture_sigma > 0.0) {
    for (double& v : texture) v = spec.texture_sigma * rng.normal();
  }

  for (int t = 0; t < spec.frames; ++t) {
    for (int r = 0; r < spec.rows; ++r) {
      for (int c = 0; c < spec.cols; ++c) {
        const TissueClass cls = analytic_class(spec, t, r, c);
        const double bias = 1.0 + spec.bias_amplitude * (double(r) / double(spec.rows - 1) - 0.5 +
                                                         double(c) / double(spec.cols - 1) - 0.5);
        out.labels(t, r, c) = std::uint8_t(cls);
        out.image(t, r, c) = (spec.intensity[std::size_t(cls)] + texture[std::size_t(r) * spec.cols + c]) * bias;
      }
    }
  }

  auto& v = out.image.values();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double min = *lo, range = *hi - *lo;
  for (double& x : v) x = range > 0.0 ? (x - min) / range : 0.0;
  return out;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw ValidationError("unknown split '" + name + "'");
}

namespace {

PhantomSpec jitter(const PhantomSpec& tmpl, Rng& rng) {
  auto sym = [&](double half) { return half * (2.0 * rng.uniform() - 1.0); };
  PhantomSpec s = tmpl;
  const double lv_scale = 1.0 + sym(0.2);
  const double rv_scale = 1.0 + sym(0.2);
  const double dr = sym(5.0), dc = sym(5.0);
  s.lv_radius_systole *= lv_scale;
  s.lv_radius_diastole *= lv_scale;
  s.rv_axis_row *= rv_scale;
  s.rv_axis_col *= rv_scale;
  s.lv_center_row += dr;
  s.lv_center_col += dc;
  s.rv_center_row += dr;
  s.rv_center_col += dc;
  for (double& v : s.intensity) v = std::clamp(v + sym(0.1), 0.0, 1.0);
  s.rng_seed = rng.next();
  return s;
}

}  // namespace

std::vector<CorpusEntry> plan_corpus(int n, const PhantomSpec& tmpl, std::uint64_t seed) {
  if (n < 1) throw ValidationError("corpus size must be >= 1");
  tmpl.validate();
  std::vector<CorpusEntry> entries(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, std::uint64_t(i)));
    PhantomSpec spec = tmpl;
    bool ok = false;
    for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
      spec = jitter(tmpl, rng);
      try {
        spec.validate();
        ok = true;
      } catch (const ValidationError&) {
      }
    }
    if (!ok) {
      spec = tmpl;
      spec.rng_seed = rng.next();
    }
    char id[32];
    std::snprintf(id, sizeof id, "case_%04d", i);
    entries[std::size_t(i)] = {id, Split::kTrain, spec};
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[std::size_t(i)] = i;
  Rng shuffle(derive_seed(seed, 0x5EED5EEDULL));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
  const int n_train = n * 6 / 10;
  const int n_val = n * 2 / 10;
  for (int k = 0; k < n; ++k) {
    const Split s = k < n_train ? Split::kTrain : (k < n_train + n_val ? Split::kVal : Split::kTest);
    entries[std::size_t(order[std::size_t(k)])].split = s;
  }
  return entries;
}

nlohmann::json generate_corpus(const fs::path& root, int n, const PhantomSpec& tmpl, std::uint64_t seed) {
  const auto entries = plan_corpus(n, tmpl, seed);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) throw IoError("cannot create corpus directory " + root.string());

  nlohmann::json cases = nlohmann::json::array();
  for (const auto& e : entries) {
    const Phantom ph = generate_phantom(e.spec);
    io::save(root / e.id / "image", ph.image);
    io::save(root / e.id / "labels", ph.labels);
    cases.push_back({{"id", e.id},
                     {"split", split_name(e.split)},
                     {"image", e.id + "/image"},
                     {"labels", e.id + "/labels"},
                     {"spec", e.spec.to_json()}});
  }
  nlohmann::json manifest = {{"format", "kslab-phantom-corpus"},
                             {"version", 1},
                             {"seed", seed},
                             {"n", n},
                             {"template", tmpl.to_json()},
                             {"cases", cases}};
  io::write_text(root / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

std::vector<CorpusCase> load_manifest(const fs::path& root) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(io::read_text(root / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed corpus manifest: " + std::string(e.what()));
  }
  std::vector<CorpusCase> cases;
  try {
    for (const auto& c : manifest.at("cases")) {
      cases.push_back({c.at("id").get<std::string>(), parse_split(c.at("split").get<std::string>()),
                       root / c.at("image").get<std::string>(), root / c.at("labels").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed corpus manifest: " + std::string(e.what()));
  }
  return cases;
}

}  // namespace kslab
