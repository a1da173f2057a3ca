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

#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "kslab/container.hpp"
#include "kslab/phantom.hpp"
#include "test_support.hpp"

using namespace kslab;
using kslab::testing::fixture;
using kslab::testing::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST(Phantom, LabelsMatchAnalyticShapesExactly) {
  for (const PhantomSpec& spec : {PhantomSpec::tiny(), PhantomSpec::standard()}) {
    const Phantom ph = generate_phantom(spec);
    for (int t = 0; t < spec.frames; ++t) {
      for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) {
          ASSERT_EQ(ph.labels(t, r, c), std::uint8_t(analytic_class(spec, t, r, c))) << t << "," << r << "," << c;
        }
      }
    }
  }
}

TEST(Phantom, EveryClassPresentInEveryFrame) {
  const Phantom ph = generate_phantom(PhantomSpec::standard());
  for (int t = 0; t < ph.labels.frames(); ++t) {
    std::set<int> seen;
    for (auto v : ph.labels.frame(t)) seen.insert(v);
    EXPECT_EQ(seen.size(), 4u) << "frame " << t;
  }
}

TEST(Phantom, WithoutTextureOrBiasTheImageIsPiecewiseConstant) {
  PhantomSpec spec = PhantomSpec::tiny();
  spec.texture_sigma = 0.0;
  spec.bias_amplitude = 0.0;
  const Phantom ph = generate_phantom(spec);
  std::array<std::set<double>, kClassCount> levels;
  for (std::size_t i = 0; i < ph.image.size(); ++i) levels[ph.labels.values()[i]].insert(ph.image.values()[i]);
  for (int k = 0; k < kClassCount; ++k) EXPECT_EQ(levels[std::size_t(k)].size(), 1u) << "class " << k;
  // Min-max normalisation maps the extreme classes to 0 and 1.
  EXPECT_EQ(*levels[0].begin(), 0.0);
  EXPECT_EQ(*levels[1].begin(), 1.0);
}

TEST(Phantom, ImageIsNormalised) {
  const Phantom ph = generate_phantom(PhantomSpec::standard());
  const auto [lo, hi] = std::minmax_element(ph.image.values().begin(), ph.image.values().end());
  EXPECT_EQ(*lo, 0.0);
  EXPECT_EQ(*hi, 1.0);
}

TEST(Phantom, LvRadiusMovesSmoothly) {
  // Cosine cycle: the largest step is at most (pi / T) of the range, under
  // 15% once T >= 21. The 8-frame preset is too coarse for that bound.
  for (int frames : {21, 25, 30, 50}) {
    PhantomSpec spec = PhantomSpec::standard();
    spec.frames = frames;
    const double range = spec.lv_radius_diastole - spec.lv_radius_systole;
    for (int t = 0; t < frames; ++t) {
      const double step = std::abs(spec.lv_radius((t + 1) % frames) - spec.lv_radius(t));
      EXPECT_LE(step, 0.15 * range) << "T=" << frames << " t=" << t;
      EXPECT_LE(step, std::numbers::pi / frames * range + 1e-12);
    }
  }
  const PhantomSpec s = PhantomSpec::standard();
  double lo = 1e9, hi = 0.0;
  for (int t = 0; t < s.frames; ++t) {
    lo = std::min(lo, s.lv_radius(t));
    hi = std::max(hi, s.lv_radius(t));
  }
  EXPECT_NEAR(lo, s.lv_radius_systole, 0.2);
  EXPECT_NEAR(hi, s.lv_radius_diastole, 0.2);
}

TEST(Phantom, GeometryOverflowIsRejected) {
  PhantomSpec spec = PhantomSpec::tiny();
  spec.lv_radius_diastole = 20.0;
  EXPECT_THROW(generate_phantom(spec), ValidationError);
  spec = PhantomSpec::standard();
  spec.rv_center_col = 10.0;
  EXPECT_THROW(spec.validate(), ValidationError);
  spec = PhantomSpec::standard();
  spec.intensity[2] = 1.5;
  EXPECT_THROW(spec.validate(), ValidationError);
  spec = PhantomSpec::standard();
  spec.lv_radius_systole = -1.0;
  EXPECT_THROW(spec.validate(), ValidationError);
}

TEST(Phantom, SpecJsonRoundTrip) {
  PhantomSpec spec = PhantomSpec::standard();
  spec.rng_seed = 0xFFFFFFFFFFFFFFF1ULL;
  spec.texture_sigma = 0.03;
  const PhantomSpec back = PhantomSpec::from_json(spec.to_json());
  EXPECT_EQ(back.to_json(), spec.to_json());
  EXPECT_EQ(back.rng_seed, spec.rng_seed);
}

TEST(Phantom, MatchesFrozenFixture) {
  const auto plan = plan_corpus(1, PhantomSpec::tiny(), 11);
  const Phantom ph = generate_phantom(plan[0].spec);
  const ImageSequence golden = io::load_image(fixture("phantom_tiny_image"));
  ASSERT_EQ(golden.dims(), ph.image.dims());
  for (std::size_t i = 0; i < golden.size(); ++i) ASSERT_EQ(golden.values()[i], double(float(ph.image.values()[i])));
  EXPECT_EQ(io::load_labels(fixture("phantom_tiny_labels")), ph.labels);
}

TEST(Corpus, SplitSizes) {
  auto count = [](const std::vector<CorpusEntry>& plan, Split s) {
    return std::count_if(plan.begin(), plan.end(), [s](const CorpusEntry& e) { return e.split == s; });
  };
  const auto ten = plan_corpus(10, PhantomSpec::tiny(), 1);
  EXPECT_EQ(count(ten, Split::kTrain), 6);
  EXPECT_EQ(count(ten, Split::kVal), 2);
  EXPECT_EQ(count(ten, Split::kTest), 2);
  const auto fifty = plan_corpus(50, PhantomSpec::tiny(), 1);
  EXPECT_EQ(count(fifty, Split::kTrain), 30);
  EXPECT_EQ(count(fifty, Split::kTest), 10);
  EXPECT_THROW(plan_corpus(0, PhantomSpec::tiny(), 1), ValidationError);
}

TEST(Corpus, JitterStaysInBounds) {
  for (const PhantomSpec& tmpl : {PhantomSpec::standard(), PhantomSpec::tiny()}) {
    const auto plan = plan_corpus(100, tmpl, 77);
    std::set<std::uint64_t> seeds;
    for (const auto& e : plan) {
      const PhantomSpec& s = e.spec;
      EXPECT_NO_THROW(s.validate());
      EXPECT_LE(std::abs(s.lv_radius_systole / tmpl.lv_radius_systole - 1.0), 0.2 + 1e-12);
      EXPECT_LE(std::abs(s.lv_radius_diastole / tmpl.lv_radius_diastole - 1.0), 0.2 + 1e-12);
      EXPECT_LE(std::abs(s.rv_axis_row / tmpl.rv_axis_row - 1.0), 0.2 + 1e-12);
      EXPECT_LE(std::abs(s.rv_axis_col / tmpl.rv_axis_col - 1.0), 0.2 + 1e-12);
      EXPECT_LE(std::abs(s.lv_center_row - tmpl.lv_center_row), 5.0);
      EXPECT_LE(std::abs(s.lv_center_col - tmpl.lv_center_col), 5.0);
      EXPECT_LE(std::abs(s.rv_center_row - tmpl.rv_center_row), 5.0);
      EXPECT_LE(std::abs(s.rv_center_col - tmpl.rv_center_col), 5.0);
      for (int k = 0; k < kClassCount; ++k) {
        EXPECT_LE(std::abs(s.intensity[std::size_t(k)] - tmpl.intensity[std::size_t(k)]), 0.1 + 1e-12);
        EXPECT_GE(s.intensity[std::size_t(k)], 0.0);
        EXPECT_LE(s.intensity[std::size_t(k)], 1.0);
      }
      seeds.insert(s.rng_seed);
    }
    EXPECT_EQ(seeds.size(), 100u);
  }
}

TEST(Corpus, GeneratedFilesAreDeterministic) {
  TempDir a("corpus-a"), b("corpus-b");
  generate_corpus(a.path(), 5, PhantomSpec::tiny(), 9);
  generate_corpus(b.path(), 5, PhantomSpec::tiny(), 9);
  EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
  const auto cases = load_manifest(a.path());
  ASSERT_EQ(cases.size(), 5u);
  for (const auto& c : cases) {
    EXPECT_EQ(slurp(io::payload_path(c.image_stem)),
              slurp(io::payload_path(b.path() / c.image_stem.lexically_relative(a.path()))));
    const auto labels = io::load_labels(c.labels_stem);
    EXPECT_EQ(labels.dims(), (Dims{8, 32, 32}));
  }
  TempDir other("corpus-c");
  generate_corpus(other.path(), 5, PhantomSpec::tiny(), 10);
  EXPECT_NE(slurp(a / "manifest.json"), slurp(other / "manifest.json"));
}

TEST(Corpus, UnwritableRootIsAnIoError) {
  TempDir dir("ro");
  io::write_text(dir / "file", "x");
  EXPECT_THROW(generate_corpus(dir / "file" / "sub", 1, PhantomSpec::tiny(), 1), IoError);
  EXPECT_THROW(load_manifest(dir / "missing"), IoError);
}
