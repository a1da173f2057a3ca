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

/* Exercises the public C interface from plain C. */
#define _POSIX_C_SOURCE 200809L
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <unistd.h>

#include "kslab/kslab.h"

static int failures = 0;

#define CHECK(cond)                                                            \
  do {                                                                         \
    if (!(cond)) {                                                             \
      fprintf(stderr, "%s:%d: check failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                              \
    }                                                                          \
  } while (0)

#define CHECK_OK(call)                                                                          \
  do {                                                                                          \
    kslab_status st_ = (call);                                                                  \
    if (st_ != KSLAB_OK) {                                                                      \
      fprintf(stderr, "%s:%d: %s -> %d (%s)\n", __FILE__, __LINE__, #call, (int)st_,           \
              kslab_last_error());                                                              \
      ++failures;                                                                               \
    }                                                                                           \
  } while (0)

static char scratch[256];

/* Rotating buffers so several paths can appear in one call. */
static const char* path_in(const char* name) {
  static char buf[4][300];
  static int next = 0;
  char* out = buf[next++ % 4];
  snprintf(out, sizeof buf[0], "%s/%s", scratch, name);
  return out;
}

static void test_errors(void) {
  kslab_image* img = NULL;
  CHECK(kslab_image_create(1, 2, 8, NULL, &img) == KSLAB_ERR_VALIDATION); /* H < 4 */
  CHECK(img == NULL);
  CHECK(strlen(kslab_last_error()) > 0);
  CHECK(kslab_image_load(path_in("absent"), &img) == KSLAB_ERR_IO);
  CHECK(kslab_fft2(NULL, NULL) == KSLAB_ERR_VALIDATION);
  CHECK(kslab_version() != NULL && strlen(kslab_version()) > 0);
}

static void test_fft_round_trip(void) {
  enum { T = 2, H = 6, W = 5, N = T * H * W };
  double values[2 * N], back[2 * N];
  for (int i = 0; i < 2 * N; ++i) values[i] = sin(0.37 * i) + 0.1 * (i % 3);
  kslab_cimage* x = NULL;
  kslab_kspace* k = NULL;
  kslab_cimage* y = NULL;
  CHECK_OK(kslab_cimage_create(T, H, W, values, &x));
  CHECK_OK(kslab_fft2(x, &k));
  int t = 0, h = 0, w = 0;
  CHECK_OK(kslab_kspace_dims(k, &t, &h, &w));
  CHECK(t == T && h == H && w == W);
  CHECK_OK(kslab_ifft2(k, &y));
  CHECK_OK(kslab_cimage_copy(y, back, 2 * N));
  double worst = 0.0;
  for (int i = 0; i < 2 * N; ++i) worst = fmax(worst, fabs(back[i] - values[i]));
  CHECK(worst < 1e-12);
  CHECK(kslab_cimage_copy(y, back, 3) == KSLAB_ERR_VALIDATION); /* buffer too small */
  kslab_cimage_free(x);
  kslab_cimage_free(y);
  kslab_kspace_free(k);
}

static void test_corrupt_and_correct(void) {
  kslab_image* img = NULL;
  kslab_labels* labels = NULL;
  CHECK_OK(kslab_phantom_generate("{\"preset\": \"tiny\"}", &img, &labels));
  int t = 0, h = 0, w = 0;
  CHECK_OK(kslab_image_dims(img, &t, &h, &w));
  CHECK(t == 8 && h == 32 && w == 32);

  kslab_cimage* cx = NULL;
  kslab_kspace* clean = NULL;
  kslab_kspace* bad = NULL;
  kslab_mask* mask = NULL;
  char* record = NULL;
  CHECK_OK(kslab_synthesize_phase(img, "{\"seed\": 3}", &cx));
  CHECK_OK(kslab_fft2(cx, &clean));
  CHECK_OK(kslab_corrupt(clean, 4, 3.0, 11, &bad, &mask, &record));
  CHECK(record != NULL && strstr(record, "\"entries\"") != NULL);
  kslab_string_free(record);

  uint8_t m[8 * 32];
  CHECK_OK(kslab_mask_copy(mask, m, sizeof m));
  int flagged = 0;
  for (int i = 0; i < 8 * 32; ++i) flagged += m[i];
  CHECK(flagged == 8 * 8); /* 1 in 4 of 32 lines, every frame */

  kslab_cimage* fixed = NULL;
  char* report = NULL;
  CHECK_OK(kslab_correct(bad, mask, NULL, &fixed, &report));
  CHECK(report != NULL && strstr(report, "\"residuals\"") != NULL);
  kslab_string_free(report);

  kslab_cimage* ref_c = NULL;
  kslab_cimage* bad_c = NULL;
  kslab_image* ref = NULL;
  kslab_image* before = NULL;
  kslab_image* after = NULL;
  CHECK_OK(kslab_ifft2(clean, &ref_c));
  CHECK_OK(kslab_ifft2(bad, &bad_c));
  CHECK_OK(kslab_cimage_magnitude(ref_c, &ref));
  CHECK_OK(kslab_cimage_magnitude(bad_c, &before));
  CHECK_OK(kslab_cimage_magnitude(fixed, &after));
  char* m_before = NULL;
  char* m_after = NULL;
  CHECK_OK(kslab_metrics(ref, before, NULL, NULL, &m_before));
  CHECK_OK(kslab_metrics(ref, after, labels, labels, &m_after));
  CHECK(m_before && strstr(m_before, "\"psnr\"") != NULL);
  CHECK(m_after && strstr(m_after, "\"dice_lv\"") != NULL);
  kslab_string_free(m_before);
  kslab_string_free(m_after);

  /* Save and reload through the container format. */
  CHECK_OK(kslab_mask_save(mask, path_in("mask")));
  kslab_mask* mask2 = NULL;
  CHECK_OK(kslab_mask_load(path_in("mask"), &mask2));
  uint8_t m2[8 * 32];
  CHECK_OK(kslab_mask_copy(mask2, m2, sizeof m2));
  CHECK(memcmp(m, m2, sizeof m) == 0);
  CHECK_OK(kslab_labels_save(labels, path_in("labels")));

  kslab_mask* wrong = NULL;
  CHECK_OK(kslab_mask_create(3, 32, NULL, &wrong));
  kslab_cimage* nope = NULL;
  CHECK(kslab_correct(bad, wrong, NULL, &nope, NULL) == KSLAB_ERR_VALIDATION);
  CHECK(kslab_correct(bad, mask, "{\"iterations\": 0}", &nope, NULL) == KSLAB_ERR_VALIDATION);
  CHECK(kslab_correct(bad, mask, "{not json", &nope, NULL) == KSLAB_ERR_VALIDATION);

  kslab_mask_free(wrong);
  kslab_mask_free(mask2);
  kslab_image_free(ref);
  kslab_image_free(before);
  kslab_image_free(after);
  kslab_cimage_free(ref_c);
  kslab_cimage_free(bad_c);
  kslab_cimage_free(fixed);
  kslab_mask_free(mask);
  kslab_kspace_free(bad);
  kslab_kspace_free(clean);
  kslab_cimage_free(cx);
  kslab_labels_free(labels);
  kslab_image_free(img);
}

static void test_models_and_runs(void) {
  CHECK_OK(kslab_corpus_generate(path_in("corpus"), 5, "tiny", 4));

  kslab_detector* det = NULL;
  char* report = NULL;
  CHECK_OK(kslab_detector_train(path_in("corpus"), "{\"epochs\": 3, \"seed\": 1}", &det, &report));
  CHECK(report && strstr(report, "loss") != NULL);
  kslab_string_free(report);
  CHECK_OK(kslab_detector_save(det, path_in("det")));
  kslab_detector* det2 = NULL;
  CHECK_OK(kslab_detector_load(path_in("det"), &det2));

  kslab_image* img = NULL;
  CHECK_OK(kslab_image_load(path_in("corpus/case_0000/image"), &img));
  kslab_cimage* cx = NULL;
  kslab_kspace* ks = NULL;
  CHECK_OK(kslab_synthesize_phase(img, NULL, &cx));
  CHECK_OK(kslab_fft2(cx, &ks));
  kslab_mask* mask = NULL;
  double probs[8 * 32];
  CHECK_OK(kslab_detect(det2, ks, 0.5, &mask, probs, 8 * 32));
  for (int i = 0; i < 8 * 32; ++i) CHECK(probs[i] > 0.0 && probs[i] < 1.0);
  CHECK(kslab_detect(det2, ks, 1.5, &mask, NULL, 0) == KSLAB_ERR_VALIDATION);

  kslab_segmenter* seg = NULL;
  CHECK_OK(kslab_segmenter_train(path_in("corpus"), "{\"epochs\": 1, \"seed\": 2}", &seg, NULL));
  kslab_labels* labels = NULL;
  CHECK_OK(kslab_segment(seg, img, &labels));
  CHECK_OK(kslab_segmenter_save(seg, path_in("seg")));

  char config[2048];
  snprintf(config, sizeof config,
           "{\"dataset\": \"%s\", \"split\": \"all\", \"segmenter\": {\"source\": \"%s\"},"
           " \"metrics\": {\"sharpness\": false}, \"output\": \"%s\", \"seed\": 8}",
           path_in("corpus"), path_in("seg"), path_in("run"));
  char* summary = NULL;
  CHECK_OK(kslab_run(config, &summary));
  CHECK(summary && strstr(summary, "\"failed\"") != NULL);
  kslab_string_free(summary);
  char* text = NULL;
  CHECK_OK(kslab_report(path_in("run"), &text));
  CHECK(text && strstr(text, "corrected") != NULL);
  kslab_string_free(text);

  const double zs[2] = {8, 16};
  snprintf(config, sizeof config,
           "{\"dataset\": \"%s\", \"split\": \"all\", \"max_cases\": 2, \"segmenter\": {\"source\": \"none\"},"
           " \"metrics\": {\"sharpness\": false}, \"output\": \"%s\"}",
           path_in("corpus"), path_in("sweep"));
  CHECK_OK(kslab_sweep(config, "z", zs, 2, &summary));
  kslab_string_free(summary);
  CHECK(kslab_sweep(config, "theta", zs, 2, &summary) == KSLAB_ERR_VALIDATION);
  CHECK(kslab_run("{\"corruption\": {\"z\": -1}}", &summary) == KSLAB_ERR_VALIDATION);

  kslab_labels_free(labels);
  kslab_segmenter_free(seg);
  kslab_mask_free(mask);
  kslab_kspace_free(ks);
  kslab_cimage_free(cx);
  kslab_image_free(img);
  kslab_detector_free(det2);
  kslab_detector_free(det);
}

int main(void) {
  snprintf(scratch, sizeof scratch, "/tmp/kslab-capi-XXXXXX");
  if (!mkdtemp(scratch)) {
    perror("mkdtemp");
    return 1;
  }
  test_errors();
  test_fft_round_trip();
  test_corrupt_and_correct();
  test_models_and_runs();
  char cmd[320];
  snprintf(cmd, sizeof cmd, "rm -rf '%s'", scratch);
  if (system(cmd) != 0) fprintf(stderr, "could not remove %s\n", scratch);
  if (failures) {
    fprintf(stderr, "%d C API check(s) failed\n", failures);
    return 1;
  }
  printf("C API checks passed\n");
  return 0;
}
