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

#ifndef KSLAB_KSLAB_H
#define KSLAB_KSLAB_H

/* C interface of the kslab shared library. Every function returns a
 * kslab_status; on failure kslab_last_error() describes the cause (the
 * message is thread-local and valid until the next failing call on the
 * same thread). Objects are opaque handles released with their _free
 * function; strings returned through char** are released with
 * kslab_string_free. Structured parameters and results travel as JSON text. */

#include <stddef.h>
#include <stdint.h>

#if defined(KSLAB_BUILDING_LIBRARY)
#define KSLAB_API __attribute__((visibility("default")))
#else
#define KSLAB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum kslab_status {
  KSLAB_OK = 0,
  KSLAB_ERR_INTERNAL = 1,
  KSLAB_ERR_VALIDATION = 2,
  KSLAB_ERR_RUN_FAILURES = 3, /* too many cases failed; results were still written */
  KSLAB_ERR_IO = 4,
  KSLAB_ERR_NUMERIC = 5
} kslab_status;

typedef struct kslab_image kslab_image;         /* real T x H x W sequence */
typedef struct kslab_cimage kslab_cimage;       /* complex T x H x W image sequence */
typedef struct kslab_kspace kslab_kspace;       /* centred k-space, rows are lines */
typedef struct kslab_mask kslab_mask;           /* T x H line mask, 1 = corrupted */
typedef struct kslab_labels kslab_labels;       /* T x H x W labels in 0..3 */
typedef struct kslab_detector kslab_detector;
typedef struct kslab_segmenter kslab_segmenter;

KSLAB_API const char* kslab_version(void);
KSLAB_API const char* kslab_last_error(void);
KSLAB_API void kslab_string_free(char* s);

/* ---- sequences ---------------------------------------------------------- */

KSLAB_API kslab_status kslab_image_create(int frames, int rows, int cols, const double* values, kslab_image** out);
KSLAB_API kslab_status kslab_image_dims(const kslab_image* img, int* frames, int* rows, int* cols);
/* Copies frames*rows*cols values, row-major. */
KSLAB_API kslab_status kslab_image_copy(const kslab_image* img, double* values, size_t count);
KSLAB_API kslab_status kslab_image_load(const char* stem, kslab_image** out);
KSLAB_API kslab_status kslab_image_save(const kslab_image* img, const char* stem);
KSLAB_API void kslab_image_free(kslab_image* img);

/* values are interleaved (re, im) pairs, 2*frames*rows*cols doubles. */
KSLAB_API kslab_status kslab_cimage_create(int frames, int rows, int cols, const double* values, kslab_cimage** out);
KSLAB_API kslab_status kslab_cimage_copy(const kslab_cimage* img, double* values, size_t count);
KSLAB_API kslab_status kslab_cimage_magnitude(const kslab_cimage* img, kslab_image** out);
KSLAB_API kslab_status kslab_cimage_load(const char* stem, kslab_cimage** out);
KSLAB_API kslab_status kslab_cimage_save(const kslab_cimage* img, const char* stem);
KSLAB_API void kslab_cimage_free(kslab_cimage* img);

KSLAB_API kslab_status kslab_kspace_dims(const kslab_kspace* ks, int* frames, int* rows, int* cols);
KSLAB_API kslab_status kslab_kspace_copy(const kslab_kspace* ks, double* values, size_t count);
KSLAB_API kslab_status kslab_kspace_load(const char* stem, kslab_kspace** out);
KSLAB_API kslab_status kslab_kspace_save(const kslab_kspace* ks, const char* stem);
KSLAB_API void kslab_kspace_free(kslab_kspace* ks);

KSLAB_API kslab_status kslab_fft2(const kslab_cimage* img, kslab_kspace** out);
KSLAB_API kslab_status kslab_ifft2(const kslab_kspace* ks, kslab_cimage** out);

KSLAB_API kslab_status kslab_mask_create(int frames, int lines, const uint8_t* values, kslab_mask** out);
KSLAB_API kslab_status kslab_mask_dims(const kslab_mask* mask, int* frames, int* lines);
KSLAB_API kslab_status kslab_mask_copy(const kslab_mask* mask, uint8_t* values, size_t count);
KSLAB_API kslab_status kslab_mask_load(const char* stem, kslab_mask** out);
KSLAB_API kslab_status kslab_mask_save(const kslab_mask* mask, const char* stem);
KSLAB_API void kslab_mask_free(kslab_mask* mask);

KSLAB_API kslab_status kslab_labels_copy(const kslab_labels* labels, uint8_t* values, size_t count);
KSLAB_API kslab_status kslab_labels_load(const char* stem, kslab_labels** out);
KSLAB_API kslab_status kslab_labels_save(const kslab_labels* labels, const char* stem);
KSLAB_API void kslab_labels_free(kslab_labels* labels);

/* ---- phantoms ----------------------------------------------------------- */

/* spec_json: a phantom spec object, or {"preset": "standard"|"tiny", ...overrides}. NULL = standard. */
KSLAB_API kslab_status kslab_phantom_generate(const char* spec_json, kslab_image** image, kslab_labels** labels);
/* Writes <root>/manifest.json and the case files; preset is "standard" or "tiny". */
KSLAB_API kslab_status kslab_corpus_generate(const char* root, int n, const char* preset, uint64_t seed);

/* ---- artefact simulation ------------------------------------------------ */

/* Magnitude image -> complex image with smooth synthetic phase. params_json:
 * {"noise_sigma", "lowpass_keep", "lowpass_taper_sigma", "seed"}; NULL = defaults. */
KSLAB_API kslab_status kslab_synthesize_phase(const kslab_image* img, const char* params_json, kslab_cimage** out);
/* Cross-frame line replacement. record_json (optional) receives the corruption record. */
KSLAB_API kslab_status kslab_corrupt(const kslab_kspace* ks, int z, double offset_sigma, uint64_t seed,
                                     kslab_kspace** corrupted, kslab_mask** mask, char** record_json);

/* ---- detection ---------------------------------------------------------- */

KSLAB_API kslab_status kslab_detector_load(const char* stem, kslab_detector** out);
KSLAB_API kslab_status kslab_detector_save(const kslab_detector* det, const char* stem);
/* Trains on the train split of a corpus directory. params_json: {"epochs",
 * "learning_rate", "batch", "z", "offset_sigma", "seed"}; NULL = defaults. */
KSLAB_API kslab_status kslab_detector_train(const char* corpus_root, const char* params_json, kslab_detector** out,
                                            char** report_json);
/* probs (optional) receives frames*lines probabilities of corruption. */
KSLAB_API kslab_status kslab_detect(const kslab_detector* det, const kslab_kspace* ks, double threshold,
                                    kslab_mask** mask, double* probs, size_t probs_count);
KSLAB_API void kslab_detector_free(kslab_detector* det);

/* ---- correction --------------------------------------------------------- */

/* params_json: {"iterations", "temporal_weight", "tv_weight", "step_size"}; NULL = defaults.
 * report_json (optional): {"residuals": [...], "energy": [...], "step_size_used", "step_halved"}. */
KSLAB_API kslab_status kslab_correct(const kslab_kspace* acquired, const kslab_mask* mask, const char* params_json,
                                     kslab_cimage** corrected, char** report_json);

/* ---- segmentation ------------------------------------------------------- */

KSLAB_API kslab_status kslab_segmenter_load(const char* stem, kslab_segmenter** out);
KSLAB_API kslab_status kslab_segmenter_save(const kslab_segmenter* seg, const char* stem);
/* params_json: {"epochs", "learning_rate", "batch", "seed"}; NULL = defaults. */
KSLAB_API kslab_status kslab_segmenter_train(const char* corpus_root, const char* params_json,
                                             kslab_segmenter** out, char** report_json);
KSLAB_API kslab_status kslab_segment(const kslab_segmenter* seg, const kslab_image* img, kslab_labels** out);
KSLAB_API void kslab_segmenter_free(kslab_segmenter* seg);

/* ---- metrics and runs --------------------------------------------------- */

/* Metrics of test against reference as JSON; pred/truth may be NULL. */
KSLAB_API kslab_status kslab_metrics(const kslab_image* reference, const kslab_image* test, const kslab_labels* pred,
                                     const kslab_labels* truth, char** report_json);
/* Full pipeline run from a run-config JSON. Returns KSLAB_ERR_RUN_FAILURES
 * when more than the configured fraction of cases failed. */
KSLAB_API kslab_status kslab_run(const char* config_json, char** summary_json);
/* axis: "lambda", "z" or "j_sigma". */
KSLAB_API kslab_status kslab_sweep(const char* config_json, const char* axis, const double* values, size_t count,
                                   char** summary_json);
KSLAB_API kslab_status kslab_report(const char* run_dir, char** text);

#ifdef __cplusplus
}
#endif

#endif /* KSLAB_KSLAB_H */
