/* Copyright 2026 The aesthetic-vae Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *  http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the aesthetic VAE/GAN library.
 *
 * Every function returns an aest_status. On failure, aest_last_error() holds
 * a one-line message for the calling thread until its next call into the
 * library. Strings returned through char** are owned by the caller and
 * released with aest_free. Options and requests are JSON objects.
 */
#ifndef AEST_AEST_H
#define AEST_AEST_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define AEST_API __declspec(dllexport)
#else
#define AEST_API __attribute__((visibility("default")))
#endif

typedef enum aest_status {
  AEST_OK = 0,
  AEST_BAD_REQUEST = 1,    /* invalid argument, option or request */
  AEST_NOT_FOUND = 2,      /* missing file, directory or endpoint */
  AEST_MODEL_UNLOADED = 3, /* no checkpoint loaded */
  AEST_INTERNAL = 4,       /* bug or unexpected failure */
  AEST_FORMAT = 5,         /* malformed dataset, checkpoint or config file */
  AEST_DIVERGED = 6        /* training produced non-finite losses */
} aest_status;

AEST_API const char* aest_version(void);
AEST_API const char* aest_last_error(void);
/* Stable lowercase name of a status, e.g. "bad_request". */
AEST_API const char* aest_status_name(aest_status status);
AEST_API void aest_free(char* s);

/* Builds, splits and writes a synthetic dataset. Options (all optional):
 * rated, unrated, raters, seed, resolution, inconsistent_fraction,
 * alpha_cutoff. *summary_json (may be NULL) receives counts and the rater
 * filter outcome. */
AEST_API aest_status aest_make_data(const char* out_dir, const char* options_json, char** summary_json);

/* Called once per training step with the metrics record. */
typedef void (*aest_metric_callback)(const char* record_json, void* user);

/* Trains from a train-config.json file on a dataset directory. Writes
 * metrics.jsonl, train-config.json, stages/stage-<s>/ and checkpoint/ under
 * out_dir. seed overrides the config seed when non-NULL. */
AEST_API aest_status aest_train(const char* config_path, const char* data_dir, const char* out_dir,
                                const uint64_t* seed, aest_metric_callback callback, void* user);

/* Writes the evaluation report for one or more checkpoints (one per model
 * seed; zero gives a baselines-only report). Options (all optional):
 * forest_seeds, generation, study_seed, null_seeds, max_draws. */
AEST_API aest_status aest_evaluate(const char* data_dir, const char* const* checkpoints, size_t n_checkpoints,
                                   const char* options_json, const char* report_path);

/* HTTP-shaped request handling over a loaded checkpoint. Safe to call from
 * several threads; aest_service_load swaps the model without disturbing
 * requests in flight. */
typedef struct aest_service aest_service;

AEST_API aest_status aest_service_create(aest_service** out);
AEST_API void aest_service_destroy(aest_service* service);
AEST_API aest_status aest_service_load(aest_service* service, const char* checkpoint);
/* Always fills *http_status and *response_json (a JSON document; errors carry
 * {"error": {"code", "message"}}). Returns the status matching the response. */
AEST_API aest_status aest_service_handle(aest_service* service, const char* method, const char* path,
                                         const char* body, int* http_status, char** response_json);

/* Runs a generate request and writes the design as a one-sample dataset
 * (manifest.json plus tensors, mask thresholded at 0.5) under out_dir.
 * *response_json (may be NULL) receives the embedding and rating. */
AEST_API aest_status aest_service_generate_files(aest_service* service, const char* request_json, const char* out_dir,
                                                 char** response_json);

#ifdef __cplusplus
}
#endif

#endif /* AEST_AEST_H */
