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

/* End-to-end client of the C interface, compiled as C. */
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <sys/stat.h>

#include "aest/aest.h"

static int failures = 0;

#define EXPECT(cond)                                                   \
  do {                                                                 \
    if (!(cond)) {                                                     \
      fprintf(stderr, "%s:%d: failed: %s (last error: %s)\n", __FILE__, \
              __LINE__, #cond, aest_last_error());                     \
      ++failures;                                                      \
    }                                                                  \
  } while (0)

static char* join(const char* a, const char* b) {
  char* out = malloc(strlen(a) + strlen(b) + 2);
  sprintf(out, "%s/%s", a, b);
  return out;
}

static int exists(const char* path) {
  struct stat st;
  return stat(path, &st) == 0;
}

static int records = 0;
static void count_records(const char* record, void* user) {
  (void)user;
  if (strstr(record, "\"step\"")) ++records;
}

int main(int argc, char** argv) {
  const char* work = argc > 1 ? argv[1] : "capi-work";
  char* data = join(work, "data");
  char* run = join(work, "run");
  char* cfg = join(work, "config.json");
  char* gen = join(work, "generated");
  char* report = join(work, "report.json");
  char* summary = NULL;
  FILE* f;

  mkdir(work, 0755);
  EXPECT(strcmp(aest_status_name(AEST_MODEL_UNLOADED), "model_unloaded") == 0);
  EXPECT(strlen(aest_version()) > 0);

  EXPECT(aest_make_data(data, "{\"rated\":20,\"unrated\":40,\"resolution\":8}", &summary) == AEST_OK);
  EXPECT(summary && strstr(summary, "\"splits\""));
  aest_free(summary);
  EXPECT(aest_make_data(data, "{\"colour\":1}", NULL) == AEST_BAD_REQUEST);
  EXPECT(strstr(aest_last_error(), "colour") != NULL);
  EXPECT(aest_make_data(data, "{not json", NULL) == AEST_BAD_REQUEST);

  f = fopen(cfg, "w");
  fputs("{\"model\":{\"embedding_dim\":4,\"ladder\":[4,8],\"base_width\":8,\"max_width\":8,"
        "\"predictor_hidden\":8},\"steps_per_stage\":[6,6],\"batch_size\":4,\"eval_every\":6}\n",
        f);
  fclose(f);
  EXPECT(aest_train(cfg, data, run, NULL, count_records, NULL) == AEST_OK);
  EXPECT(records == 12);
  EXPECT(aest_train(cfg, "/nonexistent/data", run, NULL, NULL, NULL) == AEST_NOT_FOUND);

  {
    char* ck = join(run, "checkpoint");
    const char* cks[1];
    cks[0] = ck;
    EXPECT(aest_evaluate(data, cks, 1, "{\"forest_seeds\":[0],\"generation\":false}", report) == AEST_OK);
    EXPECT(exists(report));
    free(ck);
  }

  {
    aest_service* svc = NULL;
    int http = 0;
    char* body = NULL;
    EXPECT(aest_service_create(&svc) == AEST_OK);
    EXPECT(aest_service_handle(svc, "GET", "/api/info", NULL, &http, &body) == AEST_MODEL_UNLOADED);
    EXPECT(http == 503 && body && strstr(body, "model_unloaded"));
    aest_free(body);
    EXPECT(aest_service_load(svc, "/nonexistent/ck") == AEST_NOT_FOUND);
    EXPECT(aest_service_load(svc, run) == AEST_OK);
    EXPECT(aest_service_handle(svc, "GET", "/api/info", NULL, &http, &body) == AEST_OK);
    EXPECT(http == 200 && strstr(body, "\"embedding_dim\":4"));
    aest_free(body);
    EXPECT(aest_service_handle(svc, "GET", "/api/missing", NULL, &http, &body) == AEST_NOT_FOUND);
    EXPECT(http == 404);
    aest_free(body);
    EXPECT(aest_service_generate_files(
               svc, "{\"attributes\":{\"bodytype\":\"wedge\",\"viewpoint\":\"side\",\"shade\":\"dark\"},\"seed\":3}",
               gen, &body) == AEST_OK);
    EXPECT(body && strstr(body, "generated-3"));
    aest_free(body);
    {
      char* manifest = join(gen, "manifest.json");
      EXPECT(exists(manifest));
      free(manifest);
    }
    EXPECT(aest_service_generate_files(svc, "{\"attributes\":{\"bodytype\":\"wedge\"}}", gen, NULL) ==
           AEST_BAD_REQUEST);
    aest_service_destroy(svc);
  }

  free(data);
  free(run);
  free(cfg);
  free(gen);
  free(report);
  if (failures) fprintf(stderr, "%d check(s) failed\n", failures);
  else printf("C interface checks passed\n");
  return failures ? 1 : 0;
}
