/* Exercises the C API from plain C. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "heatlab/heatlab.h"

static int failures = 0;

#define EXPECT(cond)                                                  \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                     \
    }                                                                 \
  } while (0)

static const char* LAZY = "{\"dimension\":1,\"kind\":\"constant\",\"alpha\":0.25,\"params\":{\"lazy\":true}}";
static const char* RANDOM2 = "{\"dimension\":2,\"kind\":\"random\",\"alpha\":0.05,\"seed\":3}";

static void test_errors(void) {
  hl_env* env = NULL;
  EXPECT(hl_env_from_json("{not json", &env) == HL_ERR_INVALID_CONFIG);
  EXPECT(env == NULL);
  EXPECT(strlen(hl_last_error()) > 0);
  EXPECT(hl_env_from_json(NULL, &env) == HL_ERR_INVALID_ARGUMENT);
  EXPECT(hl_env_from_json("{\"dimension\":1,\"kind\":\"random\",\"alpha\":0.5}", &env) == HL_ERR_INVALID_CONFIG);
  EXPECT(strcmp(hl_status_name(HL_ERR_RESOURCE_LIMIT), "resource limit") == 0);
  EXPECT(strlen(hl_version()) > 0);

  char* report = NULL;
  const char* bad = "{\"dimension\":1,\"kind\":\"periodic\",\"alpha\":0.1,"
                    "\"params\":{\"period\":[1],\"table\":[[0.2,0.5,0.3]]}}";
  EXPECT(hl_env_validate(bad, &report) == HL_ERR_INVALID_CONFIG);
  EXPECT(report != NULL && strstr(report, "symmetry") != NULL);
  hl_string_free(report);
  EXPECT(hl_env_validate(LAZY, &report) == HL_OK);
  EXPECT(report != NULL && strstr(report, "\"valid\": true") != NULL);
  hl_string_free(report);
}

static void test_kernel(void) {
  hl_env* env = NULL;
  EXPECT(hl_env_from_json(LAZY, &env) == HL_OK);
  EXPECT(hl_env_dim(env) == 1);
  EXPECT(strlen(hl_last_error()) == 0);

  int64_t x[1] = {0};
  double pi[3];
  EXPECT(hl_env_pi(env, x, pi, 3) == HL_OK);
  EXPECT(pi[0] + pi[1] + pi[2] == 1.0);
  EXPECT(hl_env_pi(env, x, pi, 2) == HL_ERR_INVALID_ARGUMENT);

  hl_field* row = NULL;
  EXPECT(hl_kernel_row(env, x, 2, 0, &row) == HL_OK);
  EXPECT(fabs(hl_field_get(row, x) - 0.375) < 1e-15);
  EXPECT(fabs(hl_field_total(row) - 1.0) < 1e-15);
  EXPECT(hl_field_time(row) == 2);
  int64_t lo[1], hi[1];
  hl_field_box(row, lo, hi);
  EXPECT(hi[0] - lo[0] + 1 == (int64_t)hl_field_size(row));
  hl_field_free(row);

  row = NULL;
  EXPECT(hl_kernel_row(env, x, 100000, 1024, &row) == HL_ERR_RESOURCE_LIMIT);
  EXPECT(row == NULL);

  int64_t c[1] = {0};
  hl_field* g = NULL;
  EXPECT(hl_green_row(env, c, 9.5, x, "{\"method\":\"direct\"}", &g) == HL_OK);
  /* lazy walk on {-9..9}: expected exit time from 0 is 2 * 10^2 */
  double sum = hl_field_total(g);
  EXPECT(fabs(sum - 200.0) < 1e-9);
  hl_field_free(g);

  char* measure = NULL;
  EXPECT(hl_caloric_measure(env, "{\"ball\":{\"center\":[0],\"radius\":3.5},\"bottom\":0,\"top\":10}", x, 10,
                            &measure) == HL_OK);
  EXPECT(measure != NULL && strstr(measure, "total") != NULL);
  hl_string_free(measure);
  hl_env_free(env);
}

static void test_adjoint_verify(void) {
  hl_env* env = NULL;
  EXPECT(hl_env_from_json(RANDOM2, &env) == HL_OK);
  hl_adjoint* M = NULL;
  EXPECT(hl_adjoint_build(env, "{\"window\":8}", &M) == HL_OK);
  int64_t o[2] = {0, 0};
  double m0 = 0;
  EXPECT(hl_adjoint_at(M, o, &m0) == HL_OK);
  EXPECT(m0 == 1.0);
  int64_t far[2] = {100, 0};
  EXPECT(hl_adjoint_at(M, far, &m0) == HL_ERR_INVALID_ARGUMENT);

  hl_field* f = NULL;
  EXPECT(hl_adjoint_field(M, &f) == HL_OK);
  EXPECT(hl_field_size(f) == 17 * 17);
  char* meta = NULL;
  EXPECT(hl_adjoint_metadata(M, &meta) == HL_OK);
  hl_adjoint* M2 = NULL;
  EXPECT(hl_adjoint_from_field(env, f, meta, &M2) == HL_OK);
  hl_string_free(meta);
  hl_field_free(f);

  EXPECT(hl_estimate_needs_adjoint("doubling") == 1);
  EXPECT(hl_estimate_needs_adjoint("carleson") == 0);
  char* names = NULL;
  EXPECT(hl_estimate_names(&names) == HL_OK);
  EXPECT(strstr(names, "maximum-principle") != NULL);
  hl_string_free(names);

  char* report = NULL;
  EXPECT(hl_verify(env, NULL, "doubling", "{}", &report) == HL_ERR_INVALID_ARGUMENT);
  EXPECT(hl_verify(env, M2, "doubling", "{\"r\":[2,4]}", &report) == HL_OK);
  EXPECT(report != NULL && strstr(report, "\"passed\": true") != NULL);
  hl_string_free(report);
  report = NULL;
  /* impossible threshold: report still comes back */
  EXPECT(hl_verify(env, NULL, "mass-escape", "{\"n\":[8,16],\"min_r2\":2.0}", &report) == HL_ERR_VERIFY_FAILED);
  EXPECT(report != NULL && strstr(report, "\"passed\": false") != NULL);
  hl_string_free(report);

  hl_adjoint_free(M);
  hl_adjoint_free(M2);
  hl_env_free(env);
}

static void test_mc(void) {
  hl_env* env = NULL;
  EXPECT(hl_env_from_json(LAZY, &env) == HL_OK);
  int64_t x[1] = {0};
  char* a = NULL;
  char* b = NULL;
  EXPECT(hl_mc_kernel(env, x, 16, 20000, 5, 1, &a) == HL_OK);
  EXPECT(hl_mc_kernel(env, x, 16, 20000, 5, 3, &b) == HL_OK);
  EXPECT(a && b && strcmp(a, b) == 0);
  EXPECT(strstr(a, "tv_distance") != NULL);
  hl_string_free(a);
  hl_string_free(b);
  hl_env_free(env);
}

int main(void) {
  test_errors();
  test_kernel();
  test_adjoint_verify();
  test_mc();
  if (failures) {
    fprintf(stderr, "%d failures\n", failures);
    return 1;
  }
  printf("capi ok\n");
  return 0;
}
