#ifndef HEATLAB_H
#define HEATLAB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define HL_API __attribute__((visibility("default")))
#else
#define HL_API
#endif

typedef enum hl_status {
  HL_OK = 0,
  HL_ERR_INVALID_ARGUMENT = 1,
  HL_ERR_INVALID_CONFIG = 2,
  HL_ERR_RESOURCE_LIMIT = 3,
  HL_ERR_NON_CONVERGENCE = 4,
  HL_ERR_IO = 5,
  HL_ERR_NUMERIC = 6,
  HL_ERR_VERIFY_FAILED = 7, /* report produced, some verdict false */
  HL_ERR_INTERNAL = 8
} hl_status;

typedef struct hl_env hl_env;
typedef struct hl_field hl_field;
typedef struct hl_adjoint hl_adjoint;

/* Strings returned through char** are owned by the caller. */
HL_API void hl_string_free(char* s);
/* Message of the last failing call on this thread; "" after success. */
HL_API const char* hl_last_error(void);
HL_API const char* hl_version(void);
HL_API const char* hl_status_name(hl_status status);

/* Environments. Points are arrays of `dim` int64 coordinates. */
HL_API hl_status hl_env_from_json(const char* spec_json, hl_env** out);
HL_API hl_status hl_env_load(const char* path, hl_env** out);
HL_API void hl_env_free(hl_env* env);
HL_API int hl_env_dim(const hl_env* env);
HL_API hl_status hl_env_hash(const hl_env* env, char** out);
HL_API hl_status hl_env_spec(const hl_env* env, char** out_json);
HL_API hl_status hl_env_pi(const hl_env* env, const int64_t* x, double* out, size_t width);
/* Report {env_hash, valid, violations}; HL_ERR_INVALID_CONFIG when invalid. */
HL_API hl_status hl_env_validate(const char* spec_json, char** out_json);
/* Spec of kind "tabulated" covering [lo, hi], extension "periodic" or "constant". */
HL_API hl_status hl_env_tabulate(const hl_env* env, const int64_t* lo, const int64_t* hi, const char* extension,
                                 char** out_json);

/* Fields on a box. */
HL_API void hl_field_free(hl_field* f);
HL_API int hl_field_dim(const hl_field* f);
HL_API void hl_field_box(const hl_field* f, int64_t* lo, int64_t* hi);
HL_API size_t hl_field_size(const hl_field* f);
HL_API const double* hl_field_values(const hl_field* f);
HL_API double hl_field_get(const hl_field* f, const int64_t* x);
HL_API int64_t hl_field_time(const hl_field* f);
/* Compensated sum of all values. */
HL_API double hl_field_total(const hl_field* f);
/* ".bin" selects the binary layout, anything else CSV. */
HL_API hl_status hl_field_write(const hl_field* f, const char* path);
HL_API hl_status hl_field_read(const char* path, int dim, hl_field** out);

/* p_n(x, .). budget_bytes = 0 uses the default budget. */
HL_API hl_status hl_kernel_row(const hl_env* env, const int64_t* x, long n, size_t budget_bytes, hl_field** out);
/* h_t(x, .) for the walk killed on leaving B_radius(center). */
HL_API hl_status hl_killed_kernel(const hl_env* env, const int64_t* center, double radius, const int64_t* x, long t,
                                  hl_field** out);
/* G(x, .) on B_radius(center). options_json keys: method ("auto", "direct",
   "series"), tol. May be NULL. */
HL_API hl_status hl_green_row(const hl_env* env, const int64_t* center, double radius, const int64_t* x,
                              const char* options_json, hl_field** out);
/* Exit distribution from (x, t). cylinder_json: {"ball": {"center", "radius"}}
   or {"box": {"lo", "hi"}}, plus "bottom" and "top". */
HL_API hl_status hl_caloric_measure(const hl_env* env, const char* cylinder_json, const int64_t* x, long t,
                                    char** out_json);

/* Global adjoint solution. options_json keys: window, tol, l_max,
   extrapolate, center. May be NULL. */
HL_API hl_status hl_adjoint_build(const hl_env* env, const char* options_json, hl_adjoint** out);
HL_API hl_status hl_adjoint_from_field(const hl_env* env, const hl_field* values, const char* metadata_json,
                                       hl_adjoint** out);
HL_API void hl_adjoint_free(hl_adjoint* a);
HL_API hl_status hl_adjoint_metadata(const hl_adjoint* a, char** out_json);
HL_API hl_status hl_adjoint_field(const hl_adjoint* a, hl_field** out);
HL_API hl_status hl_adjoint_at(const hl_adjoint* a, const int64_t* x, double* out);

/* Empirical checks. `adjoint` may be NULL for estimates that do not need
   it. The report is written even when HL_ERR_VERIFY_FAILED is returned. */
HL_API hl_status hl_estimate_names(char** out_json);
HL_API int hl_estimate_needs_adjoint(const char* estimate);
HL_API hl_status hl_verify(const hl_env* env, const hl_adjoint* adjoint, const char* estimate, const char* grid_json,
                           char** out_report_json);

/* Monte Carlo. Results are JSON with the histogram and a comparison against
   the exact kernel or caloric measure. */
HL_API hl_status hl_mc_kernel(const hl_env* env, const int64_t* x, long n, uint64_t paths, uint64_t seed,
                              unsigned jobs, char** out_json);
HL_API hl_status hl_mc_exit(const hl_env* env, const char* cylinder_json, const int64_t* x, long t, uint64_t paths,
                            uint64_t seed, unsigned jobs, char** out_json);

#ifdef __cplusplus
}
#endif

#endif
