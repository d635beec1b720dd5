/* C interface to the incremental-hazard estimation library. */
#ifndef IHAZ_H
#define IHAZ_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define IH_API __declspec(dllexport)
#else
#define IH_API __attribute__((visibility("default")))
#endif

typedef enum {
  IH_OK = 0,
  IH_ERR_INTERNAL = 1,
  IH_ERR_INPUT = 2,   /* malformed data */
  IH_ERR_NUMERIC = 3, /* fit failure, non-finite values, degenerate variance */
  IH_ERR_CONFIG = 4,  /* bad configuration or arguments */
  IH_ERR_NULL = 5     /* null handle or output pointer */
} ih_status;

typedef struct ih_dataset ih_dataset;
typedef struct ih_report ih_report;

/* Message of the last failure on the calling thread ("" if none). */
IH_API const char* ih_last_error(void);
IH_API const char* ih_version(void);
/* Caps worker threads; 0 restores the hardware default. */
IH_API void ih_set_threads(unsigned threads);

IH_API ih_status ih_dataset_read_csv(const char* path, double tau, ih_dataset** out);
/* l is row-major n x p and may be NULL when p == 0. */
IH_API ih_status ih_dataset_from_arrays(size_t n, size_t p, const double* y, const double* u, const int* delta,
                                        const double* l, double tau, ih_dataset** out);
IH_API size_t ih_dataset_size(const ih_dataset* data);
IH_API size_t ih_dataset_dim(const ih_dataset* data);
IH_API void ih_dataset_free(ih_dataset* data);

/* Runs a JSON run configuration ({"command": "estimate" | "band" | "simulate" |
 * "truth" | "test-null", ...}). data may be NULL, in which case commands that
 * need data read the config's "input" file. */
IH_API ih_status ih_run(const char* config_json, const ih_dataset* data, ih_report** out);
IH_API const char* ih_report_json(const ih_report* report);
IH_API const char* ih_report_csv(const ih_report* report);
IH_API const char* ih_report_summary(const ih_report* report);
IH_API void ih_report_free(ih_report* report);

/* psi(theta) of the built-in simulation design for a shift given as JSON. */
IH_API ih_status ih_true_psi(const char* shift_json, double* out);

/* Cross-fitted estimate at a constant theta. */
IH_API ih_status ih_estimate_constant(const ih_dataset* data, double theta, const char* hazard_learner,
                                      const char* outcome_learner, size_t K, unsigned long long seed,
                                      double* psi_hat, double* se);

#ifdef __cplusplus
}
#endif

#endif
