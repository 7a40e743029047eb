/*
 * C interface to the momentum-based policy gradient library.
 *
 * All objects are opaque handles created and destroyed through this API.
 * Functions return an mbpg_status; on failure, mbpg_last_error() holds a
 * message for the calling thread until its next failing call.
 */
#ifndef MBPG_H
#define MBPG_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(MBPG_BUILDING_LIBRARY)
#    define MBPG_API __declspec(dllexport)
#  else
#    define MBPG_API __declspec(dllimport)
#  endif
#else
#  define MBPG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mbpg_status {
  MBPG_OK = 0,
  MBPG_ERR_INVALID_ARGUMENT = 1,
  MBPG_ERR_CONFIG = 2,
  MBPG_ERR_IO = 3,
  MBPG_ERR_PARAMETER_SHAPE = 4,
  MBPG_ERR_DOMAIN = 5,
  MBPG_ERR_ENUMERATION_TOO_LARGE = 6,
  MBPG_ERR_TRAINING_ABORTED = 7,
  MBPG_ERR_INDEX = 8,
  MBPG_HELP_REQUESTED = 9,
  MBPG_ERR_INTERNAL = 99
} mbpg_status;

typedef struct mbpg_config mbpg_config;
typedef struct mbpg_suite mbpg_suite;
typedef struct mbpg_mdp mbpg_mdp;

typedef struct mbpg_row {
  int64_t iteration;
  int64_t system_probes;
  double avg_return;
  double grad_norm;
  double eta;
  double beta;
  int64_t wall_ms;
} mbpg_row;

MBPG_API const char* mbpg_version(void);
MBPG_API const char* mbpg_last_error(void);
MBPG_API const char* mbpg_status_string(mbpg_status status);
MBPG_API const char* mbpg_usage(void);

/* Configuration ---------------------------------------------------------- */

/* Parses command-line style arguments (argv[0] excluded). */
MBPG_API mbpg_status mbpg_config_parse(int argc, const char* const* argv, mbpg_config** out);
MBPG_API mbpg_status mbpg_config_from_json(const char* json_text, mbpg_config** out);
MBPG_API void mbpg_config_destroy(mbpg_config* cfg);
/* Output directory and format ("csv" or "json") resolved by the parser. */
MBPG_API const char* mbpg_config_out(const mbpg_config* cfg);
MBPG_API const char* mbpg_config_format(const mbpg_config* cfg);
MBPG_API size_t mbpg_config_num_seeds(const mbpg_config* cfg);

/* Training suites -------------------------------------------------------- */

/* Runs one training per seed. A suite with failed seeds still returns
 * MBPG_OK; inspect mbpg_suite_num_failures(). workers = 0 picks the hardware
 * concurrency. */
MBPG_API mbpg_status mbpg_suite_run(const mbpg_config* cfg, unsigned workers, mbpg_suite** out);
MBPG_API void mbpg_suite_destroy(mbpg_suite* suite);
MBPG_API size_t mbpg_suite_num_runs(const mbpg_suite* suite);
MBPG_API size_t mbpg_suite_num_failures(const mbpg_suite* suite);
MBPG_API mbpg_status mbpg_suite_run_info(const mbpg_suite* suite, size_t run, uint64_t* seed,
                                         int* failed, size_t* num_rows);
/* Error text of a failed run; empty for successful runs, NULL on bad index. */
MBPG_API const char* mbpg_suite_run_error(const mbpg_suite* suite, size_t run);
MBPG_API mbpg_status mbpg_suite_row(const mbpg_suite* suite, size_t run, size_t row, mbpg_row* out);
/* Copies up to `capacity` entries of the run's output parameters into `theta`
 * and stores the full dimension in `dim`. */
MBPG_API mbpg_status mbpg_suite_theta(const mbpg_suite* suite, size_t run, double* theta,
                                      size_t capacity, size_t* dim);
MBPG_API mbpg_status mbpg_suite_export(const mbpg_suite* suite, const char* dir, const char* format);

/* Tabular MDPs and exact oracle quantities (tabular softmax policy) ------- */

MBPG_API mbpg_status mbpg_mdp_load(const char* path, mbpg_mdp** out);
MBPG_API mbpg_status mbpg_mdp_from_json(const char* json_text, mbpg_mdp** out);
MBPG_API void mbpg_mdp_destroy(mbpg_mdp* mdp);
/* Parameter dimension num_states * num_actions of the tabular softmax policy. */
MBPG_API size_t mbpg_mdp_param_dim(const mbpg_mdp* mdp);
MBPG_API mbpg_status mbpg_mdp_exact_j(const mbpg_mdp* mdp, const double* theta, size_t dim,
                                      double* value);
MBPG_API mbpg_status mbpg_mdp_exact_grad(const mbpg_mdp* mdp, const double* theta, size_t dim,
                                         double* grad);

#ifdef __cplusplus
}
#endif

#endif /* MBPG_H */
