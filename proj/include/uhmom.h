#ifndef UHMOM_H
#define UHMOM_H

/*
 * C surface of the uhmom library: score tests and debiased moment
 * construction for panel and deconvolution models with nonparametric
 * unobserved heterogeneity.
 *
 * Usage: create a job, feed it configuration (a config file, key = value
 * assignments, or both; later assignments win), then run one command. A
 * successful run hands back a result holding the rendered report, its
 * individual fields, and any tabular output. Reports are deterministic:
 * identical inputs, configuration, and seed render byte-identical text.
 *
 * All functions are thread-compatible; a job or result must not be used
 * from two threads at once. Error messages are per thread.
 */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum uhm_status {
  UHM_OK = 0,
  UHM_ERR_ARGUMENT = 1, /* bad handle, unknown command, bad call */
  UHM_ERR_CONFIG = 2,   /* unknown key, invalid or missing parameter */
  UHM_ERR_PARSE = 3,    /* malformed data file */
  UHM_ERR_IO = 4,       /* missing or unreadable file */
  UHM_ERR_NUMERIC = 5,  /* a solver or estimator failed */
  UHM_ERR_INTERNAL = 6  /* anything else; indicates a bug */
} uhm_status;

typedef struct uhm_job uhm_job;
typedef struct uhm_result uhm_result;

const char* uhm_version(void);
const char* uhm_status_name(uhm_status s);

/* Message for the most recent failure on the calling thread; empty when the
 * last call succeeded. The pointer stays valid until the next API call on
 * the same thread. */
const char* uhm_error_message(void);

uhm_job* uhm_job_new(void);
void uhm_job_free(uhm_job* job);

/* One key = value assignment in the config-file vocabulary (data, target,
 * c1, psi0, zeta, folds, seed, ...). Unknown keys are rejected. */
uhm_status uhm_job_set(uhm_job* job, const char* key, const char* value);

/* Reads a key = value file; relative paths inside it resolve against the
 * file's own directory. */
uhm_status uhm_job_load_config(uhm_job* job, const char* path);

/* Commands: fit-beta, fit-ame, fit-variance, kotlarski-moments, tva-moment,
 * mc-size, mc-power. On success *out owns the result; the job is reusable.
 * When the configuration names an output path, the rendered report and one
 * .csv per table are also written there. */
uhm_status uhm_job_run(uhm_job* job, const char* command, uhm_result** out);

void uhm_result_free(uhm_result* r);

/* Full rendered report. Valid until the result is freed. */
const char* uhm_result_report(const uhm_result* r);

/* Path the report was written to, or NULL when no output path was
 * configured and nothing was written. */
const char* uhm_result_written_path(const uhm_result* r);

/* Numeric report field (booleans read as 0/1). UHM_ERR_ARGUMENT when the
 * key is absent or the field is not a number. */
uhm_status uhm_result_value(const uhm_result* r, const char* key,
                            double* out);

/* Tabular outputs (mc-size rejection rates, mc-power curves) as
 * comma-separated text with a header row. */
size_t uhm_result_table_count(const uhm_result* r);
const char* uhm_result_table_name(const uhm_result* r, size_t index);
const char* uhm_result_table_text(const uhm_result* r, const char* name);

#ifdef __cplusplus
}
#endif

#endif
