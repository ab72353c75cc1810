#ifndef EMBEXP_H
#define EMBEXP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes, aligned with the CLI exit codes.
 */
typedef enum EmbexpStatus {
  EMBEXP_STATUS_OK = 0,
  /**
   * invalid arguments at the FFI boundary (null pointer, bad UTF-8)
   */
  EMBEXP_STATUS_INVALID_ARGUMENT = 1,
  /**
   * configuration / usage error
   */
  EMBEXP_STATUS_CONFIG = 2,
  /**
   * data error (missing column, parse failure, empty input)
   */
  EMBEXP_STATUS_DATA = 3,
  /**
   * numeric failure (singularity, divergence, domain)
   */
  EMBEXP_STATUS_NUMERIC = 4,
  /**
   * blinding violation or tampered lock
   */
  EMBEXP_STATUS_BLINDING = 5,
  /**
   * a panic crossed the boundary; state may be stale
   */
  EMBEXP_STATUS_PANIC = 6,
} EmbexpStatus;

/**
 * Opaque dataset handle (covariates and treatment visible, outcomes sealed).
 */
typedef struct EmbexpDataset EmbexpDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message for this thread, or null when the last call succeeded.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *embexp_last_error(void);

/**
 * Library version as a static string; do not free.
 */
const char *embexp_version(void);

/**
 * Load a dataset CSV with the reference schema (age, fev, ht, sex, smoke),
 * or with the schema map of the given protocol config when `config_path`
 * is non-null.
 *
 * # Safety
 * `csv_path` (and `config_path` when non-null) must be NUL-terminated
 * strings; `out` must be a valid pointer.
 */
enum EmbexpStatus embexp_dataset_load(const char *csv_path,
                                      const char *config_path,
                                      struct EmbexpDataset **out);

/**
 * Number of units in the dataset.
 *
 * # Safety
 * `ds` must be a live handle from `embexp_dataset_load`.
 */
enum EmbexpStatus embexp_dataset_len(const struct EmbexpDataset *ds, uintptr_t *out);

/**
 * Covariate/treatment summary (never touches outcomes) as a JSON string.
 *
 * # Safety
 * `ds` must be a live handle; `out_json` must be a valid pointer. Free the
 * string with `embexp_string_free`.
 */
enum EmbexpStatus embexp_dataset_summarize(const struct EmbexpDataset *ds, char **out_json);

/**
 * Run a full protocol (design → balance → lock → analyses) and write the
 * report bundle into `out_dir`. `seed_override` < 0 keeps the config seed.
 *
 * # Safety
 * `config_path` and `out_dir` must be NUL-terminated strings.
 */
enum EmbexpStatus embexp_run_protocol(const char *config_path,
                                      const char *out_dir,
                                      int64_t seed_override);

/**
 * Release a dataset handle.
 *
 * # Safety
 * `ds` must be null or a handle produced by `embexp_dataset_load`, not yet
 * freed.
 */
void embexp_dataset_free(struct EmbexpDataset *ds);

/**
 * Release a string produced by this library.
 *
 * # Safety
 * `s` must be null or a string returned through an out-pointer by this
 * library, not yet freed.
 */
void embexp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EMBEXP_H */
