#ifndef FIDELITY_AUDIT_H
#define FIDELITY_AUDIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FaStatus {
  FA_STATUS_OK = 0,
  FA_STATUS_NULL_POINTER = 1,
  FA_STATUS_INVALID_ARGUMENT = 2,
  FA_STATUS_IO = 3,
  FA_STATUS_PARSE = 4,
  FA_STATUS_INVALID_DATA = 5,
  FA_STATUS_DEGENERATE_METRIC = 6,
  FA_STATUS_SCHEMA_MISMATCH = 7,
  FA_STATUS_UNSUPPORTED_VERSION = 8,
  FA_STATUS_TRAINING_FAILED = 9,
  FA_STATUS_PANIC = 10,
} FaStatus;

typedef enum FaFamily {
  FA_FAMILY_LOGISTIC = 0,
  FA_FAMILY_MLP = 1,
} FaFamily;

typedef enum FaMetric {
  FA_METRIC_ACCURACY = 0,
  FA_METRIC_AUROC = 1,
  FA_METRIC_MEAN_ERROR = 2,
} FaMetric;

// Encoded dataset (encoder fit on all rows).
typedef struct FaDataset FaDataset;

typedef struct FaPredictor FaPredictor;

// Gap summary; undefined values are NaN.
typedef struct FaGaps {
  double overall;
  double max_gap;
  double mean_pairwise_gap;
} FaGaps;

typedef struct FaPreservation {
  double dp_blackbox;
  double dp_explanation;
  double lhs;
  double rhs;
  double abs_diff;
} FaPreservation;

// User decision probabilities by blackbox correctness and explanation quality.
typedef struct FaSimParams {
  double wrong_good;
  double wrong_poor;
  double right_good;
  double right_poor;
} FaSimParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *fa_last_error_message(void);

void fa_clear_error(void);

// Library version as a static NUL-terminated string.
const char *fa_version(void);

// Loads a CSV with its JSON schema and encodes it.
//
// # Safety
// Paths must be NUL-terminated strings; `out` must be writable.
enum FaStatus fa_dataset_load(const char *csv_path,
                              const char *schema_path,
                              struct FaDataset **out);

// Builds one of the bundled synthetic datasets.
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be writable.
enum FaStatus fa_dataset_synthetic(const char *name,
                                   size_t n_rows,
                                   uint64_t seed,
                                   struct FaDataset **out);

// # Safety
// `ds` must be null or a handle from this library that was not freed.
void fa_dataset_free(struct FaDataset *ds);

// # Safety
// `ds` must be a live handle; `rows` and `cols` must be writable.
enum FaStatus fa_dataset_shape(const struct FaDataset *ds, size_t *rows, size_t *cols);

// Copies the row-major encoded feature matrix (`rows * cols` values).
//
// # Safety
// `ds` must be a live handle; `out` must hold `len` doubles.
enum FaStatus fa_dataset_copy_features(const struct FaDataset *ds, double *out, size_t len);

// Copies labels and group ids (`rows` values each). Either output may be null.
//
// # Safety
// `ds` must be a live handle; non-null outputs must hold `len` values.
enum FaStatus fa_dataset_copy_targets(const struct FaDataset *ds,
                                      uint8_t *labels,
                                      uint32_t *groups,
                                      size_t len);

// Trains a blackbox on every row of `ds` with default hyperparameters
// (`l2` applies to the logistic family only).
//
// # Safety
// `ds` must be a live handle; `out` must be writable.
enum FaStatus fa_predictor_train(const struct FaDataset *ds,
                                 enum FaFamily family,
                                 double l2,
                                 uint64_t seed,
                                 struct FaPredictor **out);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum FaStatus fa_predictor_load(const char *path, struct FaPredictor **out);

// # Safety
// `p` must be a live handle; `path` a NUL-terminated string.
enum FaStatus fa_predictor_save(const struct FaPredictor *p, const char *path);

// # Safety
// `p` must be null or a handle from this library that was not freed.
void fa_predictor_free(struct FaPredictor *p);

// # Safety
// `p` must be a live handle; `out` must be writable.
enum FaStatus fa_predictor_n_features(const struct FaPredictor *p, size_t *out);

// Probabilities for a row-major `rows x cols` matrix.
//
// # Safety
// `p` must be a live handle; `x` must hold `rows * cols` doubles and
// `out` `rows` doubles.
enum FaStatus fa_predictor_predict(const struct FaPredictor *p,
                                   const double *x,
                                   size_t rows,
                                   size_t cols,
                                   double *out);

// Overall fidelity of explanation outputs against blackbox outputs.
//
// # Safety
// Both arrays must hold `n` doubles; `out` must be writable.
enum FaStatus fa_fidelity(const double *blackbox,
                          const double *explanation,
                          size_t n,
                          enum FaMetric metric,
                          double *out);

// Per-group fidelity (NaN where undefined) and gap summary.
//
// # Safety
// Arrays must hold `n` values; `per_group` must hold `n_groups` doubles
// or be null; `out` must be writable.
enum FaStatus fa_gap_report(const double *blackbox,
                            const double *explanation,
                            const uint32_t *groups,
                            size_t n,
                            size_t n_groups,
                            enum FaMetric metric,
                            double *per_group,
                            struct FaGaps *out);

// Area under the ROC curve with tie-averaged ranks.
//
// # Safety
// `scores` and `labels` must hold `n` values; `out` must be writable.
enum FaStatus fa_auroc(const double *scores, const uint8_t *labels, size_t n, double *out);

// One-sided signed-rank p-value for median > 0.
//
// # Safety
// `samples` must hold `n` doubles; `out` must be writable.
enum FaStatus fa_wilcoxon_one_sided(const double *samples, size_t n, double *out_p);

// Both sides of the parity-preservation identity for groups 0 and 1.
//
// # Safety
// Arrays must hold `n` values; `out` must be writable.
enum FaStatus fa_preservation_check(const double *blackbox,
                                    const double *explanation,
                                    const uint32_t *groups,
                                    size_t n,
                                    struct FaPreservation *out);

// Default decision probabilities used by the simulator.
struct FaSimParams fa_sim_params_default(void);

// Expected decision accuracy for blackbox accuracy `a` and fidelity `f`;
// `params` may be null for the defaults.
//
// # Safety
// `params` must be null or point to a valid struct; `out` must be writable.
enum FaStatus fa_closed_form_accuracy(double a,
                                      double f,
                                      const struct FaSimParams *params,
                                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FIDELITY_AUDIT_H */
