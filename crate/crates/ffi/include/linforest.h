#ifndef LINFOREST_H
#define LINFOREST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum LfStatus {
  LF_STATUS_OK = 0,
  LF_STATUS_NULL_POINTER = 1,
  LF_STATUS_INVALID_ARGUMENT = 2,
  LF_STATUS_IO = 3,
  LF_STATUS_PARSE = 4,
  LF_STATUS_CONFIG = 5,
  LF_STATUS_SCHEMA = 6,
  LF_STATUS_MODEL = 7,
  LF_STATUS_PANIC = 8,
} LfStatus;

// Opaque dataset handle.
typedef struct LfDataset LfDataset;

// Opaque forest handle.
typedef struct LfForest LfForest;

// Forest hyperparameters. Fill with `lf_params_default` and adjust.
typedef struct LfParams {
  size_t ntree;
  // Candidate features per node; 0 picks max(1, d/3).
  size_t mtry;
  double lambda;
  double min_split_gain;
  size_t folds;
  size_t nodesize_spl;
  double sample_fraction;
  double splitratio;
  bool honest;
  uint64_t seed;
  // Worker threads for training; 0 uses all cores.
  size_t threads;
} LfParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or "" after a success.
// The pointer stays valid until the next call into this library on the same thread.
const char *lf_last_error(void);

// Library version as a static NUL-terminated string.
const char *lf_version(void);

// Writes the library defaults into `*out`.
//
// # Safety
// `out` must be null or point to writable memory for one `LfParams`.
enum LfStatus lf_params_default(struct LfParams *out);

// Loads a CSV with a header row. `categorical` is a comma-separated list of
// column names to read as categorical, or null for none.
//
// # Safety
// String arguments must be null or NUL-terminated; `out` must be writable.
enum LfStatus lf_dataset_load_csv(const char *path,
                                  const char *target,
                                  const char *categorical,
                                  struct LfDataset **out);

// Builds a numeric dataset from a row-major `n_rows` x `n_features` matrix.
// Columns are named X1..Xd and the response y.
//
// # Safety
// `x` must hold `n_rows * n_features` doubles and `y` `n_rows` doubles.
enum LfStatus lf_dataset_from_matrix(const double *x,
                                     size_t n_rows,
                                     size_t n_features,
                                     const double *y,
                                     struct LfDataset **out);

// # Safety
// `ds` must be a live dataset handle; `out` must be writable.
enum LfStatus lf_dataset_n_rows(const struct LfDataset *ds, size_t *out);

// # Safety
// `ds` must be a live dataset handle; `out` must be writable.
enum LfStatus lf_dataset_n_features(const struct LfDataset *ds, size_t *out);

// Releases a dataset. Null is ignored.
//
// # Safety
// `ds` must be null or a handle not yet freed.
void lf_dataset_free(struct LfDataset *ds);

// Trains a forest on every column of `ds` except the response.
//
// # Safety
// `ds` and `params` must be valid; `out` must be writable.
enum LfStatus lf_forest_train(const struct LfDataset *ds,
                              const struct LfParams *params,
                              struct LfForest **out);

// # Safety
// `path` must be NUL-terminated; `out` must be writable.
enum LfStatus lf_forest_load(const char *path, struct LfForest **out);

// # Safety
// `forest` must be a live handle; `path` must be NUL-terminated.
enum LfStatus lf_forest_save(const struct LfForest *forest, const char *path);

// # Safety
// `forest` must be a live handle; `out` must be writable.
enum LfStatus lf_forest_n_trees(const struct LfForest *forest, size_t *out);

// Number of feature columns a row passed to `lf_forest_predict_rows` must have.
//
// # Safety
// `forest` must be a live handle; `out` must be writable.
enum LfStatus lf_forest_n_features(const struct LfForest *forest, size_t *out);

// Predicts every row of `ds`, matching columns by name. `out` must have room
// for `out_len` doubles and `out_len` must equal the number of rows.
//
// # Safety
// Handles must be live; `out` must hold `out_len` doubles.
enum LfStatus lf_forest_predict(const struct LfForest *forest,
                                const struct LfDataset *ds,
                                double *out,
                                size_t out_len);

// Predicts a row-major block of already encoded rows (training column order;
// categorical cells hold the training level index, or -1 for an unseen level).
//
// # Safety
// `x` must hold `n_rows * n_features` doubles and `out` `n_rows` doubles.
enum LfStatus lf_forest_predict_rows(const struct LfForest *forest,
                                     const double *x,
                                     size_t n_rows,
                                     size_t n_features,
                                     double *out);

// Renders tree `tree` as Graphviz DOT. Release the string with `lf_string_free`.
//
// # Safety
// `forest` must be a live handle; `out` must be writable.
enum LfStatus lf_forest_export_dot(const struct LfForest *forest, size_t tree, char **out);

// Releases a forest. Null is ignored.
//
// # Safety
// `forest` must be null or a handle not yet freed.
void lf_forest_free(struct LfForest *forest);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a string from this library not yet freed.
void lf_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LINFOREST_H */
