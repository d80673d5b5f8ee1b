#ifndef OAKCROWD_H
#define OAKCROWD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  OAK_STATUS_OK = 0,
  OAK_STATUS_NULL_POINTER = 1,
  OAK_STATUS_INVALID_UTF8 = 2,
  // Malformed JSON or JSONL.
  OAK_STATUS_PARSE = 3,
  // Well-formed input violating a data invariant.
  OAK_STATUS_VALIDATION = 4,
  OAK_STATUS_INVALID_ARGUMENT = 5,
  // Not enough data to estimate something.
  OAK_STATUS_DEGENERATE = 6,
  // The model lacks a block the requested estimator needs.
  OAK_STATUS_MISSING_BLOCK = 7,
  // A Rust panic was caught at the boundary.
  OAK_STATUS_PANIC = 8,
  OAK_STATUS_INTERNAL = 9,
} OakStatus;

// Opaque trained model.
typedef struct OakModel OakModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parses a model from its JSON form.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a writable pointer.
OakStatus oak_model_from_json(const char *json, OakModel **out);

// Serializes a model; free the result with [`oak_string_free`].
//
// # Safety
// `model` must come from this library; `out` must be writable.
OakStatus oak_model_to_json(const OakModel *model, char **out);

// # Safety
// `model` must be null or come from this library, and not be used again.
void oak_model_free(OakModel *model);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void oak_string_free(char *s);

// Description of the last failure on the calling thread (empty after a
// success). Valid until the next call into this library on the same thread.
const char *oak_last_error_message(void);

// Trains a model from annotation and auditor records (JSONL).
// `options_json` may be null; otherwise a JSON object with any of
// `estimator`, `aggregation`, `partitioner`, `similarity`, `gamma`,
// `alpha_semi`, `lambda` and `multipoint`.
//
// # Safety
// String arguments must be NUL-terminated; `out` must be writable.
OakStatus oak_train_jsonl(const char *records_jsonl, const char *options_json, OakModel **out);

// Runs the stopping pipeline over every item in `annotations_jsonl` and
// writes one prediction per line to `out`. `thresholds[t - 1]` is the stop
// threshold after `t` labels; with `n_thresholds == 0` every label is used.
//
// # Safety
// `thresholds` must point to `n_thresholds` doubles; strings must be
// NUL-terminated; `out` must be writable.
OakStatus oak_estimate_jsonl(const OakModel *model,
                             const char *annotations_jsonl,
                             const double *thresholds_ptr,
                             size_t n_thresholds,
                             char **out);

// Estimated accuracy of `worker` when reporting `label_json` (a label
// object such as `{"kind":"cat","v":"A"}`). A null label gives the
// type-independent estimate.
//
// # Safety
// `model` must come from this library; strings must be NUL-terminated or
// null where allowed; `out` must be writable.
OakStatus oak_worker_confidence(const OakModel *model,
                                const char *worker,
                                const char *label_json,
                                double *out);

// Similarity of two labels under `similarity_json` (e.g. `{"fn":"jaccard"}`).
//
// # Safety
// Strings must be NUL-terminated; `out` must be writable.
OakStatus oak_similarity(const char *similarity_json,
                         const char *a_json,
                         const char *b_json,
                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OAKCROWD_H */
