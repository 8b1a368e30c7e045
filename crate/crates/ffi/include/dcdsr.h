#ifndef DCDSR_H
#define DCDSR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DcdsrStatus {
  DCDSR_STATUS_OK = 0,
  DCDSR_STATUS_NULL_POINTER = 1,
  DCDSR_STATUS_CONFIG = 2,
  DCDSR_STATUS_DATA = 3,
  DCDSR_STATUS_NUMERICAL = 4,
  DCDSR_STATUS_INVALID_UTF8 = 5,
  DCDSR_STATUS_OUT_OF_RANGE = 6,
  DCDSR_STATUS_PANIC = 7,
} DcdsrStatus;

/*
 Trained or loaded embeddings plus the graph they are scored over.
 */
typedef struct DcdsrModel DcdsrModel;

/*
 A loaded train/test split.
 */
typedef struct DcdsrSplit DcdsrSplit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version, static storage.
 */
const char *dcdsr_version(void);

/*
 Message of the last failed call on this thread; empty after a success.
 Valid until the next call on the same thread.
 */
const char *dcdsr_last_error(void);

/*
 Read a split directory written by `dcdsr split` or `dcdsr train`.

 # Safety
 `dir` must be a valid C string and `out` a writable pointer.
 */
enum DcdsrStatus dcdsr_split_load(const char *dir, struct DcdsrSplit **out);

/*
 Load raw edge lists and split each user's interactions by `ratio`.

 # Safety
 Both paths must be valid C strings and `out` a writable pointer.
 */
enum DcdsrStatus dcdsr_split_from_edge_lists(const char *interactions,
                                             const char *social,
                                             double ratio,
                                             uint64_t seed,
                                             struct DcdsrSplit **out);

/*
 # Safety
 `split` must come from a `dcdsr_split_*` constructor, or be null.
 */
void dcdsr_split_free(struct DcdsrSplit *split);

/*
 Number of users, or 0 for a null handle.

 # Safety
 `split` must be a live handle or null.
 */
size_t dcdsr_split_user_count(const struct DcdsrSplit *split);

/*
 Number of items, or 0 for a null handle.

 # Safety
 `split` must be a live handle or null.
 */
size_t dcdsr_split_item_count(const struct DcdsrSplit *split);

/*
 Train on `split`. `config` holds `key = value` lines in the config-file
 syntax and may be null for the defaults.

 # Safety
 `split` must be a live handle, `config` a valid C string or null, and
 `out` a writable pointer.
 */
enum DcdsrStatus dcdsr_train(const struct DcdsrSplit *split,
                             const char *config,
                             struct DcdsrModel **out);

/*
 Load `model.bin` with its sibling `model.meta` and `scoring_edges.txt`
 when present; otherwise score over the split's training edges with 2 layers.

 # Safety
 `checkpoint` must be a valid C string, `split` a live handle, and `out`
 a writable pointer.
 */
enum DcdsrStatus dcdsr_model_load(const char *checkpoint,
                                  const struct DcdsrSplit *split,
                                  struct DcdsrModel **out);

/*
 Write `model.bin`, `model.meta` and `scoring_edges.txt` into `dir`,
 which must exist.

 # Safety
 `model` must be a live handle and `dir` a valid C string.
 */
enum DcdsrStatus dcdsr_model_save(const struct DcdsrModel *model, const char *dir);

/*
 # Safety
 `model` must come from `dcdsr_train` or `dcdsr_model_load`, or be null.
 */
void dcdsr_model_free(struct DcdsrModel *model);

/*
 Embedding width, or 0 for a null handle.

 # Safety
 `model` must be a live handle or null.
 */
size_t dcdsr_model_dim(const struct DcdsrModel *model);

/*
 Propagation depth the model scores with, or 0 for a null handle.

 # Safety
 `model` must be a live handle or null.
 */
size_t dcdsr_model_layers(const struct DcdsrModel *model);

/*
 Predicted preference of internal user `user` for internal item `item`.

 # Safety
 `model` must be a live handle and `out` a writable pointer.
 */
enum DcdsrStatus dcdsr_model_score(const struct DcdsrModel *model,
                                   uint32_t user,
                                   uint32_t item,
                                   double *out);

/*
 Top-`k` internal item ids for `user`, excluding its training items.
 Writes at most `k` ids into `items` and their number into `written`.

 # Safety
 `model` and `split` must be live handles, `items` must have room for
 `k` values, and `written` must be writable.
 */
enum DcdsrStatus dcdsr_model_recommend(const struct DcdsrModel *model,
                                       const struct DcdsrSplit *split,
                                       uint32_t user,
                                       size_t k,
                                       uint32_t *items,
                                       size_t *written);

/*
 All-ranking Recall@`k` and NDCG@`k` on the split's test edges.

 # Safety
 `model` and `split` must be live handles; `recall` and `ndcg` writable.
 */
enum DcdsrStatus dcdsr_evaluate(const struct DcdsrModel *model,
                                const struct DcdsrSplit *split,
                                size_t k,
                                double *recall,
                                double *ndcg);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DCDSR_H */
