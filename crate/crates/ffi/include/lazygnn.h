#ifndef LAZYGNN_H
#define LAZYGNN_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LzStatus {
  LZ_STATUS_OK = 0,
  LZ_STATUS_NULL_POINTER = 1,
  LZ_STATUS_INVALID_ARGUMENT = 2,
  LZ_STATUS_SHAPE_MISMATCH = 3,
  LZ_STATUS_OUT_OF_RANGE = 4,
  LZ_STATUS_NOT_CONVERGED = 5,
  LZ_STATUS_IO = 6,
  LZ_STATUS_FORMAT = 7,
  LZ_STATUS_PANIC = 8,
  LZ_STATUS_OTHER = 9,
} LzStatus;

// Which node set to score in [`lz_model_evaluate`].
typedef enum LzMask {
  LZ_MASK_TRAIN = 0,
  LZ_MASK_VAL = 1,
  LZ_MASK_TEST = 2,
} LzMask;

// Graph, features, labels and split.
typedef struct LzDataset LzDataset;

// Normalized graph.
typedef struct LzGraph LzGraph;

// Trained parameters, history stores and per-epoch records.
typedef struct LzModel LzModel;

typedef struct LzSbmSpec {
  size_t blocks;
  size_t nodes_per_block;
  double p_in;
  double p_out;
  size_t feature_dim;
  double feature_noise_sigma;
  uint64_t seed;
  double train_frac;
  double val_frac;
} LzSbmSpec;

// Training options; `batch_size == 0` trains full-batch. The MLP has one
// hidden layer of `hidden` units, or none when `hidden == 0`.
typedef struct LzTrainConfig {
  size_t epochs;
  size_t batch_size;
  double lr;
  double weight_decay;
  double dropout;
  uint64_t seed;
  size_t hidden;
  double alpha;
  double beta;
  double gamma;
  size_t layers;
} LzTrainConfig;

// One epoch; `val_accuracy` and `redundancy` are NaN when not measured.
typedef struct LzEpochRecord {
  size_t epoch;
  uint64_t iteration;
  double train_loss;
  double val_accuracy;
  double redundancy;
  double wall_ms;
  size_t store_bytes;
} LzEpochRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *lz_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *lz_version(void);

// Builds an undirected graph from `num_edges` pairs `(src[i], dst[i])` and
// normalizes it symmetrically.
//
// # Safety
// `src` and `dst` must point to `num_edges` values; `out` must be writable.
enum LzStatus lz_graph_new(size_t num_nodes,
                           const size_t *src,
                           const size_t *dst,
                           size_t num_edges,
                           bool add_self_loops,
                           struct LzGraph **out);

// # Safety
// `g` must be NULL or a handle from [`lz_graph_new`] not yet freed.
void lz_graph_free(struct LzGraph *g);

// Node count, or 0 for NULL.
//
// # Safety
// `g` must be NULL or a live graph handle.
size_t lz_graph_num_nodes(const struct LzGraph *g);

// Stored entries including self-loops, or 0 for NULL.
//
// # Safety
// `g` must be NULL or a live graph handle.
size_t lz_graph_nnz(const struct LzGraph *g);

// `layers` steps of `X <- (1 - alpha) A X + alpha X_in` from `x0`.
//
// # Safety
// `x0`, `x_in` and `out` must hold `num_nodes * cols` doubles.
enum LzStatus lz_propagate_forward(const struct LzGraph *g,
                                   const double *x0,
                                   const double *x_in,
                                   size_t cols,
                                   double alpha,
                                   size_t layers,
                                   double *out);

// Truncated implicit gradient: `layers` backward steps from `grad`.
//
// # Safety
// `grad` and `out` must hold `num_nodes * cols` doubles.
enum LzStatus lz_propagate_backward(const struct LzGraph *g,
                                    const double *grad,
                                    size_t cols,
                                    double alpha,
                                    size_t layers,
                                    double *out);

// Forward diffusion started from `(1 - beta) history + beta x_in`.
//
// # Safety
// `history`, `x_in` and `out` must hold `num_nodes * cols` doubles.
enum LzStatus lz_lazy_forward(const struct LzGraph *g,
                              const double *history,
                              const double *x_in,
                              size_t cols,
                              double alpha,
                              double beta,
                              size_t layers,
                              double *out);

// Backward diffusion started from `(1 - gamma) history + gamma grad`.
//
// # Safety
// `history`, `grad` and `out` must hold `num_nodes * cols` doubles.
enum LzStatus lz_lazy_backward(const struct LzGraph *g,
                               const double *history,
                               const double *grad,
                               size_t cols,
                               double alpha,
                               double gamma,
                               size_t layers,
                               double *out);

// Fixed point `alpha (I - (1 - alpha) A)^{-1} x_in` to residual `tol`.
//
// # Safety
// `x_in` and `out` must hold `num_nodes * cols` doubles.
enum LzStatus lz_fixed_point(const struct LzGraph *g,
                             const double *x_in,
                             size_t cols,
                             double alpha,
                             double tol,
                             double *out);

// Exact gradient of the fixed point with respect to its input (dense solve).
//
// # Safety
// `grad` and `out` must hold `num_nodes * cols` doubles.
enum LzStatus lz_implicit_gradient(const struct LzGraph *g,
                                   const double *grad,
                                   size_t cols,
                                   double alpha,
                                   double *out);

// Fills `out` with the library defaults.
//
// # Safety
// `out` must be NULL or writable.
void lz_sbm_spec_default(struct LzSbmSpec *out);

// # Safety
// `spec` must be readable and `out` writable.
enum LzStatus lz_dataset_generate_sbm(const struct LzSbmSpec *spec, struct LzDataset **out);

// Loads `edges.tsv`, `features.lzft`/`features.csv`, `labels.csv` and the
// optional `splits.csv` from directory `dir` (UTF-8).
//
// # Safety
// `dir` must be a NUL-terminated string; `out` must be writable.
enum LzStatus lz_dataset_load_dir(const char *dir, uint64_t split_seed, struct LzDataset **out);

// # Safety
// `d` must be NULL or a live dataset handle.
void lz_dataset_free(struct LzDataset *d);

// # Safety
// `d` must be NULL or a live dataset handle.
size_t lz_dataset_num_nodes(const struct LzDataset *d);

// # Safety
// `d` must be NULL or a live dataset handle.
size_t lz_dataset_num_classes(const struct LzDataset *d);

// # Safety
// `d` must be NULL or a live dataset handle.
size_t lz_dataset_feature_dim(const struct LzDataset *d);

// Copy of the dataset's normalized graph; free it with [`lz_graph_free`].
//
// # Safety
// `d` must be a live dataset handle and `out` writable.
enum LzStatus lz_dataset_graph(const struct LzDataset *d, struct LzGraph **out);

// # Safety
// `out` must be NULL or writable.
void lz_train_config_default(struct LzTrainConfig *out);

// Trains a model on `d`.
//
// # Safety
// `d` and `cfg` must be live/readable; `out` must be writable.
enum LzStatus lz_train(const struct LzDataset *d,
                       const struct LzTrainConfig *cfg,
                       struct LzModel **out);

// # Safety
// `m` must be NULL or a live model handle.
void lz_model_free(struct LzModel *m);

// Number of epoch records, or 0 for NULL.
//
// # Safety
// `m` must be NULL or a live model handle.
size_t lz_model_num_records(const struct LzModel *m);

// # Safety
// `m` must be a live model handle and `out` writable.
enum LzStatus lz_model_record(const struct LzModel *m, size_t index, struct LzEpochRecord *out);

// Accuracy on one split: with the model's history stores (`converged ==
// false`) or at the exact fixed point (`converged == true`).
//
// # Safety
// `m` and `d` must be live handles and `out` writable.
enum LzStatus lz_model_evaluate(const struct LzModel *m,
                                const struct LzDataset *d,
                                enum LzMask mask,
                                bool converged,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LAZYGNN_H */
