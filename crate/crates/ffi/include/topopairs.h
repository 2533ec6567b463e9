#ifndef TOPOPAIRS_H
#define TOPOPAIRS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. The numeric values of the error kinds match the exit
 * codes of the command-line tool where they overlap.
 */
typedef enum TpStatus {
  TP_STATUS_OK = 0,
  TP_STATUS_NULL_POINTER = 1,
  TP_STATUS_INVALID_ARGUMENT = 2,
  TP_STATUS_DATA = 3,
  TP_STATUS_NUMERIC = 4,
  TP_STATUS_IO = 5,
  TP_STATUS_PANIC = 6,
} TpStatus;

/**
 * Values accepted by the `filtration` argument of `tp_extract`.
 */
typedef enum TpFiltration {
  TP_FILTRATION_RICCI = 0,
  TP_FILTRATION_DEGREE = 1,
} TpFiltration;

/**
 * Values accepted by the `epsilon_mode` argument of `tp_mine`.
 */
typedef enum TpEpsilon {
  /**
   * Accept pairs whose distance is at most the given value.
   */
  TP_EPSILON_ABSOLUTE = 0,
  /**
   * Threshold at the given quantile of the candidate distances.
   */
  TP_EPSILON_QUANTILE = 1,
} TpEpsilon;

/**
 * Undirected graph with optional node labels.
 */
typedef struct TpGraph TpGraph;

/**
 * Mined positive pairs.
 */
typedef struct TpPairSet TpPairSet;

/**
 * One persistence image per node.
 */
typedef struct TpPiStore TpPiStore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *tp_last_error(void);

/**
 * Builds a graph on `num_nodes` nodes from `num_edges` endpoint pairs
 * `(src[i], dst[i])`. Self-loops and duplicates are ignored.
 *
 * # Safety
 * `src` and `dst` must point to `num_edges` readable values and `out` to
 * writable storage for one handle.
 */
enum TpStatus tp_graph_new(size_t num_nodes,
                           const uint64_t *src,
                           const uint64_t *dst,
                           size_t num_edges,
                           struct TpGraph **out);

/**
 * # Safety
 * `graph` must be NULL or a handle from `tp_graph_new` not yet freed.
 */
void tp_graph_free(struct TpGraph *graph);

/**
 * # Safety
 * `graph` must be a live handle.
 */
size_t tp_graph_num_nodes(const struct TpGraph *graph);

/**
 * # Safety
 * `graph` must be a live handle.
 */
size_t tp_graph_num_edges(const struct TpGraph *graph);

/**
 * Attaches one class label per node.
 *
 * # Safety
 * `graph` must be a live handle and `labels` must point to `len` values.
 */
enum TpStatus tp_graph_set_labels(struct TpGraph *graph, const uint64_t *labels, size_t len);

/**
 * Fraction of edges joining same-label nodes.
 *
 * # Safety
 * `graph` must be a live handle and `out` writable.
 */
enum TpStatus tp_graph_homophily(const struct TpGraph *graph, double *out);

/**
 * Ollivier-Ricci curvature of the edge `(u, v)` with laziness `alpha`.
 *
 * # Safety
 * `graph` must be a live handle and `out` writable.
 */
enum TpStatus tp_ricci_curvature(const struct TpGraph *graph,
                                 uint64_t u,
                                 uint64_t v,
                                 double alpha,
                                 double *out);

/**
 * Persistence images of every node's `radius`-hop ego-net. `filtration`
 * is a `TpFiltration` value; a non-positive `sigma` selects one grid cell.
 *
 * # Safety
 * `graph` must be a live handle and `out` writable.
 */
enum TpStatus tp_extract(const struct TpGraph *graph,
                         uint32_t filtration,
                         size_t radius,
                         double alpha,
                         double resolution,
                         double sigma,
                         struct TpPiStore **out);

/**
 * # Safety
 * `store` must be NULL or a live handle.
 */
void tp_pi_store_free(struct TpPiStore *store);

/**
 * # Safety
 * `store` must be a live handle.
 */
size_t tp_pi_store_num_nodes(const struct TpPiStore *store);

/**
 * # Safety
 * `store` must be a live handle.
 */
size_t tp_pi_store_vec_len(const struct TpPiStore *store);

/**
 * Copies the image of `node` into `buf`, which must hold `vec_len` floats.
 *
 * # Safety
 * `store` must be a live handle and `buf` must point to `len` writable floats.
 */
enum TpStatus tp_pi_store_row(const struct TpPiStore *store, size_t node, float *buf, size_t len);

/**
 * Euclidean distance between the images of `u` and `v`.
 *
 * # Safety
 * `store` must be a live handle and `out` writable.
 */
enum TpStatus tp_pi_store_distance(const struct TpPiStore *store, size_t u, size_t v, double *out);

/**
 * # Safety
 * `store` must be a live handle and `path` a NUL-terminated string.
 */
enum TpStatus tp_pi_store_write(const struct TpPiStore *store, const char *path);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum TpStatus tp_pi_store_read(const char *path, struct TpPiStore **out);

/**
 * Pairs at least `delta` hops apart whose image distance passes the
 * threshold, with at most `max_pairs_per_node` pairs per node.
 * `epsilon_mode` is a `TpEpsilon` value. Candidates are all node pairs.
 *
 * # Safety
 * `graph` and `store` must be live handles and `out` writable.
 */
enum TpStatus tp_mine(const struct TpGraph *graph,
                      const struct TpPiStore *store,
                      size_t delta,
                      uint32_t epsilon_mode,
                      double epsilon,
                      size_t max_pairs_per_node,
                      struct TpPairSet **out);

/**
 * # Safety
 * `pairs` must be NULL or a live handle.
 */
void tp_pair_set_free(struct TpPairSet *pairs);

/**
 * # Safety
 * `pairs` must be a live handle.
 */
size_t tp_pair_set_len(const struct TpPairSet *pairs);

/**
 * Distance threshold the set was mined with.
 *
 * # Safety
 * `pairs` must be a live handle.
 */
double tp_pair_set_epsilon(const struct TpPairSet *pairs);

/**
 * Pair `index` in `(u, v)` order, with `u < v`.
 *
 * # Safety
 * `pairs` must be a live handle; `u`, `v` and `distance` must be writable.
 */
enum TpStatus tp_pair_set_get(const struct TpPairSet *pairs,
                              size_t index,
                              uint64_t *u,
                              uint64_t *v,
                              double *distance);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TOPOPAIRS_H */
