#ifndef TRADENET_H
#define TRADENET_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of a fallible call.
typedef enum TnStatus {
  TN_STATUS_OK = 0,
  TN_STATUS_NULL_POINTER = 1,
  TN_STATUS_INVALID_ARGUMENT = 2,
  TN_STATUS_PARSE_ERROR = 3,
  TN_STATUS_DATA_ERROR = 4,
  TN_STATUS_IO_ERROR = 5,
  TN_STATUS_UTF8_ERROR = 6,
  TN_STATUS_INDEX_OUT_OF_RANGE = 7,
  TN_STATUS_BUFFER_TOO_SMALL = 8,
} TnStatus;

// One sampled realization of all directed weights.
typedef struct TnGraph TnGraph;

// Fitted per-country field parameters.
typedef struct TnParams TnParams;

// One year of the trade network (weights, GDPs, totals).
typedef struct TnSnapshot TnSnapshot;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread. The pointer is
// valid until the next failing call on the same thread.
const char *tn_last_error_message(void);

// Static name of a status code.
const char *tn_status_name(enum TnStatus status);

// Parse the canonical flow and GDP CSVs and build the snapshot for `year`.
//
// # Safety
// `flows_path` and `gdp_path` must be NUL-terminated strings; `out` must be
// a valid pointer. On success `*out` owns a snapshot that must be released
// with [`tn_snapshot_free`].
enum TnStatus tn_snapshot_load(const char *flows_path,
                               const char *gdp_path,
                               int32_t year,
                               struct TnSnapshot **out);

// # Safety
// `snapshot` must come from [`tn_snapshot_load`] and not have been freed.
void tn_snapshot_free(struct TnSnapshot *snapshot);

// Number of countries, or 0 for a null handle.
//
// # Safety
// `snapshot` must be a live handle or null.
size_t tn_snapshot_node_count(const struct TnSnapshot *snapshot);

// # Safety
// `snapshot` must be a live handle or null.
int32_t tn_snapshot_year(const struct TnSnapshot *snapshot);

// Sum of all GDPs, millions of USD.
//
// # Safety
// `snapshot` must be a live handle; `out` a valid pointer.
enum TnStatus tn_snapshot_gdp_total(const struct TnSnapshot *snapshot, double *out);

// Sum of all directed weights, millions of USD.
//
// # Safety
// `snapshot` must be a live handle; `out` a valid pointer.
enum TnStatus tn_snapshot_trade_total(const struct TnSnapshot *snapshot, double *out);

// Directed weight w(i→j); absent pairs are zero.
//
// # Safety
// `snapshot` must be a live handle; `out` a valid pointer.
enum TnStatus tn_snapshot_weight(const struct TnSnapshot *snapshot,
                                 size_t i,
                                 size_t j,
                                 double *out);

// Copy the GDP vector into `buf` (length `len` >= node count).
//
// # Safety
// `snapshot` must be a live handle; `buf` must point to at least `len`
// writable doubles.
enum TnStatus tn_snapshot_gdp(const struct TnSnapshot *snapshot, double *buf, size_t len);

// Copy country code `i` into `buf` as a NUL-terminated string.
//
// # Safety
// `snapshot` must be a live handle; `buf` must point to at least `len`
// writable bytes.
enum TnStatus tn_snapshot_country(const struct TnSnapshot *snapshot,
                                  size_t i,
                                  char *buf,
                                  size_t len);

// Fit the per-country field parameters to a snapshot.
//
// # Safety
// `snapshot` must be a live handle; `out` a valid pointer. On success `*out`
// must be released with [`tn_params_free`].
enum TnStatus tn_params_fit(const struct TnSnapshot *snapshot, struct TnParams **out);

// # Safety
// `params` must come from [`tn_params_fit`] and not have been freed.
void tn_params_free(struct TnParams *params);

// Number of countries, or 0 for a null handle.
//
// # Safety
// `params` must be a live handle or null.
size_t tn_params_node_count(const struct TnParams *params);

// Copy the fitted field parameters into `buf` (length `len` >= node count).
//
// # Safety
// `params` must be a live handle; `buf` must point to at least `len`
// writable doubles.
enum TnStatus tn_params_theta(const struct TnParams *params, double *buf, size_t len);

// Expected weight of the directed link (i, j).
//
// # Safety
// `params` must be a live handle; `out` a valid pointer.
enum TnStatus tn_params_expected_weight(const struct TnParams *params,
                                        size_t i,
                                        size_t j,
                                        double *out);

// Log of the ensemble partition function.
//
// # Safety
// `params` must be a live handle; `out` a valid pointer.
enum TnStatus tn_params_log_partition(const struct TnParams *params, double *out);

// Draw one exact realization of the ensemble.
//
// # Safety
// `params` must be a live handle; `out` a valid pointer. On success `*out`
// must be released with [`tn_graph_free`].
enum TnStatus tn_sample_direct(const struct TnParams *params, uint64_t seed, struct TnGraph **out);

// Run a Metropolis chain and return its final retained sample.
//
// # Safety
// `params` must be a live handle; `out` a valid pointer. On success `*out`
// must be released with [`tn_graph_free`].
enum TnStatus tn_sample_metropolis(const struct TnParams *params,
                                   size_t sweeps,
                                   size_t burn_in,
                                   size_t thin,
                                   double step_scale,
                                   uint64_t seed,
                                   struct TnGraph **out);

// # Safety
// `graph` must come from a sampling call and not have been freed.
void tn_graph_free(struct TnGraph *graph);

// Number of nodes, or 0 for a null handle.
//
// # Safety
// `graph` must be a live handle or null.
size_t tn_graph_node_count(const struct TnGraph *graph);

// Copy the dense row-major weight matrix (n*n doubles, zero diagonal).
//
// # Safety
// `graph` must be a live handle; `buf` must point to at least `len`
// writable doubles.
enum TnStatus tn_graph_weights(const struct TnGraph *graph, double *buf, size_t len);

// Network energy of a sampled graph under the fitted parameters.
//
// # Safety
// `params` and `graph` must be live handles; `out` a valid pointer.
enum TnStatus tn_hamiltonian(const struct TnParams *params,
                             const struct TnGraph *graph,
                             double *out);

// First-order predicted relative change of a normalized link weight from the
// endpoints' relative GDP-share changes.
double tn_fr_predict(double rel_dxi_i, double rel_dxi_j);

// Both sides of the per-link fluctuation-response identity at field `eta`:
// the weight-share variance and the susceptibility, equal in closed form.
//
// # Safety
// `variance` and `susceptibility` must be valid pointers.
enum TnStatus tn_fr_identity(double eta, double *variance, double *susceptibility);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRADENET_H */
