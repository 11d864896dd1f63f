#ifndef GRAPHON_INFER_H
#define GRAPHON_INFER_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GiGraphonFamily {
  /**
   * `W = p`.
   */
  GI_GRAPHON_FAMILY_CONSTANT = 0,
  /**
   * `W = gamma (x^2 + y^2) / 2 + 1 - gamma`.
   */
  GI_GRAPHON_FAMILY_QUADRATIC_SUM = 1,
  /**
   * `W = 1 - a max(x, y)`.
   */
  GI_GRAPHON_FAMILY_MAX_DECAY = 2,
} GiGraphonFamily;

typedef enum GiSolveStatus {
  GI_SOLVE_STATUS_OPTIMAL = 0,
  GI_SOLVE_STATUS_MAX_ITERS = 1,
  GI_SOLVE_STATUS_INFEASIBLE = 2,
} GiSolveStatus;

typedef enum GiStatus {
  GI_STATUS_OK = 0,
  GI_STATUS_NULL_POINTER = 1,
  GI_STATUS_INVALID_ARGUMENT = 2,
  GI_STATUS_DEGENERATE_INPUT = 3,
  GI_STATUS_INVALID_FILTER = 4,
  GI_STATUS_PARSE = 5,
  GI_STATUS_CONFIG = 6,
  GI_STATUS_DATASET = 7,
  GI_STATUS_IO = 8,
  GI_STATUS_FORMAT = 9,
  GI_STATUS_BUFFER_TOO_SMALL = 10,
  GI_STATUS_PANIC = 11,
} GiStatus;

/**
 * Opaque graph handle.
 */
typedef struct GiGraph GiGraph;

/**
 * Opaque degree-prior handle.
 */
typedef struct GiPrior GiPrior;

/**
 * Opaque solution handle.
 */
typedef struct GiSolution GiSolution;

/**
 * Opaque spectral-template handle.
 */
typedef struct GiTemplates GiTemplates;

typedef struct GiSolverConfig {
  double tolerance;
  size_t max_iters;
  double over_relaxation;
  double penalty_rho;
  bool adaptive_rho;
} GiSolverConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *gi_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gi_version(void);

struct GiSolverConfig gi_solver_config_default(void);

/**
 * Sample an `n`-node graph from a graphon.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum GiStatus gi_graph_sample(enum GiGraphonFamily family,
                              double param,
                              size_t n,
                              uint64_t seed,
                              struct GiGraph **out);

/**
 * Build a graph from an `n x n` row-major adjacency matrix.
 *
 * # Safety
 * `data` must point to `n * n` readable doubles; `out` as in [`gi_graph_sample`].
 */
enum GiStatus gi_graph_from_adjacency(const double *data, size_t n, struct GiGraph **out);

/**
 * Read an unweighted edge list.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` as in [`gi_graph_sample`].
 */
enum GiStatus gi_graph_read_edge_list(const char *path, bool one_indexed, struct GiGraph **out);

/**
 * Number of nodes, or 0 for a null handle.
 *
 * # Safety
 * `g` must be null or a live handle.
 */
size_t gi_graph_node_count(const struct GiGraph *g);

/**
 * Number of undirected edges, or 0 for a null handle.
 *
 * # Safety
 * `g` must be null or a live handle.
 */
size_t gi_graph_edge_count(const struct GiGraph *g);

/**
 * Copy the combinatorial Laplacian (row-major, `n * n` values) into `buf`.
 *
 * # Safety
 * `g` must be a live handle; `buf` must hold `len` writable doubles.
 */
enum GiStatus gi_graph_laplacian(const struct GiGraph *g, double *buf, size_t len);

/**
 * # Safety
 * `g` must be null or a handle not yet freed.
 */
void gi_graph_free(struct GiGraph *g);

/**
 * Exact Laplacian eigenvectors of `g`, ascending.
 *
 * # Safety
 * `g` must be a live handle; `out` as in [`gi_graph_sample`].
 */
enum GiStatus gi_templates_exact(const struct GiGraph *g, struct GiTemplates **out);

/**
 * Templates from the sample covariance of `m` signals diffused over `g` by
 * `steps` consensus steps with `alpha = fraction / lambda_max`.
 *
 * # Safety
 * `g` must be a live handle; `out` as in [`gi_graph_sample`].
 */
enum GiStatus gi_templates_from_signals(const struct GiGraph *g,
                                        size_t steps,
                                        double fraction,
                                        size_t m,
                                        uint64_t seed,
                                        struct GiTemplates **out);

/**
 * Templates given as the columns of an `n x n` row-major orthonormal matrix.
 *
 * # Safety
 * `data` must point to `n * n` readable doubles; `out` as in [`gi_graph_sample`].
 */
enum GiStatus gi_templates_from_matrix(const double *data, size_t n, struct GiTemplates **out);

/**
 * # Safety
 * `t` must be null or a handle not yet freed.
 */
void gi_templates_free(struct GiTemplates *t);

/**
 * Graphon degree function on a `grid`-point midpoint grid.
 *
 * # Safety
 * `out` as in [`gi_graph_sample`].
 */
enum GiStatus gi_prior_from_graphon(enum GiGraphonFamily family,
                                    double param,
                                    size_t grid,
                                    struct GiPrior **out);

/**
 * Empirical degree function of a random `n0`-node induced subgraph of `g`.
 *
 * # Safety
 * `g` must be a live handle; `out` as in [`gi_graph_sample`].
 */
enum GiStatus gi_prior_from_subgraph(const struct GiGraph *g,
                                     size_t n0,
                                     size_t grid,
                                     uint64_t seed,
                                     struct GiPrior **out);

/**
 * Prior from raw values (sorted ascending internally).
 *
 * # Safety
 * `values` must point to `len` readable doubles; `out` as in [`gi_graph_sample`].
 */
enum GiStatus gi_prior_from_values(const double *values, size_t len, struct GiPrior **out);

/**
 * # Safety
 * `p` must be null or a handle not yet freed.
 */
void gi_prior_free(struct GiPrior *p);

/**
 * Solve the recovery program. `prior` may be null (baseline with a trace
 * anchor, `beta` ignored); `config` may be null for defaults.
 *
 * # Safety
 * `templates` must be a live handle, `prior` null or live, `config` null or
 * valid; `out` as in [`gi_graph_sample`].
 */
enum GiStatus gi_solve(const struct GiTemplates *templates,
                       const struct GiPrior *prior,
                       double beta,
                       double epsilon,
                       size_t eta,
                       const struct GiSolverConfig *config,
                       struct GiSolution **out);

/**
 * # Safety
 * `s` must be null or a live handle.
 */
size_t gi_solution_node_count(const struct GiSolution *s);

/**
 * # Safety
 * `s` must be a live handle.
 */
enum GiSolveStatus gi_solution_status(const struct GiSolution *s);

/**
 * # Safety
 * `s` must be null or a live handle.
 */
double gi_solution_objective(const struct GiSolution *s);

/**
 * # Safety
 * `s` must be null or a live handle.
 */
size_t gi_solution_iterations(const struct GiSolution *s);

/**
 * Copy the inferred Laplacian (row-major) into `buf`.
 *
 * # Safety
 * `s` must be a live handle; `buf` must hold `len` writable doubles.
 */
enum GiStatus gi_solution_laplacian(const struct GiSolution *s, double *buf, size_t len);

/**
 * Copy the spectrum variable (`n` values) into `buf`.
 *
 * # Safety
 * `s` must be a live handle; `buf` must hold `len` writable doubles.
 */
enum GiStatus gi_solution_spectrum(const struct GiSolution *s, double *buf, size_t len);

/**
 * Normalized error between the solution and a reference graph's Laplacian.
 *
 * # Safety
 * `s` and `truth` must be live handles; `out` must be writable.
 */
enum GiStatus gi_solution_error(const struct GiSolution *s,
                                const struct GiGraph *truth,
                                double *out);

/**
 * # Safety
 * `s` must be null or a handle not yet freed.
 */
void gi_solution_free(struct GiSolution *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRAPHON_INFER_H */
