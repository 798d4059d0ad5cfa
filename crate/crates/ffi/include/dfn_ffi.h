#ifndef DFN_FFI_H
#define DFN_FFI_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every call.
 */
typedef enum DfnStatus {
  DFN_STATUS_OK = 0,
  DFN_STATUS_NULL_POINTER = 1,
  DFN_STATUS_INVALID_ARGUMENT = 2,
  DFN_STATUS_GEOMETRY = 3,
  DFN_STATUS_MESH = 4,
  DFN_STATUS_STABILIZATION = 5,
  DFN_STATUS_SINGULAR_SYSTEM = 6,
  DFN_STATUS_IO = 7,
  DFN_STATUS_PARSE = 8,
  DFN_STATUS_BUFFER_TOO_SMALL = 9,
  DFN_STATUS_PANIC = 10,
} DfnStatus;

typedef enum DfnVariant {
  DFN_VARIANT_NONE = 0,
  DFN_VARIANT_NATURAL = 1,
  DFN_VARIANT_MESH_DEPENDENT = 2,
} DfnVariant;

/*
 A fracture network with boundary data and forcing.
 */
typedef struct DfnProblem DfnProblem;

/*
 A discretized and solved problem.
 */
typedef struct DfnSolution DfnSolution;

/*
 Discretization and stabilization settings for [`dfn_solve`].
 */
typedef struct DfnSolveOptions {
  enum DfnVariant variant;
  /*
   Mesh size used on every fracture and trace.
   */
  double delta;
  /*
   Stabilization weight (ω or α).
   */
  double weight;
  double t;
  /*
   Interior node perturbation as a fraction of the grid spacing.
   */
  double jitter;
  uint64_t seed;
} DfnSolveOptions;

/*
 Sizes and quality measures of a solved problem. Errors are NaN when the
 problem carries no exact solution.
 */
typedef struct DfnSummary {
  size_t dofs_u;
  size_t dofs_lambda;
  size_t dofs_psi;
  double err_l2;
  double err_h1;
  double conservation;
} DfnSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *dfn_version(void);

/*
 Copies the last error message of the calling thread into `buf` (truncated and
 NUL-terminated) and returns the buffer size needed for the full message,
 including the terminator. Returns 0 when the last call succeeded.

 # Safety
 `buf` must be null or point to `len` writable bytes.
 */
size_t dfn_last_error(char *buf, size_t len);

/*
 Creates one of the benchmark problems: `test1`, `test2A` or `test2B`.

 # Safety
 `name` must be a NUL-terminated string; `out` must be writable.
 */
enum DfnStatus dfn_problem_builtin(const char *name, struct DfnProblem **out);

/*
 Parses a JSON network description.

 # Safety
 `json` must be a NUL-terminated string; `out` must be writable.
 */
enum DfnStatus dfn_problem_from_json(const char *json, struct DfnProblem **out);

/*
 Loads a JSON network description from a file.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum DfnStatus dfn_problem_load(const char *path, struct DfnProblem **out);

/*
 Releases a problem. Null is ignored.

 # Safety
 `problem` must come from this library and not be used afterwards.
 */
void dfn_problem_free(struct DfnProblem *problem);

/*
 # Safety
 `problem` must be null or a live handle; `out` must be writable.
 */
enum DfnStatus dfn_problem_counts(const struct DfnProblem *problem,
                                  size_t *fractures,
                                  size_t *traces);

/*
 Natural stabilization with ω = 0.1, t = 0, δ = 0.1 and unperturbed grids.
 */
struct DfnSolveOptions dfn_solve_options_default(void);

/*
 Meshes, assembles and solves `problem`.

 # Safety
 `problem` and `options` must be live; `out` must be writable.
 */
enum DfnStatus dfn_solve(const struct DfnProblem *problem,
                         const struct DfnSolveOptions *options,
                         struct DfnSolution **out);

/*
 Releases a solution. Null is ignored.

 # Safety
 `solution` must come from this library and not be used afterwards.
 */
void dfn_solution_free(struct DfnSolution *solution);

/*
 # Safety
 `solution` must be live; `out` must be writable.
 */
enum DfnStatus dfn_solution_summary(const struct DfnSolution *solution, struct DfnSummary *out);

/*
 Number of mesh nodes on fracture `fracture` (network order, by id).

 # Safety
 `solution` must be live; `out` must be writable.
 */
enum DfnStatus dfn_solution_num_nodes(const struct DfnSolution *solution,
                                      size_t fracture,
                                      size_t *out);

/*
 Copies the nodal heads of one fracture into `buf`.

 # Safety
 `solution` must be live; `buf` must hold `len` doubles.
 */
enum DfnStatus dfn_solution_heads(const struct DfnSolution *solution,
                                  size_t fracture,
                                  double *buf,
                                  size_t len);

/*
 Copies the local node coordinates of one fracture into `buf` as `x0, y0, x1, y1, ...`.

 # Safety
 `solution` must be live; `buf` must hold `len` doubles.
 */
enum DfnStatus dfn_solution_nodes(const struct DfnSolution *solution,
                                  size_t fracture,
                                  double *buf,
                                  size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DFN_FFI_H */
