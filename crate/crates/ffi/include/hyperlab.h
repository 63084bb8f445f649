#ifndef HYPERLAB_H
#define HYPERLAB_H

/* Generated by build.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HlContinuumKind {
  HL_CONTINUUM_KIND_POINT = 0,
  HL_CONTINUUM_KIND_ARC = 1,
  HL_CONTINUUM_KIND_FULL_CIRCLE = 2,
} HlContinuumKind;

typedef enum HlStatus {
  HL_STATUS_OK = 0,
  HL_STATUS_NULL_POINTER = 1,
  HL_STATUS_INVALID_ARGUMENT = 2,
  HL_STATUS_NUMERICAL_FAILURE = 3,
  HL_STATUS_INCONCLUSIVE = 4,
  HL_STATUS_INTERNAL = 5,
} HlStatus;

/**
 * Opaque handle to a Morse-Smale circle map.
 */
typedef struct HlCircleMap HlCircleMap;

/**
 * A subcontinuum of the circle of length one. `Point` uses `a`; `Arc` is the
 * counterclockwise sweep from `a` to `b`; `FullCircle` ignores both.
 */
typedef struct HlContinuum {
  enum HlContinuumKind kind;
  double a;
  double b;
} HlContinuum;

typedef struct HlFalsification {
  uint64_t candidates_tested;
  double worst_margin;
  bool falsified;
} HlFalsification;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. Valid until the next
 * failing call on the same thread; never null.
 */
const char *hl_last_error(void);

/**
 * Library version as a static string.
 */
const char *hl_version(void);

/**
 * Creates a map with `pairs` attractor/repeller pairs.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum HlStatus hl_circle_map_new(uint32_t pairs,
                                double amplitude,
                                bool reversing,
                                struct HlCircleMap **out);

/**
 * # Safety
 * `map` must come from [`hl_circle_map_new`] and not be freed twice. Null is
 * ignored.
 */
void hl_circle_map_free(struct HlCircleMap *map);

/**
 * # Safety
 * `map` must be a live handle and `out` valid for a write.
 */
enum HlStatus hl_circle_map_eval(const struct HlCircleMap *map, double x, double *out);

/**
 * # Safety
 * `map` must be a live handle and `out` valid for a write.
 */
enum HlStatus hl_circle_map_inverse(const struct HlCircleMap *map, double y, double *out);

/**
 * Image of a continuum under the induced map.
 *
 * # Safety
 * Pointers must be valid; `out` may alias `c`.
 */
enum HlStatus hl_continuum_image(const struct HlCircleMap *map,
                                 const struct HlContinuum *c,
                                 struct HlContinuum *out);

/**
 * Exact Hausdorff distance between two continua.
 *
 * # Safety
 * Pointers must be valid.
 */
enum HlStatus hl_hausdorff(const struct HlContinuum *a, const struct HlContinuum *b, double *out);

/**
 * Searches for a continuum orbit that epsilon-shadows the spliced
 * delta-pseudo-orbit of the induced map. Returns `Inconclusive` when some
 * candidate survives; `out` is filled in either case.
 *
 * # Safety
 * `map` must be a live handle and `out` valid for a write.
 */
enum HlStatus hl_falsify_shadowing(const struct HlCircleMap *map,
                                   double epsilon,
                                   double delta,
                                   size_t window,
                                   double grid,
                                   struct HlFalsification *out);

/**
 * Runs the experiment described by a JSON config and returns its report as
 * JSON. Inconclusive runs still produce a report and return `Inconclusive`.
 *
 * # Safety
 * `config` must be a nul-terminated string; `out` valid for a pointer write.
 * Free the result with [`hl_string_free`].
 */
enum HlStatus hl_run_config(const char *config, char **out);

/**
 * # Safety
 * `s` must come from this library and not be freed twice. Null is ignored.
 */
void hl_string_free(char *s);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* HYPERLAB_H */
