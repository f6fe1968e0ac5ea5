#ifndef SAGNAC_H
#define SAGNAC_H

#include <stddef.h>
#include <stdint.h>

typedef enum SagnacStatus {
  SAGNAC_STATUS_OK = 0,
  SAGNAC_STATUS_NULL_POINTER = 1,
  SAGNAC_STATUS_INVALID_ARGUMENT = 2,
  SAGNAC_STATUS_BUFFER_TOO_SMALL = 3,
  SAGNAC_STATUS_INVALID_LAYOUT = 4,
  SAGNAC_STATUS_GRID_ERROR = 5,
  SAGNAC_STATUS_INFEASIBLE = 6,
  SAGNAC_STATUS_FIT_FAILED = 7,
  SAGNAC_STATUS_SCENARIO_ERROR = 8,
  SAGNAC_STATUS_IO_ERROR = 9,
  SAGNAC_STATUS_INVALID_UTF8 = 10,
  SAGNAC_STATUS_INTERNAL = 11,
  SAGNAC_STATUS_PANIC = 12,
} SagnacStatus;

typedef enum SagnacFiber {
  SAGNAC_FIBER_SMF28 = 0,
  SAGNAC_FIBER_SMF28_ULL = 1,
} SagnacFiber;

typedef enum SagnacDirection {
  SAGNAC_DIRECTION_CLOCKWISE = 0,
  SAGNAC_DIRECTION_COUNTERCLOCKWISE = 1,
} SagnacDirection;

typedef enum SagnacCommand {
  SAGNAC_COMMAND_SIMULATE = 0,
  SAGNAC_COMMAND_ANALYZE_PHASE = 1,
  SAGNAC_COMMAND_FIT_OTDR = 2,
  SAGNAC_COMMAND_OPTIMIZE_BURST = 3,
  SAGNAC_COMMAND_PSD = 4,
} SagnacCommand;

// Ring under construction: segments in order plus discrete loss points.
typedef struct SagnacLayout SagnacLayout;

// A validated scenario document.
typedef struct SagnacScenario SagnacScenario;

// Result of `variance = a L^b (+ c)`. `c` and `c_sigma` are zero without an offset.
typedef struct SagnacPowerLaw {
  double a;
  double b;
  double c;
  double a_sigma;
  double b_sigma;
  double c_sigma;
  double reduced_chi2;
} SagnacPowerLaw;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *sagnac_last_error(void);

// Library version as a static NUL-terminated string.
const char *sagnac_version(void);

// Creates an empty layout.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum SagnacStatus sagnac_layout_new(struct SagnacLayout **out);

// # Safety
// `layout` must be NULL or a handle from [`sagnac_layout_new`] not yet freed.
void sagnac_layout_free(struct SagnacLayout *layout);

// Appends a segment of a standard fiber type.
//
// # Safety
// `layout` must be a live handle.
enum SagnacStatus sagnac_layout_add_fiber(struct SagnacLayout *layout,
                                          enum SagnacFiber fiber,
                                          double length_km);

// Appends a segment with explicit attenuation (dB/km) and backscatter
// coefficient (1/s).
//
// # Safety
// `layout` must be a live handle.
enum SagnacStatus sagnac_layout_add_segment(struct SagnacLayout *layout,
                                            double length_km,
                                            double alpha_db_per_km,
                                            double eta_per_s);

// Adds a discrete loss at `position_km` from the clockwise launch point.
// The position is checked against the ring length when the layout is used.
//
// # Safety
// `layout` must be a live handle.
enum SagnacStatus sagnac_layout_add_loss_point(struct SagnacLayout *layout,
                                               double position_km,
                                               double loss_db);

// # Safety
// `layout` must be a live handle and `out` writable.
enum SagnacStatus sagnac_layout_total_loss_db(const struct SagnacLayout *layout, double *out);

// One-way transit time of the ring in seconds.
//
// # Safety
// `layout` must be a live handle and `out` writable.
enum SagnacStatus sagnac_layout_transit_time_s(const struct SagnacLayout *layout, double *out);

// Samples the backscatter response (1/s per unit pulse energy) from t = 0
// to the round-trip horizon with step `dt_s`.
//
// `required` always receives the number of samples. When `capacity` is
// smaller, nothing is written to `buffer` and `BufferTooSmall` is returned;
// pass a NULL buffer with zero capacity to query the size.
//
// # Safety
// `layout` must be a live handle, `required` writable and `buffer` valid
// for `capacity` doubles.
enum SagnacStatus sagnac_layout_impulse_response(const struct SagnacLayout *layout,
                                                 enum SagnacDirection direction,
                                                 double dt_s,
                                                 double *buffer,
                                                 size_t capacity,
                                                 size_t *required);

// Fringe visibility for a Gaussian phase variance.
double sagnac_visibility_from_variance(double sigma2);

// Quantum bit error rate for a Gaussian phase variance.
double sagnac_qber_from_variance(double sigma2);

// Duty cycle that maximizes throughput for two users sharing the loop.
double sagnac_optimal_duty(void);

// Fits `variance = a L^b` (plus `c` when `with_offset` is nonzero).
// `sigmas` may be NULL for an unweighted fit.
//
// # Safety
// `lengths_km` and `variances` (and `sigmas` unless NULL) must be valid for
// `n` doubles; `out` must be writable.
enum SagnacStatus sagnac_fit_power_law(const double *lengths_km,
                                       const double *variances,
                                       const double *sigmas,
                                       size_t n,
                                       int32_t with_offset,
                                       struct SagnacPowerLaw *out);

// Loads and validates a scenario file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum SagnacStatus sagnac_scenario_load(const char *path, struct SagnacScenario **out);

// Parses and validates a scenario from JSON text.
//
// # Safety
// `json` must be a NUL-terminated string and `out` writable.
enum SagnacStatus sagnac_scenario_parse(const char *json, struct SagnacScenario **out);

// # Safety
// `scenario` must be NULL or a live scenario handle.
void sagnac_scenario_free(struct SagnacScenario *scenario);

// Runs one subcommand and writes its tables and `report.json` to `out_dir`.
// Seeds `seed .. seed + seeds` are used; `timestamps` nonzero also writes
// the raw detection streams.
//
// # Safety
// `scenario` must be a live handle and `out_dir` a NUL-terminated string.
enum SagnacStatus sagnac_scenario_run(const struct SagnacScenario *scenario,
                                      enum SagnacCommand command,
                                      const char *out_dir,
                                      uint64_t seed,
                                      size_t seeds,
                                      int32_t timestamps);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SAGNAC_H */
