#ifndef APFID_H
#define APFID_H

/* Generated from src/lib.rs by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ApfidStatus {
  APFID_STATUS_OK = 0,
  APFID_STATUS_NULL_POINTER,
  APFID_STATUS_INVALID_ARGUMENT,
  APFID_STATUS_INVALID_UTF8,
  APFID_STATUS_ALIASING,
  APFID_STATUS_SINGULAR_PLANT,
  APFID_STATUS_AMBIGUOUS_COUPLING,
  APFID_STATUS_DEGENERATE_INPUT,
  APFID_STATUS_UNCLASSIFIABLE_ASTATISM,
  APFID_STATUS_DEGENERATE_FIT,
  APFID_STATUS_UNDERDETERMINED,
  APFID_STATUS_NO_CONSISTENT_MODEL,
  APFID_STATUS_NO_COMMON_FREQUENCIES,
  APFID_STATUS_PARSE,
  APFID_STATUS_IO,
  APFID_STATUS_JSON,
  APFID_STATUS_PANIC,
} ApfidStatus;

// Outcome of identifying one channel.
typedef struct ApfidIdentification ApfidIdentification;

// A uniformly sampled record.
typedef struct ApfidSignal ApfidSignal;

// Identification settings; start from [`apfid_config_default`].
typedef struct ApfidConfig {
  // Frequency resolution in rad/s; 0 uses the record's own.
  double delta;
  // Largest relative residual of a consistent fit.
  double fit_tolerance;
  size_t max_order;
  // Upper end of the spectral scan in rad/s; 0 scans to just below the
  // sampling limit.
  double omega_max;
  // Peaks below this fraction of the spectrum maximum are ignored.
  double rel_threshold;
  // Sidelobe rejection factor on the leakage envelope of stronger peaks.
  double leakage_margin;
  bool refine;
  bool polish;
  bool joint_projection;
  // Every coefficient of the channel polynomial is negative.
  bool negative_gain;
} ApfidConfig;

typedef struct ApfidComplex {
  double re;
  double im;
} ApfidComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static string.
const char *apfid_version(void);

// Static name of a status code.
const char *apfid_status_name(enum ApfidStatus status);

// Message of the last failed call on this thread, or null after a success.
// Valid until the next library call on the same thread.
const char *apfid_last_error(void);

struct ApfidConfig apfid_config_default(void);

// Copies `len` samples taken every `dt` seconds from `t0`.
//
// # Safety
// `samples` must point to `len` readable doubles; `out` must be writable.
enum ApfidStatus apfid_signal_new(const double *samples,
                                  size_t len,
                                  double dt,
                                  double t0,
                                  struct ApfidSignal **out);

// # Safety
// `signal` must be null or a handle from [`apfid_signal_new`] not yet freed.
void apfid_signal_free(struct ApfidSignal *signal);

// Sample count; 0 for a null handle.
//
// # Safety
// `signal` must be null or a live handle.
size_t apfid_signal_len(const struct ApfidSignal *signal);

// Record resolution `2*pi / ((N - 1) * dt)`; NaN for a null handle.
//
// # Safety
// `signal` must be null or a live handle.
double apfid_signal_resolution(const struct ApfidSignal *signal);

// Full pipeline for the channel from `inputs[channel]` to `output`. A null
// `config` uses the defaults.
//
// # Safety
// `inputs` must point to `input_count` live signal handles; `output` must
// be a live handle; `config` null or readable; `out` writable.
enum ApfidStatus apfid_identify_channel(const struct ApfidSignal *const *inputs,
                                        size_t input_count,
                                        const struct ApfidSignal *output,
                                        size_t channel,
                                        const struct ApfidConfig *config,
                                        struct ApfidIdentification **out);

// Order selection alone, from Fourier coefficients of input and output at
// `count` frequencies and a known astatism degree.
//
// # Safety
// The three arrays must each hold `count` elements; `config` null or
// readable; `out` writable.
enum ApfidStatus apfid_select_order(const struct ApfidComplex *input_coefficients,
                                    const struct ApfidComplex *output_coefficients,
                                    const double *omegas,
                                    size_t count,
                                    uint8_t astatism,
                                    const struct ApfidConfig *config,
                                    struct ApfidIdentification **out);

// Astatism degree from a transfer value `W = conj(c_y / c_x)`.
//
// # Safety
// `out` must be writable.
enum ApfidStatus apfid_detect_astatism(struct ApfidComplex w, uint8_t *out);

// # Safety
// `id` must be null or a handle not yet freed.
void apfid_identification_free(struct ApfidIdentification *id);

// Selected order; 0 for a null handle.
//
// # Safety
// `id` must be null or a live handle.
size_t apfid_identification_order(const struct ApfidIdentification *id);

// Astatism degree; 0 for a null handle.
//
// # Safety
// `id` must be null or a live handle.
uint8_t apfid_identification_astatism(const struct ApfidIdentification *id);

// Coefficients `T_{p_a} ..= T_{p_a + order}`.
//
// # Safety
// `id` must be null or a live handle; `out` null or writable for
// `capacity` doubles.
size_t apfid_identification_coefficients(const struct ApfidIdentification *id,
                                         double *out,
                                         size_t capacity);

// Matched frequencies in ascending order.
//
// # Safety
// As for [`apfid_identification_coefficients`].
size_t apfid_identification_frequencies(const struct ApfidIdentification *id,
                                        double *out,
                                        size_t capacity);

// Input (`which = 0`) or output (`which = 1`) Fourier coefficients at the
// matched frequencies.
//
// # Safety
// As for [`apfid_identification_coefficients`].
size_t apfid_identification_fourier(const struct ApfidIdentification *id,
                                    uint8_t which,
                                    struct ApfidComplex *out,
                                    size_t capacity);

// Relative residual of the fit at `order`; `APFID_STATUS_INVALID_ARGUMENT`
// if that order was not attempted.
//
// # Safety
// `id` must be a live handle and `out` writable.
enum ApfidStatus apfid_identification_residual(const struct ApfidIdentification *id,
                                               size_t order,
                                               double *out);

// The identification as a JSON object.
//
// # Safety
// `id` must be a live handle; `out` writable.
enum ApfidStatus apfid_identification_to_json(const struct ApfidIdentification *id, char **out);

// Identifies every channel of a JSON run configuration against telemetry
// CSV text and returns the JSON report. `jobs` bounds concurrency; 0 means 1.
//
// # Safety
// `csv` and `config_json` must be nul-terminated strings; `report` writable.
enum ApfidStatus apfid_identify_csv(const char *csv,
                                    const char *config_json,
                                    size_t jobs,
                                    char **report);

// Simulates a rig described in JSON and returns the telemetry as CSV text.
//
// # Safety
// `spec_json` must be a nul-terminated string; `csv` writable.
enum ApfidStatus apfid_simulate_csv(const char *spec_json, char **csv);

// # Safety
// `s` must be null or a string returned by this library and not yet freed.
void apfid_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* APFID_H */
