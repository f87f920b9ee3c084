#ifndef LEO_ACQ_H
#define LEO_ACQ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LeoAcqIndicator {
  LEO_ACQ_INDICATOR_MTSMR = 0,
  LEO_ACQ_INDICATOR_MTMR = 1,
} LeoAcqIndicator;

typedef enum LeoAcqStatus {
  LEO_ACQ_STATUS_OK = 0,
  LEO_ACQ_STATUS_NULL_POINTER = 1,
  LEO_ACQ_STATUS_INVALID_ARGUMENT = 2,
  LEO_ACQ_STATUS_UNKNOWN_PRN = 3,
  LEO_ACQ_STATUS_LENGTH_MISMATCH = 4,
  LEO_ACQ_STATUS_IO = 5,
  LEO_ACQ_STATUS_INTERNAL = 6,
} LeoAcqStatus;

typedef enum LeoAcqStrategy {
  LEO_ACQ_STRATEGY_COHERENT = 0,
  LEO_ACQ_STRATEGY_NON_COHERENT = 1,
  LEO_ACQ_STRATEGY_PRE_GUESS = 2,
  LEO_ACQ_STRATEGY_DIFFERENTIAL = 3,
  LEO_ACQ_STRATEGY_ALTERNATE_HALF_BIT = 4,
} LeoAcqStrategy;

/**
 * Spreading code handle.
 */
typedef struct LeoAcqCode LeoAcqCode;

/**
 * Correlation engine handle bound to one code, sample rate and IF.
 */
typedef struct LeoAcqCorrelator LeoAcqCorrelator;

/**
 * Synthesized signal handle.
 */
typedef struct LeoAcqSignal LeoAcqSignal;

/**
 * Synthesis parameters. `cn0` NaN gives a noiseless signal; `random_bits`
 * zero keeps every data bit at +1.
 */
typedef struct LeoAcqSynthParams {
  uint32_t prn;
  double sample_rate;
  double intermediate_freq;
  double carrier_freq;
  double amplitude;
  /**
   * Code delay in chips.
   */
  double code_phase;
  double doppler;
  double doppler_rate;
  /**
   * Milliseconds to the first data-bit boundary, in [0, 20).
   */
  double bit_phase_ms;
  double cn0;
  double duration;
  uint64_t seed;
  int32_t random_bits;
} LeoAcqSynthParams;

typedef struct LeoAcqOptions {
  enum LeoAcqStrategy strategy;
  uint32_t total_ms;
  double center;
  double half_span;
  double threshold;
  enum LeoAcqIndicator indicator;
} LeoAcqOptions;

typedef struct LeoAcqResult {
  double doppler;
  uint64_t code_phase;
  double mtsmr;
  double mtmr;
  /**
   * 1 when the chosen indicator reached the threshold.
   */
  int32_t decided;
} LeoAcqResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL, or 0
 * when there is none.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t leo_acq_last_error(char *buf, size_t len);

/**
 * Static description of a status code.
 */
const char *leo_acq_status_str(enum LeoAcqStatus status);

/**
 * # Safety
 * `out` must be valid for one pointer write.
 */
enum LeoAcqStatus leo_acq_code_new(uint32_t prn, struct LeoAcqCode **out);

/**
 * Chips per period, or 0 for a null handle.
 *
 * # Safety
 * `code` must be null or a live handle.
 */
size_t leo_acq_code_length(const struct LeoAcqCode *code);

/**
 * Copies the `+1`/`-1` chips into `buf`, which must hold the code length.
 *
 * # Safety
 * `code` must be a live handle and `buf` valid for `len` writes.
 */
enum LeoAcqStatus leo_acq_code_chips(const struct LeoAcqCode *code, int8_t *buf, size_t len);

/**
 * # Safety
 * `code` must be null or a handle from [`leo_acq_code_new`] not yet freed.
 */
void leo_acq_code_free(struct LeoAcqCode *code);

/**
 * # Safety
 * `params` must be valid to read and `out` valid for one pointer write.
 */
enum LeoAcqStatus leo_acq_synthesize(const struct LeoAcqSynthParams *params,
                                     struct LeoAcqSignal **out);

/**
 * Number of samples, or 0 for a null handle.
 *
 * # Safety
 * `signal` must be null or a live handle.
 */
size_t leo_acq_signal_len(const struct LeoAcqSignal *signal);

/**
 * Borrowed pointer to the samples, valid until the handle is freed.
 *
 * # Safety
 * `signal` must be null or a live handle.
 */
const double *leo_acq_signal_samples(const struct LeoAcqSignal *signal);

/**
 * # Safety
 * `signal` must be null or a handle from [`leo_acq_synthesize`] not yet freed.
 */
void leo_acq_signal_free(struct LeoAcqSignal *signal);

/**
 * # Safety
 * `code` must be a live handle and `out` valid for one pointer write.
 */
enum LeoAcqStatus leo_acq_correlator_new(const struct LeoAcqCode *code,
                                         double sample_rate,
                                         double intermediate_freq,
                                         struct LeoAcqCorrelator **out);

/**
 * Samples in one code period, or 0 for a null handle.
 *
 * # Safety
 * `corr` must be null or a live handle.
 */
size_t leo_acq_correlator_samples_per_code(const struct LeoAcqCorrelator *corr);

/**
 * Acquires `len` real samples, which must cover `total_ms` code periods.
 *
 * # Safety
 * `corr` must be a live handle, `samples` valid for `len` reads, `opts`
 * valid to read and `out` valid for one write.
 */
enum LeoAcqStatus leo_acq_acquire(const struct LeoAcqCorrelator *corr,
                                  const double *samples,
                                  size_t len,
                                  const struct LeoAcqOptions *opts,
                                  struct LeoAcqResult *out);

/**
 * # Safety
 * `corr` must be null or a handle from [`leo_acq_correlator_new`] not yet freed.
 */
void leo_acq_correlator_free(struct LeoAcqCorrelator *corr);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* LEO_ACQ_H */
