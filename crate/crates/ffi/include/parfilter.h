#ifndef PARFILTER_H
#define PARFILTER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every function.
 */
typedef enum {
  PF_STATUS_OK = 0,
  PF_STATUS_NULL_POINTER = 1,
  PF_STATUS_INVALID_PARAMETER = 2,
  /**
   * Both candidate blocks and the backing table are full.
   */
  PF_STATUS_FULL = 3,
  /**
   * The quotient filter is at its maximum load factor.
   */
  PF_STATUS_LOAD_LIMIT = 4,
  /**
   * A shift would cross the region after the canonical one.
   */
  PF_STATUS_SHIFT_BOUND = 5,
  PF_STATUS_COUNT_OVERFLOW = 6,
  PF_STATUS_INPUT = 7,
  PF_STATUS_INVARIANT = 8,
  PF_STATUS_PANIC = 9,
} PfStatus;

/**
 * Batch-API two-choice filter.
 */
typedef struct PfBulkTcf PfBulkTcf;

/**
 * Counting quotient filter.
 */
typedef struct PfGqf PfGqf;

/**
 * Point-API two-choice filter.
 */
typedef struct PfTcf PfTcf;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static, NUL-terminated description of a status code. Unknown codes
 * get a generic message.
 */
const char *pf_status_str(int32_t status);

/**
 * Creates a point TCF with `2^log_slots` main-table slots and default
 * geometry (16 slots of 16 bits per block, 1% backing table).
 *
 * # Safety
 * `out` must be valid for writes.
 */
PfStatus pf_tcf_new(uint32_t log_slots, uint64_t seed, PfTcf **out);

/**
 * # Safety
 * `h` must come from [`pf_tcf_new`] and not be used afterwards. Null is a no-op.
 */
void pf_tcf_free(PfTcf *h);

/**
 * Inserts `key` with `value`. The default layout spends all 16 slot bits
 * on the tag, so only `value == 0` is accepted.
 *
 * # Safety
 * `h` must be a live handle.
 */
PfStatus pf_tcf_insert(const PfTcf *h, uint64_t key, uint32_t value);

/**
 * Looks up `key`. `*found` tells whether it was present; `*value` is
 * written only when it was. `value` may be null.
 *
 * # Safety
 * `h` must be a live handle; `found` must be valid for writes.
 */
PfStatus pf_tcf_query(const PfTcf *h, uint64_t key, bool *found, uint32_t *value);

/**
 * Removes one matching entry; `*removed` tells whether one was found.
 *
 * # Safety
 * `h` must be a live handle; `removed` must be valid for writes.
 */
PfStatus pf_tcf_remove(const PfTcf *h, uint64_t key, bool *removed);

/**
 * # Safety
 * `h` must be a live handle; `len` must be valid for writes.
 */
PfStatus pf_tcf_len(const PfTcf *h, size_t *len);

/**
 * Creates a bulk TCF with `2^log_slots` main-table slots and default
 * geometry (128 slots of 16 bits per block, 1% backing table).
 *
 * # Safety
 * `out` must be valid for writes.
 */
PfStatus pf_bulk_tcf_new(uint32_t log_slots, uint64_t seed, PfBulkTcf **out);

/**
 * # Safety
 * `h` must come from [`pf_bulk_tcf_new`] and not be used afterwards. Null is a no-op.
 */
void pf_bulk_tcf_free(PfBulkTcf *h);

/**
 * Inserts a batch. Keys that found no room are dropped and counted in
 * `*failed` (may be null); the call then returns [`PfStatus::Full`].
 *
 * # Safety
 * `h` must be a live handle with no concurrent users; `keys` must point
 * to `n` readable values.
 */
PfStatus pf_bulk_tcf_insert(PfBulkTcf *h,
                            const uint64_t *keys_ptr,
                            size_t n,
                            size_t workers,
                            size_t *failed);

/**
 * Writes one membership answer per key into `found[0..n]`.
 *
 * # Safety
 * `h` must be a live handle; `keys` and `found` must each hold `n` values.
 */
PfStatus pf_bulk_tcf_query(const PfBulkTcf *h,
                           const uint64_t *keys_ptr,
                           size_t n,
                           size_t workers,
                           bool *found);

/**
 * Deletes one entry per key; `*deleted` counts the keys that were found.
 *
 * # Safety
 * `h` must be a live handle with no concurrent users; `keys` must point
 * to `n` readable values; `deleted` must be valid for writes.
 */
PfStatus pf_bulk_tcf_delete(PfBulkTcf *h, const uint64_t *keys_ptr, size_t n, size_t *deleted);

/**
 * # Safety
 * `h` must be a live handle; `len` must be valid for writes.
 */
PfStatus pf_bulk_tcf_len(const PfBulkTcf *h, size_t *len);

/**
 * Creates a counting quotient filter with `2^quotient_bits` slots of
 * `remainder_bits` (8, 16, 32 or 64) bits, capped at 95% load.
 *
 * # Safety
 * `out` must be valid for writes.
 */
PfStatus pf_gqf_new(uint32_t quotient_bits, uint32_t remainder_bits, uint64_t seed, PfGqf **out);

/**
 * # Safety
 * `h` must come from [`pf_gqf_new`] and not be used afterwards. Null is a no-op.
 */
void pf_gqf_free(PfGqf *h);

/**
 * Adds `delta` occurrences of `key`.
 *
 * # Safety
 * `h` must be a live handle.
 */
PfStatus pf_gqf_insert(const PfGqf *h, uint64_t key, uint64_t delta);

/**
 * # Safety
 * `h` must be a live handle; `count` must be valid for writes.
 */
PfStatus pf_gqf_count(const PfGqf *h, uint64_t key, uint64_t *count);

/**
 * Removes up to `delta` occurrences; `*found` tells whether the key was present.
 *
 * # Safety
 * `h` must be a live handle; `found` must be valid for writes.
 */
PfStatus pf_gqf_delete(const PfGqf *h, uint64_t key, uint64_t delta, bool *found);

/**
 * Inserts every key once using even/odd region phases.
 *
 * # Safety
 * `h` must be a live handle with no concurrent users; `keys` must point
 * to `n` readable values.
 */
PfStatus pf_gqf_bulk_insert(PfGqf *h, const uint64_t *keys_ptr, size_t n, size_t workers);

/**
 * Like [`pf_gqf_bulk_insert`], but collapses duplicate keys first.
 *
 * # Safety
 * As for [`pf_gqf_bulk_insert`].
 */
PfStatus pf_gqf_bulk_count(PfGqf *h, const uint64_t *keys_ptr, size_t n, size_t workers);

/**
 * Total multiplicity held.
 *
 * # Safety
 * `h` must be a live handle; `len` must be valid for writes.
 */
PfStatus pf_gqf_len(const PfGqf *h, uint64_t *len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PARFILTER_H */
