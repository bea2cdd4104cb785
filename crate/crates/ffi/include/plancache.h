/* Copyright 2026 The plancache Authors */
/* SPDX-License-Identifier: Apache-2.0 */

#ifndef PLANCACHE_H
#define PLANCACHE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PcStatus {
  PC_STATUS_OK = 0,
  PC_STATUS_NULL_POINTER = 1,
  PC_STATUS_INVALID_UTF8 = 2,
  PC_STATUS_INVALID_ARGUMENT = 3,
  PC_STATUS_PARSE = 4,
  PC_STATUS_SCHEMA_MISMATCH = 5,
  PC_STATUS_PANIC = 6,
} PcStatus;

/**
 * Opaque plan cache handle.
 */
typedef struct PcCache PcCache;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `cap`). Returns the full message length.
 *
 * # Safety
 * `buf` must be valid for `cap` bytes or null.
 */
uintptr_t pc_last_error(char *buf, uintptr_t cap);

/**
 * Static name of a plan verb code, or null for an unknown code.
 */
const char *pc_plan_name(uint8_t code);

/**
 * Creates an empty cache over a schema such as `"items:4,has_container:1"`.
 *
 * # Safety
 * `schema` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PcStatus pc_cache_new(const char *schema, struct PcCache **out);

/**
 * Parses a cache from its text form.
 *
 * # Safety
 * `src` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PcStatus pc_cache_from_text(const char *src, struct PcCache **out);

/**
 * Releases a cache handle. Null is ignored.
 *
 * # Safety
 * `c` must come from this library and not be used afterwards.
 */
void pc_cache_free(struct PcCache *c);

/**
 * Number of stored transitions, or 0 for a null handle.
 *
 * # Safety
 * `c` must be a live handle or null.
 */
uintptr_t pc_cache_len(const struct PcCache *c);

/**
 * Memory footprint in bytes under the cache's size model.
 *
 * # Safety
 * `c` must be a live handle or null.
 */
uintptr_t pc_cache_size_bytes(const struct PcCache *c);

/**
 * Records one occurrence of `from -> to` at the given state.
 *
 * # Safety
 * `c` must be a live handle and `values` valid for `len` reads.
 */
enum PcStatus pc_cache_reinforce(struct PcCache *c,
                                 uint8_t from,
                                 uint8_t to,
                                 const uint32_t *values,
                                 uintptr_t len);

/**
 * Decrements a mispredicted transition.
 *
 * # Safety
 * `c` must be a live handle.
 */
enum PcStatus pc_cache_penalize(struct PcCache *c, uint8_t from, uint8_t wrong_to);

/**
 * Selects the next verb after `prev`. On a hit `*hit` is 1 and `*plan`,
 * `*score_num`, `*score_den` describe the winner; on a miss `*hit` is 0.
 *
 * # Safety
 * `c` must be a live handle, `values` valid for `len` reads, and every
 * output pointer valid.
 */
enum PcStatus pc_cache_select(struct PcCache *c,
                              uint8_t prev,
                              const uint32_t *values,
                              uintptr_t len,
                              uint8_t *hit,
                              uint8_t *plan,
                              uint64_t *score_num,
                              uint64_t *score_den);

/**
 * Serializes the cache; the result is released with [`pc_string_free`].
 *
 * # Safety
 * `c` must be a live handle and `out` a valid pointer.
 */
enum PcStatus pc_cache_to_text(const struct PcCache *c, char **out);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void pc_string_free(char *s);

/**
 * Runs one episode and returns its report as JSON.
 *
 * `strategy` is one of `sync`, `parallel`, `speculative`, `agenticcache`.
 * `cache_text` may be null; otherwise it warm-starts the agenticcache
 * strategy. When `trace_out` is non-null it receives the JSONL trace.
 *
 * # Safety
 * String arguments must be NUL-terminated (or null where allowed) and
 * output pointers valid or null where allowed.
 */
enum PcStatus pc_run_episode(const char *scenario_json,
                             const char *strategy,
                             uint64_t seed,
                             uint32_t latency_ticks,
                             double error_rate,
                             const char *cache_text,
                             char **report_out,
                             char **trace_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PLANCACHE_H */
