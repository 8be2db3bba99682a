/* SPDX-License-Identifier: Apache-2.0 */

#ifndef TYVCD_H
#define TYVCD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  TYVCD_STATUS_OK = 0,
  TYVCD_STATUS_NULL_ARGUMENT = 1,
  TYVCD_STATUS_INVALID_UTF8 = 2,
  TYVCD_STATUS_IO = 3,
  TYVCD_STATUS_PARSE = 4,
  TYVCD_STATUS_LINK = 5,
  TYVCD_STATUS_PATH_NOT_FOUND = 6,
  /**
   * The value was produced, but the time lies past the end of the trace.
   */
  TYVCD_STATUS_TIME_BEYOND_END = 7,
  TYVCD_STATUS_INTERNAL = 8,
} TyvcdStatus;

/**
 * Opaque handle to one loaded trace and its debug information.
 */
typedef struct TyvcdSession TyvcdSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Opens a session from files.
 *
 * `debug_paths` points at `n_debug` path strings (may be null when `n_debug` is 0).
 * `top` may be null. On success `*out` receives a handle to release with
 * [`tyvcd_session_free`].
 *
 * # Safety
 * All non-null pointers must reference valid NUL-terminated strings; `out` must be writable.
 */
TyvcdStatus tyvcd_session_open(const char *vcd_path,
                               const char *const *debug_paths,
                               size_t n_debug,
                               const char *top,
                               bool allow_fallback,
                               TyvcdSession **out);

/**
 * Opens a session from in-memory VCD text and an optional debug JSON document.
 *
 * # Safety
 * All non-null pointers must reference valid NUL-terminated strings; `out` must be writable.
 */
TyvcdStatus tyvcd_session_open_text(const char *vcd_text,
                                    const char *debug_json,
                                    bool allow_fallback,
                                    TyvcdSession **out);

/**
 * Releases a session. Null is ignored.
 *
 * # Safety
 * `session` must come from an open call and not have been freed.
 */
void tyvcd_session_free(TyvcdSession *session);

/**
 * Formats the typed value of `path` at `time` into `*out`.
 *
 * Returns [`TyvcdStatus::TimeBeyondEnd`] with `*out` still set when `time`
 * lies past the end of the trace.
 *
 * # Safety
 * `session` must be a live handle, `path` a valid string, `out` writable.
 */
TyvcdStatus tyvcd_session_value(const TyvcdSession *session,
                                const char *path,
                                uint64_t time,
                                char **out);

/**
 * Writes the indented `name: label` hierarchy into `*out`.
 *
 * # Safety
 * `session` must be a live handle and `out` writable.
 */
TyvcdStatus tyvcd_session_tree(const TyvcdSession *session, char **out);

/**
 * Writes the tab-separated typed change records into `*out`.
 *
 * # Safety
 * `session` must be a live handle and `out` writable.
 */
TyvcdStatus tyvcd_session_export(const TyvcdSession *session, char **out);

/**
 * # Safety
 * `session` must be a live handle and `out` writable.
 */
TyvcdStatus tyvcd_session_end_time(const TyvcdSession *session, uint64_t *out);

/**
 * Number of diagnostics collected while loading; 0 for a null handle.
 *
 * # Safety
 * `session` must be null or a live handle.
 */
size_t tyvcd_session_diagnostic_count(const TyvcdSession *session);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void tyvcd_string_free(char *s);

/**
 * Message for the most recent failure on this thread, or null.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *tyvcd_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TYVCD_H */
