#ifndef CADTALKER_H
#define CADTALKER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CtStatus {
  CT_STATUS_OK = 0,
  CT_STATUS_NULL_ARGUMENT = 1,
  CT_STATUS_INVALID_UTF8 = 2,
  CT_STATUS_PARSE_ERROR = 3,
  CT_STATUS_GEOMETRY_ERROR = 4,
  CT_STATUS_PROVIDER_ERROR = 5,
  CT_STATUS_PIPELINE_FAILED = 6,
  CT_STATUS_BLOCK_MISMATCH = 7,
  CT_STATUS_INVALID_ARGUMENT = 8,
  CT_STATUS_PANIC = 9,
} CtStatus;

// Parsed and block-analyzed program.
typedef struct CtProgram CtProgram;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after success.
// The pointer stays valid until the next call on the same thread.
const char *ct_last_error(void);

// Library version as a static NUL-terminated string.
const char *ct_version(void);

// # Safety
// `s` must come from this library and not have been freed.
void ct_string_free(char *s);

// Parses, expands and analyzes `source`. On success `*out` owns a new handle.
//
// # Safety
// `source` must be a NUL-terminated string; `out` must be writable.
enum CtStatus ct_program_parse(const char *source, struct CtProgram **out);

// # Safety
// `p` must come from `ct_program_parse` and not have been freed.
void ct_program_free(struct CtProgram *p);

// Number of commentable blocks, or 0 for a null handle.
//
// # Safety
// `p` must be null or a live handle.
uintptr_t ct_program_block_count(const struct CtProgram *p);

// Block forest as JSON.
//
// # Safety
// `p` must be a live handle; `out` must be writable.
enum CtStatus ct_program_blocks_json(const struct CtProgram *p, char **out);

// Whether point `(x, y, z)` lies in the program's solid.
//
// # Safety
// `p` must be a live handle; `inside` must be writable.
enum CtStatus ct_program_contains(struct CtProgram *p, double x, double y, double z, bool *inside);

// Labels the program with the ground-truth oracle provider. Labels come
// from comments already in the source. Writes the commented source and
// the run report (JSON, without timings).
//
// # Safety
// `p` must be a live handle; `category` a NUL-terminated string; both out
// pointers writable.
enum CtStatus ct_program_comment_oracle(const struct CtProgram *p,
                                        const char *category,
                                        uint64_t seed,
                                        uint32_t resolution,
                                        char **out_source,
                                        char **out_report);

// Metrics JSON comparing the comments of `pred` against those of `gt`.
//
// # Safety
// Both arguments must be live handles; `out` must be writable.
enum CtStatus ct_eval(const struct CtProgram *pred, const struct CtProgram *gt, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CADTALKER_H */
