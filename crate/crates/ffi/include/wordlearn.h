#ifndef WORDLEARN_H
#define WORDLEARN_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum WlStatus {
  WL_STATUS_OK = 0,
  WL_STATUS_NULL_POINTER = 1,
  WL_STATUS_INVALID_UTF8 = 2,
  WL_STATUS_INVALID_JSON = 3,
  WL_STATUS_INVALID_ONTOLOGY = 4,
  WL_STATUS_UNKNOWN_NODE = 5,
  WL_STATUS_UNKNOWN_ENTITY = 6,
  WL_STATUS_NO_CONSISTENT_HYPOTHESIS = 7,
  WL_STATUS_INVALID_CONFIG = 8,
  WL_STATUS_NO_ACTIVE_EPISODE = 9,
  WL_STATUS_CANDIDATE_NOT_OFFERED = 10,
  WL_STATUS_SESSION_CLOSED = 11,
  WL_STATUS_STORAGE = 12,
  WL_STATUS_INTERNAL = 13,
} WlStatus;

/**
 * A loaded, validated ontology.
 */
typedef struct WlOntology WlOntology;

/**
 * A conversation with an in-memory event log and lexicon.
 */
typedef struct WlSession WlSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *wl_version(void);

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next `wl_*` call on the same thread.
 */
const char *wl_last_error_message(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must be NULL or a pointer obtained from this library that has not
 * been freed.
 */
void wl_string_free(char *s);

/**
 * Parses and validates an ontology document.
 *
 * # Safety
 * `json` must be NULL or a NUL-terminated string; `out` must be NULL or
 * writable.
 */
enum WlStatus wl_ontology_from_json(const char *json, struct WlOntology **out);

/**
 * Loads and validates an ontology file.
 *
 * # Safety
 * As for [`wl_ontology_from_json`].
 */
enum WlStatus wl_ontology_load(const char *path, struct WlOntology **out);

/**
 * Releases an ontology. Sessions created from it stay valid. NULL is
 * ignored.
 *
 * # Safety
 * `o` must be NULL or a live handle from this library.
 */
void wl_ontology_free(struct WlOntology *o);

/**
 * Number of entities under `node`.
 *
 * # Safety
 * Pointers must be NULL or valid; strings NUL-terminated.
 */
enum WlStatus wl_ontology_extension_size(const struct WlOntology *o,
                                         const char *node,
                                         uint64_t *out);

/**
 * One plus the number of siblings of `node`.
 *
 * # Safety
 * Pointers must be NULL or valid; strings NUL-terminated.
 */
enum WlStatus wl_ontology_sibling_weight(const struct WlOntology *o,
                                         const char *node,
                                         uint64_t *out);

/**
 * Whether `entity` falls under `node`.
 *
 * # Safety
 * Pointers must be NULL or valid; strings NUL-terminated.
 */
enum WlStatus wl_ontology_covers(const struct WlOntology *o,
                                 const char *node,
                                 const char *entity,
                                 bool *out);

/**
 * Posterior over all hypotheses for `word` after the observations given as
 * a JSON array of entity ids, written to `out` as a JSON report.
 *
 * # Safety
 * Pointers must be NULL or valid; strings NUL-terminated.
 */
enum WlStatus wl_posterior_json(const struct WlOntology *o,
                                const char *word,
                                const char *observations_json,
                                char **out);

/**
 * Starts a session over `o`. `config_json` may be NULL for defaults, or an
 * object with any of `k`, `strategy`, `threshold`, `seed`.
 *
 * # Safety
 * Pointers must be NULL or valid; strings NUL-terminated.
 */
enum WlStatus wl_session_new(const struct WlOntology *o,
                             const char *config_json,
                             struct WlSession **out);

/**
 * Releases a session. NULL is ignored.
 *
 * # Safety
 * `s` must be NULL or a live handle from this library.
 */
void wl_session_free(struct WlSession *s);

/**
 * Sends a user message; the bot reply is written to `out` as JSON.
 *
 * # Safety
 * Pointers must be NULL or valid; strings NUL-terminated.
 */
enum WlStatus wl_session_message(struct WlSession *s, const char *text, char **out);

/**
 * Records the user's pick of `entity` for `word`; the selection result is
 * written to `out` as JSON.
 *
 * # Safety
 * Pointers must be NULL or valid; strings NUL-terminated.
 */
enum WlStatus wl_session_select(struct WlSession *s,
                                const char *word,
                                const char *entity,
                                char **out);

/**
 * The session's event log as a JSON array.
 *
 * # Safety
 * Pointers must be NULL or valid.
 */
enum WlStatus wl_session_events_json(const struct WlSession *s, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WORDLEARN_H */
