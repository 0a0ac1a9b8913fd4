#ifndef CROWDSENSE_H
#define CROWDSENSE_H

/* Generated by cbindgen. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Status code returned by every fallible function.
 */
typedef enum CsStatus {
  CS_STATUS_OK = 0,
  CS_STATUS_NULL_POINTER = 1,
  CS_STATUS_INVALID_UTF8 = 2,
  CS_STATUS_INVALID_INSTANCE = 3,
  CS_STATUS_INVALID_ARGUMENT = 4,
  CS_STATUS_BUFFER_TOO_SMALL = 5,
  CS_STATUS_PANIC = 6,
} CsStatus;

/**
 * Opaque auction instance.
 */
typedef struct CsInstance CsInstance;

/**
 * Opaque auction result.
 */
typedef struct CsOutcome CsOutcome;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *cs_last_error(void);

/**
 * Parses an instance from NUL-terminated JSON.
 *
 * # Safety
 * `json` must be NULL or a valid NUL-terminated string; `out` must be NULL
 * or valid for a pointer write.
 */
enum CsStatus cs_instance_from_json(const char *json, struct CsInstance **out);

/**
 * # Safety
 * `instance` must be NULL or a handle from [`cs_instance_from_json`] that
 * has not been freed.
 */
void cs_instance_free(struct CsInstance *instance);

/**
 * Number of users; 0 for NULL.
 *
 * # Safety
 * `instance` must be NULL or a live handle.
 */
size_t cs_instance_user_count(const struct CsInstance *instance);

/**
 * Number of tasks; 0 for NULL.
 *
 * # Safety
 * `instance` must be NULL or a live handle.
 */
size_t cs_instance_task_count(const struct CsInstance *instance);

/**
 * Runs SMART.
 *
 * # Safety
 * `instance` must be NULL or a live handle; `out` NULL or writable.
 */
enum CsStatus cs_run_smart(const struct CsInstance *instance, struct CsOutcome **out);

/**
 * Runs M-Sensing.
 *
 * # Safety
 * `instance` must be NULL or a live handle; `out` NULL or writable.
 */
enum CsStatus cs_run_msensing(const struct CsInstance *instance, struct CsOutcome **out);

/**
 * Runs ONLINE-SMART with an explicit arrival order: `order_len` user ids
 * forming a permutation of 1..=n.
 *
 * # Safety
 * `order` must point to `order_len` readable ids (may be NULL when
 * `order_len` is 0); `instance` and `out` as for [`cs_run_smart`].
 */
enum CsStatus cs_run_online(const struct CsInstance *instance,
                            const uint32_t *order,
                            size_t order_len,
                            double observe_fraction,
                            struct CsOutcome **out);

/**
 * # Safety
 * `outcome` must be NULL or a live outcome handle.
 */
void cs_outcome_free(struct CsOutcome *outcome);

/**
 * Platform utility; 0 for NULL.
 *
 * # Safety
 * `outcome` must be NULL or a live handle.
 */
int64_t cs_outcome_utility(const struct CsOutcome *outcome);

/**
 * Number of winners; 0 for NULL.
 *
 * # Safety
 * `outcome` must be NULL or a live handle.
 */
size_t cs_outcome_winner_count(const struct CsOutcome *outcome);

/**
 * Copies winner ids (ascending) and their payments into caller buffers of
 * length `capacity`. `payments` may be NULL. Fails with
 * `CS_STATUS_BUFFER_TOO_SMALL` when `capacity` is below the winner count.
 *
 * # Safety
 * `ids` (and `payments` if not NULL) must be writable for `capacity`
 * elements.
 */
enum CsStatus cs_outcome_winners(const struct CsOutcome *outcome,
                                 uint32_t *ids,
                                 int64_t *payments,
                                 size_t capacity);

/**
 * Payment made to `user`; 0 when it is not a winner.
 *
 * # Safety
 * `outcome` must be NULL or a live handle.
 */
int64_t cs_outcome_payment(const struct CsOutcome *outcome, uint32_t user);

/**
 * Serializes an outcome as JSON. Free the string with [`cs_string_free`].
 *
 * # Safety
 * `outcome` must be NULL or a live handle; `out` NULL or writable.
 */
enum CsStatus cs_outcome_to_json(const struct CsOutcome *outcome, char **out);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void cs_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CROWDSENSE_H */
