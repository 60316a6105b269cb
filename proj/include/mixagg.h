/* C interface to the aggregation-protocol simulator.
 *
 * Everything crosses this boundary as JSON text or opaque handles.  Calls
 * return MIXAGG_OK on success; on any other code mixagg_last_error() holds
 * a message describing what went wrong (thread local, valid until the next
 * call on the same thread).  Strings returned through char** are owned by
 * the caller and released with mixagg_string_free().
 */
#ifndef MIXAGG_H
#define MIXAGG_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#define MIXAGG_OK 0
#define MIXAGG_ERR_ARG 1      /* null handle or output pointer */
#define MIXAGG_ERR_CONFIG 2   /* scenario rejected */
#define MIXAGG_ERR_INTERNAL 3 /* library failure */

typedef struct mixagg_scenario mixagg_scenario;
typedef struct mixagg_result mixagg_result;

const char* mixagg_version(void);
const char* mixagg_last_error(void);
void mixagg_string_free(char* s);

/* Parse a scenario description.  NULL or "" yields the default scenario;
 * unknown keys are rejected. */
int mixagg_scenario_parse(const char* json, mixagg_scenario** out);
void mixagg_scenario_free(mixagg_scenario* s);

/* The scenario as the library understood it, defaults filled in. */
int mixagg_scenario_dump(const mixagg_scenario* s, char** json_out);

/* Cost predictions (bytes, operation counts, rounds) for the scenario's
 * coordinates, for both the protocol and the baseline scheme.  No session
 * is run. */
int mixagg_predict(const mixagg_scenario* s, char** json_out);

/* Run every rep of the scenario. */
int mixagg_run(const mixagg_scenario* s, mixagg_result** out);
void mixagg_result_free(mixagg_result* r);

/* Full report: one entry per session with status, metrics, predictions,
 * decrypted tuples, and the investigation when the session aborted. */
int mixagg_result_json(const mixagg_result* r, char** json_out);

size_t mixagg_result_sessions(const mixagg_result* r);

/* Status of session i: "completed", "restarted", or "aborted".
 * NULL when i is out of range. */
const char* mixagg_result_status(const mixagg_result* r, size_t i);

/* Evidence package for session i: parameters, public keys, every actor's
 * transcript, and the abort signal if there was one.  This is the input
 * format of mixagg_investigate. */
int mixagg_result_evidence_json(const mixagg_result* r, size_t i, char** json_out);

/* Re-run the blame procedure on an evidence package. */
int mixagg_investigate(const char* evidence_json, char** report_out);

#ifdef __cplusplus
}
#endif

#endif /* MIXAGG_H */
