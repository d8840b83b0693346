/* C interface to the ivy toolkit: trace-driven call simulation, offline
 * experience collection, selector training, and A/B evaluation.
 *
 * All functions returning int use the process exit-code convention:
 *   0 success, 1 internal failure, 2 invalid configuration,
 *   3 missing input, 4 numerical failure.
 * On any nonzero return, ivy_last_error() describes the failure. The
 * error buffer is thread-local; handles themselves are not synchronized
 * and must not be shared across threads without external locking.
 */
#ifndef IVY_IVY_H
#define IVY_IVY_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct ivy_config ivy_config;

/* Fresh configuration with every key at its default. Never fails. */
ivy_config* ivy_config_new(void);
void ivy_config_free(ivy_config* cfg);

/* Loads `key = value` lines with optional [section] headers. */
int ivy_config_load(ivy_config* cfg, const char* path);

/* Applies one "section.key=value" assignment. */
int ivy_config_set(ivy_config* cfg, const char* assignment);

/* Copies the current value of a key into buf (NUL terminated). Returns
 * 2 for unknown keys or a buffer too small for the value. */
int ivy_config_get(const ivy_config* cfg, const char* key, char* buf,
                   size_t buf_size);

/* Registry of known keys, for help output. Index order is stable. */
size_t ivy_config_key_count(void);
int ivy_config_key_info(size_t index, const char** name,
                        const char** def_value, const char** help);

/* Runs one command: "gen-traces", "collect", "train", "eval", "ablate",
 * or "stats". Outputs land at the paths named by the configuration and
 * are written atomically; a failed run leaves no partial files. */
int ivy_run(const ivy_config* cfg, const char* command);

/* Description of the most recent failure on this thread, or "". */
const char* ivy_last_error(void);

const char* ivy_version(void);

#ifdef __cplusplus
}
#endif

#endif /* IVY_IVY_H */
