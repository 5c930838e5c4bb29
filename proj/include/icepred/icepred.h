/* C interface of the icepred library. All functions return an icepred_status;
 * on failure the message is available through icepred_last_error() on the
 * same thread. */
#ifndef ICEPRED_H
#define ICEPRED_H

#include <stddef.h>
#include <stdint.h>

#if defined(ICEPRED_BUILDING_LIBRARY)
#define ICEPRED_API __attribute__((visibility("default")))
#else
#define ICEPRED_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum icepred_status {
  ICEPRED_OK = 0,
  ICEPRED_ERR_INVALID_ARGUMENT = 1,
  ICEPRED_ERR_CONFIG = 2,
  ICEPRED_ERR_IO = 3,
  ICEPRED_ERR_MISSING_ARTIFACT = 4,
  ICEPRED_ERR_GEOMETRY = 5,
  ICEPRED_ERR_NUMERIC = 6,
  ICEPRED_ERR_SOLVER = 7,
  ICEPRED_ERR_NONCONVERGENCE = 8,
  ICEPRED_ERR_INTERNAL = 9
} icepred_status;

typedef struct icepred_config icepred_config;
typedef struct icepred_pipeline icepred_pipeline;

typedef void (*icepred_log_fn)(const char* line, void* user);

ICEPRED_API const char* icepred_version(void);
ICEPRED_API const char* icepred_status_name(icepred_status status);
/* Message of the last failed call on this thread; "" if none. */
ICEPRED_API const char* icepred_last_error(void);

/* Configurations. A NULL path or text yields the defaults. */
ICEPRED_API icepred_status icepred_config_default(icepred_config** out);
ICEPRED_API icepred_status icepred_config_load(const char* path, icepred_config** out);
ICEPRED_API icepred_status icepred_config_parse(const char* json_text, icepred_config** out);
ICEPRED_API void icepred_config_free(icepred_config* cfg);
ICEPRED_API icepred_status icepred_config_set_seed(icepred_config* cfg, uint64_t seed);
ICEPRED_API icepred_status icepred_config_set_threads(icepred_config* cfg, int threads);
ICEPRED_API icepred_status icepred_config_set_output_dir(icepred_config* cfg, const char* dir);
/* Writes the JSON form into buf (NUL-terminated) if it fits; *needed receives
 * the required size including the terminator. */
ICEPRED_API icepred_status icepred_config_serialize(const icepred_config* cfg, char* buf, size_t len,
                                                    size_t* needed);

/* Pipelines copy the configuration; the log callback may be NULL. */
ICEPRED_API icepred_status icepred_pipeline_create(const icepred_config* cfg, icepred_log_fn log, void* user,
                                                   icepred_pipeline** out);
ICEPRED_API void icepred_pipeline_free(icepred_pipeline* p);
/* stage: forward, synth, invert, lcurve, spectrum, sample, predict or all. */
ICEPRED_API icepred_status icepred_pipeline_run(icepred_pipeline* p, const char* stage);
/* Looks up "group.key" in record.txt of the output directory. */
ICEPRED_API icepred_status icepred_pipeline_record_value(const icepred_pipeline* p, const char* key, char* buf,
                                                         size_t len, size_t* needed);

#ifdef __cplusplus
}
#endif

#endif
