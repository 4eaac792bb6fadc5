/* C interface to the advpref training engine. All functions returning int
 * return an advpref_status; on failure advpref_last_error() describes the
 * problem (thread-local, valid until the next call on the same thread). */
#ifndef ADVPREF_H
#define ADVPREF_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ADVPREF_API __declspec(dllexport)
#else
#define ADVPREF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values match the command-line exit codes. */
typedef enum advpref_status {
  ADVPREF_OK = 0,
  ADVPREF_ERR_USAGE = 1,
  ADVPREF_ERR_INPUT = 2,
  ADVPREF_ERR_NUMERICAL = 3,
  ADVPREF_ERR_INTERNAL = 4
} advpref_status;

typedef struct advpref_config advpref_config;
typedef struct advpref_policy advpref_policy;

ADVPREF_API const char* advpref_version(void);
ADVPREF_API const char* advpref_last_error(void);

/* Config: key = value pairs, validated on every change. */
ADVPREF_API int advpref_config_new(advpref_config** out);
ADVPREF_API int advpref_config_load(const char* path, advpref_config** out);
ADVPREF_API int advpref_config_set(advpref_config* cfg, const char* key, const char* value);
/* Copies the resolved value of `key` into buf (NUL-terminated). *needed
 * receives the full length including the terminator. */
ADVPREF_API int advpref_config_get(const advpref_config* cfg, const char* key, char* buf, size_t cap, size_t* needed);
/* Canonical "key = value" dump of the resolved config. */
ADVPREF_API int advpref_config_dump(const advpref_config* cfg, char* buf, size_t cap, size_t* needed);
ADVPREF_API void advpref_config_free(advpref_config* cfg);

/* Commands. Paths are directories unless stated otherwise. */
ADVPREF_API int advpref_generate_data(const advpref_config* cfg, const char* out_dir);
/* data_dir may be NULL or "": data is generated into <out_dir>/data.
 * stop_after_stage < 0 runs the whole pipeline. */
ADVPREF_API int advpref_train(const advpref_config* cfg, const char* out_dir, const char* data_dir, int resume,
                              int stop_after_stage);
ADVPREF_API int advpref_evaluate(const advpref_config* cfg, const char* policy_path, const char* data_dir,
                                 const char* out_dir);
ADVPREF_API int advpref_ablate(const advpref_config* cfg, const double* lambdas, size_t n_lambdas,
                               const char* const* modes, size_t n_modes, const char* out_dir, const char* data_dir);
ADVPREF_API int advpref_report(const char* const* run_dirs, size_t n_runs, const char* out_csv);

/* Policies. */
ADVPREF_API int advpref_policy_load(const char* path, advpref_policy** out);
ADVPREF_API int advpref_policy_save(const advpref_policy* p, const char* path);
ADVPREF_API int advpref_policy_vocab_size(const advpref_policy* p, size_t* out);
ADVPREF_API int advpref_policy_num_states(const advpref_policy* p, size_t* out);
ADVPREF_API int advpref_policy_sequence_logprob(const advpref_policy* p, const int32_t* prompt, size_t prompt_len,
                                                const int32_t* response, size_t response_len, double* out);
ADVPREF_API void advpref_policy_free(advpref_policy* p);

/* Scalar helpers. */
ADVPREF_API double advpref_coef_transform(double r);
/* constraint_json: one constraint object as stored in dataset files. */
ADVPREF_API int advpref_check_text(const char* constraint_json, const char* text, int* passes);

#ifdef __cplusplus
}
#endif

#endif
