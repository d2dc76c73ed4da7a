/* Copyright (c) 2026, The PSPT Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface of libpspt. Every function returns a pspt_status; on failure
 * pspt_last_error() describes the problem for the calling thread until the
 * next failing call on that thread. Strings returned through `char**` are
 * owned by the caller and released with pspt_string_free().
 */

#ifndef PSPT_PSPT_H
#define PSPT_PSPT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PSPT_API __declspec(dllexport)
#else
#define PSPT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pspt_status {
    PSPT_OK = 0,
    PSPT_ERR_DIMENSION,
    PSPT_ERR_NUMERIC,
    PSPT_ERR_CONTRACT,
    PSPT_ERR_VOCABULARY,
    PSPT_ERR_SEQUENCE_LENGTH,
    PSPT_ERR_CHECKPOINT_FORMAT,
    PSPT_ERR_CONFIGURATION,
    PSPT_ERR_DATA,
    PSPT_ERR_INPUT,
    PSPT_ERR_IO,
    PSPT_ERR_INVALID_ARGUMENT, /* null handle or pointer */
    PSPT_ERR_INTERNAL
} pspt_status;

typedef struct pspt_config pspt_config;
typedef struct pspt_model pspt_model;
typedef struct pspt_params pspt_params;

PSPT_API const char* pspt_version(void);
PSPT_API const char* pspt_status_name(pspt_status status);
/* Process exit code: 0 ok, 1 configuration, 2 data/input, 3 numeric. */
PSPT_API int pspt_exit_code(pspt_status status);
PSPT_API const char* pspt_last_error(void);
PSPT_API void pspt_string_free(char* s);

/* "error", "info" or "debug". */
PSPT_API pspt_status pspt_set_log_level(const char* level);

/* Run configuration. */
PSPT_API pspt_status pspt_config_new(pspt_config** out);
PSPT_API pspt_status pspt_config_load(const char* path, pspt_config** out);
PSPT_API pspt_status pspt_config_parse(const char* json, pspt_config** out);
/* `key=value` with a dotted key, e.g. "train.epochs=5". */
PSPT_API pspt_status pspt_config_set(pspt_config* config, const char* assignment);
PSPT_API pspt_status pspt_config_dump(const pspt_config* config, char** out_json);
PSPT_API pspt_status pspt_config_validate(const pspt_config* config);
PSPT_API void pspt_config_free(pspt_config* config);

/* Commands; `out_text` (may be NULL) receives the human-readable report. */
PSPT_API pspt_status pspt_cmd_synth(const pspt_config* config, char** out_text);
PSPT_API pspt_status pspt_cmd_init_model(const pspt_config* config, char** out_text);
PSPT_API pspt_status pspt_cmd_pretrain(const pspt_config* config, char** out_text);
PSPT_API pspt_status pspt_cmd_train(const pspt_config* config, char** out_text);
PSPT_API pspt_status pspt_cmd_retrieve(const pspt_config* config, char** out_text);
PSPT_API pspt_status pspt_cmd_rerank(const pspt_config* config, char** out_text);
PSPT_API pspt_status pspt_cmd_eval(const pspt_config* config, char** out_text);

/* Checkpoints and direct scoring. */
PSPT_API pspt_status pspt_model_load(const char* path, pspt_model** out);
PSPT_API void pspt_model_free(pspt_model* model);
PSPT_API size_t pspt_model_vocab_size(const pspt_model* model);
PSPT_API size_t pspt_model_dim(const pspt_model* model);
PSPT_API size_t pspt_model_parameter_count(const pspt_model* model);
PSPT_API uint32_t pspt_model_checksum(const pspt_model* model);

PSPT_API pspt_status pspt_params_load(const char* path, const pspt_model* model, pspt_params** out);
/* Fresh parameters: soft prompt from `hard_prompt`, seeded adapter. */
PSPT_API pspt_status pspt_params_init(const pspt_model* model, const char* hard_prompt, size_t l_s, size_t r,
                                      double alpha, uint64_t seed, pspt_params** out);
PSPT_API void pspt_params_free(pspt_params* params);
PSPT_API size_t pspt_params_parameter_count(const pspt_params* params);

/* Summed log-likelihood of the question given the passage. */
PSPT_API pspt_status pspt_score_pspt(const pspt_model* model, const pspt_params* params, const char* question,
                                     const char* passage, double* out);
PSPT_API pspt_status pspt_score_upr(const pspt_model* model, const char* prompt, const char* question,
                                    const char* passage, double* out);

#ifdef __cplusplus
}
#endif

#endif /* PSPT_PSPT_H */
