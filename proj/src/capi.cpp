// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#include "pspt/pspt.h"

#include "pspt/checkpoint.hpp"
#include "pspt/commands.hpp"
#include "pspt/error.hpp"
#include "pspt/log.hpp"

#include <cstdlib>
#include <cstring>
#include <memory>

struct pspt_config {
    pspt::RunSpec spec;
};

struct pspt_model {
    pspt::MicroLM<float> lm;
};

struct pspt_params {
    pspt::PsptParams<float> p;
};

namespace {

thread_local std::string g_last_error;

pspt_status status_of(pspt::ErrorKind kind) {
    using pspt::ErrorKind;
    switch (kind) {
    case ErrorKind::Dimension: return PSPT_ERR_DIMENSION;
    case ErrorKind::Numeric: return PSPT_ERR_NUMERIC;
    case ErrorKind::Contract: return PSPT_ERR_CONTRACT;
    case ErrorKind::Vocabulary: return PSPT_ERR_VOCABULARY;
    case ErrorKind::SequenceLength: return PSPT_ERR_SEQUENCE_LENGTH;
    case ErrorKind::CheckpointFormat: return PSPT_ERR_CHECKPOINT_FORMAT;
    case ErrorKind::Configuration: return PSPT_ERR_CONFIGURATION;
    case ErrorKind::Data: return PSPT_ERR_DATA;
    case ErrorKind::Input: return PSPT_ERR_INPUT;
    case ErrorKind::Io: return PSPT_ERR_IO;
    }
    return PSPT_ERR_INTERNAL;
}

pspt_status failed(pspt_status status, const std::string& message) {
    g_last_error = message;
    return status;
}

template <typename F>
pspt_status guarded(F&& fn) {
    try {
        fn();
        return PSPT_OK;
    } catch (const pspt::Error& e) {
        return failed(status_of(e.kind()), std::string(pspt::error_kind_name(e.kind())) + " error: " + e.what());
    } catch (const std::bad_alloc&) {
        return failed(PSPT_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return failed(PSPT_ERR_INTERNAL, std::string("internal error: ") + e.what());
    }
}

char* copy_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

#define PSPT_REQUIRE(ptr)                                                                        \
    do {                                                                                         \
        if ((ptr) == nullptr) return failed(PSPT_ERR_INVALID_ARGUMENT, #ptr " must not be null"); \
    } while (0)

using Command = std::string (*)(const pspt::RunSpec&);

pspt_status run_command(Command cmd, const pspt_config* config, char** out_text) {
    PSPT_REQUIRE(config);
    return guarded([&] {
        const std::string text = cmd(config->spec);
        if (out_text != nullptr) *out_text = copy_string(text);
    });
}

} // namespace

extern "C" {

const char* pspt_version(void) {
    return "0.1.0";
}

const char* pspt_status_name(pspt_status status) {
    switch (status) {
    case PSPT_OK: return "ok";
    case PSPT_ERR_DIMENSION: return "dimension";
    case PSPT_ERR_NUMERIC: return "numeric";
    case PSPT_ERR_CONTRACT: return "contract";
    case PSPT_ERR_VOCABULARY: return "vocabulary";
    case PSPT_ERR_SEQUENCE_LENGTH: return "sequence_length";
    case PSPT_ERR_CHECKPOINT_FORMAT: return "checkpoint_format";
    case PSPT_ERR_CONFIGURATION: return "configuration";
    case PSPT_ERR_DATA: return "data";
    case PSPT_ERR_INPUT: return "input";
    case PSPT_ERR_IO: return "io";
    case PSPT_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case PSPT_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

int pspt_exit_code(pspt_status status) {
    switch (status) {
    case PSPT_OK: return 0;
    case PSPT_ERR_CONFIGURATION:
    case PSPT_ERR_INVALID_ARGUMENT: return 1;
    case PSPT_ERR_DATA:
    case PSPT_ERR_INPUT:
    case PSPT_ERR_IO:
    case PSPT_ERR_CHECKPOINT_FORMAT:
    case PSPT_ERR_VOCABULARY:
    case PSPT_ERR_SEQUENCE_LENGTH: return 2;
    default: return 3;
    }
}

const char* pspt_last_error(void) {
    return g_last_error.c_str();
}

void pspt_string_free(char* s) {
    std::free(s);
}

pspt_status pspt_set_log_level(const char* level) {
    PSPT_REQUIRE(level);
    return guarded([&] { pspt::set_log_level(pspt::parse_log_level(level)); });
}

pspt_status pspt_config_new(pspt_config** out) {
    PSPT_REQUIRE(out);
    return guarded([&] { *out = new pspt_config{pspt::default_run_spec()}; });
}

pspt_status pspt_config_load(const char* path, pspt_config** out) {
    PSPT_REQUIRE(path);
    PSPT_REQUIRE(out);
    return guarded([&] { *out = new pspt_config{pspt::load_run_spec(path)}; });
}

pspt_status pspt_config_parse(const char* json, pspt_config** out) {
    PSPT_REQUIRE(json);
    PSPT_REQUIRE(out);
    return guarded([&] { *out = new pspt_config{pspt::parse_run_spec(json)}; });
}

pspt_status pspt_config_set(pspt_config* config, const char* assignment) {
    PSPT_REQUIRE(config);
    PSPT_REQUIRE(assignment);
    return guarded([&] { pspt::apply_override(config->spec, assignment); });
}

pspt_status pspt_config_dump(const pspt_config* config, char** out_json) {
    PSPT_REQUIRE(config);
    PSPT_REQUIRE(out_json);
    return guarded([&] { *out_json = copy_string(pspt::dump_run_spec(config->spec)); });
}

pspt_status pspt_config_validate(const pspt_config* config) {
    PSPT_REQUIRE(config);
    return guarded([&] { config->spec.validate(); });
}

void pspt_config_free(pspt_config* config) {
    delete config;
}

pspt_status pspt_cmd_synth(const pspt_config* c, char** t) { return run_command(pspt::cmd_synth, c, t); }
pspt_status pspt_cmd_init_model(const pspt_config* c, char** t) { return run_command(pspt::cmd_init_model, c, t); }
pspt_status pspt_cmd_pretrain(const pspt_config* c, char** t) { return run_command(pspt::cmd_pretrain, c, t); }
pspt_status pspt_cmd_train(const pspt_config* c, char** t) { return run_command(pspt::cmd_train, c, t); }
pspt_status pspt_cmd_retrieve(const pspt_config* c, char** t) { return run_command(pspt::cmd_retrieve, c, t); }
pspt_status pspt_cmd_rerank(const pspt_config* c, char** t) { return run_command(pspt::cmd_rerank, c, t); }
pspt_status pspt_cmd_eval(const pspt_config* c, char** t) { return run_command(pspt::cmd_eval, c, t); }

pspt_status pspt_model_load(const char* path, pspt_model** out) {
    PSPT_REQUIRE(path);
    PSPT_REQUIRE(out);
    return guarded([&] {
        auto lm = pspt::load_checkpoint(path);
        lm.set_trainable(false);
        *out = new pspt_model{std::move(lm)};
    });
}

void pspt_model_free(pspt_model* model) {
    delete model;
}

size_t pspt_model_vocab_size(const pspt_model* model) {
    return model ? model->lm.config().vocab_size : 0;
}

size_t pspt_model_dim(const pspt_model* model) {
    return model ? model->lm.config().dim : 0;
}

size_t pspt_model_parameter_count(const pspt_model* model) {
    return model ? model->lm.parameter_count() : 0;
}

uint32_t pspt_model_checksum(const pspt_model* model) {
    return model ? model->lm.checksum() : 0;
}

pspt_status pspt_params_load(const char* path, const pspt_model* model, pspt_params** out) {
    PSPT_REQUIRE(path);
    PSPT_REQUIRE(model);
    PSPT_REQUIRE(out);
    return guarded([&] {
        auto p = pspt::load_params(path, model->lm);
        p.set_trainable(false);
        *out = new pspt_params{std::move(p)};
    });
}

pspt_status pspt_params_init(const pspt_model* model, const char* hard_prompt, size_t l_s, size_t r, double alpha,
                             uint64_t seed, pspt_params** out) {
    PSPT_REQUIRE(model);
    PSPT_REQUIRE(hard_prompt);
    PSPT_REQUIRE(out);
    return guarded([&] {
        auto p = pspt::init_params(model->lm, hard_prompt, l_s, r, alpha, seed);
        p.set_trainable(false);
        *out = new pspt_params{std::move(p)};
    });
}

void pspt_params_free(pspt_params* params) {
    delete params;
}

size_t pspt_params_parameter_count(const pspt_params* params) {
    return params ? params->p.parameter_count() : 0;
}

pspt_status pspt_score_pspt(const pspt_model* model, const pspt_params* params, const char* question,
                            const char* passage, double* out) {
    PSPT_REQUIRE(model);
    PSPT_REQUIRE(params);
    PSPT_REQUIRE(question);
    PSPT_REQUIRE(passage);
    PSPT_REQUIRE(out);
    return guarded([&] {
        const auto& v = model->lm.vocab();
        *out = pspt::score_pspt(v.tokenize(question), v.tokenize(passage), params->p, model->lm).value;
    });
}

pspt_status pspt_score_upr(const pspt_model* model, const char* prompt, const char* question, const char* passage,
                           double* out) {
    PSPT_REQUIRE(model);
    PSPT_REQUIRE(prompt);
    PSPT_REQUIRE(question);
    PSPT_REQUIRE(passage);
    PSPT_REQUIRE(out);
    return guarded([&] {
        const auto& v = model->lm.vocab();
        *out = pspt::score_upr(v.tokenize(question), v.tokenize(passage), model->lm, prompt).value;
    });
}

} // extern "C"
