/* Copyright (c) 2026, The PSPT Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * Drives the shared library through its C interface only: config handling,
 * the command pipeline on a tiny synthetic world, scoring handles and the
 * error/exit-code contract.
 */

#include "pspt/pspt.h"

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

static int failures = 0;

#define CHECK(cond)                                                         \
    do {                                                                    \
        if (!(cond)) {                                                      \
            fprintf(stderr, "%s:%d: check failed: %s\n", __FILE__, __LINE__, #cond); \
            ++failures;                                                     \
        }                                                                   \
    } while (0)

#define CHECK_OK(expr)                                                                   \
    do {                                                                                 \
        pspt_status s_ = (expr);                                                         \
        if (s_ != PSPT_OK) {                                                             \
            fprintf(stderr, "%s:%d: %s -> %s: %s\n", __FILE__, __LINE__, #expr,          \
                    pspt_status_name(s_), pspt_last_error());                            \
            ++failures;                                                                  \
        }                                                                                \
    } while (0)

static void set(pspt_config* c, const char* dir, const char* key, const char* file) {
    char buf[1024];
    snprintf(buf, sizeof buf, "%s=%s/%s", key, dir, file);
    CHECK_OK(pspt_config_set(c, buf));
}

static int run(pspt_status (*cmd)(const pspt_config*, char**), const pspt_config* c) {
    char* text = NULL;
    pspt_status s = cmd(c, &text);
    if (s != PSPT_OK) {
        fprintf(stderr, "command failed: %s\n", pspt_last_error());
        ++failures;
        return 0;
    }
    CHECK(text != NULL && strlen(text) > 0);
    pspt_string_free(text);
    return 1;
}

int main(int argc, char** argv) {
    const char* dir = argc > 1 ? argv[1] : ".";
    pspt_config* c = NULL;

    CHECK(strlen(pspt_version()) > 0);
    CHECK(pspt_exit_code(PSPT_OK) == 0);
    CHECK(pspt_exit_code(PSPT_ERR_CONFIGURATION) == 1);
    CHECK(pspt_exit_code(PSPT_ERR_DATA) == 2);
    CHECK(pspt_exit_code(PSPT_ERR_INPUT) == 2);
    CHECK(pspt_exit_code(PSPT_ERR_NUMERIC) == 3);

    /* argument and config errors */
    CHECK(pspt_config_new(NULL) == PSPT_ERR_INVALID_ARGUMENT);
    CHECK(strstr(pspt_last_error(), "null") != NULL);
    CHECK(pspt_config_parse("{\"epochz\": 1}", &c) == PSPT_ERR_CONFIGURATION);
    CHECK(strstr(pspt_last_error(), "epochz") != NULL);
    CHECK(pspt_set_log_level("loud") == PSPT_ERR_CONFIGURATION);
    CHECK_OK(pspt_set_log_level("error"));

    CHECK_OK(pspt_config_new(&c));
    CHECK(pspt_config_set(c, "train.nothing=1") == PSPT_ERR_CONFIGURATION);
    CHECK(pspt_cmd_train(c, NULL) == PSPT_ERR_CONFIGURATION); /* no paths */
    char* dumped = NULL;
    CHECK_OK(pspt_config_dump(c, &dumped));
    pspt_config* round = NULL;
    CHECK_OK(pspt_config_parse(dumped, &round));
    pspt_config_free(round);
    pspt_string_free(dumped);

    /* tiny pipeline */
    const char* sets[] = {"seed=3", "synthetic.topics=160", "synthetic.train_questions=24",
                          "synthetic.test_questions=8", "synthetic.corpus_sequences=200", "model.dim=16",
                          "model.n_layers=1", "pretrain.steps=3", "train.epochs=1", "train.train_sample_size=12",
                          "eval.ks=[1,5]"};
    for (size_t i = 0; i < sizeof sets / sizeof sets[0]; ++i) CHECK_OK(pspt_config_set(c, sets[i]));
    set(c, dir, "paths.dataset", "train.jsonl");
    set(c, dir, "paths.eval_dataset", "test.jsonl");
    set(c, dir, "paths.pretrain_corpus", "corpus.txt");
    set(c, dir, "paths.model", "model.ckpt");
    set(c, dir, "paths.params", "params.ckpt");
    set(c, dir, "paths.run_in", "bm25.run");
    set(c, dir, "paths.run_out", "pspt.run");
    CHECK_OK(pspt_config_validate(c));
    run(pspt_cmd_synth, c);
    run(pspt_cmd_init_model, c);
    run(pspt_cmd_train, c);
    run(pspt_cmd_retrieve, c);
    run(pspt_cmd_rerank, c);
    char runs[2048];
    snprintf(runs, sizeof runs, "paths.runs=[\"%s/bm25.run\",\"%s/pspt.run\"]", dir, dir);
    CHECK_OK(pspt_config_set(c, runs));
    char* table = NULL;
    CHECK_OK(pspt_cmd_eval(c, &table));
    CHECK(table != NULL && strstr(table, "pspt") != NULL && strstr(table, "H@5") != NULL);
    pspt_string_free(table);

    /* handles */
    char path[1024];
    pspt_model* m = NULL;
    pspt_params* p = NULL;
    pspt_params* fresh = NULL;
    snprintf(path, sizeof path, "%s/model.ckpt", dir);
    CHECK_OK(pspt_model_load(path, &m));
    snprintf(path, sizeof path, "%s/params.ckpt", dir);
    CHECK_OK(pspt_params_load(path, m, &p));
    CHECK(pspt_model_dim(m) == 16);
    CHECK(pspt_params_parameter_count(p) == 8 * 16 + pspt_model_vocab_size(m) + 16);
    CHECK(pspt_model_parameter_count(m) > pspt_params_parameter_count(p));

    const char* prompt = "please generate question for this passage";
    CHECK_OK(pspt_params_init(m, prompt, 6, 1, 16.0, 1, &fresh));
    double a = 0, b = 0, t = 0;
    CHECK_OK(pspt_score_pspt(m, fresh, "what is this", "the passage", &a));
    CHECK_OK(pspt_score_upr(m, prompt, "what is this", "the passage", &b));
    CHECK(fabs(a - b) < 1e-5);
    CHECK(a < 0);
    CHECK_OK(pspt_score_pspt(m, p, "what is this", "the passage", &t));
    CHECK(pspt_score_pspt(m, p, "", "the passage", &t) == PSPT_ERR_CONTRACT);
    CHECK(pspt_score_pspt(m, NULL, "q", "d", &t) == PSPT_ERR_INVALID_ARGUMENT);
    CHECK(pspt_model_load("/nonexistent/model.ckpt", &m) == PSPT_ERR_IO);
    CHECK(pspt_exit_code(PSPT_ERR_IO) == 2);

    pspt_params_free(fresh);
    pspt_params_free(p);
    pspt_model_free(m);
    pspt_config_free(c);
    if (failures == 0) printf("capi: all checks passed\n");
    return failures == 0 ? 0 : 1;
}
