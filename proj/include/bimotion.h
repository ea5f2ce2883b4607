/*
 * bimotion — bilingual text-to-motion diffusion with reward-guided sampling.
 *
 * C interface of the shared library. All state lives behind the opaque
 * bimotion_ctx handle; every operation returns a status code and leaves a
 * human-readable message retrievable with bimotion_last_error().
 *
 * Status codes double as process exit codes: 0 success, 1 validation error,
 * 2 runtime error, 3 oracle-check failure.
 */
#ifndef BIMOTION_H
#define BIMOTION_H

#include <stdint.h>

#if defined(_WIN32)
#define BIMOTION_API __declspec(dllexport)
#else
#define BIMOTION_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bimotion_status {
  BIMOTION_OK = 0,
  BIMOTION_ERR_VALIDATION = 1,
  BIMOTION_ERR_RUNTIME = 2,
  BIMOTION_ERR_ORACLE = 3
} bimotion_status;

typedef struct bimotion_ctx bimotion_ctx;

BIMOTION_API const char* bimotion_version(void);

/* context: configuration + error state */
BIMOTION_API bimotion_ctx* bimotion_ctx_new(void);
BIMOTION_API void bimotion_ctx_free(bimotion_ctx* ctx);

/* load a config file (key = value text or JSON); resets previous settings */
BIMOTION_API bimotion_status bimotion_load_config(bimotion_ctx* ctx, const char* path);

/* set one dotted config key, e.g. ("guidance.mu", "0.5"); unknown keys fail */
BIMOTION_API bimotion_status bimotion_set_option(bimotion_ctx* ctx, const char* key,
                                                 const char* value);

/* read one dotted config key into buf (NUL-terminated, truncated to buf_len) */
BIMOTION_API bimotion_status bimotion_get_option(bimotion_ctx* ctx, const char* key,
                                                 char* buf, int buf_len);

/* message of the most recent failure on this context */
BIMOTION_API const char* bimotion_last_error(const bimotion_ctx* ctx);

/* commands; paths may be NULL only where noted */
BIMOTION_API bimotion_status bimotion_gen_corpus(bimotion_ctx* ctx, const char* out_path);

BIMOTION_API bimotion_status bimotion_align_text(bimotion_ctx* ctx, const char* corpus_path,
                                                 const char* out_checkpoint);

BIMOTION_API bimotion_status bimotion_train_reward(bimotion_ctx* ctx, const char* corpus_path,
                                                   const char* out_checkpoint);

BIMOTION_API bimotion_status bimotion_train_diffusion(bimotion_ctx* ctx,
                                                      const char* corpus_path,
                                                      const char* text_checkpoint,
                                                      const char* out_checkpoint);

/* reward_checkpoint and corpus_path may be NULL when guidance.mode == none;
 * trace_csv may be NULL to skip the per-step reward trace */
BIMOTION_API bimotion_status bimotion_sample(bimotion_ctx* ctx, const char* diffusion_checkpoint,
                                             const char* text_checkpoint,
                                             const char* reward_checkpoint,
                                             const char* corpus_path, const char* out_samples,
                                             const char* trace_csv);

BIMOTION_API bimotion_status bimotion_evaluate(bimotion_ctx* ctx, const char* samples_path,
                                               const char* corpus_path,
                                               const char* reward_checkpoint,
                                               const char* out_report_json);

/* runs the closed-form oracle suite; returns BIMOTION_ERR_ORACLE when a check
 * fails; out_csv may be NULL */
BIMOTION_API bimotion_status bimotion_verify_theorems(bimotion_ctx* ctx, const char* out_csv);

BIMOTION_API bimotion_status bimotion_pipeline_run(bimotion_ctx* ctx, const char* input_path,
                                                   const char* out_dir);

BIMOTION_API bimotion_status bimotion_pipeline_review_apply(bimotion_ctx* ctx,
                                                            const char* out_dir,
                                                            const char* review_path);

BIMOTION_API bimotion_status bimotion_sweep(bimotion_ctx* ctx, const char* diffusion_checkpoint,
                                            const char* text_checkpoint,
                                            const char* reward_checkpoint,
                                            const char* corpus_path, const char* out_csv);

#ifdef __cplusplus
}
#endif

#endif /* BIMOTION_H */
