#include "bimotion.h"

#include <cstring>
#include <string>

#include "bimotion/config.hpp"
#include "bimotion/experiment.hpp"

using namespace bimotion;

extern "C" {

struct bimotion_ctx {
  RunConfig config;
  std::string last_error;
};

const char* bimotion_version(void) { return "0.1.0"; }

bimotion_ctx* bimotion_ctx_new(void) { return new (std::nothrow) bimotion_ctx(); }

void bimotion_ctx_free(bimotion_ctx* ctx) { delete ctx; }

const char* bimotion_last_error(const bimotion_ctx* ctx) {
  return ctx ? ctx->last_error.c_str() : "null context";
}

}  // extern "C"

namespace {

template <typename Fn>
bimotion_status guarded(bimotion_ctx* ctx, Fn&& fn) {
  if (!ctx) return BIMOTION_ERR_VALIDATION;
  ctx->last_error.clear();
  try {
    return fn();
  } catch (const error& ex) {
    ctx->last_error = ex.what();
    return static_cast<bimotion_status>(static_cast<int>(ex.code()));
  } catch (const std::exception& ex) {
    ctx->last_error = ex.what();
    return BIMOTION_ERR_RUNTIME;
  } catch (...) {
    ctx->last_error = "unknown error";
    return BIMOTION_ERR_RUNTIME;
  }
}

std::string arg(const char* s) { return s ? std::string(s) : std::string(); }

bimotion_status need(bimotion_ctx* ctx, const char* value, const char* what) {
  if (value && *value) return BIMOTION_OK;
  ctx->last_error = std::string(what) + " is required";
  return BIMOTION_ERR_VALIDATION;
}

}  // namespace

extern "C" {

bimotion_status bimotion_load_config(bimotion_ctx* ctx, const char* path) {
  return guarded(ctx, [&] {
    if (bimotion_status st = need(ctx, path, "config path"); st != BIMOTION_OK) return st;
    ctx->config = load_config(path);
    return BIMOTION_OK;
  });
}

bimotion_status bimotion_set_option(bimotion_ctx* ctx, const char* key, const char* value) {
  return guarded(ctx, [&] {
    if (bimotion_status st = need(ctx, key, "option key"); st != BIMOTION_OK) return st;
    apply_override(ctx->config, key, arg(value));
    return BIMOTION_OK;
  });
}

bimotion_status bimotion_get_option(bimotion_ctx* ctx, const char* key, char* buf,
                                    int buf_len) {
  return guarded(ctx, [&] {
    if (bimotion_status st = need(ctx, key, "option key"); st != BIMOTION_OK) return st;
    if (!buf || buf_len <= 0) {
      ctx->last_error = "output buffer is required";
      return BIMOTION_ERR_VALIDATION;
    }
    auto fields = config_fields(ctx->config);
    for (const auto& f : fields) {
      if (f.key != key) continue;
      std::string v;
      switch (f.kind) {
        case ConfigField::Kind::kInt:
          v = std::to_string(*static_cast<int*>(f.ptr));
          break;
        case ConfigField::Kind::kDouble:
          v = std::to_string(*static_cast<double*>(f.ptr));
          break;
        case ConfigField::Kind::kUint64:
          v = std::to_string(*static_cast<uint64_t*>(f.ptr));
          break;
        case ConfigField::Kind::kBool:
          v = *static_cast<bool*>(f.ptr) ? "true" : "false";
          break;
        case ConfigField::Kind::kString:
          v = *static_cast<std::string*>(f.ptr);
          break;
      }
      std::snprintf(buf, static_cast<size_t>(buf_len), "%s", v.c_str());
      return BIMOTION_OK;
    }
    ctx->last_error = "config: unknown key: " + std::string(key);
    return BIMOTION_ERR_VALIDATION;
  });
}

bimotion_status bimotion_gen_corpus(bimotion_ctx* ctx, const char* out_path) {
  return guarded(ctx, [&] {
    if (bimotion_status st = need(ctx, out_path, "output path"); st != BIMOTION_OK) return st;
    ctx->config.validate();
    cmd_gen_corpus(ctx->config, out_path);
    return BIMOTION_OK;
  });
}

bimotion_status bimotion_align_text(bimotion_ctx* ctx, const char* corpus_path,
                                    const char* out_checkpoint) {
  return guarded(ctx, [&] {
    if (bimotion_status st = need(ctx, corpus_path, "corpus path"); st != BIMOTION_OK) return st;
    if (bimotion_status st = need(ctx, out_checkpoint, "output checkpoint"); st != BIMOTION_OK)
      return st;
    ctx->config.validate();
    cmd_align_text(ctx->config, corpus_path, out_checkpoint);
    return BIMOTION_OK;
  });
}

bimotion_status bimotion_train_reward(bimotion_ctx* ctx, const char* corpus_path,
                                      const char* out_checkpoint) {
  return guarded(ctx, [&] {
    if (bimotion_status st = need(ctx, corpus_path, "corpus path"); st != BIMOTION_OK) return st;
    if (bimotion_status st = need(ctx, out_checkpoint, "output checkpoint"); st != BIMOTION_OK)
      return st;
    ctx->config.validate();
    cmd_train_reward(ctx->config, corpus_path, out_checkpoint);
    return BIMOTION_OK;
  });
}

bimotion_status bimotion_train_diffusion(bimotion_ctx* ctx, const char* corpus_path,
                                         const char* text_checkpoint,
                                         const char* out_checkpoint) {
  return guarded(ctx, [&] {
    if (bimotion_status st = need(ctx, corpus_path, "corpus path"); st != BIMOTION_OK) return st;
    if (bimotion_status st = need(ctx, text_checkpoint, "text checkpoint"); st != BIMOTION_OK)
      return st;
    if (bimotion_status st = need(ctx, out_checkpoint, "output checkpoint"); st != BIMOTION_OK)
      return st;
    ctx->config.validate();
    cmd_train_diffusion(ctx->config, corpus_path, text_checkpoint, out_checkpoint);
    return BIMOTION_OK;
  });
}

bimotion_status bimotion_sample(bimotion_ctx* ctx, const char* diffusion_checkpoint,
                                const char* text_checkpoint, const char* reward_checkpoint,
                                const char* corpus_path, const char* out_samples,
                                const char* trace_csv) {
  return guarded(ctx, [&] {
    if (bimotion_status st = need(ctx, diffusion_checkpoint, "diffusion checkpoint");
        st != BIMOTION_OK)
      return st;
    if (bimotion_status st = need(ctx, text_checkpoint, "text checkpoint"); st != BIMOTION_OK)
      return st;
    if (bimotion_status st = need(ctx, out_samples, "output path"); st != BIMOTION_OK) return st;
    ctx->config.validate();
    cmd_sample(ctx->config, diffusion_checkpoint, text_checkpoint, arg(reward_checkpoint),
               arg(corpus_path), out_samples, arg(trace_csv));
    return BIMOTION_OK;
  });
}

bimotion_status bimotion_evaluate(bimotion_ctx* ctx, const char* samples_path,
                                  const char* corpus_path, const char* reward_checkpoint,
                                  const char* out_report_json) {
  return guarded(ctx, [&] {
    if (bimotion_status st = need(ctx, samples_path, "samples path"); st != BIMOTION_OK)
      return st;
    if (bimotion_status st = need(ctx, corpus_path, "corpus path"); st != BIMOTION_OK) return st;
    if (bimotion_status st = need(ctx, reward_checkpoint, "reward checkpoint");
        st != BIMOTION_OK)
      return st;
    if (bimotion_status st = need(ctx, out_report_json, "report path"); st != BIMOTION_OK)
      return st;
    ctx->config.validate();
    cmd_evaluate(ctx->config, samples_path, corpus_path, reward_checkpoint, out_report_json);
    return BIMOTION_OK;
  });
}

bimotion_status bimotion_verify_theorems(bimotion_ctx* ctx, const char* out_csv) {
  return guarded(ctx, [&] {
    ctx->config.validate();
    bool ok = cmd_verify_theorems(ctx->config, arg(out_csv));
    if (!ok) {
      ctx->last_error = "one or more oracle checks failed";
      return BIMOTION_ERR_ORACLE;
    }
    return BIMOTION_OK;
  });
}

bimotion_status bimotion_pipeline_run(bimotion_ctx* ctx, const char* input_path,
                                      const char* out_dir) {
  return guarded(ctx, [&] {
    if (bimotion_status st = need(ctx, input_path, "input path"); st != BIMOTION_OK) return st;
    if (bimotion_status st = need(ctx, out_dir, "output directory"); st != BIMOTION_OK)
      return st;
    ctx->config.validate();
    cmd_pipeline_run(ctx->config, input_path, out_dir);
    return BIMOTION_OK;
  });
}

bimotion_status bimotion_pipeline_review_apply(bimotion_ctx* ctx, const char* out_dir,
                                               const char* review_path) {
  return guarded(ctx, [&] {
    if (bimotion_status st = need(ctx, out_dir, "output directory"); st != BIMOTION_OK)
      return st;
    if (bimotion_status st = need(ctx, review_path, "review path"); st != BIMOTION_OK) return st;
    ctx->config.validate();
    cmd_pipeline_review_apply(ctx->config, out_dir, review_path);
    return BIMOTION_OK;
  });
}

bimotion_status bimotion_sweep(bimotion_ctx* ctx, const char* diffusion_checkpoint,
                               const char* text_checkpoint, const char* reward_checkpoint,
                               const char* corpus_path, const char* out_csv) {
  return guarded(ctx, [&] {
    if (bimotion_status st = need(ctx, diffusion_checkpoint, "diffusion checkpoint");
        st != BIMOTION_OK)
      return st;
    if (bimotion_status st = need(ctx, text_checkpoint, "text checkpoint"); st != BIMOTION_OK)
      return st;
    if (bimotion_status st = need(ctx, reward_checkpoint, "reward checkpoint");
        st != BIMOTION_OK)
      return st;
    if (bimotion_status st = need(ctx, corpus_path, "corpus path"); st != BIMOTION_OK) return st;
    if (bimotion_status st = need(ctx, out_csv, "output csv"); st != BIMOTION_OK) return st;
    ctx->config.validate();
    cmd_sweep(ctx->config, diffusion_checkpoint, text_checkpoint, reward_checkpoint,
              corpus_path, out_csv);
    return BIMOTION_OK;
  });
}

}  // extern "C"
