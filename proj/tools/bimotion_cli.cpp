// Command-line front end. Talks to the engine exclusively through the C API
// in bimotion.h; flags map onto dotted config keys.

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bimotion.h"

namespace {

struct CtxDeleter {
  void operator()(bimotion_ctx* c) const { bimotion_ctx_free(c); }
};
using CtxPtr = std::unique_ptr<bimotion_ctx, CtxDeleter>;

// deferred key=value overrides collected from flags
struct Overrides {
  std::vector<std::pair<std::string, std::string>> kv;

  void set(const std::string& key, const std::string& value) { kv.emplace_back(key, value); }
};

int fail(bimotion_ctx* ctx, bimotion_status st) {
  std::fprintf(stderr, "error: %s\n", bimotion_last_error(ctx));
  return static_cast<int>(st);
}

int apply(bimotion_ctx* ctx, const std::string& config_path, const Overrides& ov) {
  if (!config_path.empty()) {
    bimotion_status st = bimotion_load_config(ctx, config_path.c_str());
    if (st != BIMOTION_OK) return fail(ctx, st);
  }
  for (const auto& [k, v] : ov.kv) {
    bimotion_status st = bimotion_set_option(ctx, k.c_str(), v.c_str());
    if (st != BIMOTION_OK) return fail(ctx, st);
  }
  return 0;
}

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bimotion: bilingual text-to-motion diffusion with reward-guided sampling"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "config file (key = value text or JSON)");

  Overrides ov;
  auto add_override = [&ov](CLI::App* cmd, const char* flag, const char* key,
                            const char* help) {
    cmd->add_option_function<std::string>(
        flag, [&ov, key](const std::string& v) { ov.set(key, v); }, help);
  };
  auto add_common = [&](CLI::App* cmd) {
    add_override(cmd, "--threads", "threads", "worker threads (0 = auto)");
    add_override(cmd, "--preset", "network.preset", "network preset: desk | paper");
  };

  // gen-corpus
  std::string out_corpus = "corpus.jsonl";
  CLI::App* gen = app.add_subcommand("gen-corpus", "generate the synthetic bilingual corpus");
  gen->add_option("--out", out_corpus, "output corpus (line-delimited JSON)");
  add_override(gen, "--classes", "corpus.num_classes", "number of motion classes");
  add_override(gen, "--per-class", "corpus.per_class", "motions per class");
  add_override(gen, "--frames", "corpus.num_frames", "frames per motion");
  add_override(gen, "--seed", "corpus.seed", "corpus seed");
  add_common(gen);

  // align-text
  std::string at_corpus, at_out = "text_student.bmrd";
  CLI::App* align = app.add_subcommand("align-text", "distill the bilingual text encoder");
  align->add_option("--corpus", at_corpus, "training corpus")->required();
  align->add_option("--out", at_out, "student checkpoint path");
  add_override(align, "--epochs", "align.epochs", "training epochs");
  add_override(align, "--seed", "align.seed", "training seed");
  add_common(align);

  // train-reward
  std::string tr_corpus, tr_out = "reward.bmrd";
  CLI::App* treward = app.add_subcommand("train-reward", "train the step-aware reward model");
  treward->add_option("--corpus", tr_corpus, "training corpus")->required();
  treward->add_option("--out", tr_out, "reward checkpoint path");
  add_override(treward, "--epochs", "reward.epochs", "training epochs");
  add_override(treward, "--noisy-prob", "reward.noisy_prob", "noisy-motion probability");
  add_override(treward, "--seed", "reward.seed", "training seed");
  add_common(treward);

  // train-diffusion
  std::string td_corpus, td_text, td_out = "denoiser.bmrd";
  CLI::App* tdiff = app.add_subcommand("train-diffusion", "train the bilingual denoiser");
  tdiff->add_option("--corpus", td_corpus, "training corpus")->required();
  tdiff->add_option("--text", td_text, "student text-encoder checkpoint")->required();
  tdiff->add_option("--out", td_out, "denoiser checkpoint path");
  add_override(tdiff, "--epochs", "diffusion.epochs", "training epochs");
  add_override(tdiff, "--seed", "diffusion.seed", "training seed");
  add_common(tdiff);

  // sample
  std::string s_diff, s_text, s_reward, s_corpus, s_out = "samples.jsonl", s_trace;
  CLI::App* smp = app.add_subcommand("sample", "run the (reward-guided) reverse process");
  smp->add_option("--diffusion", s_diff, "denoiser checkpoint")->required();
  smp->add_option("--text", s_text, "student text-encoder checkpoint")->required();
  smp->add_option("--reward", s_reward, "reward checkpoint (guided modes)");
  smp->add_option("--corpus", s_corpus, "corpus for anchor retrieval / caption lookup");
  smp->add_option("--out", s_out, "output samples (corpus line format)");
  smp->add_option("--trace", s_trace, "per-step reward trace CSV");
  add_override(smp, "--mode", "guidance.mode", "none | eq14 | eq15");
  add_override(smp, "--mu", "guidance.mu", "text-reward weight");
  add_override(smp, "--eta", "guidance.eta", "motion-reward weight");
  add_override(smp, "--clip", "guidance.clip", "clip reward gradients (true/false)");
  add_override(smp, "--num", "sample.num", "number of samples");
  add_override(smp, "--seed", "sample.seed", "sampling seed");
  add_override(smp, "--tokens", "sample.tokens", "comma-separated caption token ids");
  add_override(smp, "--lang", "sample.lang", "caption language: a | b");
  add_override(smp, "--caption-of", "sample.from_motion_id", "reuse a corpus caption");
  add_common(smp);

  // evaluate
  std::string e_samples, e_corpus, e_reward, e_report = "metrics.json";
  CLI::App* ev = app.add_subcommand("evaluate", "compute retrieval and distribution metrics");
  ev->add_option("--samples", e_samples, "sample file")->required();
  ev->add_option("--corpus", e_corpus, "reference corpus")->required();
  ev->add_option("--reward", e_reward, "reward checkpoint (metric feature space)")->required();
  ev->add_option("--out", e_report, "metric report JSON");
  add_override(ev, "--pool", "eval.pool_size", "retrieval pool size");
  add_override(ev, "--seed", "eval.seed", "evaluation seed");
  add_common(ev);

  // verify-theorems
  std::string vt_csv = "theorems.csv";
  CLI::App* vt = app.add_subcommand("verify-theorems", "run the closed-form oracle suite");
  vt->add_option("--out", vt_csv, "per-check CSV report");
  add_override(vt, "--paths", "oracle.paths", "monte-carlo paths");
  add_override(vt, "--seed", "oracle.seed", "oracle seed");
  add_common(vt);

  // pipeline
  CLI::App* pipe = app.add_subcommand("pipeline", "bilingual annotation pipeline");
  pipe->require_subcommand(1);
  std::string p_in, p_dir = "pipeline_out";
  CLI::App* prun = pipe->add_subcommand("run", "translate, refine and evaluate captions");
  prun->add_option("--input", p_in, "corpus or raw caption JSONL")->required();
  prun->add_option("--out-dir", p_dir, "output directory");
  add_override(prun, "--backend", "pipeline.backend", "mock | http");
  add_override(prun, "--width", "pipeline.parallel_width", "parallel group width");
  add_override(prun, "--language", "pipeline.target_language", "target language");
  std::string r_dir = "pipeline_out", r_file;
  CLI::App* papply = pipe->add_subcommand("review-apply", "merge a human-edited review file");
  papply->add_option("--out-dir", r_dir, "pipeline output directory");
  papply->add_option("--review", r_file, "edited review queue file")->required();

  // sweep
  std::string w_diff, w_text, w_reward, w_corpus, w_csv = "sweep.csv";
  CLI::App* sw = app.add_subcommand("sweep", "metric curves over the mu = eta grid");
  sw->add_option("--diffusion", w_diff, "denoiser checkpoint")->required();
  sw->add_option("--text", w_text, "student text-encoder checkpoint")->required();
  sw->add_option("--reward", w_reward, "reward checkpoint")->required();
  sw->add_option("--corpus", w_corpus, "corpus")->required();
  sw->add_option("--out", w_csv, "sweep CSV");
  add_override(sw, "--grid", "sweep.grid", "comma-separated mu = eta values");
  add_override(sw, "--num", "sweep.num", "samples per grid point");
  add_common(sw);

  CLI11_PARSE(app, argc, argv);

  CtxPtr ctx(bimotion_ctx_new());
  if (!ctx) {
    std::fprintf(stderr, "error: cannot allocate context\n");
    return 2;
  }
  if (int rc = apply(ctx.get(), config_path, ov); rc != 0) return rc;

  bimotion_status st = BIMOTION_OK;
  if (gen->parsed()) {
    st = bimotion_gen_corpus(ctx.get(), out_corpus.c_str());
  } else if (align->parsed()) {
    st = bimotion_align_text(ctx.get(), at_corpus.c_str(), at_out.c_str());
  } else if (treward->parsed()) {
    st = bimotion_train_reward(ctx.get(), tr_corpus.c_str(), tr_out.c_str());
  } else if (tdiff->parsed()) {
    st = bimotion_train_diffusion(ctx.get(), td_corpus.c_str(), td_text.c_str(),
                                  td_out.c_str());
  } else if (smp->parsed()) {
    st = bimotion_sample(ctx.get(), s_diff.c_str(), s_text.c_str(), opt(s_reward),
                         opt(s_corpus), s_out.c_str(), opt(s_trace));
  } else if (ev->parsed()) {
    st = bimotion_evaluate(ctx.get(), e_samples.c_str(), e_corpus.c_str(), e_reward.c_str(),
                           e_report.c_str());
  } else if (vt->parsed()) {
    st = bimotion_verify_theorems(ctx.get(), opt(vt_csv));
  } else if (pipe->parsed()) {
    if (prun->parsed())
      st = bimotion_pipeline_run(ctx.get(), p_in.c_str(), p_dir.c_str());
    else
      st = bimotion_pipeline_review_apply(ctx.get(), r_dir.c_str(), r_file.c_str());
  } else if (sw->parsed()) {
    st = bimotion_sweep(ctx.get(), w_diff.c_str(), w_text.c_str(), w_reward.c_str(),
                        w_corpus.c_str(), w_csv.c_str());
  }

  if (st != BIMOTION_OK) return fail(ctx.get(), st);
  return 0;
}
