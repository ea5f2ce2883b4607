#pragma once

#include <string>
#include <vector>

#include "bimotion/annotation.hpp"
#include "bimotion/config.hpp"
#include "bimotion/corpus.hpp"
#include "bimotion/denoiser.hpp"
#include "bimotion/guidance.hpp"
#include "bimotion/metrics.hpp"
#include "bimotion/reward_model.hpp"
#include "bimotion/text_encoder.hpp"

namespace bimotion {

// network dimensions resolved from the configured preset
struct NetworkDims {
  int text_d_model = 32;
  int text_blocks = 2;
  int text_heads = 4;
  int text_out_dim = 32;
  int denoiser_d_model = 32;
  int denoiser_blocks = 2;
  int denoiser_heads = 4;
  int reward_d_model = 32;
  int reward_blocks = 2;
  int reward_heads = 4;
  int reward_latent_dim = 16;
};

NetworkDims resolve_dims(const RunConfig& cfg);
NoiseSchedule schedule_from_config(const RunConfig& cfg);
CorpusParams corpus_params_from_config(const RunConfig& cfg);
int thread_count(const RunConfig& cfg);

// checkpoint helpers; meta JSON carries the component dimensions so loaded
// models are self-describing
void save_text_encoder(const std::string& path, const TextEncoder& enc,
                       const std::string& component, uint64_t cfg_hash);
TextEncoder load_text_encoder(const std::string& path, const std::string& component);
void save_denoiser(const std::string& path, const DenoiserNetwork& net, uint64_t cfg_hash);
DenoiserNetwork load_denoiser(const std::string& path);
void save_reward_model(const std::string& path, const StepAwareRewardModel& m,
                       uint64_t cfg_hash);
StepAwareRewardModel load_reward_model(const std::string& path);

// one record of a sampler output file (corpus line format, single caption)
struct SampleRecord {
  std::string motion_id;
  MotionSequence motion;
  std::vector<int> tokens;  // global vocabulary ids
  std::string anchor_id;
};

void save_samples(const std::vector<SampleRecord>& samples, int vocab_per_lang,
                  const std::string& path);
std::vector<SampleRecord> load_samples(const std::string& path, int vocab_per_lang);

// command layer; every command writes a run manifest beside its outputs
void cmd_gen_corpus(const RunConfig& cfg, const std::string& out_path);
void cmd_align_text(const RunConfig& cfg, const std::string& corpus_path,
                    const std::string& out_ckpt);
void cmd_train_reward(const RunConfig& cfg, const std::string& corpus_path,
                      const std::string& out_ckpt);
void cmd_train_diffusion(const RunConfig& cfg, const std::string& corpus_path,
                         const std::string& text_ckpt, const std::string& out_ckpt);
void cmd_sample(const RunConfig& cfg, const std::string& diffusion_ckpt,
                const std::string& text_ckpt, const std::string& reward_ckpt,
                const std::string& corpus_path, const std::string& out_samples,
                const std::string& out_trace);
MetricReport cmd_evaluate(const RunConfig& cfg, const std::string& samples_path,
                          const std::string& corpus_path, const std::string& reward_ckpt,
                          const std::string& out_report);
// returns false when an oracle check fails
bool cmd_verify_theorems(const RunConfig& cfg, const std::string& out_csv);
PipelineSummary cmd_pipeline_run(const RunConfig& cfg, const std::string& input_path,
                                 const std::string& out_dir);
ReviewApplyResult cmd_pipeline_review_apply(const RunConfig& cfg, const std::string& out_dir,
                                            const std::string& review_path);
void cmd_sweep(const RunConfig& cfg, const std::string& diffusion_ckpt,
               const std::string& text_ckpt, const std::string& reward_ckpt,
               const std::string& corpus_path, const std::string& out_csv);

}  // namespace bimotion
