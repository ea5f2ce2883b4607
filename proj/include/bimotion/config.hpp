#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bimotion/error.hpp"

namespace bimotion {

// Resolved run configuration. Every key is settable from the config file
// (key = value text or JSON) and overridable per key; unknown keys are
// rejected with the offending path.
struct RunConfig {
  // schedule
  int schedule_T = 1000;
  double schedule_beta_start = 1e-4;
  double schedule_beta_end = 0.02;

  // corpus
  int corpus_num_classes = 8;
  int corpus_per_class = 64;
  int corpus_num_frames = 32;
  int corpus_feature_dim = 6;
  int corpus_vocab_per_lang = 64;
  int corpus_caption_min_tokens = 4;
  int corpus_caption_max_tokens = 8;
  int corpus_captions_per_entry = 2;
  double corpus_jitter = 0.05;
  uint64_t corpus_seed = 1;
  int corpus_min_frames = 40;
  int corpus_max_frames = 200;

  // network preset: "desk" or "paper"; nonzero overrides win over the preset
  std::string network_preset = "desk";
  int network_d_model = 0;
  int network_blocks = 0;
  int network_heads = 0;
  int network_latent_dim = 0;

  // cross-lingual alignment
  int align_epochs = 50;
  int align_batch = 128;
  double align_lr = 1e-4;
  int align_warmup_steps = 500;
  double align_anchor_weight = 1.0;
  double align_weight_decay = 0.0;
  uint64_t align_seed = 2;
  std::string align_kl_space = "coordinates";

  // diffusion training
  int diffusion_epochs = 12;
  int diffusion_batch = 16;
  double diffusion_lr = 3e-4;
  double diffusion_weight_decay = 0.0;
  uint64_t diffusion_seed = 3;

  // reward model
  double reward_lambda1 = 1e-5;
  double reward_lambda2 = 1e-5;
  double reward_tau = 0.1;
  double reward_neg_threshold = 0.9;
  double reward_noisy_prob = 0.5;
  int reward_epochs = 24;
  int reward_batch = 32;
  double reward_lr = 1e-4;
  double reward_weight_decay = 0.0;
  uint64_t reward_seed = 4;

  // guided sampling
  std::string guidance_mode = "eq15";  // none | eq14 | eq15
  double guidance_mu = 1.0;
  double guidance_eta = 1.0;
  bool guidance_clip = true;

  // sample command
  int sample_num = 16;
  uint64_t sample_seed = 7;
  std::string sample_tokens;  // comma-separated ids within the chosen language
  std::string sample_lang = "a";
  std::string sample_from_motion_id;

  // evaluation
  int eval_pool_size = 32;
  int eval_diversity_pairs = 300;
  uint64_t eval_seed = 5;

  // annotation pipeline
  std::string pipeline_target_language = "Chinese";
  std::string pipeline_backend = "mock";
  int pipeline_max_attempts = 3;
  int pipeline_retry_base_ms = 1000;
  int pipeline_parallel_width = 4;
  bool pipeline_length_filter = true;
  std::string pipeline_http_url = "http://127.0.0.1:8080/v1/chat/completions";
  std::string pipeline_http_model = "generic";
  std::string pipeline_api_key_env = "BIMOTION_LLM_API_KEY";

  // theorem oracle
  int oracle_paths = 100000;
  uint64_t oracle_seed = 11;

  // sweep command
  std::string sweep_grid = "-0.5,-0.25,0.25,0.5,1,2";
  int sweep_num = 64;

  int threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

// field registry entry
struct ConfigField {
  enum class Kind { kInt, kDouble, kBool, kString, kUint64 };
  std::string key;
  Kind kind;
  void* ptr;
};

std::vector<ConfigField> config_fields(RunConfig& cfg);

RunConfig load_config(const std::string& path);
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

// flat dotted-key JSON, keys sorted; the hashing and manifest form
std::string config_to_json(const RunConfig& cfg);
uint64_t config_hash(const RunConfig& cfg);

}  // namespace bimotion
