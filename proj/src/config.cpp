#include "bimotion/config.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace bimotion {

std::vector<ConfigField> config_fields(RunConfig& c) {
  using K = ConfigField::Kind;
  return {
      {"schedule.T", K::kInt, &c.schedule_T},
      {"schedule.beta_start", K::kDouble, &c.schedule_beta_start},
      {"schedule.beta_end", K::kDouble, &c.schedule_beta_end},
      {"corpus.num_classes", K::kInt, &c.corpus_num_classes},
      {"corpus.per_class", K::kInt, &c.corpus_per_class},
      {"corpus.num_frames", K::kInt, &c.corpus_num_frames},
      {"corpus.feature_dim", K::kInt, &c.corpus_feature_dim},
      {"corpus.vocab_per_lang", K::kInt, &c.corpus_vocab_per_lang},
      {"corpus.caption_min_tokens", K::kInt, &c.corpus_caption_min_tokens},
      {"corpus.caption_max_tokens", K::kInt, &c.corpus_caption_max_tokens},
      {"corpus.captions_per_entry", K::kInt, &c.corpus_captions_per_entry},
      {"corpus.jitter", K::kDouble, &c.corpus_jitter},
      {"corpus.seed", K::kUint64, &c.corpus_seed},
      {"corpus.min_frames", K::kInt, &c.corpus_min_frames},
      {"corpus.max_frames", K::kInt, &c.corpus_max_frames},
      {"network.preset", K::kString, &c.network_preset},
      {"network.d_model", K::kInt, &c.network_d_model},
      {"network.blocks", K::kInt, &c.network_blocks},
      {"network.heads", K::kInt, &c.network_heads},
      {"network.latent_dim", K::kInt, &c.network_latent_dim},
      {"align.epochs", K::kInt, &c.align_epochs},
      {"align.batch", K::kInt, &c.align_batch},
      {"align.lr", K::kDouble, &c.align_lr},
      {"align.warmup_steps", K::kInt, &c.align_warmup_steps},
      {"align.anchor_weight", K::kDouble, &c.align_anchor_weight},
      {"align.weight_decay", K::kDouble, &c.align_weight_decay},
      {"align.seed", K::kUint64, &c.align_seed},
      {"align.kl_space", K::kString, &c.align_kl_space},
      {"diffusion.epochs", K::kInt, &c.diffusion_epochs},
      {"diffusion.batch", K::kInt, &c.diffusion_batch},
      {"diffusion.lr", K::kDouble, &c.diffusion_lr},
      {"diffusion.weight_decay", K::kDouble, &c.diffusion_weight_decay},
      {"diffusion.seed", K::kUint64, &c.diffusion_seed},
      {"reward.lambda1", K::kDouble, &c.reward_lambda1},
      {"reward.lambda2", K::kDouble, &c.reward_lambda2},
      {"reward.tau", K::kDouble, &c.reward_tau},
      {"reward.neg_threshold", K::kDouble, &c.reward_neg_threshold},
      {"reward.noisy_prob", K::kDouble, &c.reward_noisy_prob},
      {"reward.epochs", K::kInt, &c.reward_epochs},
      {"reward.batch", K::kInt, &c.reward_batch},
      {"reward.lr", K::kDouble, &c.reward_lr},
      {"reward.weight_decay", K::kDouble, &c.reward_weight_decay},
      {"reward.seed", K::kUint64, &c.reward_seed},
      {"guidance.mode", K::kString, &c.guidance_mode},
      {"guidance.mu", K::kDouble, &c.guidance_mu},
      {"guidance.eta", K::kDouble, &c.guidance_eta},
      {"guidance.clip", K::kBool, &c.guidance_clip},
      {"sample.num", K::kInt, &c.sample_num},
      {"sample.seed", K::kUint64, &c.sample_seed},
      {"sample.tokens", K::kString, &c.sample_tokens},
      {"sample.lang", K::kString, &c.sample_lang},
      {"sample.from_motion_id", K::kString, &c.sample_from_motion_id},
      {"eval.pool_size", K::kInt, &c.eval_pool_size},
      {"eval.diversity_pairs", K::kInt, &c.eval_diversity_pairs},
      {"eval.seed", K::kUint64, &c.eval_seed},
      {"pipeline.target_language", K::kString, &c.pipeline_target_language},
      {"pipeline.backend", K::kString, &c.pipeline_backend},
      {"pipeline.max_attempts", K::kInt, &c.pipeline_max_attempts},
      {"pipeline.retry_base_ms", K::kInt, &c.pipeline_retry_base_ms},
      {"pipeline.parallel_width", K::kInt, &c.pipeline_parallel_width},
      {"pipeline.length_filter", K::kBool, &c.pipeline_length_filter},
      {"pipeline.http_url", K::kString, &c.pipeline_http_url},
      {"pipeline.http_model", K::kString, &c.pipeline_http_model},
      {"pipeline.api_key_env", K::kString, &c.pipeline_api_key_env},
      {"oracle.paths", K::kInt, &c.oracle_paths},
      {"oracle.seed", K::kUint64, &c.oracle_seed},
      {"sweep.grid", K::kString, &c.sweep_grid},
      {"sweep.num", K::kInt, &c.sweep_num},
      {"threads", K::kInt, &c.threads},
  };
}

namespace {

void set_field(const ConfigField& f, const std::string& value, const std::string& key) {
  using K = ConfigField::Kind;
  try {
    switch (f.kind) {
      case K::kInt:
        *static_cast<int*>(f.ptr) = std::stoi(value);
        break;
      case K::kDouble:
        *static_cast<double*>(f.ptr) = std::stod(value);
        break;
      case K::kUint64:
        *static_cast<uint64_t*>(f.ptr) = std::stoull(value);
        break;
      case K::kBool: {
        if (value == "true" || value == "1")
          *static_cast<bool*>(f.ptr) = true;
        else if (value == "false" || value == "0")
          *static_cast<bool*>(f.ptr) = false;
        else
          throw std::runtime_error("expected true/false");
        break;
      }
      case K::kString:
        *static_cast<std::string*>(f.ptr) = value;
        break;
    }
  } catch (const std::exception& ex) {
    throw error(errc::validation,
                "config: bad value for key " + key + ": '" + value + "' (" + ex.what() + ")");
  }
}

std::string get_field(const ConfigField& f) {
  using K = ConfigField::Kind;
  std::ostringstream os;
  os.precision(17);
  switch (f.kind) {
    case K::kInt:
      os << *static_cast<int*>(f.ptr);
      break;
    case K::kDouble:
      os << *static_cast<double*>(f.ptr);
      break;
    case K::kUint64:
      os << *static_cast<uint64_t*>(f.ptr);
      break;
    case K::kBool:
      os << (*static_cast<bool*>(f.ptr) ? "true" : "false");
      break;
    case K::kString:
      os << *static_cast<std::string*>(f.ptr);
      break;
  }
  return os.str();
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

void flatten_json(const nlohmann::json& j, const std::string& prefix,
                  std::vector<std::pair<std::string, std::string>>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it)
      flatten_json(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    return;
  }
  std::string v;
  if (j.is_string())
    v = j.get<std::string>();
  else
    v = j.dump();
  out.emplace_back(prefix, v);
}

}  // namespace

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  auto fields = config_fields(cfg);
  for (const auto& f : fields) {
    if (f.key == key) {
      set_field(f, value, key);
      return;
    }
  }
  throw error(errc::validation, "config: unknown key: " + key);
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), errc::validation, "config: cannot open " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  std::string text = buf.str();

  RunConfig cfg;
  size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const std::exception& ex) {
      throw error(errc::validation, "config: JSON parse error in " + path + ": " + ex.what());
    }
    std::vector<std::pair<std::string, std::string>> kv;
    flatten_json(j, "", kv);
    for (const auto& [k, v] : kv) apply_override(cfg, k, v);
  } else {
    std::istringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
      ++lineno;
      std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      size_t eq = t.find('=');
      require(eq != std::string::npos, errc::validation,
              "config: expected 'key = value' at " + path + ":" + std::to_string(lineno));
      apply_override(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
  }
  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  require(schedule_T >= 1, errc::validation, "config: schedule.T must be >= 1");
  require(schedule_beta_start > 0 && schedule_beta_start <= schedule_beta_end &&
              schedule_beta_end < 1,
          errc::validation, "config: need 0 < beta_start <= beta_end < 1");
  require(network_preset == "desk" || network_preset == "paper", errc::validation,
          "config: network.preset must be desk or paper");
  require(guidance_mode == "none" || guidance_mode == "eq14" || guidance_mode == "eq15",
          errc::validation, "config: guidance.mode must be none, eq14 or eq15");
  require(align_kl_space == "coordinates", errc::validation,
          "config: align.kl_space supports only 'coordinates' (the in-batch similarity"
          " variant is reserved)");
  require(reward_tau > 0, errc::validation, "config: reward.tau must be positive");
  require(reward_neg_threshold >= -1 && reward_neg_threshold <= 1, errc::validation,
          "config: reward.neg_threshold must lie in [-1,1]");
  require(reward_noisy_prob >= 0 && reward_noisy_prob <= 1, errc::validation,
          "config: reward.noisy_prob must lie in [0,1]");
  require(sample_lang == "a" || sample_lang == "b", errc::validation,
          "config: sample.lang must be a or b");
  require(pipeline_backend == "mock" || pipeline_backend == "http", errc::validation,
          "config: pipeline.backend must be mock or http");
  require(eval_pool_size >= 2, errc::validation, "config: eval.pool_size must be >= 2");
}

std::string config_to_json(const RunConfig& cfg) {
  RunConfig& mut = const_cast<RunConfig&>(cfg);
  auto fields = config_fields(mut);
  std::map<std::string, std::string> sorted;
  for (const auto& f : fields) sorted.emplace(f.key, get_field(f));
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : sorted) j[k] = v;
  return j.dump(2);
}

uint64_t config_hash(const RunConfig& cfg) {
  std::string s = config_to_json(cfg);
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace bimotion
