#include "bimotion/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

#include "bimotion/checkpoint.hpp"
#include "bimotion/parallel.hpp"
#include "bimotion/sde_oracle.hpp"
#include "json.hpp"

namespace bimotion {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string version_string() {
  std::string out = "bimotion-0.1.0";
  FILE* p = ::popen("git describe --always --dirty 2>/dev/null", "r");
  if (p) {
    char buf[128];
    if (fgets(buf, sizeof(buf), p)) {
      std::string g(buf);
      while (!g.empty() && (g.back() == '\n' || g.back() == '\r')) g.pop_back();
      if (!g.empty()) out += "+" + g;
    }
    ::pclose(p);
  }
  return out;
}

class ManifestScope {
 public:
  ManifestScope(const RunConfig& cfg, std::string command, std::string primary_output)
      : cfg_(cfg),
        command_(std::move(command)),
        output_(std::move(primary_output)),
        start_(std::chrono::steady_clock::now()) {}

  void add_output(const std::string& path) { extra_outputs_.push_back(path); }

  ~ManifestScope() {
    try {
      double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
                        .count();
      json j;
      j["command"] = command_;
      j["config"] = json::parse(config_to_json(cfg_));
      j["config_hash"] = config_hash(cfg_);
      j["version"] = version_string();
      j["wall_time_s"] = secs;
      j["outputs"] = extra_outputs_;
      fs::path mpath = output_ + ".manifest.json";
      fs::path tmp = mpath;
      tmp += ".partial";
      {
        std::ofstream f(tmp);
        f << j.dump(2) << "\n";
      }
      fs::rename(tmp, mpath);
    } catch (...) {
      // manifests must never mask the command result
    }
  }

 private:
  const RunConfig& cfg_;
  std::string command_;
  std::string output_;
  std::vector<std::string> extra_outputs_;
  std::chrono::steady_clock::time_point start_;
};

std::vector<int> parse_token_list(const std::string& s) {
  std::vector<int> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',' || c == ' ') {
      if (!cur.empty()) out.push_back(std::stoi(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

json dims_to_json(const NetworkDims& d) {
  return {{"text_d_model", d.text_d_model},       {"text_blocks", d.text_blocks},
          {"text_heads", d.text_heads},           {"text_out_dim", d.text_out_dim},
          {"denoiser_d_model", d.denoiser_d_model}, {"denoiser_blocks", d.denoiser_blocks},
          {"denoiser_heads", d.denoiser_heads},   {"reward_d_model", d.reward_d_model},
          {"reward_blocks", d.reward_blocks},     {"reward_heads", d.reward_heads},
          {"reward_latent_dim", d.reward_latent_dim}};
}

}  // namespace

NetworkDims resolve_dims(const RunConfig& cfg) {
  NetworkDims d;
  if (cfg.network_preset == "paper") {
    d.text_d_model = 256;
    d.text_blocks = 9;
    d.text_heads = 4;
    d.text_out_dim = 256;
    d.denoiser_d_model = 256;
    d.denoiser_blocks = 9;
    d.denoiser_heads = 4;
    d.reward_d_model = 256;
    d.reward_blocks = 9;
    d.reward_heads = 4;
    d.reward_latent_dim = 256;
  }
  if (cfg.network_d_model > 0) {
    d.text_d_model = cfg.network_d_model;
    d.text_out_dim = cfg.network_d_model;
    d.denoiser_d_model = cfg.network_d_model;
    d.reward_d_model = cfg.network_d_model;
  }
  if (cfg.network_blocks > 0) {
    d.text_blocks = cfg.network_blocks;
    d.denoiser_blocks = cfg.network_blocks;
    d.reward_blocks = cfg.network_blocks;
  }
  if (cfg.network_heads > 0) {
    d.text_heads = cfg.network_heads;
    d.denoiser_heads = cfg.network_heads;
    d.reward_heads = cfg.network_heads;
  }
  if (cfg.network_latent_dim > 0) d.reward_latent_dim = cfg.network_latent_dim;
  return d;
}

NoiseSchedule schedule_from_config(const RunConfig& cfg) {
  return make_linear_schedule(cfg.schedule_T, cfg.schedule_beta_start, cfg.schedule_beta_end);
}

CorpusParams corpus_params_from_config(const RunConfig& cfg) {
  CorpusParams p;
  p.num_classes = cfg.corpus_num_classes;
  p.per_class = cfg.corpus_per_class;
  p.num_frames = cfg.corpus_num_frames;
  p.feature_dim = cfg.corpus_feature_dim;
  p.vocab_per_lang = cfg.corpus_vocab_per_lang;
  p.caption_min_tokens = cfg.corpus_caption_min_tokens;
  p.caption_max_tokens = cfg.corpus_caption_max_tokens;
  p.captions_per_entry = cfg.corpus_captions_per_entry;
  p.jitter = cfg.corpus_jitter;
  p.seed = cfg.corpus_seed;
  return p;
}

int thread_count(const RunConfig& cfg) {
  return cfg.threads > 0 ? cfg.threads : default_threads();
}

void save_text_encoder(const std::string& path, const TextEncoder& enc,
                       const std::string& component, uint64_t cfg_hash) {
  json meta = {{"vocab_size", enc.cfg.vocab_size}, {"d_model", enc.cfg.d_model},
               {"num_blocks", enc.cfg.num_blocks}, {"num_heads", enc.cfg.num_heads},
               {"out_dim", enc.cfg.out_dim}};
  save_checkpoint(path, component, cfg_hash, meta.dump(), enc.params);
}

TextEncoder load_text_encoder(const std::string& path, const std::string& component) {
  LoadedCheckpoint ck = load_checkpoint(path, component);
  json meta = json::parse(ck.meta_json);
  TextEncoder enc;
  enc.cfg.vocab_size = meta.at("vocab_size");
  enc.cfg.d_model = meta.at("d_model");
  enc.cfg.num_blocks = meta.at("num_blocks");
  enc.cfg.num_heads = meta.at("num_heads");
  enc.cfg.out_dim = meta.at("out_dim");
  enc.params = std::move(ck.params);
  return enc;
}

void save_denoiser(const std::string& path, const DenoiserNetwork& net, uint64_t cfg_hash) {
  json meta = {{"feature_dim", net.cfg.feature_dim}, {"model_dim", net.cfg.model_dim},
               {"num_blocks", net.cfg.num_blocks},   {"num_heads", net.cfg.num_heads},
               {"cond_dim", net.cfg.cond_dim}};
  save_checkpoint(path, "denoiser", cfg_hash, meta.dump(), net.params);
}

DenoiserNetwork load_denoiser(const std::string& path) {
  LoadedCheckpoint ck = load_checkpoint(path, "denoiser");
  json meta = json::parse(ck.meta_json);
  DenoiserNetwork net;
  net.cfg.feature_dim = meta.at("feature_dim");
  net.cfg.model_dim = meta.at("model_dim");
  net.cfg.num_blocks = meta.at("num_blocks");
  net.cfg.num_heads = meta.at("num_heads");
  net.cfg.cond_dim = meta.at("cond_dim");
  net.params = std::move(ck.params);
  return net;
}

void save_reward_model(const std::string& path, const StepAwareRewardModel& m,
                       uint64_t cfg_hash) {
  json meta = {{"feature_dim", m.cfg.feature_dim}, {"vocab_size", m.cfg.vocab_size},
               {"d_model", m.cfg.d_model},         {"num_blocks", m.cfg.num_blocks},
               {"num_heads", m.cfg.num_heads},     {"latent_dim", m.cfg.latent_dim},
               {"max_timestep", m.cfg.max_timestep}};
  save_checkpoint(path, "reward", cfg_hash, meta.dump(), m.params);
}

StepAwareRewardModel load_reward_model(const std::string& path) {
  LoadedCheckpoint ck = load_checkpoint(path, "reward");
  json meta = json::parse(ck.meta_json);
  StepAwareRewardModel m;
  m.cfg.feature_dim = meta.at("feature_dim");
  m.cfg.vocab_size = meta.at("vocab_size");
  m.cfg.d_model = meta.at("d_model");
  m.cfg.num_blocks = meta.at("num_blocks");
  m.cfg.num_heads = meta.at("num_heads");
  m.cfg.latent_dim = meta.at("latent_dim");
  m.cfg.max_timestep = meta.at("max_timestep");
  m.params = std::move(ck.params);
  return m;
}

void save_samples(const std::vector<SampleRecord>& samples, int vocab_per_lang,
                  const std::string& path) {
  fs::path tmp = path + ".partial";
  {
    std::ofstream f(tmp);
    require(f.good(), errc::runtime, "save_samples: cannot write " + tmp.string());
    for (const auto& s : samples) {
      json j;
      j["motion_id"] = s.motion_id;
      json frames = json::array();
      for (int i = 0; i < s.motion.num_frames(); ++i) {
        json row = json::array();
        for (int c = 0; c < s.motion.feature_dim(); ++c) row.push_back(s.motion.frames.at(i, c));
        frames.push_back(std::move(row));
      }
      j["frames"] = std::move(frames);
      bool lang_b = !s.tokens.empty() && s.tokens[0] >= vocab_per_lang;
      j["captions"] = json::array({{{"lang", lang_b ? "b" : "a"}, {"tokens", s.tokens}}});
      j["class"] = -1;
      if (!s.anchor_id.empty()) j["anchor_id"] = s.anchor_id;
      f << j.dump() << "\n";
    }
  }
  fs::rename(tmp, path);
}

std::vector<SampleRecord> load_samples(const std::string& path, int /*vocab_per_lang*/) {
  std::ifstream f(path);
  require(f.good(), errc::validation, "load_samples: cannot open " + path);
  std::vector<SampleRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      SampleRecord s;
      s.motion_id = j.at("motion_id").get<std::string>();
      const auto& frames = j.at("frames");
      int n = static_cast<int>(frames.size());
      int d = static_cast<int>(frames.at(0).size());
      s.motion = MotionSequence(n, d);
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < d; ++c) s.motion.frames.at(i, c) = frames.at(i).at(c).get<double>();
      const auto& caps = j.at("captions");
      require(!caps.empty(), errc::validation, "sample without caption");
      s.tokens = caps.at(0).at("tokens").get<std::vector<int>>();
      if (j.contains("anchor_id")) s.anchor_id = j.at("anchor_id").get<std::string>();
      out.push_back(std::move(s));
    } catch (const std::exception& ex) {
      throw error(errc::validation, "load_samples: bad record at " + path + ":" +
                                        std::to_string(lineno) + ": " + ex.what());
    }
  }
  return out;
}

void cmd_gen_corpus(const RunConfig& cfg, const std::string& out_path) {
  ManifestScope manifest(cfg, "gen-corpus", out_path);
  auto entries = generate_corpus(corpus_params_from_config(cfg));
  fs::path tmp = out_path + ".partial";
  save_corpus(entries, tmp.string());
  fs::rename(tmp, out_path);
  manifest.add_output(out_path);
}

void cmd_align_text(const RunConfig& cfg, const std::string& corpus_path,
                    const std::string& out_ckpt) {
  ManifestScope manifest(cfg, "align-text", out_ckpt);
  auto corpus = load_corpus(corpus_path);
  NetworkDims dims = resolve_dims(cfg);

  TextEncoderConfig tcfg;
  tcfg.vocab_size = cfg.corpus_vocab_per_lang;  // teacher covers language A only
  tcfg.d_model = dims.text_d_model;
  tcfg.num_blocks = dims.text_blocks;
  tcfg.num_heads = dims.text_heads;
  tcfg.out_dim = dims.text_out_dim;
  TextEncoder teacher = make_text_encoder(tcfg, Rng::mix(cfg.align_seed, 0x7EAC));
  // the frozen teacher stands in for a pretrained semantic encoder: its token
  // embeddings carry the synonym/instance/filler structure of the vocabulary
  *teacher.params.find("tok") = semantic_token_table(
      cfg.corpus_vocab_per_lang, dims.text_d_model, Rng::mix(cfg.align_seed, 0x5E3A));

  TextEncoderConfig scfg = tcfg;
  scfg.vocab_size = 2 * cfg.corpus_vocab_per_lang;  // student spans both languages
  TextEncoder student = make_text_encoder(scfg, Rng::mix(cfg.align_seed, 1));

  DistillHyper hyper;
  hyper.epochs = cfg.align_epochs;
  hyper.batch = cfg.align_batch;
  hyper.lr = cfg.align_lr;
  hyper.warmup_steps = cfg.align_warmup_steps;
  hyper.anchor_weight = cfg.align_anchor_weight;
  hyper.weight_decay = cfg.align_weight_decay;
  hyper.seed = cfg.align_seed;
  DistillResult res = distill(teacher, student, corpus, hyper);
  for (size_t e = 0; e < res.epoch_loss.size(); ++e)
    std::fprintf(stderr, "align epoch %zu loss %.6f\n", e + 1, res.epoch_loss[e]);

  uint64_t h = config_hash(cfg);
  save_text_encoder(out_ckpt, student, "text_student", h);
  std::string teacher_path = out_ckpt + ".teacher";
  save_text_encoder(teacher_path, teacher, "text_teacher", h);
  manifest.add_output(out_ckpt);
  manifest.add_output(teacher_path);
}

void cmd_train_reward(const RunConfig& cfg, const std::string& corpus_path,
                      const std::string& out_ckpt) {
  ManifestScope manifest(cfg, "train-reward", out_ckpt);
  auto corpus = load_corpus(corpus_path);
  NetworkDims dims = resolve_dims(cfg);
  NoiseSchedule sched = schedule_from_config(cfg);

  RewardConfig rcfg;
  rcfg.feature_dim = cfg.corpus_feature_dim;
  rcfg.vocab_size = 2 * cfg.corpus_vocab_per_lang;
  rcfg.d_model = dims.reward_d_model;
  rcfg.num_blocks = dims.reward_blocks;
  rcfg.num_heads = dims.reward_heads;
  rcfg.latent_dim = dims.reward_latent_dim;
  rcfg.max_timestep = cfg.schedule_T;
  StepAwareRewardModel model = make_reward_model(rcfg, Rng::mix(cfg.reward_seed, 0));

  RewardHyper hyper;
  hyper.lambda1 = cfg.reward_lambda1;
  hyper.lambda2 = cfg.reward_lambda2;
  hyper.tau = cfg.reward_tau;
  hyper.neg_threshold = cfg.reward_neg_threshold;
  hyper.noisy_prob = cfg.reward_noisy_prob;
  hyper.epochs = cfg.reward_epochs;
  hyper.batch = cfg.reward_batch;
  hyper.lr = cfg.reward_lr;
  hyper.weight_decay = cfg.reward_weight_decay;
  hyper.seed = cfg.reward_seed;
  RewardTrainCurves curves = train_reward(model, corpus, sched, hyper);
  for (size_t e = 0; e < curves.total.size(); ++e)
    std::fprintf(stderr, "reward epoch %zu loss %.6f (contrastive %.6f)\n", e + 1,
                 curves.total[e], curves.contrastive[e]);

  save_reward_model(out_ckpt, model, config_hash(cfg));
  manifest.add_output(out_ckpt);
}

void cmd_train_diffusion(const RunConfig& cfg, const std::string& corpus_path,
                         const std::string& text_ckpt, const std::string& out_ckpt) {
  ManifestScope manifest(cfg, "train-diffusion", out_ckpt);
  auto corpus = load_corpus(corpus_path);
  TextEncoder student = load_text_encoder(text_ckpt, "text_student");
  NetworkDims dims = resolve_dims(cfg);
  NoiseSchedule sched = schedule_from_config(cfg);

  DenoiserConfig dcfg;
  dcfg.feature_dim = cfg.corpus_feature_dim;
  dcfg.model_dim = dims.denoiser_d_model;
  dcfg.num_blocks = dims.denoiser_blocks;
  dcfg.num_heads = dims.denoiser_heads;
  dcfg.cond_dim = student.cfg.out_dim;
  DenoiserNetwork net = make_denoiser(dcfg, Rng::mix(cfg.diffusion_seed, 0));

  // precompute caption embeddings in both languages
  std::vector<std::vector<Mat>> cond_lookup(corpus.size());
  parallel_for(static_cast<int>(corpus.size()), thread_count(cfg), [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i)
      for (const auto& rec : corpus[i].captions) {
        cond_lookup[i].push_back(encode(student, rec.tokens_lang_a));
        cond_lookup[i].push_back(encode(student, rec.tokens_lang_b));
      }
  });

  DiffusionHyper hyper;
  hyper.epochs = cfg.diffusion_epochs;
  hyper.batch = cfg.diffusion_batch;
  hyper.lr = cfg.diffusion_lr;
  hyper.weight_decay = cfg.diffusion_weight_decay;
  hyper.seed = cfg.diffusion_seed;
  TrainCurve curve = train_diffusion(net, corpus, cond_lookup, sched, hyper);
  for (size_t e = 0; e < curve.epoch_loss.size(); ++e)
    std::fprintf(stderr, "diffusion epoch %zu loss %.6f\n", e + 1, curve.epoch_loss[e]);

  save_denoiser(out_ckpt, net, config_hash(cfg));
  manifest.add_output(out_ckpt);
}

namespace {

GuidanceMode mode_from_string(const std::string& s) {
  if (s == "none") return GuidanceMode::none;
  if (s == "eq14") return GuidanceMode::eq14_weighted;
  if (s == "eq15") return GuidanceMode::eq15_unweighted;
  throw error(errc::validation, "unknown guidance mode: " + s);
}

std::vector<int> resolve_sample_tokens(const RunConfig& cfg,
                                       const std::vector<CorpusEntry>* corpus) {
  if (!cfg.sample_from_motion_id.empty()) {
    require(corpus != nullptr, errc::validation,
            "sample: --corpus required with sample.from_motion_id");
    for (const auto& e : *corpus)
      if (e.motion_id == cfg.sample_from_motion_id)
        return cfg.sample_lang == "a" ? e.captions.at(0).tokens_lang_a
                                      : e.captions.at(0).tokens_lang_b;
    throw error(errc::validation, "sample: motion_id not found: " + cfg.sample_from_motion_id);
  }
  require(!cfg.sample_tokens.empty(), errc::validation,
          "sample: sample.tokens or sample.from_motion_id required");
  std::vector<int> toks = parse_token_list(cfg.sample_tokens);
  int offset = cfg.sample_lang == "b" ? cfg.corpus_vocab_per_lang : 0;
  for (auto& t : toks) {
    require(t >= 0 && t < cfg.corpus_vocab_per_lang, errc::validation,
            "sample: token id outside the per-language vocabulary");
    t += offset;
  }
  return toks;
}

}  // namespace

void cmd_sample(const RunConfig& cfg, const std::string& diffusion_ckpt,
                const std::string& text_ckpt, const std::string& reward_ckpt,
                const std::string& corpus_path, const std::string& out_samples,
                const std::string& out_trace) {
  ManifestScope manifest(cfg, "sample", out_samples);
  DenoiserNetwork net = load_denoiser(diffusion_ckpt);
  TextEncoder student = load_text_encoder(text_ckpt, "text_student");
  GuidanceMode mode = mode_from_string(cfg.guidance_mode);

  std::vector<CorpusEntry> corpus;
  const std::vector<CorpusEntry>* corpus_ptr = nullptr;
  if (!corpus_path.empty()) {
    corpus = load_corpus(corpus_path);
    corpus_ptr = &corpus;
  }
  // one caption for every sample, or cycle the corpus captions ("*")
  bool cycle = cfg.sample_from_motion_id == "*";
  std::vector<std::vector<int>> per_sample_tokens(cfg.sample_num);
  if (cycle) {
    require(corpus_ptr != nullptr && !corpus.empty(), errc::validation,
            "sample: --corpus required to cycle captions");
    for (int i = 0; i < cfg.sample_num; ++i) {
      const CaptionRecord& rec = corpus[i % corpus.size()].captions.at(0);
      per_sample_tokens[i] =
          cfg.sample_lang == "a" ? rec.tokens_lang_a : rec.tokens_lang_b;
    }
  } else {
    std::vector<int> tokens = resolve_sample_tokens(cfg, corpus_ptr);
    for (auto& t : per_sample_tokens) t = tokens;
  }
  std::vector<Mat> per_sample_cond(cfg.sample_num);
  for (int i = 0; i < cfg.sample_num; ++i)
    per_sample_cond[i] = encode(student, per_sample_tokens[i]);

  StepAwareRewardModel reward;
  RetrievalIndex index;
  if (mode != GuidanceMode::none) {
    require(!reward_ckpt.empty(), errc::validation, "sample: guided mode needs a reward model");
    require(corpus_ptr != nullptr, errc::validation,
            "sample: guided mode needs the corpus for anchor retrieval");
    reward = load_reward_model(reward_ckpt);
    index = build_index(corpus, reward);
  }

  NoiseSchedule sched = schedule_from_config(cfg);
  SamplerConfig scfg;
  scfg.schedule = &sched;
  scfg.num_frames = cfg.corpus_num_frames;
  scfg.mode = mode;
  scfg.mu = cfg.guidance_mu;
  scfg.eta = cfg.guidance_eta;
  scfg.clip_gradients = cfg.guidance_clip;

  std::vector<SampleRecord> records(cfg.sample_num);
  std::vector<std::vector<StepTraceRow>> traces(cfg.sample_num);
  Rng root(cfg.sample_seed);
  parallel_for(cfg.sample_num, thread_count(cfg), [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      SamplerConfig local = scfg;
      local.seed = Rng::mix(cfg.sample_seed, static_cast<uint64_t>(i));
      char idbuf[32];
      std::snprintf(idbuf, sizeof(idbuf), "sample_%04d", i);
      SampleRecord rec;
      rec.motion_id = idbuf;
      rec.tokens = per_sample_tokens[i];
      if (mode == GuidanceMode::none) {
        rec.motion = sample(net, per_sample_cond[i], local);
      } else {
        GuidedSampleResult res =
            guided_sample(net, reward, index, per_sample_tokens[i], per_sample_cond[i], local);
        rec.motion = std::move(res.motion);
        rec.anchor_id = res.anchor_id;
        traces[i] = std::move(res.trace);
      }
      records[i] = std::move(rec);
    }
  });

  save_samples(records, cfg.corpus_vocab_per_lang, out_samples);
  manifest.add_output(out_samples);
  if (!out_trace.empty() && mode != GuidanceMode::none) {
    fs::path tmp = out_trace + ".partial";
    {
      std::ofstream f(tmp);
      require(f.good(), errc::runtime, "sample: cannot write trace " + out_trace);
      f << "sample_index,t,r_phi,r_m,grad_norm\n";
      char buf[160];
      for (int i = 0; i < cfg.sample_num; ++i)
        for (const auto& row : traces[i]) {
          std::snprintf(buf, sizeof(buf), "%d,%d,%.10g,%.10g,%.10g\n", i, row.t, row.r_phi,
                        row.r_m, row.grad_norm);
          f << buf;
        }
    }
    fs::rename(tmp, out_trace);
    manifest.add_output(out_trace);
  }
}

MetricReport cmd_evaluate(const RunConfig& cfg, const std::string& samples_path,
                          const std::string& corpus_path, const std::string& reward_ckpt,
                          const std::string& out_report) {
  ManifestScope manifest(cfg, "evaluate", out_report);
  auto samples = load_samples(samples_path, cfg.corpus_vocab_per_lang);
  auto corpus = load_corpus(corpus_path);
  StepAwareRewardModel reward = load_reward_model(reward_ckpt);
  require(!samples.empty(), errc::validation, "evaluate: empty sample file");

  int threads = thread_count(cfg);
  std::vector<Mat> gen_latents(samples.size()), text_latents(samples.size());
  parallel_for(static_cast<int>(samples.size()), threads, [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      gen_latents[i] = encode_motion(reward, samples[i].motion, 0).mu;
      text_latents[i] = encode_text(reward, samples[i].tokens).mu;
    }
  });
  std::vector<Mat> real_latents(corpus.size());
  parallel_for(static_cast<int>(corpus.size()), threads, [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i)
      real_latents[i] = encode_motion(reward, corpus[i].motion, 0).mu;
  });

  MetricReport rep;
  rep.num_samples = static_cast<int>(samples.size());
  rep.pool_size = cfg.eval_pool_size;
  auto rp = r_precision(gen_latents, text_latents, cfg.eval_pool_size, cfg.eval_seed);
  for (int k = 0; k < 3; ++k) rep.r_precision[k] = rp[k];
  rep.fid = fid(gen_latents, real_latents);
  rep.mm_dist = mm_dist(gen_latents, text_latents);
  int pairs = std::min(cfg.eval_diversity_pairs, static_cast<int>(samples.size()) / 2);
  rep.diversity = diversity(gen_latents, pairs, cfg.eval_seed + 1);

  json j = {{"r_precision", {rep.r_precision[0], rep.r_precision[1], rep.r_precision[2]}},
            {"fid", rep.fid},
            {"mm_dist", rep.mm_dist},
            {"diversity", rep.diversity},
            {"pool_size", rep.pool_size},
            {"num_samples", rep.num_samples}};
  fs::path tmp = out_report + ".partial";
  {
    std::ofstream f(tmp);
    require(f.good(), errc::runtime, "evaluate: cannot write " + out_report);
    f << j.dump(2) << "\n";
  }
  fs::rename(tmp, out_report);
  manifest.add_output(out_report);
  return rep;
}

bool cmd_verify_theorems(const RunConfig& cfg, const std::string& out_csv) {
  ManifestScope manifest(cfg, "verify-theorems", out_csv.empty() ? "verify-theorems" : out_csv);
  TheoremReport rep = run_theorem_suite(cfg.oracle_paths, cfg.oracle_seed, thread_count(cfg));
  for (const auto& c : rep.checks)
    std::printf("%-32s %s  value=%.8g target=%.8g tol=%.3g\n", c.name.c_str(),
                c.pass ? "PASS" : "FAIL", c.value, c.target, c.tolerance);
  if (!out_csv.empty()) {
    fs::path tmp = out_csv + ".partial";
    {
      std::ofstream f(tmp);
      require(f.good(), errc::runtime, "verify-theorems: cannot write " + out_csv);
      f << "check,pass,value,target,tolerance\n";
      char buf[256];
      for (const auto& c : rep.checks) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%.12g,%.12g,%.12g\n", c.name.c_str(),
                      c.pass ? 1 : 0, c.value, c.target, c.tolerance);
        f << buf;
      }
    }
    fs::rename(tmp, out_csv);
    manifest.add_output(out_csv);
  }
  return rep.all_pass();
}

namespace {

PipelineConfig pipeline_config_from(const RunConfig& cfg) {
  PipelineConfig p;
  p.target_language = cfg.pipeline_target_language;
  p.max_attempts = cfg.pipeline_max_attempts;
  p.retry_base_ms = cfg.pipeline_retry_base_ms;
  p.parallel_width = cfg.pipeline_parallel_width;
  p.length_filter = cfg.pipeline_length_filter;
  p.min_frames = cfg.corpus_min_frames;
  p.max_frames = cfg.corpus_max_frames;
  return p;
}

}  // namespace

PipelineSummary cmd_pipeline_run(const RunConfig& cfg, const std::string& input_path,
                                 const std::string& out_dir) {
  ManifestScope manifest(cfg, "pipeline-run", (fs::path(out_dir) / "pipeline").string());
  std::unique_ptr<LlmBackend> backend;
  if (cfg.pipeline_backend == "mock") {
    backend = std::make_unique<MockLlmBackend>();
  } else {
    HttpBackendConfig hb;
    hb.url = cfg.pipeline_http_url;
    hb.model = cfg.pipeline_http_model;
    hb.api_key_env = cfg.pipeline_api_key_env;
    backend = std::make_unique<HttpLlmBackend>(hb);
  }
  PipelineSummary s = run_pipeline(input_path, *backend, out_dir, pipeline_config_from(cfg));
  std::fprintf(stderr,
               "pipeline: %d groups (%d skipped, %d failed), items accepted %d review %d"
               " failed %d, llm calls %lld\n",
               s.groups_total, s.groups_skipped, s.groups_failed, s.accepted_items,
               s.review_items, s.failed_items, static_cast<long long>(s.llm_calls));
  manifest.add_output((fs::path(out_dir) / "accepted.jsonl").string());
  return s;
}

ReviewApplyResult cmd_pipeline_review_apply(const RunConfig& cfg, const std::string& out_dir,
                                            const std::string& review_path) {
  ManifestScope manifest(cfg, "pipeline-review-apply",
                         (fs::path(out_dir) / "review_apply").string());
  ReviewApplyResult r = review_apply(out_dir, review_path);
  std::fprintf(stderr, "review-apply: %d item(s) accepted, %d remain in queue\n",
               r.moved_to_accepted, r.remaining);
  return r;
}

void cmd_sweep(const RunConfig& cfg, const std::string& diffusion_ckpt,
               const std::string& text_ckpt, const std::string& reward_ckpt,
               const std::string& corpus_path, const std::string& out_csv) {
  ManifestScope manifest(cfg, "sweep", out_csv);
  std::vector<double> grid;
  for (const std::string& tok : [&] {
         std::vector<std::string> parts;
         std::string cur;
         for (char c : cfg.sweep_grid + ",") {
           if (c == ',') {
             if (!cur.empty()) parts.push_back(cur);
             cur.clear();
           } else if (c != ' ') {
             cur += c;
           }
         }
         return parts;
       }())
    grid.push_back(std::stod(tok));

  fs::path tmp_dir = fs::path(out_csv).parent_path();
  if (tmp_dir.empty()) tmp_dir = ".";
  fs::path tmp = out_csv + ".partial";
  std::ofstream f(tmp);
  require(f.good(), errc::runtime, "sweep: cannot write " + out_csv);
  f << "mu,eta,rp1,rp2,rp3,fid,mm_dist,diversity\n";
  for (double g : grid) {
    RunConfig point = cfg;
    point.guidance_mode = (g == 0.0) ? "none" : cfg.guidance_mode;
    point.guidance_mu = g;
    point.guidance_eta = g;
    point.sample_num = cfg.sweep_num;
    // sweep metrics need per-sample captions; cycle the corpus by default
    if (point.sample_tokens.empty() && point.sample_from_motion_id.empty())
      point.sample_from_motion_id = "*";
    std::string samples = (tmp_dir / ("sweep_samples_" + std::to_string(g) + ".jsonl")).string();
    std::string report = samples + ".report.json";
    cmd_sample(point, diffusion_ckpt, text_ckpt, reward_ckpt, corpus_path, samples, "");
    MetricReport rep = cmd_evaluate(point, samples, corpus_path, reward_ckpt, report);
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n", g, g,
                  rep.r_precision[0], rep.r_precision[1], rep.r_precision[2], rep.fid,
                  rep.mm_dist, rep.diversity);
    f << buf;
  }
  f.close();
  fs::rename(tmp, out_csv);
  manifest.add_output(out_csv);
}

}  // namespace bimotion
