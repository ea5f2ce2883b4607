#include "bimotion/guidance.hpp"

#include <cmath>

namespace bimotion {

namespace {

Mat unit_vector(const Mat& v, const char* what) {
  double n = v.frob_norm();
  require(n > 0.0, errc::runtime, std::string(what) + ": zero-norm latent");
  Mat u = v;
  for (auto& x : u.d) x /= n;
  return u;
}

struct DualNodes {
  int combined = -1;
  int cos_text = -1;
  int cos_motion = -1;
};

// shared graph for the dual reward at one (x, t); text and anchor latents are
// unit constants, so both cosines read off one motion-encoder forward
DualNodes dual_reward_nodes(Tape& t, const TapeBinding& p, const RewardConfig& cfg,
                            int x_node, int timestep, const Mat& text_unit,
                            const Mat& anchor_unit, double mu, double eta) {
  LatentNodes mn = motion_latent_nodes(t, p, cfg, x_node, timestep);
  int z_unit = t.normalize_rows(mn.mu);
  DualNodes out;
  out.cos_text = t.sum_all(t.mul(z_unit, t.constant(text_unit)));
  out.cos_motion = t.sum_all(t.mul(z_unit, t.constant(anchor_unit)));
  out.combined = t.add(t.scale(out.cos_text, mu), t.scale(out.cos_motion, eta));
  return out;
}

}  // namespace

RetrievalIndex build_index(const std::vector<CorpusEntry>& corpus,
                           const StepAwareRewardModel& m) {
  require(!corpus.empty(), errc::validation, "build_index: empty corpus");
  RetrievalIndex index;
  index.model_hash = param_hash(m.params);
  index.entries.reserve(corpus.size());

  Tape t;
  TapeBinding p = bind_params(t, m.params, false);
  size_t base = t.mark();
  for (const auto& e : corpus) {
    t.rewind(base);
    LatentNodes n = motion_latent_nodes(t, p, m.cfg, t.constant(e.motion.frames), 0);
    index.entries.push_back({e.motion_id, t.val(n.mu)});
  }
  return index;
}

AnchorResult retrieve_anchor(const RetrievalIndex& index, const std::vector<int>& tokens,
                             const StepAwareRewardModel& m) {
  require(!index.entries.empty(), errc::validation, "retrieve_anchor: empty index");
  require(index.model_hash == param_hash(m.params), errc::validation,
          "retrieve_anchor: index was built with a different reward model");
  Mat zc = encode_text(m, tokens).mu;
  int best = -1;
  double best_score = 0.0;
  for (size_t i = 0; i < index.entries.size(); ++i) {
    double score = cosine(index.entries[i].latent, zc);
    bool better = best < 0 || score > best_score ||
                  (score == best_score &&
                   index.entries[i].motion_id < index.entries[best].motion_id);
    if (better) {
      best = static_cast<int>(i);
      best_score = score;
    }
  }
  return {index.entries[best].motion_id, index.entries[best].latent};
}

double reward_m(const StepAwareRewardModel& m, const MotionSequence& x, int timestep,
                const Mat& anchor_latent) {
  return cosine(encode_motion(m, x, timestep).mu, anchor_latent);
}

double dual_reward(const StepAwareRewardModel& m, const MotionSequence& x, int timestep,
                   const std::vector<int>& tokens, const Mat& anchor_latent, double mu,
                   double eta) {
  return mu * reward_phi(m, x, timestep, tokens) + eta * reward_m(m, x, timestep, anchor_latent);
}

DualRewardGradient dual_reward_grad(const StepAwareRewardModel& m, const MotionSequence& x,
                                    int timestep, const std::vector<int>& tokens,
                                    const Mat& anchor_latent, double mu, double eta) {
  Mat text_unit = unit_vector(encode_text(m, tokens).mu, "dual_reward_grad");
  Mat anchor_unit = unit_vector(anchor_latent, "dual_reward_grad");
  Tape t;
  TapeBinding p = bind_params(t, m.params, false);
  int xin = t.leaf(x.frames, true);
  DualNodes n = dual_reward_nodes(t, p, m.cfg, xin, timestep, text_unit, anchor_unit, mu, eta);
  t.backward(n.combined);
  DualRewardGradient out;
  out.r_phi = t.scalar_val(n.cos_text);
  out.r_m = t.scalar_val(n.cos_motion);
  const Mat& g = t.grad(xin);
  out.grad = (g.size() > 0) ? MotionSequence(g)
                            : MotionSequence(x.num_frames(), x.feature_dim());
  return out;
}

MotionSequence guided_step(const MotionSequence& x_t, const MotionSequence& eps_hat, int t,
                           const NoiseSchedule& s, const MotionSequence& eps_draw,
                           const MotionSequence& reward_grad, GuidanceMode mode) {
  MotionSequence out = ddpm_update(x_t, eps_hat, t, s, eps_draw);
  double w = 1.0;
  if (mode == GuidanceMode::eq14_weighted) w = s.beta_at(t) / std::sqrt(s.alpha_at(t));
  for (size_t i = 0; i < out.frames.size(); ++i) out.frames.d[i] += w * reward_grad.frames.d[i];
  return out;
}

GuidedSampleResult guided_sample(const DenoiserNetwork& net, const StepAwareRewardModel& m,
                                 const RetrievalIndex& index, const std::vector<int>& tokens,
                                 const Mat& cond, const SamplerConfig& cfg) {
  require(cfg.schedule != nullptr, errc::validation, "guided_sample: schedule required");
  const NoiseSchedule& s = *cfg.schedule;
  bool guided = cfg.mode != GuidanceMode::none;
  bool active = guided && (cfg.mu != 0.0 || cfg.eta != 0.0);

  GuidedSampleResult res;
  Rng rng(cfg.seed);
  MotionSequence x(cfg.num_frames, net.cfg.feature_dim);
  rng.fill_normal(x.frames.d);

  Mat text_unit, anchor_unit;
  if (guided) {
    AnchorResult anchor = retrieve_anchor(index, tokens, m);
    res.anchor_id = anchor.motion_id;
    text_unit = unit_vector(encode_text(m, tokens).mu, "guided_sample");
    anchor_unit = unit_vector(anchor.latent, "guided_sample");
  }

  Tape dt;
  TapeBinding dp = bind_params(dt, net.params, false);
  size_t dbase = dt.mark();
  Tape rt;
  TapeBinding rp = bind_params(rt, m.params, false);
  size_t rbase = rt.mark();

  double ndims = static_cast<double>(cfg.num_frames) * net.cfg.feature_dim;
  for (int step = s.T; step >= 1; --step) {
    dt.rewind(dbase);
    int pred = denoiser_forward(dt, dp, net.cfg, dt.constant(x.frames), step, dt.constant(cond));
    MotionSequence eps_hat(dt.val(pred));

    MotionSequence reward_grad(cfg.num_frames, net.cfg.feature_dim);
    double grad_norm = 0.0;
    double r_phi = 0.0, r_m = 0.0;
    if (guided) {
      rt.rewind(rbase);
      int xin = rt.leaf(x.frames, active);
      DualNodes n =
          dual_reward_nodes(rt, rp, m.cfg, xin, step, text_unit, anchor_unit, cfg.mu, cfg.eta);
      r_phi = rt.scalar_val(n.cos_text);
      r_m = rt.scalar_val(n.cos_motion);
      if (active) {
        rt.backward(n.combined);
        reward_grad = MotionSequence(rt.grad(xin));
        grad_norm = reward_grad.frames.frob_norm();
        if (cfg.clip_gradients) {
          double cap = 10.0 * std::sqrt(s.beta_at(step)) * std::sqrt(ndims);
          if (grad_norm > cap && grad_norm > 0.0) {
            double scale = cap / grad_norm;
            for (auto& v : reward_grad.frames.d) v *= scale;
          }
        }
      }
    }

    MotionSequence eps_draw(cfg.num_frames, net.cfg.feature_dim);
    if (step > 1) rng.fill_normal(eps_draw.frames.d);

    x = active ? guided_step(x, eps_hat, step, s, eps_draw, reward_grad, cfg.mode)
               : ddpm_update(x, eps_hat, step, s, eps_draw);
    if (!x.frames.all_finite())
      throw error(errc::runtime,
                  "guided_sample: non-finite state at t=" + std::to_string(step) + " mode=" +
                      std::to_string(static_cast<int>(cfg.mode)) +
                      " grad_norm=" + std::to_string(grad_norm));
    if (guided) res.trace.push_back({step, r_phi, r_m, grad_norm});
  }
  res.motion = std::move(x);
  return res;
}

}  // namespace bimotion
