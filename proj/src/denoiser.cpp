#include "bimotion/denoiser.hpp"

#include <cmath>

namespace bimotion {

DenoiserNetwork make_denoiser(const DenoiserConfig& cfg, uint64_t seed) {
  require(cfg.feature_dim >= 1 && cfg.model_dim >= cfg.num_heads, errc::validation,
          "denoiser: bad dimensions");
  DenoiserNetwork net;
  net.cfg = cfg;
  Rng rng(seed);
  init_linear(net.params, "in", cfg.feature_dim, cfg.model_dim, rng, 0.1);
  init_linear(net.params, "time", cfg.model_dim, cfg.model_dim, rng, 0.1);
  init_linear(net.params, "cond", cfg.cond_dim, cfg.model_dim, rng, 0.1);
  for (int b = 0; b < cfg.num_blocks; ++b)
    init_transformer_block(net.params, "body.blk" + std::to_string(b), cfg.model_dim, 4, rng);
  init_linear(net.params, "head", cfg.model_dim, cfg.feature_dim, rng, 0.1);
  return net;
}

int denoiser_forward(Tape& t, const TapeBinding& p, const DenoiserConfig& cfg, int x_node,
                     int timestep, int cond_node) {
  const Mat& x = t.val(x_node);
  require(x.cols == cfg.feature_dim, errc::validation, "denoiser: feature dim mismatch");
  require(t.val(cond_node).cols == cfg.cond_dim, errc::validation,
          "denoiser: condition dim mismatch");
  int n = x.rows;
  int time_feat = t.constant(sinusoidal_features(static_cast<double>(timestep), cfg.model_dim));
  int prefix = t.add(t.tanh_(linear(t, p, "time", time_feat)), linear(t, p, "cond", cond_node));
  int frames = t.add(linear(t, p, "in", x_node), t.constant(positional_table(n, cfg.model_dim)));
  int seq = t.concat_rows(prefix, frames);
  for (int b = 0; b < cfg.num_blocks; ++b)
    seq = transformer_block(t, p, "body.blk" + std::to_string(b), seq, cfg.num_heads);
  int body = t.slice_rows(seq, 1, n);
  return linear(t, p, "head", body);
}

MotionSequence denoise_predict(const DenoiserNetwork& net, const MotionSequence& x_t,
                               int timestep, const Mat& cond) {
  Tape t;
  TapeBinding p = bind_params(t, net.params, false);
  int x = t.constant(x_t.frames);
  int c = t.constant(cond);
  int out = denoiser_forward(t, p, net.cfg, x, timestep, c);
  return MotionSequence(t.val(out));
}

MotionSequence ddpm_update(const MotionSequence& x_t, const MotionSequence& eps_hat, int t,
                           const NoiseSchedule& s, const MotionSequence& eps_draw) {
  require(x_t.frames.same_shape(eps_hat.frames) && x_t.frames.same_shape(eps_draw.frames),
          errc::validation, "ddpm_update: shape mismatch");
  double beta = s.beta_at(t);
  double inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha_at(t));
  double eps_coef = beta / std::sqrt(1.0 - s.alpha_bar_at(t));
  double noise_coef = std::sqrt(beta);
  MotionSequence out(x_t.num_frames(), x_t.feature_dim());
  for (size_t i = 0; i < out.frames.size(); ++i) {
    double xbar = x_t.frames.d[i] - eps_coef * eps_hat.frames.d[i];
    out.frames.d[i] = inv_sqrt_alpha * (xbar + noise_coef * eps_draw.frames.d[i]);
  }
  return out;
}

MotionSequence ddpm_step(const DenoiserNetwork& net, const MotionSequence& x_t, int t,
                         const Mat& cond, const NoiseSchedule& s,
                         const MotionSequence& eps_draw) {
  return ddpm_update(x_t, denoise_predict(net, x_t, t, cond), t, s, eps_draw);
}

int bimd_loss_node(Tape& t, const TapeBinding& p, const DenoiserConfig& cfg,
                   const MotionSequence& x_noised, int timestep, const Mat& cond,
                   const MotionSequence& eps) {
  int x = t.constant(x_noised.frames);
  int c = t.constant(cond);
  int pred = denoiser_forward(t, p, cfg, x, timestep, c);
  int diff = t.sub(t.constant(eps.frames), pred);
  return t.mean_all(t.mul(diff, diff));
}

double bimd_loss(const DenoiserNetwork& net, const MotionSequence& x0,
                 const std::vector<Mat>& cond_pool, const NoiseSchedule& s, Rng& rng) {
  require(!cond_pool.empty(), errc::validation, "bimd_loss: empty condition pool");
  int t_step = static_cast<int>(rng.uniform_int(1, s.T));
  MotionSequence eps(x0.num_frames(), x0.feature_dim());
  rng.fill_normal(eps.frames.d);
  const Mat& cond = cond_pool[rng.uniform_int(0, static_cast<int64_t>(cond_pool.size()) - 1)];
  MotionSequence x_noised = forward_noise(x0, t_step, eps, s);
  Tape tape;
  TapeBinding p = bind_params(tape, net.params, false);
  return tape.scalar_val(bimd_loss_node(tape, p, net.cfg, x_noised, t_step, cond, eps));
}

MotionSequence sample(const DenoiserNetwork& net, const Mat& cond, const SamplerConfig& cfg) {
  require(cfg.schedule != nullptr, errc::validation, "sample: schedule required");
  require(cfg.mode == GuidanceMode::none, errc::validation,
          "sample: guided modes live in the reward-guided sampler");
  Rng rng(cfg.seed);
  MotionSequence x(cfg.num_frames, net.cfg.feature_dim);
  rng.fill_normal(x.frames.d);

  Tape t;
  TapeBinding p = bind_params(t, net.params, false);
  size_t base = t.mark();
  for (int step = cfg.schedule->T; step >= 1; --step) {
    t.rewind(base);
    int xin = t.constant(x.frames);
    int c = t.constant(cond);
    int pred = denoiser_forward(t, p, net.cfg, xin, step, c);
    MotionSequence eps_hat(t.val(pred));
    MotionSequence eps_draw(cfg.num_frames, net.cfg.feature_dim);
    if (step > 1) rng.fill_normal(eps_draw.frames.d);
    x = ddpm_update(x, eps_hat, step, *cfg.schedule, eps_draw);
    if (!x.frames.all_finite())
      throw error(errc::runtime,
                  "sample: non-finite state at timestep " + std::to_string(step));
  }
  return x;
}

TrainCurve train_diffusion(DenoiserNetwork& net,
                           const std::vector<CorpusEntry>& corpus,
                           const std::vector<std::vector<Mat>>& cond_lookup,
                           const NoiseSchedule& s, const DiffusionHyper& hyper) {
  require(!corpus.empty(), errc::validation, "train_diffusion: empty corpus");
  require(cond_lookup.size() == corpus.size(), errc::validation,
          "train_diffusion: condition lookup size mismatch");

  Rng rng(hyper.seed);
  AdamW opt({hyper.lr, 0.9, 0.999, 1e-8, hyper.weight_decay});
  std::vector<int> order(corpus.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  int steps_per_epoch =
      (static_cast<int>(corpus.size()) + hyper.batch - 1) / hyper.batch;
  int64_t total_steps = static_cast<int64_t>(hyper.epochs) * steps_per_epoch;
  int64_t step = 0;

  TrainCurve curve;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_sum = 0.0;
    for (int sidx = 0; sidx < steps_per_epoch; ++sidx) {
      Tape t;
      TapeBinding p = bind_params(t, net.params, true);
      int lo = sidx * hyper.batch;
      int hi = std::min<int>(lo + hyper.batch, static_cast<int>(corpus.size()));
      int loss = -1;
      for (int k = lo; k < hi; ++k) {
        const CorpusEntry& e = corpus[order[k]];
        const auto& conds = cond_lookup[order[k]];
        int t_step = static_cast<int>(rng.uniform_int(1, s.T));
        MotionSequence eps(e.motion.num_frames(), e.motion.feature_dim());
        rng.fill_normal(eps.frames.d);
        const Mat& cond = conds[rng.uniform_int(0, static_cast<int64_t>(conds.size()) - 1)];
        MotionSequence x_noised = forward_noise(e.motion, t_step, eps, s);
        int item = bimd_loss_node(t, p, net.cfg, x_noised, t_step, cond, eps);
        loss = (loss < 0) ? item : t.add(loss, item);
      }
      loss = t.scale(loss, 1.0 / (hi - lo));
      double lval = t.scalar_val(loss);
      if (!std::isfinite(lval))
        throw error(errc::runtime, "train_diffusion: non-finite loss in epoch " +
                                       std::to_string(epoch));
      t.backward(loss);
      opt.step(net.params, collect_grads(t, p),
               warmup_cosine_lr(hyper.lr, step, 100, total_steps));
      ++step;
      epoch_sum += lval;
    }
    curve.epoch_loss.push_back(epoch_sum / steps_per_epoch);
  }
  return curve;
}

}  // namespace bimotion
