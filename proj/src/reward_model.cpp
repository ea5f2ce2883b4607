#include "bimotion/reward_model.hpp"

#include <cmath>

namespace bimotion {

StepAwareRewardModel make_reward_model(const RewardConfig& cfg, uint64_t seed) {
  require(cfg.feature_dim >= 1 && cfg.latent_dim >= 2 && cfg.d_model >= cfg.num_heads,
          errc::validation, "reward model: bad dimensions");
  StepAwareRewardModel m;
  m.cfg = cfg;
  Rng rng(seed);
  init_linear(m.params, "m.in", cfg.feature_dim, cfg.d_model, rng, 0.1);
  init_linear(m.params, "m.time", cfg.d_model, cfg.d_model, rng, 0.1);
  for (int b = 0; b < cfg.num_blocks; ++b)
    init_transformer_block(m.params, "m.enc.blk" + std::to_string(b), cfg.d_model, 4, rng);
  init_linear(m.params, "m.mu", cfg.d_model, cfg.latent_dim, rng, 0.1);
  init_linear(m.params, "m.ls", cfg.d_model, cfg.latent_dim, rng, 0.01);
  m.params.add("t.tok", Mat::randn(cfg.vocab_size, cfg.d_model, rng, 0.1));
  for (int b = 0; b < cfg.num_blocks; ++b)
    init_transformer_block(m.params, "t.enc.blk" + std::to_string(b), cfg.d_model, 4, rng);
  init_linear(m.params, "t.mu", cfg.d_model, cfg.latent_dim, rng, 0.1);
  init_linear(m.params, "t.ls", cfg.d_model, cfg.latent_dim, rng, 0.01);
  init_linear(m.params, "d.z", cfg.latent_dim, cfg.d_model, rng, 0.1);
  for (int b = 0; b < cfg.num_blocks; ++b)
    init_transformer_block(m.params, "d.dec.blk" + std::to_string(b), cfg.d_model, 4, rng);
  init_linear(m.params, "d.out", cfg.d_model, cfg.feature_dim, rng, 0.1);
  // start latent spreads small so early contrastive batches are informative
  if (Mat* b = m.params.find("m.ls.b")) *b = Mat::filled(1, cfg.latent_dim, -2.0);
  if (Mat* b = m.params.find("t.ls.b")) *b = Mat::filled(1, cfg.latent_dim, -2.0);
  return m;
}

LatentNodes motion_latent_nodes(Tape& t, const TapeBinding& p, const RewardConfig& cfg,
                                int x_node, int timestep) {
  require(timestep >= 0 && timestep <= cfg.max_timestep, errc::validation,
          "encode_motion: timestep out of range");
  const Mat& x = t.val(x_node);
  require(x.cols == cfg.feature_dim, errc::validation, "encode_motion: feature dim mismatch");
  int time_feat = t.constant(sinusoidal_features(static_cast<double>(timestep), cfg.d_model));
  int step_token = t.tanh_(linear(t, p, "m.time", time_feat));
  int frames =
      t.add(linear(t, p, "m.in", x_node), t.constant(positional_table(x.rows, cfg.d_model)));
  int seq = t.concat_rows(step_token, frames);
  seq = transformer_stack(t, p, "m.enc", seq, cfg.num_blocks, cfg.num_heads);
  int pooled = t.mean_rows(seq);
  LatentNodes out;
  out.mu = linear(t, p, "m.mu", pooled);
  out.log_sigma = linear(t, p, "m.ls", pooled);
  return out;
}

LatentNodes text_latent_nodes(Tape& t, const TapeBinding& p, const RewardConfig& cfg,
                              const std::vector<int>& tokens) {
  require(!tokens.empty(), errc::validation, "encode_text: empty token sequence");
  for (int tok : tokens)
    require(tok >= 0 && tok < cfg.vocab_size, errc::validation,
            "encode_text: token id out of vocabulary: " + std::to_string(tok));
  // token bags: no positional features on the text side
  int emb = t.gather_rows(p("t.tok"), tokens);
  int seq = transformer_stack(t, p, "t.enc", emb, cfg.num_blocks, cfg.num_heads);
  int pooled = t.mean_rows(seq);
  LatentNodes out;
  out.sentence_state = pooled;
  out.mu = linear(t, p, "t.mu", pooled);
  out.log_sigma = linear(t, p, "t.ls", pooled);
  return out;
}

int decode_motion_node(Tape& t, const TapeBinding& p, const RewardConfig& cfg, int z_node,
                       int num_frames) {
  int zproj = linear(t, p, "d.z", z_node);
  int queries = t.add_rowvec(t.constant(positional_table(num_frames, cfg.d_model)), zproj);
  int seq = transformer_stack(t, p, "d.dec", queries, cfg.num_blocks, cfg.num_heads);
  return linear(t, p, "d.out", seq);
}

DistributionalLatent encode_motion(const StepAwareRewardModel& m, const MotionSequence& x,
                                   int timestep) {
  Tape t;
  TapeBinding p = bind_params(t, m.params, false);
  LatentNodes n = motion_latent_nodes(t, p, m.cfg, t.constant(x.frames), timestep);
  return {t.val(n.mu), t.val(n.log_sigma)};
}

DistributionalLatent encode_text(const StepAwareRewardModel& m,
                                 const std::vector<int>& tokens) {
  Tape t;
  TapeBinding p = bind_params(t, m.params, false);
  LatentNodes n = text_latent_nodes(t, p, m.cfg, tokens);
  return {t.val(n.mu), t.val(n.log_sigma)};
}

MotionSequence decode_motion(const StepAwareRewardModel& m, const Mat& z, int num_frames) {
  Tape t;
  TapeBinding p = bind_params(t, m.params, false);
  int out = decode_motion_node(t, p, m.cfg, t.constant(z), num_frames);
  return MotionSequence(t.val(out));
}

int gaussian_kl_node(Tape& t, int mu1, int ls1, int mu2, int ls2) {
  // KL(N1 || N2) = 0.5 sum[ exp(2(ls1-ls2)) + (mu1-mu2)^2 exp(-2 ls2) - 1 + 2(ls2-ls1) ]
  int dls = t.sub(ls1, ls2);
  int var_ratio = t.exp_(t.scale(dls, 2.0));
  int dmu = t.sub(mu1, mu2);
  int maha = t.mul(t.mul(dmu, dmu), t.exp_(t.scale(ls2, -2.0)));
  int inner = t.add_const(t.sub(t.add(var_ratio, maha), t.scale(dls, 2.0)), -1.0);
  return t.scale(t.sum_all(inner), 0.5);
}

int gaussian_kl_std_node(Tape& t, int mu, int ls) {
  int var = t.exp_(t.scale(ls, 2.0));
  int inner = t.add_const(t.sub(t.add(var, t.mul(mu, mu)), t.scale(ls, 2.0)), -1.0);
  return t.scale(t.sum_all(inner), 0.5);
}

double gaussian_kl_diag(const Mat& mu1, const Mat& ls1, const Mat& mu2, const Mat& ls2) {
  Tape t;
  return t.scalar_val(gaussian_kl_node(t, t.constant(mu1), t.constant(ls1), t.constant(mu2),
                                       t.constant(ls2)));
}

int contrastive_loss_node(Tape& t, int sim, const std::vector<uint8_t>& keep, double tau) {
  const Mat& s = t.val(sim);
  int n = s.rows;
  require(s.cols == n, errc::validation, "contrastive_loss: square matrix required");
  require(static_cast<int>(keep.size()) == n * n, errc::validation,
          "contrastive_loss: mask size mismatch");
  Mat mask(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) mask.at(i, j) = (i == j || keep[i * n + j]) ? 1.0 : 0.0;
  int e = t.exp_(t.scale(sim, 1.0 / tau));
  int em = t.mul(e, t.constant(mask));
  int row_den = t.sum_rows(em);
  int col_den = t.sum_rows(t.transpose_(em));
  int diag = t.take_diag(e);
  int terms = t.add(t.log_(t.div(diag, row_den)), t.log_(t.div(diag, col_den)));
  return t.scale(t.sum_all(terms), -1.0 / (2.0 * n));
}

std::vector<uint8_t> negative_filter_mask(const std::vector<Mat>& sentence_states,
                                          double neg_threshold) {
  int n = static_cast<int>(sentence_states.size());
  std::vector<uint8_t> keep(static_cast<size_t>(n) * n, 1);
  if (n == 0) return keep;
  // center across the batch: the raw mean states share a large common
  // component, which would push every pairwise cosine toward 1
  int d = sentence_states[0].cols;
  Mat mean(1, d);
  for (const auto& s : sentence_states)
    for (int j = 0; j < d; ++j) mean.d[j] += s.d[j] / n;
  std::vector<Mat> centered(sentence_states.begin(), sentence_states.end());
  for (auto& s : centered)
    for (int j = 0; j < d; ++j) s.d[j] -= mean.d[j];

  auto centered_cos = [&](int i, int j) {
    double ni = centered[i].frob_norm(), nj = centered[j].frob_norm();
    if (ni == 0.0 || nj == 0.0) return 1.0;  // indistinguishable from a duplicate
    return dot(centered[i], centered[j]) / (ni * nj);
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (centered_cos(i, j) > neg_threshold) keep[static_cast<size_t>(i) * n + j] = 0;
    }
  return keep;
}

double contrastive_loss(const Mat& sim, const std::vector<Mat>& sentence_states,
                        const RewardHyper& hyper) {
  hyper.validate();
  std::vector<uint8_t> keep(static_cast<size_t>(sim.rows) * sim.rows, 1);
  if (!sentence_states.empty()) {
    require(static_cast<int>(sentence_states.size()) == sim.rows, errc::validation,
            "contrastive_loss: sentence embedding count mismatch");
    keep = negative_filter_mask(sentence_states, hyper.neg_threshold);
  }
  Tape t;
  return t.scalar_val(contrastive_loss_node(t, t.constant(sim), keep, hyper.tau));
}

namespace {

struct ItemNodes {
  LatentNodes motion;
  LatentNodes text;
  int z_motion = -1;
  int z_text = -1;
};

ItemNodes build_item(Tape& t, const TapeBinding& p, const RewardConfig& cfg,
                     const RewardBatchItem& item) {
  ItemNodes n;
  n.motion = motion_latent_nodes(t, p, cfg, t.constant(item.noised.frames), item.t);
  n.text = text_latent_nodes(t, p, cfg, *item.tokens);
  n.z_motion = t.add(n.motion.mu, t.mul(t.exp_(n.motion.log_sigma), t.constant(item.xi_motion)));
  n.z_text = t.add(n.text.mu, t.mul(t.exp_(n.text.log_sigma), t.constant(item.xi_text)));
  return n;
}

int representation_loss_node(Tape& t, const TapeBinding& p, const RewardConfig& cfg,
                             const RewardBatchItem& item, const ItemNodes& n,
                             const RewardHyper& hyper) {
  int clean = t.constant(*item.clean);
  int rec_from_text = decode_motion_node(t, p, cfg, n.z_text, item.clean->rows);
  int rec_from_motion = decode_motion_node(t, p, cfg, n.z_motion, item.clean->rows);
  int recons = t.add(t.mean_all(t.smooth_l1(t.sub(rec_from_text, clean))),
                     t.mean_all(t.smooth_l1(t.sub(rec_from_motion, clean))));
  int kl = t.add(
      t.add(gaussian_kl_std_node(t, n.motion.mu, n.motion.log_sigma),
            gaussian_kl_std_node(t, n.text.mu, n.text.log_sigma)),
      t.add(gaussian_kl_node(t, n.text.mu, n.text.log_sigma, n.motion.mu, n.motion.log_sigma),
            gaussian_kl_node(t, n.motion.mu, n.motion.log_sigma, n.text.mu,
                             n.text.log_sigma)));
  int embed = t.mean_all(t.smooth_l1(t.sub(n.z_text, n.z_motion)));
  return t.add(recons, t.add(t.scale(kl, hyper.lambda1), t.scale(embed, hyper.lambda2)));
}

}  // namespace

double representation_loss(const StepAwareRewardModel& m,
                           const std::vector<RewardBatchItem>& batch,
                           const RewardHyper& hyper) {
  require(!batch.empty(), errc::validation, "representation_loss: empty batch");
  Tape t;
  TapeBinding p = bind_params(t, m.params, false);
  int loss = -1;
  for (const auto& item : batch) {
    ItemNodes n = build_item(t, p, m.cfg, item);
    int term = representation_loss_node(t, p, m.cfg, item, n, hyper);
    loss = (loss < 0) ? term : t.add(loss, term);
  }
  double v = t.scalar_val(loss) / static_cast<double>(batch.size());
  require(std::isfinite(v), errc::runtime, "representation_loss: non-finite value");
  return v;
}

RewardTrainCurves train_reward(StepAwareRewardModel& m, const std::vector<CorpusEntry>& corpus,
                               const NoiseSchedule& s, const RewardHyper& hyper) {
  hyper.validate();
  require(!corpus.empty(), errc::validation, "train_reward: empty corpus");
  require(s.T <= m.cfg.max_timestep, errc::validation,
          "train_reward: schedule exceeds the model's max timestep");

  Rng rng(hyper.seed);
  AdamW opt({hyper.lr, 0.9, 0.999, 1e-8, hyper.weight_decay});
  std::vector<int> order(corpus.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  int steps_per_epoch = (static_cast<int>(corpus.size()) + hyper.batch - 1) / hyper.batch;

  RewardTrainCurves curves;
  double initial_loss = 0.0;
  int high_epochs = 0;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    rng.shuffle(order);
    double esum = 0.0, econ = 0.0, erep = 0.0;
    for (int sidx = 0; sidx < steps_per_epoch; ++sidx) {
      int lo = sidx * hyper.batch;
      int hi = std::min<int>(lo + hyper.batch, static_cast<int>(corpus.size()));
      int bsize = hi - lo;

      std::vector<RewardBatchItem> items;
      items.reserve(bsize);
      for (int k = lo; k < hi; ++k) {
        const CorpusEntry& e = corpus[order[k]];
        RewardBatchItem item;
        item.clean = &e.motion.frames;
        if (rng.uniform() < hyper.noisy_prob) {
          item.t = static_cast<int>(rng.uniform_int(1, s.T));
          MotionSequence eps(e.motion.num_frames(), e.motion.feature_dim());
          rng.fill_normal(eps.frames.d);
          item.noised = forward_noise(e.motion, item.t, eps, s);
        } else {
          item.t = 0;
          item.noised = e.motion;
        }
        const CaptionRecord& rec =
            e.captions[rng.uniform_int(0, static_cast<int64_t>(e.captions.size()) - 1)];
        item.tokens = (rng.uniform() < 0.5) ? &rec.tokens_lang_a : &rec.tokens_lang_b;
        item.xi_motion = Mat::randn(1, m.cfg.latent_dim, rng);
        item.xi_text = Mat::randn(1, m.cfg.latent_dim, rng);
        items.push_back(std::move(item));
      }

      Tape t;
      TapeBinding p = bind_params(t, m.params, true);
      std::vector<ItemNodes> nodes;
      nodes.reserve(bsize);
      int rep = -1;
      for (const auto& item : items) {
        nodes.push_back(build_item(t, p, m.cfg, item));
        int term = representation_loss_node(t, p, m.cfg, item, nodes.back(), hyper);
        rep = (rep < 0) ? term : t.add(rep, term);
      }
      rep = t.scale(rep, 1.0 / bsize);

      // batch similarity matrix between text and motion latents
      int zt = nodes[0].z_text, zm = nodes[0].z_motion;
      for (int k = 1; k < bsize; ++k) {
        zt = t.concat_rows(zt, nodes[k].z_text);
        zm = t.concat_rows(zm, nodes[k].z_motion);
      }
      int sim = t.matmul_nt(t.normalize_rows(zt), t.normalize_rows(zm));
      std::vector<Mat> sentence_states;
      sentence_states.reserve(bsize);
      for (const auto& n : nodes) sentence_states.push_back(t.val(n.text.sentence_state));
      std::vector<uint8_t> keep = negative_filter_mask(sentence_states, hyper.neg_threshold);
      int con = contrastive_loss_node(t, sim, keep, hyper.tau);

      int loss = t.add(con, rep);
      double lval = t.scalar_val(loss);
      if (!std::isfinite(lval))
        throw error(errc::runtime, "train_reward: non-finite loss in epoch " +
                                       std::to_string(epoch) + " step " + std::to_string(sidx));
      t.backward(loss);
      opt.step(m.params, collect_grads(t, p));
      esum += lval;
      econ += t.scalar_val(con);
      erep += t.scalar_val(rep);
    }
    double mean = esum / steps_per_epoch;
    curves.total.push_back(mean);
    curves.contrastive.push_back(econ / steps_per_epoch);
    curves.representation.push_back(erep / steps_per_epoch);
    if (epoch == 0) initial_loss = mean;
    high_epochs = (mean > 10.0 * std::fabs(initial_loss) + 1e-12) ? high_epochs + 1 : 0;
    if (high_epochs >= 3)
      throw error(errc::runtime,
                  "train_reward: diverged, loss " + std::to_string(mean) + " at epoch " +
                      std::to_string(epoch) + " exceeds 10x initial for 3 epochs");
  }
  return curves;
}

double reward_phi(const StepAwareRewardModel& m, const MotionSequence& x, int timestep,
                  const std::vector<int>& tokens) {
  DistributionalLatent zx = encode_motion(m, x, timestep);
  DistributionalLatent zc = encode_text(m, tokens);
  return cosine(zx.mu, zc.mu);
}

RewardGradient reward_phi_grad(const StepAwareRewardModel& m, const MotionSequence& x,
                               int timestep, const std::vector<int>& tokens) {
  DistributionalLatent zc = encode_text(m, tokens);
  double zc_norm = zc.mu.frob_norm();
  require(zc_norm > 0.0, errc::runtime, "reward_phi_grad: zero-norm text latent");
  Mat zc_unit = zc.mu;
  for (auto& v : zc_unit.d) v /= zc_norm;

  Tape t;
  TapeBinding p = bind_params(t, m.params, false);
  int xin = t.leaf(x.frames, true);
  LatentNodes mn = motion_latent_nodes(t, p, m.cfg, xin, timestep);
  int cos_node = t.sum_all(t.mul(t.normalize_rows(mn.mu), t.constant(zc_unit)));
  t.backward(cos_node);
  RewardGradient out;
  out.value = t.scalar_val(cos_node);
  out.grad = MotionSequence(t.grad(xin));
  return out;
}

uint64_t param_hash(const ParamStore& ps) {
  uint64_t h = 1469598103934665603ULL;
  auto mix_bytes = [&h](const void* data, size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& [name, m] : ps.items) {
    mix_bytes(name.data(), name.size());
    mix_bytes(m.d.data(), m.d.size() * sizeof(double));
  }
  return h;
}

}  // namespace bimotion
