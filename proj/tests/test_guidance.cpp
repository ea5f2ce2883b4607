#include <cmath>

#include "bimotion/guidance.hpp"
#include "doctest.h"

using namespace bimotion;

namespace {

RewardConfig reward_cfg() {
  RewardConfig c;
  c.feature_dim = 3;
  c.vocab_size = 32;
  c.d_model = 16;
  c.num_blocks = 2;
  c.num_heads = 4;
  c.latent_dim = 6;
  c.max_timestep = 20;
  return c;
}

DenoiserConfig denoiser_cfg() {
  DenoiserConfig c;
  c.feature_dim = 3;
  c.model_dim = 16;
  c.num_blocks = 2;
  c.num_heads = 4;
  c.cond_dim = 8;
  return c;
}

std::vector<CorpusEntry> tiny_corpus() {
  CorpusParams p;
  p.num_classes = 3;
  p.per_class = 5;
  p.num_frames = 10;
  p.feature_dim = 3;
  p.vocab_per_lang = 16;
  p.seed = 61;
  return generate_corpus(p);
}

}  // namespace

TEST_CASE("build_index: size, determinism, definitional latents") {
  auto corpus = tiny_corpus();
  StepAwareRewardModel m = make_reward_model(reward_cfg(), 70);

  RetrievalIndex index = build_index(corpus, m);
  CHECK(index.entries.size() == corpus.size());
  RetrievalIndex again = build_index(corpus, m);
  for (size_t i = 0; i < index.entries.size(); ++i) {
    CHECK(index.entries[i].motion_id == again.entries[i].motion_id);
    CHECK(index.entries[i].latent.d == again.entries[i].latent.d);
    CHECK(index.entries[i].latent.d == encode_motion(m, corpus[i].motion, 0).mu.d);
  }

  std::vector<CorpusEntry> one(corpus.begin(), corpus.begin() + 1);
  CHECK(build_index(one, m).entries.size() == 1);
  std::vector<CorpusEntry> none;
  CHECK_THROWS_AS(build_index(none, m), error);
}

TEST_CASE("retrieve_anchor: determinism, tie-break, stale-index detection") {
  auto corpus = tiny_corpus();
  StepAwareRewardModel m = make_reward_model(reward_cfg(), 71);
  RetrievalIndex index = build_index(corpus, m);
  const auto& tokens = corpus[4].captions[0].tokens_lang_a;

  AnchorResult a = retrieve_anchor(index, tokens, m);
  AnchorResult b = retrieve_anchor(index, tokens, m);
  CHECK(a.motion_id == b.motion_id);
  CHECK(a.latent.d == b.latent.d);

  // duplicate latents: the lexicographically smaller id must win
  RetrievalIndex dup;
  dup.model_hash = param_hash(m.params);
  Mat z = encode_motion(m, corpus[0].motion, 0).mu;
  dup.entries.push_back({"zz_clone", z});
  dup.entries.push_back({"aa_clone", z});
  AnchorResult tie = retrieve_anchor(dup, corpus[0].captions[0].tokens_lang_a, m);
  CHECK(tie.motion_id == "aa_clone");

  // index built against different parameters is rejected
  StepAwareRewardModel other = make_reward_model(reward_cfg(), 72);
  CHECK_THROWS_AS(retrieve_anchor(index, tokens, other), error);
}

TEST_CASE("reward_m and dual_reward: reductions and linearity") {
  auto corpus = tiny_corpus();
  StepAwareRewardModel m = make_reward_model(reward_cfg(), 73);
  const auto& e = corpus[2];
  Mat anchor = encode_motion(m, e.motion, 0).mu;

  // the anchor motion against its own latent at t=0
  CHECK(reward_m(m, e.motion, 0, anchor) == doctest::Approx(1.0).epsilon(1e-12));

  const auto& tok = e.captions[0].tokens_lang_a;
  for (int t : {0, 7, 20}) {
    double rm = reward_m(m, e.motion, t, anchor);
    CHECK(rm >= -1.0);
    CHECK(rm <= 1.0);
  }

  CHECK(dual_reward(m, e.motion, 3, tok, anchor, 0.0, 0.0) == doctest::Approx(0.0));
  double rphi = reward_phi(m, e.motion, 3, tok);
  double rm = reward_m(m, e.motion, 3, anchor);
  CHECK(dual_reward(m, e.motion, 3, tok, anchor, 0.7, 0.0) ==
        doctest::Approx(0.7 * rphi).epsilon(1e-12));
  CHECK(dual_reward(m, e.motion, 3, tok, anchor, 1.0, 1.0) ==
        doctest::Approx(rphi + rm).epsilon(1e-12));
  CHECK(dual_reward(m, e.motion, 3, tok, anchor, 0.5, 0.25) ==
        doctest::Approx(0.5 * rphi + 0.25 * rm).epsilon(1e-12));

  // log of the unnormalized reward density is the reward itself
  CHECK(log_reward_density_unnormalized(0.0) == 0.0);
  CHECK(log_reward_density_unnormalized(1.0) == 1.0);
  CHECK(std::exp(log_reward_density_unnormalized(0.37)) == doctest::Approx(std::exp(0.37)));
}

TEST_CASE("dual_reward_grad: linearity and finite differences") {
  auto corpus = tiny_corpus();
  StepAwareRewardModel m = make_reward_model(reward_cfg(), 74);
  const auto& e = corpus[1];
  const auto& tok = e.captions[0].tokens_lang_a;
  Mat anchor = encode_motion(m, corpus[3].motion, 0).mu;

  DualRewardGradient zero = dual_reward_grad(m, e.motion, 4, tok, anchor, 0.0, 0.0);
  for (double v : zero.grad.frames.d) CHECK(v == 0.0);

  // gradient is linear in mu at fixed eta
  DualRewardGradient g1 = dual_reward_grad(m, e.motion, 4, tok, anchor, 0.3, 0.2);
  DualRewardGradient g2 = dual_reward_grad(m, e.motion, 4, tok, anchor, 0.6, 0.2);
  DualRewardGradient g0 = dual_reward_grad(m, e.motion, 4, tok, anchor, 0.0, 0.2);
  for (size_t i = 0; i < g1.grad.frames.size(); ++i) {
    double lhs = g2.grad.frames.d[i] - g0.grad.frames.d[i];
    double rhs = 2.0 * (g1.grad.frames.d[i] - g0.grad.frames.d[i]);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }

  // finite differences on the combined reward
  double h = 1e-5, worst = 0.0;
  double mu = 0.8, eta = 0.5;
  DualRewardGradient g = dual_reward_grad(m, e.motion, 4, tok, anchor, mu, eta);
  for (size_t i = 0; i < std::min<size_t>(e.motion.frames.size(), 8); ++i) {
    MotionSequence xp = e.motion, xm = e.motion;
    xp.frames.d[i] += h;
    xm.frames.d[i] -= h;
    double fp = dual_reward(m, xp, 4, tok, anchor, mu, eta);
    double fm = dual_reward(m, xm, 4, tok, anchor, mu, eta);
    double numeric = (fp - fm) / (2.0 * h);
    double denom = std::max({1e-8, std::fabs(numeric), std::fabs(g.grad.frames.d[i])});
    worst = std::max(worst, std::fabs(numeric - g.grad.frames.d[i]) / denom);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("guided_sample: zero guidance is bitwise the vanilla sampler") {
  auto corpus = tiny_corpus();
  StepAwareRewardModel m = make_reward_model(reward_cfg(), 75);
  DenoiserNetwork net = make_denoiser(denoiser_cfg(), 76);
  RetrievalIndex index = build_index(corpus, m);
  NoiseSchedule s = make_linear_schedule(20, 1e-3, 0.15);
  Mat cond = Mat::row({0.2, -0.1, 0.0, 0.3, 0.1, -0.2, 0.4, 0.0});
  const auto& tok = corpus[0].captions[0].tokens_lang_a;

  for (uint64_t seed : {1ULL, 9ULL, 42ULL, 77ULL, 1234ULL}) {
    SamplerConfig vanilla;
    vanilla.schedule = &s;
    vanilla.num_frames = 10;
    vanilla.seed = seed;
    MotionSequence base = sample(net, cond, vanilla);

    for (GuidanceMode mode : {GuidanceMode::eq14_weighted, GuidanceMode::eq15_unweighted}) {
      SamplerConfig guided = vanilla;
      guided.mode = mode;
      guided.mu = 0.0;
      guided.eta = 0.0;
      GuidedSampleResult res = guided_sample(net, m, index, tok, cond, guided);
      CHECK(res.motion.frames.d == base.frames.d);
      CHECK(res.trace.size() == 20);
    }
  }
}

TEST_CASE("guided_step: mode relation is exact") {
  NoiseSchedule s = make_linear_schedule(20, 1e-3, 0.15);
  Rng rng(80);
  MotionSequence x(4, 3), eps_hat(4, 3), draw(4, 3), grad(4, 3);
  rng.fill_normal(x.frames.d);
  rng.fill_normal(eps_hat.frames.d);
  rng.fill_normal(draw.frames.d);
  rng.fill_normal(grad.frames.d);

  for (int t : {1, 7, 20}) {
    MotionSequence eq14 = guided_step(x, eps_hat, t, s, draw, grad, GuidanceMode::eq14_weighted);
    MotionSequence eq15 = guided_step(x, eps_hat, t, s, draw, grad, GuidanceMode::eq15_unweighted);
    double w = s.beta_at(t) / std::sqrt(s.alpha_at(t));
    for (size_t i = 0; i < x.frames.size(); ++i) {
      double expected = (w - 1.0) * grad.frames.d[i];
      CHECK(eq14.frames.d[i] - eq15.frames.d[i] == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("guided_step: constant-gradient recurrence matches the closed form") {
  // denoiser stub predicting zero noise, reward gradient a * ones
  NoiseSchedule s = make_linear_schedule(15, 1e-3, 0.12);
  double a = 0.01;
  int n = 4, d = 3;
  Rng rng(81);

  std::vector<MotionSequence> draws;
  for (int t = s.T; t >= 1; --t) {
    MotionSequence e(n, d);
    if (t > 1) rng.fill_normal(e.frames.d);
    draws.push_back(e);
  }

  MotionSequence x0(n, d);
  rng.fill_normal(x0.frames.d);
  MotionSequence eps_hat(n, d);  // stub: zero prediction
  MotionSequence zero_grad(n, d);
  MotionSequence grad(n, d);
  for (auto& v : grad.frames.d) v = a;

  for (GuidanceMode mode : {GuidanceMode::eq15_unweighted, GuidanceMode::eq14_weighted}) {
    MotionSequence vanilla = x0, guided = x0;
    double delta = 0.0;  // scalar recurrence: delta' = delta / sqrt(alpha) + g_t
    double scale_sum = 0.0;
    int k = 0;
    for (int t = s.T; t >= 1; --t, ++k) {
      vanilla = ddpm_update(vanilla, eps_hat, t, s, draws[k]);
      guided = guided_step(guided, eps_hat, t, s, draws[k], grad, mode);
      double g_t = (mode == GuidanceMode::eq14_weighted)
                       ? a * s.beta_at(t) / std::sqrt(s.alpha_at(t))
                       : a;
      delta = delta / std::sqrt(s.alpha_at(t)) + g_t;
      scale_sum += s.beta_at(t) / std::sqrt(s.alpha_at(t));
    }
    for (size_t i = 0; i < guided.frames.size(); ++i)
      CHECK(guided.frames.d[i] - vanilla.frames.d[i] ==
            doctest::Approx(delta).epsilon(1e-10));
    if (mode == GuidanceMode::eq14_weighted) {
      // per-step additions alone sum to a * sum_t beta_t / sqrt(alpha_t)
      double direct = 0.0;
      for (int t = 1; t <= s.T; ++t) direct += s.beta_at(t) / std::sqrt(s.alpha_at(t));
      CHECK(scale_sum == doctest::Approx(direct).epsilon(1e-12));
    }
  }
}

TEST_CASE("guided_sample: trace covers every step and anchors stay fixed") {
  auto corpus = tiny_corpus();
  StepAwareRewardModel m = make_reward_model(reward_cfg(), 77);
  DenoiserNetwork net = make_denoiser(denoiser_cfg(), 78);
  RetrievalIndex index = build_index(corpus, m);
  NoiseSchedule s = make_linear_schedule(12, 1e-3, 0.1);
  Mat cond = Mat::row({0.0, 0.1, 0.0, 0.2, 0.0, 0.3, 0.0, 0.4});
  const auto& tok = corpus[6].captions[0].tokens_lang_a;

  SamplerConfig cfg;
  cfg.schedule = &s;
  cfg.num_frames = 10;
  cfg.seed = 3;
  cfg.mode = GuidanceMode::eq15_unweighted;
  cfg.mu = 0.5;
  cfg.eta = 0.5;
  GuidedSampleResult r1 = guided_sample(net, m, index, tok, cond, cfg);
  GuidedSampleResult r2 = guided_sample(net, m, index, tok, cond, cfg);

  CHECK(r1.anchor_id == r2.anchor_id);
  CHECK(r1.anchor_id == retrieve_anchor(index, tok, m).motion_id);
  CHECK(r1.motion.frames.d == r2.motion.frames.d);
  REQUIRE(r1.trace.size() == 12);
  for (size_t i = 0; i < r1.trace.size(); ++i) {
    CHECK(r1.trace[i].t == 12 - static_cast<int>(i));
    CHECK(r1.trace[i].r_phi == r2.trace[i].r_phi);
    CHECK(r1.trace[i].grad_norm > 0.0);
  }
}
