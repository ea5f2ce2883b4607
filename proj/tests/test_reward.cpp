#include <cmath>

#include "bimotion/reward_model.hpp"
#include "doctest.h"

using namespace bimotion;

namespace {

RewardConfig tiny_cfg() {
  RewardConfig c;
  c.feature_dim = 3;
  c.vocab_size = 32;
  c.d_model = 16;
  c.num_blocks = 2;
  c.num_heads = 4;
  c.latent_dim = 6;
  c.max_timestep = 30;
  return c;
}

std::vector<CorpusEntry> tiny_corpus(int classes = 3, int per_class = 6) {
  CorpusParams p;
  p.num_classes = classes;
  p.per_class = per_class;
  p.num_frames = 10;
  p.feature_dim = 3;
  p.vocab_per_lang = 16;
  p.seed = 31;
  return generate_corpus(p);
}

}  // namespace

TEST_CASE("encode_motion / encode_text: shapes, determinism, timestep sensitivity") {
  StepAwareRewardModel m = make_reward_model(tiny_cfg(), 50);
  MotionSequence x(7, 3);
  Rng rng(1);
  rng.fill_normal(x.frames.d);

  DistributionalLatent a = encode_motion(m, x, 0);
  CHECK(a.mu.cols == 6);
  CHECK(a.log_sigma.cols == 6);
  DistributionalLatent b = encode_motion(m, x, 0);
  CHECK(a.mu.d == b.mu.d);

  DistributionalLatent at_max = encode_motion(m, x, 30);
  double diff = 0.0;
  for (int j = 0; j < 6; ++j) diff += std::fabs(a.mu.d[j] - at_max.mu.d[j]);
  CHECK(diff > 1e-9);

  CHECK_THROWS_AS(encode_motion(m, x, -1), error);
  CHECK_THROWS_AS(encode_motion(m, x, 31), error);

  DistributionalLatent t1 = encode_text(m, {1, 5, 9});
  CHECK(t1.mu.cols == 6);
  DistributionalLatent t2 = encode_text(m, {1, 5, 9});
  CHECK(t1.mu.d == t2.mu.d);
  DistributionalLatent t3 = encode_text(m, {2, 6, 10});
  double tdiff = 0.0;
  for (int j = 0; j < 6; ++j) tdiff += std::fabs(t1.mu.d[j] - t3.mu.d[j]);
  CHECK(tdiff > 1e-9);
  CHECK_THROWS_AS(encode_text(m, {}), error);
  CHECK_THROWS_AS(encode_text(m, {32}), error);
}

TEST_CASE("gaussian KL: closed-form identities") {
  Mat mu0 = Mat::row({0.0});
  Mat ls0 = Mat::row({0.0});
  Mat mu1 = Mat::row({1.0});

  CHECK(gaussian_kl_diag(mu0, ls0, mu0, ls0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(gaussian_kl_diag(mu1, ls0, mu0, ls0) == doctest::Approx(0.5).epsilon(1e-12));

  // multi-dimensional case sums per-coordinate terms
  Mat mu = Mat::row({1.0, -2.0});
  Mat ls = Mat::row({0.5, -0.3});
  double expected = 0.0;
  for (int i = 0; i < 2; ++i) {
    double s2 = std::exp(2.0 * ls.d[i]);
    expected += 0.5 * (s2 + mu.d[i] * mu.d[i] - 1.0 - 2.0 * ls.d[i]);
  }
  CHECK(gaussian_kl_diag(mu, ls, Mat::row({0.0, 0.0}), Mat::row({0.0, 0.0})) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("contrastive loss: degenerate and hand-evaluated cases") {
  RewardHyper hyper;
  hyper.tau = 1.0;
  hyper.neg_threshold = 0.9;

  SUBCASE("single pair gives zero") {
    Mat s(1, 1, {1.0});
    CHECK(contrastive_loss(s, {}, hyper) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("identity similarity at tau=1, no filtering") {
    Mat s(2, 2);
    s.at(0, 0) = 1.0;
    s.at(1, 1) = 1.0;
    double expected = std::log((std::exp(1.0) + 1.0) / std::exp(1.0));
    CHECK(expected == doctest::Approx(0.3132616875182228).epsilon(1e-12));
    CHECK(contrastive_loss(s, {}, hyper) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("filtering everything leaves only the positives") {
    Mat s(3, 3);
    Rng rng(4);
    for (auto& v : s.d) v = rng.uniform();
    std::vector<Mat> sentences;
    for (int i = 0; i < 3; ++i) sentences.push_back(Mat::row({1.0, 0.0}));  // all identical
    RewardHyper h2 = hyper;
    h2.neg_threshold = -1.0;
    // identical sentence embeddings have cosine 1 > -1, so every negative drops
    CHECK(contrastive_loss(s, sentences, h2) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("permutation invariance") {
    Rng rng(5);
    Mat s(4, 4);
    for (auto& v : s.d) v = rng.normal();
    double base = contrastive_loss(s, {}, hyper);
    // relabel batch indices with the permutation (1,2,3,0)
    int perm[4] = {1, 2, 3, 0};
    Mat sp(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) sp.at(i, j) = s.at(perm[i], perm[j]);
    CHECK(contrastive_loss(sp, {}, hyper) == doctest::Approx(base).epsilon(1e-10));
  }
}

TEST_CASE("representation loss: finite, decomposes as configured") {
  StepAwareRewardModel m = make_reward_model(tiny_cfg(), 51);
  auto corpus = tiny_corpus();
  RewardHyper hyper;

  std::vector<RewardBatchItem> batch;
  Rng rng(6);
  for (int i = 0; i < 3; ++i) {
    RewardBatchItem item;
    item.clean = &corpus[i].motion.frames;
    item.noised = corpus[i].motion;
    item.t = 0;
    item.tokens = &corpus[i].captions[0].tokens_lang_a;
    item.xi_motion = Mat::zeros(1, 6);
    item.xi_text = Mat::zeros(1, 6);
    batch.push_back(item);
  }
  double full = representation_loss(m, batch, hyper);
  CHECK(std::isfinite(full));
  CHECK(full > 0.0);

  RewardHyper no_reg = hyper;
  no_reg.lambda1 = 0.0;
  no_reg.lambda2 = 0.0;
  double recons_only = representation_loss(m, batch, no_reg);
  CHECK(recons_only <= full + 1e-12);
}

TEST_CASE("reward_phi: cosine range and the stubbed identities") {
  // cosine identities the reward reduces to once latents are fixed
  CHECK(cosine(Mat::row({2.0, 0.0}), Mat::row({5.0, 0.0})) == doctest::Approx(1.0));
  CHECK(cosine(Mat::row({1.0, 0.0}), Mat::row({-3.0, 0.0})) == doctest::Approx(-1.0));
  CHECK(cosine(Mat::row({1.0, 0.0}), Mat::row({0.0, 2.0})) == doctest::Approx(0.0));
  CHECK_THROWS_AS(cosine(Mat::row({0.0, 0.0}), Mat::row({1.0, 0.0})), error);

  StepAwareRewardModel m = make_reward_model(tiny_cfg(), 52);
  auto corpus = tiny_corpus();
  Rng rng(7);
  for (int i = 0; i < 10; ++i) {
    const auto& e = corpus[i % corpus.size()];
    int t = static_cast<int>(rng.uniform_int(0, 30));
    double r = reward_phi(m, e.motion, t, e.captions[0].tokens_lang_a);
    CHECK(r >= -1.0);
    CHECK(r <= 1.0);
  }

  // positive rescaling of all latents never changes a cosine ranking
  Rng r2(8);
  Mat za = Mat::randn(1, 6, r2), zb = Mat::randn(1, 6, r2), q = Mat::randn(1, 6, r2);
  double c = 3.7;
  Mat za_s = za, zb_s = zb, q_s = q;
  for (auto& v : za_s.d) v *= c;
  for (auto& v : zb_s.d) v *= c;
  for (auto& v : q_s.d) v *= c;
  CHECK(cosine(za, q) == doctest::Approx(cosine(za_s, q_s)).epsilon(1e-12));
  CHECK((cosine(za, q) > cosine(zb, q)) == (cosine(za_s, q_s) > cosine(zb_s, q_s)));
}

TEST_CASE("reward_phi_grad: identity-encoder hand case and finite differences") {
  SUBCASE("cosine gradient through the same graph the model uses") {
    // z = x with one frame: grad of cos(x, zc) at x=(1,0), zc=(0,1) is (0,1)
    Tape t;
    int x = t.leaf(Mat::row({1.0, 0.0}), true);
    Mat zc_unit = Mat::row({0.0, 1.0});
    int cosn = t.sum_all(t.mul(t.normalize_rows(x), t.constant(zc_unit)));
    t.backward(cosn);
    CHECK(t.scalar_val(cosn) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(t.grad(x).d[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(t.grad(x).d[1] == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("finite-difference agreement on the trained-geometry model") {
    StepAwareRewardModel m = make_reward_model(tiny_cfg(), 53);
    auto corpus = tiny_corpus();
    Rng rng(9);
    double h = 1e-5;
    double worst = 0.0;
    for (int trial = 0; trial < 4; ++trial) {
      const auto& e = corpus[trial];
      int t = static_cast<int>(rng.uniform_int(0, 30));
      const auto& tokens = e.captions[0].tokens_lang_a;
      MotionSequence x = e.motion;
      RewardGradient g = reward_phi_grad(m, x, t, tokens);
      for (size_t i = 0; i < std::min<size_t>(x.frames.size(), 6); ++i) {
        MotionSequence xp = x, xm = x;
        xp.frames.d[i] += h;
        xm.frames.d[i] -= h;
        double numeric =
            (reward_phi(m, xp, t, tokens) - reward_phi(m, xm, t, tokens)) / (2.0 * h);
        double denom = std::max({1e-8, std::fabs(numeric), std::fabs(g.grad.frames.d[i])});
        worst = std::max(worst, std::fabs(numeric - g.grad.frames.d[i]) / denom);
      }
      CHECK(g.value == doctest::Approx(reward_phi(m, x, t, tokens)).epsilon(1e-12));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("train_reward: loss decreases and the step token stays informative") {
  auto corpus = tiny_corpus(3, 8);
  RewardConfig rcfg = tiny_cfg();
  StepAwareRewardModel m = make_reward_model(rcfg, 54);
  NoiseSchedule s = make_linear_schedule(30, 1e-3, 0.2);

  RewardHyper hyper;
  hyper.epochs = 8;
  hyper.batch = 8;
  hyper.lr = 2e-3;
  hyper.seed = 55;
  RewardTrainCurves curves = train_reward(m, corpus, s, hyper);
  REQUIRE(curves.total.size() == 8);
  CHECK(curves.total.back() < curves.total.front());

  // trained model still distinguishes clean from fully noised context
  DistributionalLatent clean = encode_motion(m, corpus[0].motion, 0);
  DistributionalLatent noisy = encode_motion(m, corpus[0].motion, 30);
  double diff = 0.0;
  for (int j = 0; j < rcfg.latent_dim; ++j) diff += std::fabs(clean.mu.d[j] - noisy.mu.d[j]);
  CHECK(diff > 1e-9);

  SUBCASE("noisy_prob zero degenerates to a clean retrieval model") {
    StepAwareRewardModel m2 = make_reward_model(rcfg, 56);
    RewardHyper h2 = hyper;
    h2.noisy_prob = 0.0;
    h2.epochs = 2;
    RewardTrainCurves c2 = train_reward(m2, corpus, s, h2);
    CHECK(c2.total.size() == 2);
  }
}
