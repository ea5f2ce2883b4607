#include <cmath>

#include "bimotion/text_encoder.hpp"
#include "doctest.h"

using namespace bimotion;

namespace {

TextEncoderConfig tiny_cfg(int vocab) {
  TextEncoderConfig c;
  c.vocab_size = vocab;
  c.d_model = 16;
  c.num_blocks = 1;
  c.num_heads = 2;
  c.out_dim = 8;
  return c;
}

std::vector<CorpusEntry> tiny_corpus() {
  CorpusParams p;
  p.num_classes = 3;
  p.per_class = 4;
  p.num_frames = 8;
  p.feature_dim = 2;
  p.vocab_per_lang = 16;
  p.seed = 3;
  return generate_corpus(p);
}

}  // namespace

TEST_CASE("encode: determinism, degenerate length, output dimension") {
  TextEncoder enc = make_text_encoder(tiny_cfg(16), 5);
  Mat a = encode(enc, {1, 2, 3});
  Mat b = encode(enc, {1, 2, 3});
  CHECK(a.d == b.d);
  CHECK(a.cols == 8);

  Mat single = encode(enc, {7});
  CHECK(single.cols == 8);
  Mat longer = encode(enc, {7, 7, 7, 7, 7, 7});
  CHECK(longer.cols == 8);

  // the encoder is a bag-of-tokens map: permutations leave the embedding fixed
  Mat fwd = encode(enc, {1, 2, 3, 4});
  Mat rev = encode(enc, {4, 3, 2, 1});
  double diff = 0.0;
  for (size_t i = 0; i < fwd.size(); ++i) diff += std::fabs(fwd.d[i] - rev.d[i]);
  CHECK(diff < 1e-12);
  // distinct multisets still separate
  Mat other = encode(enc, {1, 2, 3, 5});
  double diff2 = 0.0;
  for (size_t i = 0; i < fwd.size(); ++i) diff2 += std::fabs(fwd.d[i] - other.d[i]);
  CHECK(diff2 > 1e-8);

  CHECK_THROWS_AS(encode(enc, {}), error);
  CHECK_THROWS_AS(encode(enc, {16}), error);
  CHECK_THROWS_AS(encode(enc, {-1}), error);
}

TEST_CASE("cla_loss: identity, nonnegativity, hand-computed symmetric KL") {
  Mat same = Mat::row({0.4, -0.2, 1.0});
  CHECK(cla_loss(same, same) == doctest::Approx(0.0).epsilon(1e-12));

  // independent evaluation of both KL sums for the 2-d example
  Mat p_emb = Mat::row({0.0, 0.0});
  Mat q_emb = Mat::row({std::log(3.0), 0.0});
  double p[2] = {0.5, 0.5};
  double q[2] = {0.75, 0.25};
  double expected = 0.0;
  for (int i = 0; i < 2; ++i) expected += p[i] * std::log(p[i] / q[i]);
  for (int i = 0; i < 2; ++i) expected += q[i] * std::log(q[i] / p[i]);
  CHECK(expected == doctest::Approx(0.2746530721670276).epsilon(1e-12));
  CHECK(cla_loss(p_emb, q_emb) == doctest::Approx(expected).epsilon(1e-12));

  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    Mat a = Mat::randn(1, 6, rng);
    Mat b = Mat::randn(1, 6, rng);
    double loss = cla_loss(a, b);
    CHECK(loss >= -1e-12);
    // the symmetric sum is invariant under swapping the two distributions
    CHECK(cla_loss(b, a) == doctest::Approx(loss).epsilon(1e-9));
    // softmax shift invariance
    Mat a_shift = a;
    for (auto& v : a_shift.d) v += 3.7;
    CHECK(cla_loss(a_shift, b) == doctest::Approx(loss).epsilon(1e-9));
  }

  CHECK_THROWS_AS(cla_loss(Mat::row({1.0, 2.0}), Mat::row({1.0, 2.0, 3.0})), error);
}

TEST_CASE("distill: student copied from the teacher is a fixed point on (a,a) pairs") {
  auto corpus = tiny_corpus();
  TextEncoder teacher = make_text_encoder(tiny_cfg(16), 5);
  TextEncoder student = teacher;  // same vocabulary, exact copy

  // train on language-A pairs only: make B tokens mirror A
  auto mirrored = corpus;
  for (auto& e : mirrored)
    for (auto& rec : e.captions) rec.tokens_lang_b = rec.tokens_lang_a;

  DistillHyper hyper;
  hyper.epochs = 3;
  hyper.batch = 8;
  hyper.lr = 1e-3;
  hyper.warmup_steps = 0;
  hyper.anchor_weight = 1.0;
  hyper.weight_decay = 0.0;
  hyper.seed = 9;
  DistillResult res = distill(teacher, student, mirrored, hyper);
  for (double l : res.epoch_loss) CHECK(l <= 1e-8);
  CHECK(student.params == teacher.params);
}

TEST_CASE("distill: teacher frozen, loss drops, paired captions align") {
  auto corpus = tiny_corpus();
  TextEncoderConfig tcfg = tiny_cfg(16);
  TextEncoder teacher = make_text_encoder(tcfg, 5);
  ParamStore teacher_before = teacher.params;

  TextEncoderConfig scfg = tiny_cfg(32);  // joint vocabulary
  TextEncoder student = make_text_encoder(scfg, 6);

  DistillHyper hyper;
  hyper.epochs = 40;
  hyper.batch = 12;
  hyper.lr = 3e-3;
  hyper.warmup_steps = 20;
  hyper.seed = 10;
  DistillResult res = distill(teacher, student, corpus, hyper);

  CHECK(teacher.params == teacher_before);
  REQUIRE(res.epoch_loss.size() == 40);
  CHECK(res.epoch_loss.back() < 0.2 * res.epoch_loss.front());

  // paired captions end up closer on average than cross-class mismatches
  double matched_sum = 0.0, mismatched_sum = 0.0;
  int matched_n = 0, mismatched_n = 0;
  for (size_t i = 0; i < corpus.size(); ++i) {
    const auto& rec = corpus[i].captions[0];
    Mat ea = encode(student, rec.tokens_lang_a);
    Mat eb = encode(student, rec.tokens_lang_b);
    matched_sum += cosine(ea, eb);
    ++matched_n;
    const auto& other = corpus[(i + 5) % corpus.size()];
    if (other.class_label == corpus[i].class_label) continue;
    mismatched_sum += cosine(ea, encode(student, other.captions[0].tokens_lang_b));
    ++mismatched_n;
  }
  REQUIRE(mismatched_n > 0);
  CHECK(matched_sum / matched_n > mismatched_sum / mismatched_n);
}
