#include "bimotion/text_encoder.hpp"

#include <cmath>

namespace bimotion {

TextEncoder make_text_encoder(const TextEncoderConfig& cfg, uint64_t seed) {
  require(cfg.vocab_size >= 1 && cfg.d_model >= cfg.num_heads && cfg.out_dim >= 1,
          errc::validation, "text encoder: bad dimensions");
  TextEncoder enc;
  enc.cfg = cfg;
  Rng rng(seed);
  enc.params.add("tok", Mat::randn(cfg.vocab_size, cfg.d_model, rng, 0.1));
  for (int b = 0; b < cfg.num_blocks; ++b)
    init_transformer_block(enc.params, "enc.blk" + std::to_string(b), cfg.d_model, 4, rng);
  init_linear(enc.params, "out", cfg.d_model, cfg.out_dim, rng, 0.1);
  return enc;
}

int text_encoder_forward(Tape& t, const TapeBinding& p, const TextEncoderConfig& cfg,
                         const std::vector<int>& tokens) {
  require(!tokens.empty(), errc::validation, "encode: empty token sequence");
  for (int tok : tokens)
    require(tok >= 0 && tok < cfg.vocab_size, errc::validation,
            "encode: token id out of vocabulary: " + std::to_string(tok));
  // captions are token bags; no positional features, so the encoding is
  // permutation-invariant
  int emb = t.gather_rows(p("tok"), tokens);
  int h = transformer_stack(t, p, "enc", emb, cfg.num_blocks, cfg.num_heads);
  int pooled = t.mean_rows(h);
  return linear(t, p, "out", pooled);
}

Mat encode(const TextEncoder& enc, const std::vector<int>& tokens) {
  Tape t;
  TapeBinding b = bind_params(t, enc.params, false);
  int out = text_encoder_forward(t, b, enc.cfg, tokens);
  return t.val(out);
}

int cla_loss_node(Tape& t, int emb_p, int emb_q) {
  require(t.val(emb_p).same_shape(t.val(emb_q)), errc::validation,
          "cla_loss: embedding dimension mismatch");
  int p = t.softmax_rows(emb_p);
  int q = t.softmax_rows(emb_q);
  int lp = t.log_(p);
  int lq = t.log_(q);
  int kl_pq = t.sum_all(t.mul(p, t.sub(lp, lq)));
  int kl_qp = t.sum_all(t.mul(q, t.sub(lq, lp)));
  return t.add(kl_pq, kl_qp);
}

double cla_loss(const Mat& emb_p, const Mat& emb_q) {
  Tape t;
  int a = t.constant(emb_p);
  int b = t.constant(emb_q);
  return t.scalar_val(cla_loss_node(t, a, b));
}

DistillResult distill(const TextEncoder& teacher, TextEncoder& student,
                      const std::vector<CorpusEntry>& corpus, const DistillHyper& hyper) {
  require(!corpus.empty(), errc::validation, "distill: empty corpus");

  struct Pair {
    const std::vector<int>* a;
    const std::vector<int>* b;
    Mat teacher_emb;
  };
  std::vector<Pair> pairs;
  for (const auto& e : corpus)
    for (const auto& rec : e.captions)
      pairs.push_back({&rec.tokens_lang_a, &rec.tokens_lang_b, Mat()});
  for (auto& pr : pairs) pr.teacher_emb = encode(teacher, *pr.a);

  Rng rng(hyper.seed);
  AdamW opt({hyper.lr, 0.9, 0.999, 1e-8, hyper.weight_decay});
  int steps_per_epoch = (static_cast<int>(pairs.size()) + hyper.batch - 1) / hyper.batch;
  int64_t total_steps = static_cast<int64_t>(hyper.epochs) * steps_per_epoch;
  int64_t step = 0;

  DistillResult res;
  std::vector<int> order(pairs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_sum = 0.0;
    int epoch_batches = 0;
    for (int s = 0; s < steps_per_epoch; ++s) {
      Tape t;
      TapeBinding bp = bind_params(t, student.params, true);
      int lo = s * hyper.batch;
      int hi = std::min<int>(lo + hyper.batch, static_cast<int>(pairs.size()));
      int loss = -1;
      std::string batch_ids;
      for (int k = lo; k < hi; ++k) {
        const Pair& pr = pairs[order[k]];
        if (!batch_ids.empty()) batch_ids += ",";
        batch_ids += std::to_string(order[k]);
        int teach = t.constant(pr.teacher_emb);
        int emb_b = text_encoder_forward(t, bp, student.cfg, *pr.b);
        int item = cla_loss_node(t, teach, emb_b);
        if (hyper.anchor_weight != 0.0) {
          int emb_a = text_encoder_forward(t, bp, student.cfg, *pr.a);
          int diff = t.sub(emb_a, teach);
          int mse = t.mean_all(t.mul(diff, diff));
          item = t.add(item, t.scale(mse, hyper.anchor_weight));
        }
        loss = (loss < 0) ? item : t.add(loss, item);
      }
      loss = t.scale(loss, 1.0 / (hi - lo));
      double lval = t.scalar_val(loss);
      if (!std::isfinite(lval))
        throw error(errc::runtime, "distill: non-finite loss at step " +
                                       std::to_string(step) + " batch [" + batch_ids + "]");
      t.backward(loss);
      double lr = warmup_cosine_lr(hyper.lr, step, hyper.warmup_steps, total_steps);
      opt.step(student.params, collect_grads(t, bp), lr);
      ++step;
      epoch_sum += lval;
      ++epoch_batches;
    }
    res.epoch_loss.push_back(epoch_sum / epoch_batches);
  }
  return res;
}

}  // namespace bimotion
