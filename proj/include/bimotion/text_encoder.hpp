#pragma once

#include "bimotion/corpus.hpp"
#include "bimotion/nets.hpp"

namespace bimotion {

struct TextEncoderConfig {
  int vocab_size = 64;
  int d_model = 32;
  int num_blocks = 2;
  int num_heads = 4;
  int out_dim = 32;
};

// Token-sequence encoder: embedding + positional features, transformer
// stack, mean pool, output projection.
struct TextEncoder {
  TextEncoderConfig cfg;
  ParamStore params;
};

TextEncoder make_text_encoder(const TextEncoderConfig& cfg, uint64_t seed);

// builds the forward graph; returns the [1, out_dim] sentence embedding node
int text_encoder_forward(Tape& t, const TapeBinding& p, const TextEncoderConfig& cfg,
                         const std::vector<int>& tokens);

// plain evaluation; deterministic per (parameters, tokens)
Mat encode(const TextEncoder& enc, const std::vector<int>& tokens);

// symmetric KL between the coordinate-softmax distributions of two embeddings
double cla_loss(const Mat& emb_p, const Mat& emb_q);
int cla_loss_node(Tape& t, int emb_p, int emb_q);

struct DistillHyper {
  int epochs = 50;
  int batch = 128;
  double lr = 1e-4;
  int warmup_steps = 500;
  double anchor_weight = 1.0;
  double weight_decay = 0.0;
  uint64_t seed = 1;
};

struct DistillResult {
  std::vector<double> epoch_loss;
};

// Aligns the student to a frozen teacher: symmetric KL pulls the student's
// language-B embedding toward the teacher's language-A embedding, and a
// mean-squared anchor keeps the student's language-A output on the teacher.
DistillResult distill(const TextEncoder& teacher, TextEncoder& student,
                      const std::vector<CorpusEntry>& corpus, const DistillHyper& hyper);

}  // namespace bimotion
