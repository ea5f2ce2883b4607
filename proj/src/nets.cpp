#include "bimotion/nets.hpp"

#include <cmath>

namespace bimotion {

Mat sinusoidal_features(double pos, int dim) {
  Mat out(1, dim);
  int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    double freq = std::pow(10000.0, -static_cast<double>(i) / half);
    out.d[2 * i] = std::sin(pos * freq);
    out.d[2 * i + 1] = std::cos(pos * freq);
  }
  if (dim % 2 == 1) out.d[dim - 1] = std::sin(pos);
  return out;
}

Mat positional_table(int n, int dim) {
  Mat out(n, dim);
  for (int i = 0; i < n; ++i) {
    Mat row = sinusoidal_features(static_cast<double>(i), dim);
    std::memcpy(out.rowptr(i), row.d.data(), sizeof(double) * dim);
  }
  return out;
}

void init_linear(ParamStore& ps, const std::string& prefix, int in_dim, int out_dim,
                 Rng& rng, double scale) {
  ps.add(prefix + ".w", Mat::randn(in_dim, out_dim, rng, scale));
  ps.add(prefix + ".b", Mat::zeros(1, out_dim));
}

int linear(Tape& t, const TapeBinding& p, const std::string& prefix, int x) {
  return t.add_rowvec(t.matmul(x, p(prefix + ".w")), p(prefix + ".b"));
}

void init_transformer_block(ParamStore& ps, const std::string& prefix, int d_model,
                            int ffn_mult, Rng& rng) {
  double scale = 0.05;
  init_linear(ps, prefix + ".q", d_model, d_model, rng, scale);
  init_linear(ps, prefix + ".k", d_model, d_model, rng, scale);
  init_linear(ps, prefix + ".v", d_model, d_model, rng, scale);
  init_linear(ps, prefix + ".o", d_model, d_model, rng, scale);
  init_linear(ps, prefix + ".f1", d_model, d_model * ffn_mult, rng, scale);
  init_linear(ps, prefix + ".f2", d_model * ffn_mult, d_model, rng, scale);
  ps.add(prefix + ".ln1.g", Mat::filled(1, d_model, 1.0));
  ps.add(prefix + ".ln1.b", Mat::zeros(1, d_model));
  ps.add(prefix + ".ln2.g", Mat::filled(1, d_model, 1.0));
  ps.add(prefix + ".ln2.b", Mat::zeros(1, d_model));
}

namespace {

int layernorm_affine(Tape& t, const TapeBinding& p, const std::string& prefix, int x) {
  int ln = t.layernorm_rows(x);
  return t.add_rowvec(t.mul_rowvec(ln, p(prefix + ".g")), p(prefix + ".b"));
}

int self_attention(Tape& t, const TapeBinding& p, const std::string& prefix, int h,
                   int num_heads) {
  int d_model = t.val(h).cols;
  require(d_model % num_heads == 0, errc::validation, "model dim not divisible by heads");
  int head_dim = d_model / num_heads;
  int q = linear(t, p, prefix + ".q", h);
  int k = linear(t, p, prefix + ".k", h);
  int v = linear(t, p, prefix + ".v", h);
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  int merged = -1;
  for (int hd = 0; hd < num_heads; ++hd) {
    int qh = t.slice_cols(q, hd * head_dim, head_dim);
    int kh = t.slice_cols(k, hd * head_dim, head_dim);
    int vh = t.slice_cols(v, hd * head_dim, head_dim);
    int scores = t.scale(t.matmul_nt(qh, kh), inv_sqrt);
    int attn = t.softmax_rows(scores);
    int oh = t.matmul(attn, vh);
    merged = (merged < 0) ? oh : t.concat_cols(merged, oh);
  }
  return linear(t, p, prefix + ".o", merged);
}

}  // namespace

int transformer_block(Tape& t, const TapeBinding& p, const std::string& prefix, int x,
                      int num_heads) {
  int h = layernorm_affine(t, p, prefix + ".ln1", x);
  int attn = self_attention(t, p, prefix, h, num_heads);
  int x1 = t.add(x, attn);
  int h2 = layernorm_affine(t, p, prefix + ".ln2", x1);
  int ffn = linear(t, p, prefix + ".f2", t.tanh_(linear(t, p, prefix + ".f1", h2)));
  return t.add(x1, ffn);
}

int transformer_stack(Tape& t, const TapeBinding& p, const std::string& prefix, int x,
                      int num_blocks, int num_heads) {
  int h = x;
  for (int b = 0; b < num_blocks; ++b)
    h = transformer_block(t, p, prefix + ".blk" + std::to_string(b), h, num_heads);
  return t.add(h, x);
}

void AdamW::step(ParamStore& ps, const GradMap& grads, double lr_override) {
  ++t_;
  double lr = lr_override >= 0.0 ? lr_override : cfg_.lr;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& [name, w] : ps.items) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    const Mat& g = git->second;
    auto& [m, v] = moments_[name];
    if (m.size() != w.size()) {
      m = Mat(w.rows, w.cols);
      v = Mat(w.rows, w.cols);
    }
    for (size_t i = 0; i < w.size(); ++i) {
      m.d[i] = cfg_.beta1 * m.d[i] + (1.0 - cfg_.beta1) * g.d[i];
      v.d[i] = cfg_.beta2 * v.d[i] + (1.0 - cfg_.beta2) * g.d[i] * g.d[i];
      double mhat = m.d[i] / bc1;
      double vhat = v.d[i] / bc2;
      w.d[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * w.d[i]);
    }
  }
}

double warmup_cosine_lr(double base_lr, int64_t step, int64_t warmup_steps, int64_t total_steps) {
  if (warmup_steps > 0 && step < warmup_steps)
    return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  if (total_steps <= warmup_steps) return base_lr;
  double progress = static_cast<double>(step - warmup_steps) /
                    static_cast<double>(total_steps - warmup_steps);
  if (progress > 1.0) progress = 1.0;
  return base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

}  // namespace bimotion
