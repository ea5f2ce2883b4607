#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "bimotion/tape.hpp"

namespace bimotion {

// Named parameter arrays with deterministic iteration order. The order is the
// checkpoint payload order and the optimizer sweep order.
struct ParamStore {
  std::vector<std::pair<std::string, Mat>> items;

  Mat& add(const std::string& name, Mat m) {
    items.emplace_back(name, std::move(m));
    return items.back().second;
  }

  Mat* find(const std::string& name) {
    for (auto& [k, v] : items)
      if (k == name) return &v;
    return nullptr;
  }

  const Mat* find(const std::string& name) const {
    for (auto& [k, v] : items)
      if (k == name) return &v;
    return nullptr;
  }

  const Mat& get(const std::string& name) const {
    const Mat* m = find(name);
    require(m != nullptr, errc::runtime, "missing parameter: " + name);
    return *m;
  }

  bool operator==(const ParamStore& o) const {
    if (items.size() != o.items.size()) return false;
    for (size_t i = 0; i < items.size(); ++i) {
      if (items[i].first != o.items[i].first) return false;
      if (!items[i].second.same_shape(o.items[i].second)) return false;
      if (items[i].second.d != o.items[i].second.d) return false;
    }
    return true;
  }
};

// Parameters copied onto a tape as grad leaves (or constants for frozen use).
struct TapeBinding {
  Tape* tape = nullptr;
  std::unordered_map<std::string, int> ids;

  int operator()(const std::string& name) const {
    auto it = ids.find(name);
    require(it != ids.end(), errc::runtime, "unbound parameter: " + name);
    return it->second;
  }
};

inline TapeBinding bind_params(Tape& tape, const ParamStore& ps, bool requires_grad = true) {
  TapeBinding b;
  b.tape = &tape;
  b.ids.reserve(ps.items.size());
  for (const auto& [name, m] : ps.items) b.ids.emplace(name, tape.leaf(m, requires_grad));
  return b;
}

using GradMap = std::unordered_map<std::string, Mat>;

inline GradMap collect_grads(const Tape& tape, const TapeBinding& b) {
  GradMap g;
  for (const auto& [name, id] : b.ids) {
    const Mat& gm = tape.grad(id);
    if (gm.size() > 0) g.emplace(name, gm);
  }
  return g;
}

// sin/cos features of a scalar position, frequencies log-spaced like the
// usual attention positional encoding
Mat sinusoidal_features(double pos, int dim);

// fixed positional table for a token sequence, [n, dim]
Mat positional_table(int n, int dim);

// Pre-norm transformer encoder block parameters under `prefix.`:
// wq wk wv wo (+biases), ffn w1 b1 w2 b2, layernorm gains/biases.
void init_transformer_block(ParamStore& ps, const std::string& prefix, int d_model,
                            int ffn_mult, Rng& rng);

int transformer_block(Tape& t, const TapeBinding& p, const std::string& prefix, int x,
                      int num_heads);

// stack of blocks with one residual from the stack input to its output
int transformer_stack(Tape& t, const TapeBinding& p, const std::string& prefix, int x,
                      int num_blocks, int num_heads);

void init_linear(ParamStore& ps, const std::string& prefix, int in_dim, int out_dim,
                 Rng& rng, double scale = 0.05);

int linear(Tape& t, const TapeBinding& p, const std::string& prefix, int x);

// AdamW over a ParamStore; moments keyed by parameter name.
class AdamW {
 public:
  struct Config {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
  };

  explicit AdamW(Config cfg) : cfg_(cfg) {}

  void step(ParamStore& ps, const GradMap& grads, double lr_override = -1.0);
  int64_t steps_taken() const { return t_; }

 private:
  Config cfg_;
  int64_t t_ = 0;
  std::unordered_map<std::string, std::pair<Mat, Mat>> moments_;
};

// linear warmup then cosine decay to zero
double warmup_cosine_lr(double base_lr, int64_t step, int64_t warmup_steps, int64_t total_steps);

}  // namespace bimotion
