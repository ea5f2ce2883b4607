#pragma once

#include "bimotion/corpus.hpp"
#include "bimotion/nets.hpp"
#include "bimotion/schedule.hpp"

namespace bimotion {

struct DenoiserConfig {
  int feature_dim = 6;
  int model_dim = 32;
  int num_blocks = 2;
  int num_heads = 4;
  int cond_dim = 32;
};

// Conditional noise predictor. Frame tokens are projected features plus
// positional encoding; one prefix token carries the timestep and condition.
struct DenoiserNetwork {
  DenoiserConfig cfg;
  ParamStore params;
};

enum class GuidanceMode { none, eq14_weighted, eq15_unweighted };

struct SamplerConfig {
  const NoiseSchedule* schedule = nullptr;
  int num_frames = 32;
  uint64_t seed = 0;
  GuidanceMode mode = GuidanceMode::none;
  double mu = 0.0;
  double eta = 0.0;
  bool clip_gradients = true;
};

DenoiserNetwork make_denoiser(const DenoiserConfig& cfg, uint64_t seed);

int denoiser_forward(Tape& t, const TapeBinding& p, const DenoiserConfig& cfg, int x_node,
                     int timestep, int cond_node);

// predicted noise for (x_t, t, cond); deterministic per inputs and parameters
MotionSequence denoise_predict(const DenoiserNetwork& net, const MotionSequence& x_t,
                               int timestep, const Mat& cond);

// x_{t-1} from x_t and predicted noise; eps_draw is the externally supplied
// gaussian draw (zero at t=1)
MotionSequence ddpm_update(const MotionSequence& x_t, const MotionSequence& eps_hat, int t,
                           const NoiseSchedule& s, const MotionSequence& eps_draw);

MotionSequence ddpm_step(const DenoiserNetwork& net, const MotionSequence& x_t, int t,
                         const Mat& cond, const NoiseSchedule& s,
                         const MotionSequence& eps_draw);

// builds the denoising-loss graph for one already-noised example
int bimd_loss_node(Tape& t, const TapeBinding& p, const DenoiserConfig& cfg,
                   const MotionSequence& x_noised, int timestep, const Mat& cond,
                   const MotionSequence& eps);

// samples (t, eps, caption language) and evaluates the loss once
double bimd_loss(const DenoiserNetwork& net, const MotionSequence& x0,
                 const std::vector<Mat>& cond_pool, const NoiseSchedule& s, Rng& rng);

// full reverse loop t = T..1 from gaussian noise; deterministic per seed
MotionSequence sample(const DenoiserNetwork& net, const Mat& cond, const SamplerConfig& cfg);

struct DiffusionHyper {
  int epochs = 10;
  int batch = 16;
  double lr = 3e-4;
  double weight_decay = 0.0;
  uint64_t seed = 1;
};

struct TrainCurve {
  std::vector<double> epoch_loss;
};

// Bilingual objective: every step pairs each motion with one of its captions
// in a uniformly chosen language. cond_lookup[i] holds the precomputed
// embeddings (both languages of every caption record) of corpus entry i.
TrainCurve train_diffusion(DenoiserNetwork& net,
                           const std::vector<CorpusEntry>& corpus,
                           const std::vector<std::vector<Mat>>& cond_lookup,
                           const NoiseSchedule& s, const DiffusionHyper& hyper);

}  // namespace bimotion
