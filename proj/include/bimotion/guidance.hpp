#pragma once

#include "bimotion/denoiser.hpp"
#include "bimotion/reward_model.hpp"

namespace bimotion {

// Precomputed clean-motion latents (t = 0) of the training set, used to pick
// the retrieval anchor of a sampling run. Tied to one frozen reward model by
// its parameter hash.
struct RetrievalIndex {
  struct Entry {
    std::string motion_id;
    Mat latent;
  };
  std::vector<Entry> entries;
  uint64_t model_hash = 0;
};

RetrievalIndex build_index(const std::vector<CorpusEntry>& corpus,
                           const StepAwareRewardModel& m);

struct AnchorResult {
  std::string motion_id;
  Mat latent;
};

// argmax of cos(entry latent, text latent); ties break to the smallest id
AnchorResult retrieve_anchor(const RetrievalIndex& index, const std::vector<int>& tokens,
                             const StepAwareRewardModel& m);

// cosine between the motion's latent at timestep t and the fixed anchor latent
double reward_m(const StepAwareRewardModel& m, const MotionSequence& x, int timestep,
                const Mat& anchor_latent);

double dual_reward(const StepAwareRewardModel& m, const MotionSequence& x, int timestep,
                   const std::vector<int>& tokens, const Mat& anchor_latent, double mu,
                   double eta);

// the unnormalized log-density of the reward distribution is the reward itself
inline double log_reward_density_unnormalized(double dual_reward_value) {
  return dual_reward_value;
}

struct DualRewardGradient {
  double r_phi = 0.0;
  double r_m = 0.0;
  MotionSequence grad;  // d(mu*r_phi + eta*r_m)/dx
};

DualRewardGradient dual_reward_grad(const StepAwareRewardModel& m, const MotionSequence& x,
                                    int timestep, const std::vector<int>& tokens,
                                    const Mat& anchor_latent, double mu, double eta);

struct StepTraceRow {
  int t = 0;
  double r_phi = 0.0;
  double r_m = 0.0;
  double grad_norm = 0.0;
};

struct GuidedSampleResult {
  MotionSequence motion;
  std::string anchor_id;
  std::vector<StepTraceRow> trace;
};

// One reward-guided reverse step. The reward gradient is evaluated at x_t
// before the denoiser update; eq14 scales it by beta_t/sqrt(alpha_t), eq15
// adds it unweighted.
MotionSequence guided_step(const MotionSequence& x_t, const MotionSequence& eps_hat, int t,
                           const NoiseSchedule& s, const MotionSequence& eps_draw,
                           const MotionSequence& reward_grad, GuidanceMode mode);

// Reward-guided reverse loop: draw x_T, retrieve the anchor once, then step
// t = T..1 with the gaussian draw zeroed at t = 1. Bitwise identical to the
// vanilla sampler when mu = eta = 0.
GuidedSampleResult guided_sample(const DenoiserNetwork& net, const StepAwareRewardModel& m,
                                 const RetrievalIndex& index, const std::vector<int>& tokens,
                                 const Mat& cond, const SamplerConfig& cfg);

}  // namespace bimotion
