#pragma once

#include "bimotion/corpus.hpp"
#include "bimotion/nets.hpp"
#include "bimotion/schedule.hpp"

namespace bimotion {

struct RewardConfig {
  int feature_dim = 6;
  int vocab_size = 128;  // joint bilingual vocabulary
  int d_model = 32;
  int num_blocks = 2;
  int num_heads = 4;
  int latent_dim = 16;
  int max_timestep = 100;  // t=0 is the clean-data token context
};

// Gaussian latent (mu, log_sigma); training samples z = mu + exp(ls) * xi,
// inference uses mu.
struct DistributionalLatent {
  Mat mu;
  Mat log_sigma;
};

struct RewardHyper {
  double lambda1 = 1e-5;
  double lambda2 = 1e-5;
  double tau = 0.1;
  double neg_threshold = 0.9;
  double noisy_prob = 0.5;
  int epochs = 20;
  int batch = 32;
  double lr = 1e-4;
  double weight_decay = 0.0;
  uint64_t seed = 1;

  void validate() const {
    require(tau > 0.0, errc::validation, "reward hyper: tau must be positive");
    require(neg_threshold >= -1.0 && neg_threshold <= 1.0, errc::validation,
            "reward hyper: neg_threshold in [-1,1]");
    require(noisy_prob >= 0.0 && noisy_prob <= 1.0, errc::validation,
            "reward hyper: noisy_prob in [0,1]");
  }
};

// Step-aware text-motion alignment model: a motion encoder whose token
// sequence is [e_t, x^1..x^N], a text encoder, and a motion decoder.
struct StepAwareRewardModel {
  RewardConfig cfg;
  ParamStore params;
};

StepAwareRewardModel make_reward_model(const RewardConfig& cfg, uint64_t seed);

struct LatentNodes {
  int mu = -1;
  int log_sigma = -1;
  int sentence_state = -1;  // pre-projection mean state (text branch only)
};

LatentNodes motion_latent_nodes(Tape& t, const TapeBinding& p, const RewardConfig& cfg,
                                int x_node, int timestep);
LatentNodes text_latent_nodes(Tape& t, const TapeBinding& p, const RewardConfig& cfg,
                              const std::vector<int>& tokens);
int decode_motion_node(Tape& t, const TapeBinding& p, const RewardConfig& cfg, int z_node,
                       int num_frames);

DistributionalLatent encode_motion(const StepAwareRewardModel& m, const MotionSequence& x,
                                   int timestep);
DistributionalLatent encode_text(const StepAwareRewardModel& m, const std::vector<int>& tokens);
MotionSequence decode_motion(const StepAwareRewardModel& m, const Mat& z, int num_frames);

// closed-form KL between diagonal gaussians given (mu, log_sigma) rows
double gaussian_kl_diag(const Mat& mu1, const Mat& ls1, const Mat& mu2, const Mat& ls2);
int gaussian_kl_node(Tape& t, int mu1, int ls1, int mu2, int ls2);
int gaussian_kl_std_node(Tape& t, int mu, int ls);  // against N(0, I)

// Symmetric InfoNCE over a similarity matrix with negative filtering.
// keep[i*n+j] == 0 drops pair (i,j) from both denominators; the diagonal is
// always kept.
int contrastive_loss_node(Tape& t, int sim, const std::vector<uint8_t>& keep, double tau);
std::vector<uint8_t> negative_filter_mask(const std::vector<Mat>& sentence_states,
                                          double neg_threshold);
double contrastive_loss(const Mat& sim, const std::vector<Mat>& sentence_states,
                        const RewardHyper& hyper);

// One training item for the representation loss.
struct RewardBatchItem {
  MotionSequence noised;       // motion at timestep t (clean when t == 0)
  const Mat* clean = nullptr;  // reconstruction target
  int t = 0;
  const std::vector<int>* tokens = nullptr;
  Mat xi_motion;  // latent sampling noise, [1, latent_dim]
  Mat xi_text;
};

double representation_loss(const StepAwareRewardModel& m,
                           const std::vector<RewardBatchItem>& batch,
                           const RewardHyper& hyper);

struct RewardTrainCurves {
  std::vector<double> total;
  std::vector<double> contrastive;
  std::vector<double> representation;
};

RewardTrainCurves train_reward(StepAwareRewardModel& m, const std::vector<CorpusEntry>& corpus,
                               const NoiseSchedule& s, const RewardHyper& hyper);

// cosine alignment reward in [-1, 1]
double reward_phi(const StepAwareRewardModel& m, const MotionSequence& x, int timestep,
                  const std::vector<int>& tokens);

struct RewardGradient {
  double value = 0.0;
  MotionSequence grad;
};

// reward and its gradient w.r.t. the motion input; the text latent is constant
RewardGradient reward_phi_grad(const StepAwareRewardModel& m, const MotionSequence& x,
                               int timestep, const std::vector<int>& tokens);

uint64_t param_hash(const ParamStore& ps);

}  // namespace bimotion
