#pragma once

#include <vector>

#include "bimotion/motion.hpp"

namespace bimotion {

// Discrete variance-preserving noise schedule. Timesteps are 1-indexed,
// t in {1..T}; index 0 of the arrays corresponds to t=1. t=0 is reserved
// by the reward model for clean data and never indexes these tables.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  double beta_at(int t) const { return beta[check(t)]; }
  double alpha_at(int t) const { return alpha[check(t)]; }
  double alpha_bar_at(int t) const { return alpha_bar[check(t)]; }

 private:
  size_t check(int t) const {
    require(t >= 1 && t <= T, errc::validation, "schedule: timestep out of range");
    return static_cast<size_t>(t - 1);
  }
};

NoiseSchedule make_linear_schedule(int T, double beta_start, double beta_end);

// closed-form forward noising x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
MotionSequence forward_noise(const MotionSequence& x0, int t, const MotionSequence& eps,
                             const NoiseSchedule& s);

}  // namespace bimotion
