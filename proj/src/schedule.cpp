#include "bimotion/schedule.hpp"

#include <cmath>

namespace bimotion {

NoiseSchedule make_linear_schedule(int T, double beta_start, double beta_end) {
  require(T >= 1, errc::validation, "schedule: T must be >= 1");
  require(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0, errc::validation,
          "schedule: need 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.T = T;
  s.beta.resize(T);
  s.alpha.resize(T);
  s.alpha_bar.resize(T);
  double prod = 1.0;
  for (int i = 0; i < T; ++i) {
    double frac = (T == 1) ? 0.0 : static_cast<double>(i) / (T - 1);
    s.beta[i] = beta_start + frac * (beta_end - beta_start);
    s.alpha[i] = 1.0 - s.beta[i];
    prod *= s.alpha[i];
    s.alpha_bar[i] = prod;
  }
  return s;
}

MotionSequence forward_noise(const MotionSequence& x0, int t, const MotionSequence& eps,
                             const NoiseSchedule& s) {
  require(x0.frames.same_shape(eps.frames), errc::validation,
          "forward_noise: eps shape must match x0");
  double ab = s.alpha_bar_at(t);
  double c0 = std::sqrt(ab);
  double c1 = std::sqrt(1.0 - ab);
  MotionSequence out(x0.num_frames(), x0.feature_dim());
  for (size_t i = 0; i < x0.frames.size(); ++i)
    out.frames.d[i] = c0 * x0.frames.d[i] + c1 * eps.frames.d[i];
  return out;
}

}  // namespace bimotion
