#include "bimotion/sde_oracle.hpp"

#include <algorithm>
#include <cmath>

#include "bimotion/parallel.hpp"
#include "bimotion/rng.hpp"

namespace bimotion {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

void GaussianMixture1D::validate() const {
  require(!weight.empty() && weight.size() == mean.size() && weight.size() == var.size(),
          errc::validation, "mixture: inconsistent component arrays");
  double sum = 0.0;
  for (size_t k = 0; k < weight.size(); ++k) {
    require(weight[k] >= 0.0, errc::validation, "mixture: negative weight");
    require(var[k] > 0.0, errc::validation, "mixture: non-positive variance");
    sum += weight[k];
  }
  require(std::fabs(sum - 1.0) <= 1e-12, errc::validation, "mixture: weights must sum to 1");
}

double GaussianMixture1D::moment_mean() const {
  double m = 0.0;
  for (size_t k = 0; k < size(); ++k) m += weight[k] * mean[k];
  return m;
}

double GaussianMixture1D::moment_var() const {
  double m = moment_mean();
  double s = 0.0;
  for (size_t k = 0; k < size(); ++k)
    s += weight[k] * (var[k] + (mean[k] - m) * (mean[k] - m));
  return s;
}

GaussianMixture1D marginal_with_alpha_bar(const GaussianMixture1D& g, double alpha_bar) {
  require(alpha_bar >= 0.0 && alpha_bar <= 1.0, errc::validation,
          "marginal: alpha_bar out of [0,1]");
  GaussianMixture1D out = g;
  double root = std::sqrt(alpha_bar);
  for (size_t k = 0; k < g.size(); ++k) {
    out.mean[k] = root * g.mean[k];
    out.var[k] = alpha_bar * g.var[k] + (1.0 - alpha_bar);
  }
  return out;
}

GaussianMixture1D marginal_at(const GaussianMixture1D& g, int t, const NoiseSchedule& s) {
  return marginal_with_alpha_bar(g, s.alpha_bar_at(t));
}

double log_density(const GaussianMixture1D& g, double x) {
  double best = -1e300;
  std::vector<double> lg(g.size());
  for (size_t k = 0; k < g.size(); ++k) {
    double d = x - g.mean[k];
    lg[k] = std::log(g.weight[k] + 1e-300) - 0.5 * std::log(kTwoPi * g.var[k]) -
            0.5 * d * d / g.var[k];
    best = std::max(best, lg[k]);
  }
  double sum = 0.0;
  for (double v : lg) sum += std::exp(v - best);
  return best + std::log(sum);
}

double score_at(const GaussianMixture1D& g, double x) {
  if (g.size() == 1) return (g.mean[0] - x) / g.var[0];
  double best = -1e300;
  std::vector<double> lg(g.size());
  for (size_t k = 0; k < g.size(); ++k) {
    double d = x - g.mean[k];
    lg[k] = std::log(g.weight[k] + 1e-300) - 0.5 * std::log(kTwoPi * g.var[k]) -
            0.5 * d * d / g.var[k];
    best = std::max(best, lg[k]);
  }
  double den = 0.0, num = 0.0;
  for (size_t k = 0; k < g.size(); ++k) {
    double w = std::exp(lg[k] - best);
    den += w;
    num += w * (g.mean[k] - x) / g.var[k];
  }
  return num / den;
}

GaussianMixture1D tilted_distribution(const GaussianMixture1D& g, const AnalyticReward& r) {
  g.validate();
  GaussianMixture1D out = g;
  if (r.kind == AnalyticReward::Kind::linear) {
    // N(m, v) * exp(a x) -> N(m + a v, v), log-weight shift a m + a^2 v / 2
    double lmax = -1e300;
    std::vector<double> lw(g.size());
    for (size_t k = 0; k < g.size(); ++k) {
      out.mean[k] = g.mean[k] + r.a * g.var[k];
      lw[k] = std::log(g.weight[k] + 1e-300) + r.a * g.mean[k] + 0.5 * r.a * r.a * g.var[k];
      lmax = std::max(lmax, lw[k]);
    }
    double sum = 0.0;
    for (size_t k = 0; k < g.size(); ++k) {
      out.weight[k] = std::exp(lw[k] - lmax);
      sum += out.weight[k];
    }
    for (auto& w : out.weight) w /= sum;
  } else {
    require(r.kappa >= 0.0, errc::validation, "tilt: quadratic reward needs kappa >= 0");
    // complete the square: precision gains 2*kappa
    double lmax = -1e300;
    std::vector<double> lw(g.size());
    for (size_t k = 0; k < g.size(); ++k) {
      double denom = 1.0 + 2.0 * r.kappa * g.var[k];
      require(denom > 1e-12, errc::validation, "tilt: quadratic reward precondition violated");
      out.var[k] = g.var[k] / denom;
      out.mean[k] = (g.mean[k] + 2.0 * r.kappa * g.var[k] * r.m_star) / denom;
      double dm = g.mean[k] - r.m_star;
      lw[k] = std::log(g.weight[k] + 1e-300) - 0.5 * std::log(denom) -
              r.kappa * dm * dm / denom;
      lmax = std::max(lmax, lw[k]);
    }
    double sum = 0.0;
    for (size_t k = 0; k < g.size(); ++k) {
      out.weight[k] = std::exp(lw[k] - lmax);
      sum += out.weight[k];
    }
    for (auto& w : out.weight) w /= sum;
  }
  return out;
}

LiftedSchedule::LiftedSchedule(const NoiseSchedule& s) : s_(&s) {
  cum_.resize(s.T + 1, 0.0);
  for (int i = 0; i < s.T; ++i) cum_[i + 1] = cum_[i] + s.beta[i];
}

double LiftedSchedule::rate(double tau) const {
  require(tau >= 0.0 && tau <= 1.0, errc::validation, "lift: tau out of [0,1]");
  int bin = static_cast<int>(std::ceil(tau * s_->T));
  bin = std::max(1, std::min(bin, s_->T));
  return s_->beta[bin - 1] * s_->T;
}

double LiftedSchedule::integral(double tau) const {
  require(tau >= 0.0 && tau <= 1.0, errc::validation, "lift: tau out of [0,1]");
  double pos = tau * s_->T;
  int full = static_cast<int>(std::floor(pos));
  full = std::min(full, s_->T);
  double frac = pos - full;
  double total = cum_[full];
  if (full < s_->T && frac > 0.0) total += frac * s_->beta[full];
  return total;
}

std::vector<double> euler_maruyama_reverse(const GaussianMixture1D& g,
                                           const AnalyticReward* reward,
                                           const NoiseSchedule& s, int num_steps,
                                           int num_paths, uint64_t seed,
                                           bool include_reward) {
  g.validate();
  require(num_steps >= 10, errc::validation, "euler_maruyama_reverse: num_steps >= 10");
  require(!include_reward || reward != nullptr, errc::validation,
          "euler_maruyama_reverse: reward required when include_reward is set");

  LiftedSchedule lift(s);
  GaussianMixture1D tilted0 = include_reward ? tilted_distribution(g, *reward) : g;

  // per-step tables shared by every path
  double dt = 1.0 / num_steps;
  std::vector<double> rate(num_steps), root_rate_dt(num_steps);
  std::vector<GaussianMixture1D> marg(num_steps);
  for (int k = 0; k < num_steps; ++k) {
    double tau = static_cast<double>(num_steps - k) / num_steps;
    rate[k] = lift.rate(tau);
    root_rate_dt[k] = std::sqrt(rate[k] * dt);
    double ab = lift.alpha_bar(tau);
    marg[k] = marginal_with_alpha_bar(include_reward ? tilted0 : g, ab);
  }

  std::vector<double> out(num_paths);
  Rng root(seed);
  parallel_for(num_paths, default_threads(), [&](int lo, int hi) {
    for (int p = lo; p < hi; ++p) {
      Rng rng = root.substream(static_cast<uint64_t>(p));
      double x = rng.normal();
      for (int k = 0; k < num_steps; ++k) {
        double sc = score_at(marg[k], x);
        x += (0.5 * rate[k] * x + rate[k] * sc) * dt + root_rate_dt[k] * rng.normal();
        if (std::fabs(x) > 1e6)
          throw error(errc::runtime, "euler_maruyama_reverse: path blow-up");
      }
      out[p] = x;
    }
  });
  return out;
}

double ddpm_oracle_update(double x, double eps_hat, int t, const NoiseSchedule& s,
                          double eps_draw, double reward_grad, GuidanceMode mode) {
  double beta = s.beta_at(t);
  double sqrt_alpha = std::sqrt(s.alpha_at(t));
  double xbar = x - beta / std::sqrt(1.0 - s.alpha_bar_at(t)) * eps_hat;
  double next = (xbar + std::sqrt(beta) * eps_draw) / sqrt_alpha;
  if (mode == GuidanceMode::eq14_weighted)
    next += beta / sqrt_alpha * reward_grad;
  else if (mode == GuidanceMode::eq15_unweighted)
    next += reward_grad;
  return next;
}

std::vector<double> ddpm_reverse_with_reward(const GaussianMixture1D& g,
                                             const AnalyticReward* reward,
                                             const NoiseSchedule& s, int num_paths,
                                             uint64_t seed, GuidanceMode mode) {
  g.validate();
  require(mode == GuidanceMode::none || reward != nullptr, errc::validation,
          "ddpm_reverse_with_reward: reward required in guided modes");

  GaussianMixture1D tilted0 = (reward != nullptr) ? tilted_distribution(g, *reward) : g;
  std::vector<GaussianMixture1D> base(s.T), tilt(s.T);
  for (int t = 1; t <= s.T; ++t) {
    base[t - 1] = marginal_at(g, t, s);
    if (mode != GuidanceMode::none) tilt[t - 1] = marginal_with_alpha_bar(tilted0, s.alpha_bar_at(t));
  }

  std::vector<double> out(num_paths);
  Rng root(seed);
  parallel_for(num_paths, default_threads(), [&](int lo, int hi) {
    for (int p = lo; p < hi; ++p) {
      Rng rng = root.substream(static_cast<uint64_t>(p));
      double x = rng.normal();
      for (int t = s.T; t >= 1; --t) {
        double sc = score_at(base[t - 1], x);
        double eps_exact = -std::sqrt(1.0 - s.alpha_bar_at(t)) * sc;
        double grad = 0.0;
        if (mode != GuidanceMode::none) grad = score_at(tilt[t - 1], x) - sc;
        double draw = (t > 1) ? rng.normal() : 0.0;
        x = ddpm_oracle_update(x, eps_exact, t, s, draw, grad, mode);
        if (std::fabs(x) > 1e6)
          throw error(errc::runtime, "ddpm_reverse_with_reward: path blow-up");
      }
      out[p] = x;
    }
  });
  return out;
}

double wasserstein1(std::vector<double> a, std::vector<double> b) {
  require(a.size() == b.size() && !a.empty(), errc::validation,
          "wasserstein1: equal nonempty sizes required");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) sum += std::fabs(a[i] - b[i]);
  return sum / static_cast<double>(a.size());
}

double density_integral(const GaussianMixture1D& g, double lo, double hi, int n) {
  double h = (hi - lo) / n;
  double sum = 0.5 * (std::exp(log_density(g, lo)) + std::exp(log_density(g, hi)));
  for (int i = 1; i < n; ++i) sum += std::exp(log_density(g, lo + h * i));
  return sum * h;
}

namespace {

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

Moments sample_moments(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  v /= static_cast<double>(xs.size() - 1);
  return {m, std::sqrt(v / static_cast<double>(xs.size()))};
}

}  // namespace

TheoremReport run_theorem_suite(int num_paths, uint64_t seed, int num_threads) {
  (void)num_threads;
  TheoremReport rep;
  auto check = [&rep](const std::string& name, double value, double target, double tol) {
    rep.checks.push_back({name, std::fabs(value - target) <= tol, value, target, tol});
  };

  NoiseSchedule sched = make_linear_schedule(1000, 1e-4, 0.02);
  AnalyticReward lin = AnalyticReward::linear(1.0);

  // reverse SDE without reward recovers the data distribution
  GaussianMixture1D std_normal{{1.0}, {0.0}, {1.0}};
  {
    auto xs = euler_maruyama_reverse(std_normal, nullptr, sched, 1000, num_paths, seed, false);
    Moments m = sample_moments(xs);
    check("em_base_mean", m.mean, 0.0, 3.0 * m.se);
  }

  // guided reverse SDE lands on the closed-form tilted gaussian
  {
    auto xs = euler_maruyama_reverse(std_normal, &lin, sched, 1000, num_paths, seed + 1, true);
    Moments m = sample_moments(xs);
    GaussianMixture1D target = tilted_distribution(std_normal, lin);
    check("em_tilted_gaussian_mean", m.mean, target.moment_mean(), 3.0 * m.se);
  }

  // same for the symmetric two-component mixture
  GaussianMixture1D bimodal{{0.5, 0.5}, {-1.0, 1.0}, {1.0, 1.0}};
  {
    auto xs = euler_maruyama_reverse(bimodal, &lin, sched, 1000, num_paths, seed + 2, true);
    Moments m = sample_moments(xs);
    GaussianMixture1D target = tilted_distribution(bimodal, lin);
    check("em_tilted_mixture_mean", m.mean, target.moment_mean(), 3.0 * m.se);
    check("tilted_mixture_weight_high", target.weight[1], 0.8807970779778823, 1e-9);
  }

  // discrete guided denoiser converges to the continuous reference as T grows
  {
    auto ref = euler_maruyama_reverse(std_normal, &lin, sched, 4000, num_paths, seed + 3, true);
    double prev = -1.0;
    bool monotone = true;
    for (int T : {100, 300, 1000}) {
      double scale = 1000.0 / T;
      NoiseSchedule st = make_linear_schedule(T, 1e-4 * scale, 0.02 * scale);
      auto xs = ddpm_reverse_with_reward(std_normal, &lin, st, num_paths, seed + 4,
                                         GuidanceMode::eq14_weighted);
      double w1 = wasserstein1(xs, ref);
      rep.checks.push_back({"ddpm_w1_T" + std::to_string(T), true, w1, 0.0, 0.0});
      if (prev >= 0.0 && w1 >= prev) monotone = false;
      prev = w1;
    }
    rep.checks.push_back({"ddpm_w1_monotone_decrease", monotone, monotone ? 1.0 : 0.0, 1.0, 0.0});
  }

  // guided discrete sampler hits the tilted mean at fine discretization
  {
    auto xs = ddpm_reverse_with_reward(std_normal, &lin, sched, num_paths, seed + 5,
                                       GuidanceMode::eq14_weighted);
    Moments m = sample_moments(xs);
    GaussianMixture1D target = tilted_distribution(std_normal, lin);
    check("ddpm_tilted_gaussian_mean", m.mean, target.moment_mean(), 3.0 * m.se);
  }

  // tilt identities
  {
    GaussianMixture1D fwd = tilted_distribution(bimodal, lin);
    GaussianMixture1D back = tilted_distribution(fwd, AnalyticReward::linear(-1.0));
    double err = 0.0;
    for (size_t k = 0; k < bimodal.size(); ++k) {
      err = std::max(err, std::fabs(back.weight[k] - bimodal.weight[k]));
      err = std::max(err, std::fabs(back.mean[k] - bimodal.mean[k]));
    }
    check("tilt_inverse_roundtrip", err, 0.0, 1e-10);
  }

  // score matches the numerical derivative of the log-density
  {
    double h = 1e-6;
    double max_rel = 0.0;
    for (double x : {-2.0, -0.5, 0.0, 0.7, 2.3}) {
      double numeric = (log_density(bimodal, x + h) - log_density(bimodal, x - h)) / (2.0 * h);
      double exact = score_at(bimodal, x);
      max_rel = std::max(max_rel, std::fabs(numeric - exact) /
                                      std::max(1e-12, std::fabs(exact) + 1e-6));
    }
    check("score_numeric_derivative", max_rel, 0.0, 1e-6);
  }

  // constructed densities stay normalized
  {
    double z1 = density_integral(tilted_distribution(bimodal, lin), -20.0, 20.0, 40000);
    double z2 = density_integral(marginal_with_alpha_bar(bimodal, 0.25), -20.0, 20.0, 40000);
    check("tilted_normalization", z1, 1.0, 1e-6);
    check("marginal_normalization", z2, 1.0, 1e-6);
  }

  return rep;
}

}  // namespace bimotion
