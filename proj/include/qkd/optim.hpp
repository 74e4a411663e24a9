#pragma once

// Adam for backpropagated models and SPSA for circuit parameters.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "qkd/autodiff.hpp"
#include "qkd/rng.hpp"

namespace qkd::optim {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m, v;
  long long t = 0;
};

/// One bias-corrected Adam update of a flat parameter vector.
/// Throws ShapeMismatch / NonFiniteGrad.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg = {});

/// Adam over a list of parameters, reading `Parameter::grad`.
class Adam {
 public:
  explicit Adam(std::vector<ad::Parameter*> params, AdamConfig cfg = {});
  void step();
  void zero_grad();
  long long steps() const { return t_; }

 private:
  std::vector<ad::Parameter*> params_;
  std::vector<AdamState> states_;
  AdamConfig cfg_;
  long long t_ = 0;
};

struct SpsaGains {
  double a = 0.1;
  double c = 1e-2;
  double A = 0.0;
  double alpha = 0.602;
  double gamma = 0.101;
};

/// Throws BadGains unless a, c > 0, A >= 0 and 0 < gamma < alpha <= 1.
void validate(const SpsaGains& gains);

using LossFn = std::function<double(std::span<const double>)>;

struct SpsaStepResult {
  double loss_plus = 0.0;
  double loss_minus = 0.0;
};

/// theta <- theta - a_k g_k with g_k,i = (L(theta + c_k D) - L(theta - c_k D)) / (2 c_k D_i),
/// D Rademacher, c_k = c / (k+1)^gamma, a_k = a / (A+k+1)^alpha.
class Spsa {
 public:
  Spsa(SpsaGains gains, std::uint64_t seed);
  SpsaStepResult step(std::span<double> theta, const LossFn& loss);

  long long iteration() const { return k_; }
  long long evaluations() const { return evaluations_; }
  const SpsaGains& gains() const { return gains_; }

 private:
  SpsaGains gains_;
  Rng rng_;
  long long k_ = 0;
  long long evaluations_ = 0;
};

/// Single simultaneous-perturbation gradient estimate at `theta` with step c.
std::vector<double> spsa_gradient(std::span<const double> theta, const LossFn& loss, double c,
                                  Rng& rng);

struct SpsaCalibration {
  SpsaGains gains;
  double noise_std = 0.0;    // sample std of the repeated loss evaluations
  double probe_norm = 0.0;   // mean 2-norm of the probe gradient estimates
  long long evaluations = 0;
};

/// c = max(1e-2, std of `noise_evals` losses at theta0); A = 0.1 * steps;
/// a = target_step (A+1)^alpha / max(mean ||g||_2 over `probes` estimates, 1e-6),
/// so the first update has 2-norm near `target_step`.
SpsaCalibration spsa_calibrate(const LossFn& loss, std::span<const double> theta0, long long steps,
                               std::uint64_t seed, int noise_evals = 10, int probes = 10,
                               double target_step = 0.1);

}  // namespace qkd::optim
