#include "qkd/optim.hpp"

#include <cmath>

#include "qkd/error.hpp"

namespace qkd::optim {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg) {
  require(params.size() == grads.size(), ErrorCode::ShapeMismatch,
          "adam: " + std::to_string(params.size()) + " parameters vs " +
              std::to_string(grads.size()) + " gradients");
  for (double g : grads)
    if (!std::isfinite(g)) throw Error(ErrorCode::NonFiniteGrad, "adam: non-finite gradient");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  require(state.m.size() == params.size(), ErrorCode::ShapeMismatch, "adam: state size mismatch");
  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  const double inv1 = 1.0 / bc1, inv2 = 1.0 / bc2;
  double* m = state.m.data();
  double* v = state.v.data();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    params[i] -= cfg.lr * (m[i] * inv1) / (std::sqrt(v[i] * inv2) + cfg.eps);
  }
}

Adam::Adam(std::vector<ad::Parameter*> params, AdamConfig cfg)
    : params_(std::move(params)), states_(params_.size()), cfg_(cfg) {}

void Adam::step() {
  // Validate everything first so a bad gradient leaves all parameters untouched.
  for (const auto* p : params_)
    for (double g : p->grad.vec())
      if (!std::isfinite(g)) throw Error(ErrorCode::NonFiniteGrad, "adam: non-finite gradient in " + p->name);
  for (std::size_t i = 0; i < params_.size(); ++i)
    adam_step(params_[i]->value.vec(), params_[i]->grad.vec(), states_[i], cfg_);
  ++t_;
}

void Adam::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

void validate(const SpsaGains& g) {
  require(g.a > 0 && g.c > 0 && g.A >= 0 && g.gamma > 0 && g.gamma < g.alpha && g.alpha <= 1.0,
          ErrorCode::BadGains, "spsa gains must satisfy a, c > 0, A >= 0, 0 < gamma < alpha <= 1");
}

Spsa::Spsa(SpsaGains gains, std::uint64_t seed) : gains_(gains), rng_(seed) { validate(gains_); }

SpsaStepResult Spsa::step(std::span<double> theta, const LossFn& loss) {
  const double k = static_cast<double>(k_);
  const double ck = gains_.c / std::pow(k + 1.0, gains_.gamma);
  const double ak = gains_.a / std::pow(gains_.A + k + 1.0, gains_.alpha);
  std::vector<double> delta(theta.size()), plus(theta.size()), minus(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    delta[i] = rng_.rademacher();
    plus[i] = theta[i] + ck * delta[i];
    minus[i] = theta[i] - ck * delta[i];
  }
  SpsaStepResult r;
  r.loss_plus = loss(plus);
  r.loss_minus = loss(minus);
  evaluations_ += 2;
  require(std::isfinite(r.loss_plus) && std::isfinite(r.loss_minus), ErrorCode::NonFiniteLoss,
          "spsa: non-finite loss at step " + std::to_string(k_));
  const double diff = r.loss_plus - r.loss_minus;
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= ak * diff / (2.0 * ck * delta[i]);
  ++k_;
  return r;
}

std::vector<double> spsa_gradient(std::span<const double> theta, const LossFn& loss, double c,
                                  Rng& rng) {
  std::vector<double> delta(theta.size()), plus(theta.size()), minus(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    delta[i] = rng.rademacher();
    plus[i] = theta[i] + c * delta[i];
    minus[i] = theta[i] - c * delta[i];
  }
  const double lp = loss(plus), lm = loss(minus);
  require(std::isfinite(lp) && std::isfinite(lm), ErrorCode::NonFiniteLoss,
          "spsa: non-finite loss while probing");
  std::vector<double> g(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) g[i] = (lp - lm) / (2.0 * c * delta[i]);
  return g;
}

SpsaCalibration spsa_calibrate(const LossFn& loss, std::span<const double> theta0, long long steps,
                               std::uint64_t seed, int noise_evals, int probes, double target_step) {
  require(steps >= 1 && noise_evals >= 2 && probes >= 1 && target_step > 0, ErrorCode::BadGains,
          "spsa calibration needs steps >= 1, noise_evals >= 2, probes >= 1");
  SpsaCalibration cal;
  double mean = 0.0, m2 = 0.0;
  for (int i = 0; i < noise_evals; ++i) {
    const double l = loss(theta0);
    require(std::isfinite(l), ErrorCode::NonFiniteLoss, "spsa calibration: non-finite loss");
    const double d = l - mean;
    mean += d / (i + 1);
    m2 += d * (l - mean);
  }
  cal.evaluations += noise_evals;
  cal.noise_std = std::sqrt(m2 / (noise_evals - 1));
  cal.gains.c = std::max(1e-2, cal.noise_std);
  cal.gains.A = 0.1 * static_cast<double>(steps);

  Rng rng(seed);
  double norm_sum = 0.0;
  for (int p = 0; p < probes; ++p) {
    const auto g = spsa_gradient(theta0, loss, cal.gains.c, rng);
    double n2 = 0.0;
    for (double v : g) n2 += v * v;
    norm_sum += std::sqrt(n2);
  }
  cal.evaluations += 2LL * probes;
  cal.probe_norm = norm_sum / probes;
  cal.gains.a = target_step * std::pow(cal.gains.A + 1.0, cal.gains.alpha) /
                std::max(cal.probe_norm, 1e-6);
  return cal;
}

}  // namespace qkd::optim
