#include "qkd/quantum.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>

#include "json.hpp"
#include "qkd/error.hpp"

namespace qkd::quantum {

namespace {

std::atomic<std::uint64_t> forward_calls{0};

void check_qubit(int q) {
  require(q >= 0 && q < kQubits, ErrorCode::BadQubitIndex,
          "qubit index " + std::to_string(q) + " outside [0, " + std::to_string(kQubits) + ")");
}

void check_normalized(const StateVector& state) {
  const double norm = std::sqrt(state.norm_sq());
  require(std::abs(norm - 1.0) <= 1e-9, ErrorCode::NonNormalizedState,
          "state norm " + std::to_string(norm) + " is not 1");
}

}  // namespace

StateVector StateVector::zero() {
  StateVector s;
  s.amp[0] = 1.0;
  return s;
}

double StateVector::norm_sq() const {
  double n = 0.0;
  for (const auto& a : amp) n += std::norm(a);
  return n;
}

void apply_gate(StateVector& state, const Gate& gate) {
  check_qubit(gate.target);
  const std::size_t m = std::size_t{1} << gate.target;
  auto& a = state.amp;
  switch (gate.kind) {
    case GateKind::H: {
      const double r = 1.0 / std::numbers::sqrt2;
      for (std::size_t i = 0; i < kDim; ++i) {
        if (i & m) continue;
        const cplx x = a[i], y = a[i | m];
        a[i] = r * (x + y);
        a[i | m] = r * (x - y);
      }
      break;
    }
    case GateKind::Ry: {
      const double c = std::cos(0.5 * gate.angle), s = std::sin(0.5 * gate.angle);
      for (std::size_t i = 0; i < kDim; ++i) {
        if (i & m) continue;
        const cplx x = a[i], y = a[i | m];
        a[i] = c * x - s * y;
        a[i | m] = s * x + c * y;
      }
      break;
    }
    case GateKind::Rz: {
      const cplx lo = std::polar(1.0, -0.5 * gate.angle), hi = std::polar(1.0, 0.5 * gate.angle);
      for (std::size_t i = 0; i < kDim; ++i) a[i] *= (i & m) ? hi : lo;
      break;
    }
    case GateKind::P: {
      const cplx ph = std::polar(1.0, gate.angle);
      for (std::size_t i = 0; i < kDim; ++i)
        if (i & m) a[i] *= ph;
      break;
    }
    case GateKind::CX: {
      check_qubit(gate.control);
      require(gate.control != gate.target, ErrorCode::BadQubitIndex,
              "CX control and target must differ");
      const std::size_t c = std::size_t{1} << gate.control;
      for (std::size_t i = 0; i < kDim; ++i)
        if ((i & c) && !(i & m)) std::swap(a[i], a[i | m]);
      break;
    }
  }
}

void apply_circuit(StateVector& state, std::span<const Gate> gates) {
  for (const auto& g : gates) apply_gate(state, g);
}

std::vector<Gate> zz_feature_map_circuit(std::span<const double> x, int reps) {
  require(reps >= 1, ErrorCode::BadReps, "feature map reps must be >= 1");
  require(x.size() == kQubits, ErrorCode::ShapeMismatch,
          "feature input must have " + std::to_string(kQubits) + " values");
  constexpr double pi = std::numbers::pi;
  std::array<double, kQubits> v{};
  for (int i = 0; i < kQubits; ++i) {
    require(std::isfinite(x[i]), ErrorCode::OutOfRange, "feature input is not finite");
    v[i] = std::clamp(x[i], -pi, pi);
  }
  std::vector<Gate> gates;
  for (int r = 0; r < reps; ++r) {
    for (int q = 0; q < kQubits; ++q) gates.push_back(h(q));
    for (int q = 0; q < kQubits; ++q) gates.push_back(phase(q, 2.0 * v[q]));
    for (int q = 0; q + 1 < kQubits; ++q) {
      gates.push_back(cx(q, q + 1));
      gates.push_back(phase(q + 1, 2.0 * (pi - v[q]) * (pi - v[q + 1])));
      gates.push_back(cx(q, q + 1));
    }
  }
  return gates;
}

std::vector<Gate> efficient_su2_circuit(std::span<const double> theta, int reps) {
  require(reps >= 1, ErrorCode::BadReps, "ansatz reps must be >= 1");
  require(theta.size() == efficient_su2_param_count(reps), ErrorCode::BadThetaLength,
          "theta has " + std::to_string(theta.size()) + " values, expected " +
              std::to_string(efficient_su2_param_count(reps)));
  std::vector<Gate> gates;
  std::size_t k = 0;
  auto rotations = [&] {
    for (int q = 0; q < kQubits; ++q) gates.push_back(ry(q, theta[k++]));
    for (int q = 0; q < kQubits; ++q) gates.push_back(rz(q, theta[k++]));
  };
  for (int r = 0; r < reps; ++r) {
    rotations();
    for (int q = 0; q + 1 < kQubits; ++q) gates.push_back(cx(q, q + 1));
  }
  rotations();
  return gates;
}

void zz_feature_map(StateVector& state, std::span<const double> x, int reps) {
  const auto gates = zz_feature_map_circuit(x, reps);
  apply_circuit(state, gates);
}

void efficient_su2(StateVector& state, std::span<const double> theta, int reps) {
  const auto gates = efficient_su2_circuit(theta, reps);
  apply_circuit(state, gates);
}

std::array<double, kQubits> z_expectations(const StateVector& state) {
  check_normalized(state);
  std::array<double, kQubits> z{};
  for (std::size_t b = 0; b < kDim; ++b) {
    const double p = std::norm(state.amp[b]);
    for (int q = 0; q < kQubits; ++q) z[q] += (b >> q) & 1 ? -p : p;
  }
  for (double& v : z) v = std::clamp(v, -1.0, 1.0);
  return z;
}

std::array<double, kQubits> sampled_z_expectations(const StateVector& state, int shots, Rng& rng) {
  check_normalized(state);
  require(shots > 0, ErrorCode::BadConfig, "shot count must be positive");
  std::array<double, kDim> cdf{};
  double acc = 0.0;
  for (std::size_t b = 0; b < kDim; ++b) cdf[b] = acc += std::norm(state.amp[b]);
  std::array<long, kQubits> ones{};
  for (int s = 0; s < shots; ++s) {
    const double u = rng.uniform() * acc;
    const auto b = static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin(),
                                 static_cast<std::ptrdiff_t>(kDim - 1)));
    for (int q = 0; q < kQubits; ++q) ones[q] += (b >> q) & 1;
  }
  std::array<double, kQubits> z{};
  for (int q = 0; q < kQubits; ++q) z[q] = 1.0 - 2.0 * static_cast<double>(ones[q]) / shots;
  return z;
}

double vqc_logit(std::span<const double> expectations, double kappa) {
  require(!expectations.empty(), ErrorCode::Empty, "no expectation values");
  double sum = 0.0;
  for (double e : expectations) {
    require(e >= -1.0 && e <= 1.0, ErrorCode::OutOfRange,
            "expectation " + std::to_string(e) + " outside [-1, 1]");
    sum += e;
  }
  return kappa * sum / static_cast<double>(expectations.size());
}

double vqc_forward(std::span<const double> x, std::span<const double> theta,
                   const VqcOptions& options, Rng* shot_rng) {
  forward_calls.fetch_add(1, std::memory_order_relaxed);
  auto state = StateVector::zero();
  zz_feature_map(state, x, options.feature_reps);
  efficient_su2(state, theta, options.ansatz_reps);
  if (options.shots > 0) {
    require(shot_rng != nullptr, ErrorCode::BadConfig, "shot noise requires a random source");
    return vqc_logit(sampled_z_expectations(state, options.shots, *shot_rng), options.kappa);
  }
  return vqc_logit(z_expectations(state), options.kappa);
}

std::uint64_t vqc_forward_calls() { return forward_calls.load(std::memory_order_relaxed); }

std::string encode_theta(const ThetaCheckpoint& ckpt) {
  nlohmann::ordered_json j;
  j["theta"] = ckpt.theta;
  j["reps"] = ckpt.reps;
  j["feature_map_reps"] = ckpt.feature_map_reps;
  j["kappa"] = ckpt.kappa;
  j["seed"] = ckpt.seed;
  return j.dump(2) + "\n";
}

ThetaCheckpoint decode_theta(const std::string& text) {
  ThetaCheckpoint ckpt;
  try {
    const auto j = nlohmann::json::parse(text);
    ckpt.theta = j.at("theta").get<std::vector<double>>();
    ckpt.reps = j.at("reps").get<int>();
    ckpt.feature_map_reps = j.at("feature_map_reps").get<int>();
    ckpt.kappa = j.at("kappa").get<double>();
    ckpt.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadCheckpoint, std::string("theta checkpoint: ") + e.what());
  }
  require(ckpt.reps >= 1 && ckpt.feature_map_reps >= 1, ErrorCode::BadCheckpoint,
          "theta checkpoint: reps must be >= 1");
  require(ckpt.theta.size() == efficient_su2_param_count(ckpt.reps), ErrorCode::BadCheckpoint,
          "theta checkpoint: wrong theta length");
  return ckpt;
}

}  // namespace qkd::quantum
