#pragma once

// Six-qubit statevector simulator for the variational student.
// Basis index bit i holds qubit i (little-endian, as in Qiskit).

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qkd/rng.hpp"

namespace qkd::quantum {

using cplx = std::complex<double>;

inline constexpr int kQubits = 6;
inline constexpr std::size_t kDim = std::size_t{1} << kQubits;
inline constexpr int kFeatureReps = 2;
inline constexpr int kAnsatzReps = 2;
inline constexpr double kKappa = 4.0;

struct StateVector {
  std::array<cplx, kDim> amp{};

  /// |0...0>
  static StateVector zero();
  double norm_sq() const;
};

enum class GateKind { H, Ry, Rz, P, CX };

struct Gate {
  GateKind kind = GateKind::H;
  int target = 0;
  int control = -1;  // CX only
  double angle = 0.0;
};

/// Applies one gate in place. Rz(t) = diag(e^{-it/2}, e^{it/2}),
/// P(p) = diag(1, e^{ip}), Ry(t) = [[c, -s], [s, c]] with c, s of t/2.
void apply_gate(StateVector& state, const Gate& gate);
void apply_circuit(StateVector& state, std::span<const Gate> gates);

inline Gate h(int q) { return {GateKind::H, q, -1, 0.0}; }
inline Gate ry(int q, double t) { return {GateKind::Ry, q, -1, t}; }
inline Gate rz(int q, double t) { return {GateKind::Rz, q, -1, t}; }
inline Gate phase(int q, double p) { return {GateKind::P, q, -1, p}; }
inline Gate cx(int control, int target) { return {GateKind::CX, target, control, 0.0}; }

/// Latents are clamped to [-pi, pi] before encoding.
std::vector<Gate> zz_feature_map_circuit(std::span<const double> x, int reps = kFeatureReps);
std::vector<Gate> efficient_su2_circuit(std::span<const double> theta, int reps = kAnsatzReps);

void zz_feature_map(StateVector& state, std::span<const double> x, int reps = kFeatureReps);
void efficient_su2(StateVector& state, std::span<const double> theta, int reps = kAnsatzReps);

/// 2 * n_qubits * (reps + 1).
constexpr std::size_t efficient_su2_param_count(int reps = kAnsatzReps) {
  return 2 * static_cast<std::size_t>(kQubits) * static_cast<std::size_t>(reps + 1);
}

std::array<double, kQubits> z_expectations(const StateVector& state);

/// Finite-shot estimate of each <Z_i> from `shots` sampled bitstrings.
std::array<double, kQubits> sampled_z_expectations(const StateVector& state, int shots, Rng& rng);

double vqc_logit(std::span<const double> expectations, double kappa = kKappa);

struct VqcOptions {
  int feature_reps = kFeatureReps;
  int ansatz_reps = kAnsatzReps;
  double kappa = kKappa;
  int shots = 0;  // 0 = exact expectations
};

/// |0> -> ZZ feature map -> EfficientSU2 -> <Z> -> kappa * mean.
/// `shot_rng` is required when options.shots > 0.
double vqc_forward(std::span<const double> x, std::span<const double> theta,
                   const VqcOptions& options = {}, Rng* shot_rng = nullptr);

/// Process-wide number of vqc_forward calls so far.
std::uint64_t vqc_forward_calls();

struct ThetaCheckpoint {
  std::vector<double> theta;
  int reps = kAnsatzReps;
  int feature_map_reps = kFeatureReps;
  double kappa = kKappa;
  std::uint64_t seed = 0;
};

std::string encode_theta(const ThetaCheckpoint& ckpt);
ThetaCheckpoint decode_theta(const std::string& text);

}  // namespace qkd::quantum
