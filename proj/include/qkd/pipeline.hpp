#pragma once

// Synthetic data, training loops for the proxy teacher and the three
// students, run configuration, and the per-fold cell runner shared by the
// distill and grid commands.

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qkd/distill.hpp"
#include "qkd/evalkit.hpp"
#include "qkd/models.hpp"
#include "qkd/optim.hpp"
#include "qkd/signal.hpp"

namespace qkd::pipeline {

// ---------------------------------------------------------------------------
// Synthetic two-class pseudo-ECG

struct SynthSpec {
  std::size_t n_windows = 2000;
  double balance = 0.5;  // fraction of class-1 windows
  double sigma = 0.2;    // additive Gaussian noise
  std::uint64_t seed = 0;
};

inline constexpr double kBumpPeriod = 64.0;
inline constexpr double kBumpWidth = 1.5;
inline constexpr double kIrregularJitter = 16.0;
inline constexpr double kAlternateAmplitude = 0.8;

/// Throws BadSpec unless n_windows >= 10 * folds, balance lies in (0, 1),
/// sigma >= 0 and each class receives at least `folds` windows.
void validate(const SynthSpec& spec, int folds = 5);

/// Class 0: Gaussian bumps every 64 samples from a random phase.
/// Class 1: bump spacing 64 + U(-16, 16) and every other bump scaled by 0.8.
/// Noise is added, then each window is z-scored. Labels are shuffled.
std::vector<signal::EcgWindow> synthesize(const SynthSpec& spec);

// ---------------------------------------------------------------------------
// Run configuration

struct TrainSettings {
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
};

struct SpsaSettings {
  long long steps = 300;
  std::size_t batch_size = 64;
  double target_step = 0.1;
};

struct RunConfig {
  std::string dataset;             // window CSV
  std::string teacher_logits;      // logits CSV (file oracle)
  std::string teacher_checkpoint;  // proxy oracle, used when teacher_logits is empty
  std::vector<models::StudentKind> students = {models::StudentKind::cnn1d,
                                               models::StudentKind::resnet1d,
                                               models::StudentKind::ae_vqc};
  double alpha = 0.5;
  double temperature = 2.0;
  TrainSettings train;
  std::map<models::StudentKind, TrainSettings> per_student;
  TrainSettings autoencoder{20, 64, 1e-3};
  SpsaSettings spsa;
  std::optional<long long> shot_noise;
  int folds = 5;
  std::optional<std::uint64_t> seed;
  std::string output_dir = ".";
  int jobs = 1;

  TrainSettings settings_for(models::StudentKind kind) const;
};

/// Strict JSON parse: unknown keys and wrong types raise BadConfig.
RunConfig parse_run_config(std::string_view json_text);
RunConfig read_run_config(const std::string& path);

/// Range checks for every field; throws BadAlpha, BadTemperature or BadConfig.
void validate(const RunConfig& cfg);

// ---------------------------------------------------------------------------
// Training

struct TrainLog {
  std::vector<double> epoch_loss;  // mean batch loss per epoch
};

/// Adam on the batch-mean KD loss over windows[indices]. `teacher_logits` is
/// indexed by window position.
TrainLog train_classifier(models::Classifier& model, std::span<const signal::EcgWindow> windows,
                          std::span<const std::size_t> indices,
                          std::span<const double> teacher_logits, const distill::KdConfig& kd,
                          const TrainSettings& settings, std::uint64_t seed);

struct TeacherResult {
  std::unique_ptr<models::Classifier> model;
  TrainLog log;
  double train_accuracy = 0.0;
};

inline constexpr std::size_t kTeacherWidth = 4;

/// Wide CNN (channels x4) trained on hard labels over every window.
TeacherResult train_teacher(std::span<const signal::EcgWindow> windows,
                            const TrainSettings& settings, std::uint64_t seed);

/// Adam on reconstruction MSE.
TrainLog train_autoencoder(models::Autoencoder& ae, std::span<const signal::EcgWindow> windows,
                           std::span<const std::size_t> indices, const TrainSettings& settings,
                           std::uint64_t seed);

using Latent = std::array<double, models::kLatentDim>;

/// Encoder output for every window, in order.
std::vector<Latent> encode_latents(const models::Autoencoder& ae,
                                   std::span<const signal::EcgWindow> windows,
                                   std::size_t batch_size = 256);

/// Per-dimension affine map fitted on training latents: zero mean, std pi/2.
struct LatentScaler {
  Latent mean{};
  Latent scale{};
  Latent apply(const Latent& z) const;
};
LatentScaler fit_latent_scaler(std::span<const Latent> latents, std::span<const std::size_t> indices);

struct VqcTrainResult {
  std::vector<double> theta;
  optim::SpsaGains gains;
  long long steps = 0;
  long long spsa_evaluations = 0;         // batched loss evaluations inside SPSA steps
  long long calibration_evaluations = 0;  // batched loss evaluations spent on gain calibration
  long long circuit_evaluations = 0;      // vqc_forward calls inside SPSA steps
  std::vector<double> loss_history;       // mean of the two perturbed losses per step
};

/// SPSA on the KD loss; each evaluation averages over one 64-latent batch.
/// `inputs` are already scaled latents aligned with `teacher_logits` and `labels`.
VqcTrainResult train_vqc(std::span<const Latent> inputs, std::span<const double> teacher_logits,
                         std::span<const int> labels, const distill::KdConfig& kd,
                         const SpsaSettings& settings, std::optional<long long> shots,
                         std::uint64_t seed);

// ---------------------------------------------------------------------------
// Cross-validated cells

struct Dataset {
  std::string name;
  std::vector<signal::EcgWindow> windows;
  std::vector<int> labels;
  std::vector<double> teacher_logits;
};

Dataset make_dataset(std::string name, std::vector<signal::EcgWindow> windows,
                     std::vector<double> teacher_logits);

/// Stratified folds, grouped by source_id when some id repeats.
std::vector<eval::FoldSplit> make_folds(const Dataset& data, int k, std::uint64_t seed);

/// Teacher logits scored on each fold's validation indices.
eval::TeacherEntry teacher_fold_metrics(const Dataset& data, std::span<const eval::FoldSplit> folds);

struct CellResult {
  eval::Metrics metrics;
  std::string checkpoint;       // QDST1 bytes (classifier or autoencoder)
  std::string theta_json;       // ae_vqc only
  std::optional<VqcTrainResult> vqc;
};

/// Trains and scores (student, alpha, T, fold) cells. Autoencoders are trained
/// once per fold and shared across cells; calls are thread-safe.
class CellRunner {
 public:
  CellRunner(const Dataset& data, const RunConfig& cfg);

  CellResult run(models::StudentKind student, double alpha, double temperature,
                 const eval::FoldSplit& fold);
  eval::Metrics operator()(models::StudentKind student, double alpha, double temperature,
                           const eval::FoldSplit& fold) {
    return run(student, alpha, temperature, fold).metrics;
  }

 private:
  struct AeFold;
  struct AeSlot {
    std::mutex mutex;
    std::shared_ptr<const AeFold> ae;
  };
  std::shared_ptr<const AeFold> autoencoder_for(const eval::FoldSplit& fold);

  const Dataset& data_;
  RunConfig cfg_;
  std::mutex mutex_;
  std::map<int, std::shared_ptr<AeSlot>> ae_slots_;
};

/// Raises glibc's mmap and trim thresholds so training buffers are reused
/// instead of being returned to the kernel after every step.
void configure_allocator();

}  // namespace qkd::pipeline
