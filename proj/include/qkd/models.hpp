#pragma once

// Student architectures on top of the autodiff engine. Inputs are
// B x 1 x 256 windows; classifiers emit one logit per sample.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qkd/autodiff.hpp"
#include "qkd/rng.hpp"
#include "qkd/signal.hpp"

namespace qkd::models {

enum class StudentKind { cnn1d, resnet1d, ae_vqc };

StudentKind parse_student_kind(std::string_view name);
std::string_view student_id(StudentKind kind);    // "cnn1d", "resnet1d", "ae_vqc"
std::string_view display_name(StudentKind kind);  // "CNN", "ResNet", "VQC"

inline constexpr std::size_t kLatentDim = 6;

/// Number of trainable scalars held by a parameter store.
std::size_t count_params(const ad::ParamStore& store);

/// Base for models trained end-to-end by backpropagation.
class Classifier {
 public:
  Classifier() = default;
  Classifier(const Classifier&) = delete;
  Classifier& operator=(const Classifier&) = delete;
  virtual ~Classifier() = default;

  /// x: B x 1 x 256 -> logits of shape [B].
  virtual ad::Var forward(ad::Graph& g, ad::Var x, ad::Mode mode, Rng& rng) const = 0;
  virtual std::string architecture() const = 0;

  ad::ParamStore& params() { return params_; }
  const ad::ParamStore& params() const { return params_; }
  std::size_t count_params() const { return models::count_params(params_); }

 protected:
  ad::ParamStore params_;
};

/// Four strided Conv1D+BN+ReLU blocks (1->16->32->64->64, k=5, s=2), global
/// average pooling, dropout 0.3, then 64->32->1 with a ReLU between.
/// `width` scales every hidden width; the proxy teacher uses width 4.
class Cnn1d final : public Classifier {
 public:
  explicit Cnn1d(Rng& init, std::size_t width = 1);
  ad::Var forward(ad::Graph& g, ad::Var x, ad::Mode mode, Rng& rng) const override;
  std::string architecture() const override;

  std::size_t width() const { return width_; }
  const ad::Linear& head_out() const { return fc2_; }

 private:
  std::size_t width_;
  ad::Conv1d conv_[4];
  ad::BatchNorm1d bn_[4];
  ad::Linear fc1_, fc2_;
  double dropout_ = 0.3;
};

/// Two k=3 convolutions with BN, plus identity or 1x1 projection skip.
class BasicBlock {
 public:
  BasicBlock() = default;
  BasicBlock(ad::ParamStore& store, const std::string& name, std::size_t cin, std::size_t cout,
             std::size_t stride, Rng& init);
  ad::Var operator()(ad::Graph& g, ad::Var x, ad::Mode mode) const;

  bool has_projection() const { return has_proj_; }
  const ad::Conv1d& conv1() const { return conv1_; }
  const ad::Conv1d& conv2() const { return conv2_; }
  const ad::BatchNorm1d& bn2() const { return bn2_; }

 private:
  ad::Conv1d conv1_, conv2_, proj_;
  ad::BatchNorm1d bn1_, bn2_, proj_bn_;
  bool has_proj_ = false;
};

/// 1D ResNet-18 layout: stem Conv(1->64, k=7, s=4)+BN+ReLU+MaxPool(3, s=2),
/// four stages of two BasicBlocks (64, 128, 256, 512; stride 2 at stage
/// transitions), global average pooling, linear 512->1.
class ResNet1d final : public Classifier {
 public:
  explicit ResNet1d(Rng& init);
  ad::Var forward(ad::Graph& g, ad::Var x, ad::Mode mode, Rng& rng) const override;
  std::string architecture() const override { return "resnet1d"; }

  static constexpr std::size_t kStageChannels[4] = {64, 128, 256, 512};

 private:
  ad::Conv1d stem_;
  ad::BatchNorm1d stem_bn_;
  std::vector<BasicBlock> blocks_;
  ad::Linear fc_;
};

/// Convolutional autoencoder with a 6-dim bottleneck.
/// Encoder: Conv(1->16->32->64, k=5, s=4, p=1) with ReLU (256->64->16->4),
/// flatten (256), dense 256->6. Decoder mirrors it with a dense 6->256 +
/// ReLU, reshape 64x4, and transposed convolutions back to 1 x 256.
class Autoencoder {
 public:
  explicit Autoencoder(Rng& init);
  Autoencoder(const Autoencoder&) = delete;
  Autoencoder& operator=(const Autoencoder&) = delete;
  Autoencoder(Autoencoder&&) = default;

  ad::Var encode(ad::Graph& g, ad::Var x) const;       // B x 1 x 256 -> B x 6
  ad::Var decode(ad::Graph& g, ad::Var latent) const;  // B x 6 -> B x 1 x 256
  ad::Var reconstruct(ad::Graph& g, ad::Var x) const { return decode(g, encode(g, x)); }

  ad::ParamStore& params() { return params_; }
  const ad::ParamStore& params() const { return params_; }
  std::size_t count_params() const { return models::count_params(params_); }
  std::size_t encoder_param_count() const;

 private:
  ad::ParamStore params_;
  ad::Conv1d enc_[3];
  ad::Linear enc_fc_;
  ad::Linear dec_fc_;
  ad::ConvTranspose1d dec_[3];
};

std::unique_ptr<Classifier> make_classifier(StudentKind kind, Rng& init);

/// Verifies a B x 1 x 256 batch shape.
void check_window_batch(const ad::Shape& shape);

/// Stacks the selected windows into a B x 1 x 256 tensor.
ad::Tensor window_batch(std::span<const signal::EcgWindow> windows,
                        std::span<const std::size_t> indices);

/// Eval-mode logits for every window, in order.
std::vector<double> predict_logits(const Classifier& model,
                                   std::span<const signal::EcgWindow> windows,
                                   std::size_t batch_size = 256);

/// QDST1 bytes holding every parameter, running statistics included.
std::string save_classifier(const Classifier& model, const std::string& metadata_json = "{}");

/// Rebuilds a classifier from its architecture tag ("cnn1d", "cnn1d_x<w>",
/// "resnet1d"). Throws BadCheckpoint.
std::unique_ptr<Classifier> load_classifier(std::string_view bytes);

}  // namespace qkd::models
