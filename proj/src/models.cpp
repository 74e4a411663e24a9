#include "qkd/models.hpp"

#include <algorithm>

#include "qkd/error.hpp"

namespace qkd::models {

using ad::Graph;
using ad::Mode;
using ad::Shape;
using ad::Tensor;
using ad::Var;

StudentKind parse_student_kind(std::string_view name) {
  if (name == "cnn1d") return StudentKind::cnn1d;
  if (name == "resnet1d") return StudentKind::resnet1d;
  if (name == "ae_vqc") return StudentKind::ae_vqc;
  throw Error(ErrorCode::BadConfig, "unknown student '" + std::string(name) + "'");
}

std::string_view student_id(StudentKind kind) {
  switch (kind) {
    case StudentKind::cnn1d: return "cnn1d";
    case StudentKind::resnet1d: return "resnet1d";
    case StudentKind::ae_vqc: return "ae_vqc";
  }
  return "?";
}

std::string_view display_name(StudentKind kind) {
  switch (kind) {
    case StudentKind::cnn1d: return "CNN";
    case StudentKind::resnet1d: return "ResNet";
    case StudentKind::ae_vqc: return "VQC";
  }
  return "?";
}

std::size_t count_params(const ad::ParamStore& store) { return store.trainable_count(); }

void check_window_batch(const Shape& shape) {
  require(shape.rank() == 3 && shape[1] == 1 && shape[2] == 256 && shape[0] >= 1,
          ErrorCode::ShapeMismatch, "expected a B x 1 x 256 batch, got " + shape.str());
}

// ---------------------------------------------------------------------------

Cnn1d::Cnn1d(Rng& init, std::size_t width) : width_(width) {
  const std::size_t ch[5] = {1, 16 * width, 32 * width, 64 * width, 64 * width};
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string name = "block" + std::to_string(i);
    conv_[i] = ad::Conv1d(params_, name + ".conv", ch[i], ch[i + 1], 5, 2, 2, init);
    bn_[i] = ad::BatchNorm1d(params_, name + ".bn", ch[i + 1]);
  }
  fc1_ = ad::Linear(params_, "head.fc1", ch[4], 32 * width, init);
  fc2_ = ad::Linear(params_, "head.fc2", 32 * width, 1, init);
}

std::string Cnn1d::architecture() const {
  return width_ == 1 ? "cnn1d" : "cnn1d_x" + std::to_string(width_);
}

Var Cnn1d::forward(Graph& g, Var x, Mode mode, Rng& rng) const {
  check_window_batch(x.shape());
  const std::size_t B = x.shape()[0];
  Var h = x;
  for (std::size_t i = 0; i < 4; ++i) h = ad::relu(bn_[i](g, conv_[i](g, h), mode));
  h = ad::global_avg_pool(h);
  h = ad::dropout(h, dropout_, mode, rng);
  h = ad::relu(fc1_(g, h));
  h = fc2_(g, h);
  return ad::reshape(h, Shape{B});
}

// ---------------------------------------------------------------------------

BasicBlock::BasicBlock(ad::ParamStore& store, const std::string& name, std::size_t cin,
                       std::size_t cout, std::size_t stride, Rng& init) {
  conv1_ = ad::Conv1d(store, name + ".conv1", cin, cout, 3, stride, 1, init);
  bn1_ = ad::BatchNorm1d(store, name + ".bn1", cout);
  conv2_ = ad::Conv1d(store, name + ".conv2", cout, cout, 3, 1, 1, init);
  bn2_ = ad::BatchNorm1d(store, name + ".bn2", cout);
  has_proj_ = stride != 1 || cin != cout;
  if (has_proj_) {
    proj_ = ad::Conv1d(store, name + ".proj", cin, cout, 1, stride, 0, init);
    proj_bn_ = ad::BatchNorm1d(store, name + ".proj_bn", cout);
  }
}

Var BasicBlock::operator()(Graph& g, Var x, Mode mode) const {
  Var r = ad::relu(bn1_(g, conv1_(g, x), mode));
  r = bn2_(g, conv2_(g, r), mode);
  Var skip = has_proj_ ? proj_bn_(g, proj_(g, x), mode) : x;
  return ad::relu(ad::add(r, skip));
}

ResNet1d::ResNet1d(Rng& init) {
  stem_ = ad::Conv1d(params_, "stem.conv", 1, 64, 7, 4, 3, init);
  stem_bn_ = ad::BatchNorm1d(params_, "stem.bn", 64);
  std::size_t cin = 64;
  for (std::size_t s = 0; s < 4; ++s) {
    const std::size_t cout = kStageChannels[s];
    for (std::size_t b = 0; b < 2; ++b) {
      const std::size_t stride = (s > 0 && b == 0) ? 2 : 1;
      blocks_.emplace_back(params_, "stage" + std::to_string(s) + ".block" + std::to_string(b), cin,
                           cout, stride, init);
      cin = cout;
    }
  }
  fc_ = ad::Linear(params_, "head.fc", cin, 1, init);
}

Var ResNet1d::forward(Graph& g, Var x, Mode mode, Rng&) const {
  check_window_batch(x.shape());
  const std::size_t B = x.shape()[0];
  Var h = ad::relu(stem_bn_(g, stem_(g, x), mode));
  h = ad::maxpool1d(h, 3, 2, 1);
  for (const auto& block : blocks_) h = block(g, h, mode);
  h = fc_(g, ad::global_avg_pool(h));
  return ad::reshape(h, Shape{B});
}

// ---------------------------------------------------------------------------

Autoencoder::Autoencoder(Rng& init) {
  const std::size_t ch[4] = {1, 16, 32, 64};
  for (std::size_t i = 0; i < 3; ++i)
    enc_[i] = ad::Conv1d(params_, "enc.conv" + std::to_string(i), ch[i], ch[i + 1], 5, 4, 1, init);
  enc_fc_ = ad::Linear(params_, "enc.fc", 64 * 4, kLatentDim, init);
  dec_fc_ = ad::Linear(params_, "dec.fc", kLatentDim, 64 * 4, init);
  for (std::size_t i = 0; i < 3; ++i)
    dec_[i] = ad::ConvTranspose1d(params_, "dec.deconv" + std::to_string(i), ch[3 - i], ch[2 - i], 5,
                                  4, 1, 1, init);
}

Var Autoencoder::encode(Graph& g, Var x) const {
  check_window_batch(x.shape());
  const std::size_t B = x.shape()[0];
  Var h = x;
  for (const auto& conv : enc_) h = ad::relu(conv(g, h));
  h = ad::reshape(h, Shape{B, 64 * 4});
  return enc_fc_(g, h);
}

Var Autoencoder::decode(Graph& g, Var latent) const {
  require(latent.shape().rank() == 2 && latent.shape()[1] == kLatentDim && latent.shape()[0] >= 1,
          ErrorCode::ShapeMismatch, "expected a B x 6 latent batch, got " + latent.shape().str());
  const std::size_t B = latent.shape()[0];
  Var h = ad::relu(dec_fc_(g, latent));
  h = ad::reshape(h, Shape{B, 64, 4});
  h = ad::relu(dec_[0](g, h));
  h = ad::relu(dec_[1](g, h));
  return dec_[2](g, h);
}

std::size_t Autoencoder::encoder_param_count() const {
  std::size_t n = enc_fc_.weight->value.numel() + enc_fc_.bias->value.numel();
  for (const auto& c : enc_) n += c.weight->value.numel() + c.bias->value.numel();
  return n;
}

std::unique_ptr<Classifier> make_classifier(StudentKind kind, Rng& init) {
  switch (kind) {
    case StudentKind::cnn1d: return std::make_unique<Cnn1d>(init);
    case StudentKind::resnet1d: return std::make_unique<ResNet1d>(init);
    case StudentKind::ae_vqc: break;
  }
  throw Error(ErrorCode::BadConfig, "ae_vqc is not a backpropagation classifier");
}

Tensor window_batch(std::span<const signal::EcgWindow> windows,
                    std::span<const std::size_t> indices) {
  const std::size_t L = signal::kWindowLength;
  Tensor t(Shape{indices.size(), 1, L});
  auto& v = t.vec();
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& w = windows[indices[b]].samples;
    require(w.size() == L, ErrorCode::ShapeMismatch, "window length must be 256");
    std::copy(w.begin(), w.end(), v.begin() + static_cast<std::ptrdiff_t>(b * L));
  }
  return t;
}

std::vector<double> predict_logits(const Classifier& model,
                                   std::span<const signal::EcgWindow> windows,
                                   std::size_t batch_size) {
  std::vector<double> out;
  out.reserve(windows.size());
  Rng unused(0);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < windows.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(windows.size(), start + batch_size); ++i)
      idx.push_back(i);
    Graph g;
    Var z = model.forward(g, g.constant(window_batch(windows, idx)), Mode::eval, unused);
    for (double v : z.value().vec()) out.push_back(v);
  }
  return out;
}

std::string save_classifier(const Classifier& model, const std::string& metadata_json) {
  return ad::encode_checkpoint(model.architecture(), model.params().all(), metadata_json);
}

std::unique_ptr<Classifier> load_classifier(std::string_view bytes) {
  const auto ckpt = ad::decode_checkpoint(bytes);
  Rng init(0);
  std::unique_ptr<Classifier> model;
  const std::string& arch = ckpt.architecture;
  if (arch == "cnn1d") {
    model = std::make_unique<Cnn1d>(init);
  } else if (arch == "resnet1d") {
    model = std::make_unique<ResNet1d>(init);
  } else if (arch.rfind("cnn1d_x", 0) == 0) {
    std::size_t width = 0;
    try {
      width = std::stoul(arch.substr(7));
    } catch (const std::exception&) {
    }
    require(width >= 1 && width <= 64, ErrorCode::BadCheckpoint, "bad architecture tag " + arch);
    model = std::make_unique<Cnn1d>(init, width);
  } else {
    throw Error(ErrorCode::BadCheckpoint, "unknown architecture '" + arch + "'");
  }
  ad::load_parameters(ckpt, model->params().all());
  return model;
}

}  // namespace qkd::models
