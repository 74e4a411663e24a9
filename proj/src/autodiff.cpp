#include "qkd/autodiff.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <numeric>

#include "json.hpp"
#include "qkd/error.hpp"

namespace qkd::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// dst = lhs * rhs, or dst += lhs * rhs.
template <class Dst, class Lhs, class Rhs>
void gemm(Dst&& dst, const Lhs& lhs, const Rhs& rhs, bool accumulate) {
  if (accumulate) dst.noalias() += lhs * rhs;
  else dst.noalias() = lhs * rhs;
}

void check_shape(bool ok, const std::string& what) { require(ok, ErrorCode::ShapeMismatch, what); }

// Unfolds x (B x C x Lin) into a (C*K) x (B*Lcols) row-major matrix where
// column (b, t) holds the receptive field starting at t*stride - pad.
void im2col(const double* x, std::size_t B, std::size_t C, std::size_t Lin, std::size_t K,
            std::size_t stride, std::size_t pad, std::size_t Lcols, double* cols) {
  const std::size_t ncols = B * Lcols;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t k = 0; k < K; ++k) {
      double* row = cols + (c * K + k) * ncols;
      for (std::size_t b = 0; b < B; ++b) {
        const double* xin = x + (b * C + c) * Lin;
        double* dst = row + b * Lcols;
        for (std::size_t t = 0; t < Lcols; ++t) {
          const long long idx = static_cast<long long>(t * stride + k) - static_cast<long long>(pad);
          dst[t] = (idx >= 0 && idx < static_cast<long long>(Lin)) ? xin[idx] : 0.0;
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates columns back into y (B x C x Lout).
void col2im(const double* cols, std::size_t B, std::size_t C, std::size_t Lout, std::size_t K,
            std::size_t stride, std::size_t pad, std::size_t Lcols, double* y) {
  const std::size_t ncols = B * Lcols;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t k = 0; k < K; ++k) {
      const double* row = cols + (c * K + k) * ncols;
      for (std::size_t b = 0; b < B; ++b) {
        double* yout = y + (b * C + c) * Lout;
        const double* src = row + b * Lcols;
        for (std::size_t t = 0; t < Lcols; ++t) {
          const long long idx = static_cast<long long>(t * stride + k) - static_cast<long long>(pad);
          if (idx >= 0 && idx < static_cast<long long>(Lout)) yout[idx] += src[t];
        }
      }
    }
  }
}

// B x C x L <-> C x (B*L) row-major.
void to_channel_major(const double* x, std::size_t B, std::size_t C, std::size_t L, double* m) {
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      std::memcpy(m + c * B * L + b * L, x + (b * C + c) * L, L * sizeof(double));
}

void from_channel_major(const double* m, std::size_t B, std::size_t C, std::size_t L, double* x) {
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      std::memcpy(x + (b * C + c) * L, m + c * B * L + b * L, L * sizeof(double));
}

void add_channel_major(const double* m, std::size_t B, std::size_t C, std::size_t L, double* x) {
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const double* src = m + c * B * L + b * L;
      double* dst = x + (b * C + c) * L;
      for (std::size_t t = 0; t < L; ++t) dst[t] += src[t];
    }
}

// Views a rank-2 or rank-3 activation as (B, C, L).
struct BCL {
  std::size_t B, C, L;
};

BCL as_bcl(const Shape& s, const char* op) {
  if (s.rank() == 3) return {s[0], s[1], s[2]};
  if (s.rank() == 2) return {s[0], s[1], 1};
  throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": expected rank 2 or 3, got " + s.str());
}

}  // namespace

// ---------------------------------------------------------------------------

std::size_t Shape::numel() const {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::string Shape::str() const {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_.numel() == data_.size(),
              "tensor data size " + std::to_string(data_.size()) + " does not match " + shape_.str());
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::reshape(Shape shape) {
  check_shape(shape.numel() == data_.size(), "cannot reshape " + shape_.str() + " to " + shape.str());
  shape_ = std::move(shape);
}

const Tensor& Var::value() const { return graph_->value(id_); }
const Tensor& Var::grad() const { return graph_->grad(id_); }

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Graph::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Graph::param(Parameter& p) {
  Node n;
  n.value = p.value;
  n.requires_grad = p.trainable;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Graph::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& v : inputs) n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

const Tensor& Graph::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  require(n.has_grad, ErrorCode::ShapeMismatch, "node has no gradient; call backward() first");
  return n.grad;
}

Tensor& Graph::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

void Graph::backward(Var loss) {
  require(loss.id() < nodes_.size(), ErrorCode::NonScalarLoss, "loss does not belong to graph");
  require(nodes_[loss.id()].value.numel() == 1, ErrorCode::NonScalarLoss,
          "backward() needs a scalar loss, got " + nodes_[loss.id()].value.shape().str());
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  grad_buffer(loss.id()).fill(1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.requires_grad) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param != nullptr) {
      Parameter& p = *n.param;
      if (p.grad.numel() != p.value.numel()) p.grad = Tensor(p.value.shape(), 0.0);
      auto dst = p.grad.data();
      auto src = nodes_[i].grad.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise and reductions

namespace {

template <typename F>
void accumulate_into(Graph& g, std::size_t id, F&& f) {
  if (g.requires_grad(id)) f(g.grad_buffer(id).vec());
}

}  // namespace

Var add(Var a, Var b) {
  check_shape(a.shape() == b.shape(), "add: " + a.shape().str() + " vs " + b.shape().str());
  Tensor out = a.value();
  const auto& bv = b.value().vec();
  auto& ov = out.vec();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph& g, const Tensor& go) {
    for (auto id : {ia, ib}) {
      accumulate_into(g, id, [&](std::vector<double>& gi) {
        for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += go[i];
      });
    }
  });
}

Var mul(Var a, Var b) {
  check_shape(a.shape() == b.shape(), "mul: " + a.shape().str() + " vs " + b.shape().str());
  Tensor out = a.value();
  const auto& bv = b.value().vec();
  auto& ov = out.vec();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] *= bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph& g, const Tensor& go) {
    const auto& av = g.value(ia).vec();
    const auto& bv2 = g.value(ib).vec();
    accumulate_into(g, ia, [&](std::vector<double>& gi) {
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += go[i] * bv2[i];
    });
    accumulate_into(g, ib, [&](std::vector<double>& gi) {
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += go[i] * av[i];
    });
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (double& v : out.vec()) v *= s;
  const auto ia = a.id();
  return a.graph().record(std::move(out), {a}, [ia, s](Graph& g, const Tensor& go) {
    accumulate_into(g, ia, [&](std::vector<double>& gi) {
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += s * go[i];
    });
  });
}

Var sum(Var a) {
  const auto& av = a.value().vec();
  Tensor out(Shape{1}, std::accumulate(av.begin(), av.end(), 0.0));
  const auto ia = a.id();
  return a.graph().record(std::move(out), {a}, [ia](Graph& g, const Tensor& go) {
    accumulate_into(g, ia, [&](std::vector<double>& gi) {
      for (double& v : gi) v += go[0];
    });
  });
}

Var mean(Var a) {
  check_shape(a.value().numel() > 0, "mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().numel()));
}

Var relu(Var x) {
  Tensor out = x.value();
  for (double& v : out.vec()) v = v > 0.0 ? v : 0.0;
  const auto ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix](Graph& g, const Tensor& go) {
    const auto& xv = g.value(ix).vec();
    accumulate_into(g, ix, [&](std::vector<double>& gi) {
      for (std::size_t i = 0; i < gi.size(); ++i)
        if (xv[i] > 0.0) gi[i] += go[i];
    });
  });
}

Var sigmoid(Var x) {
  Tensor out = x.value();
  for (double& v : out.vec()) v = 1.0 / (1.0 + std::exp(-v));
  const auto ix = x.id();
  Graph& graph = x.graph();
  const auto self = graph.size();
  return graph.record(std::move(out), {x}, [ix, self](Graph& g, const Tensor& go) {
    const auto& yv = g.value(self).vec();
    accumulate_into(g, ix, [&](std::vector<double>& gi) {
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += go[i] * yv[i] * (1.0 - yv[i]);
    });
  });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value();
  out.reshape(std::move(shape));
  const auto ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix](Graph& g, const Tensor& go) {
    accumulate_into(g, ix, [&](std::vector<double>& gi) {
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += go[i];
    });
  });
}

// ---------------------------------------------------------------------------
// Dense and convolutional layers

Var linear(Var x, Var weight, Var bias) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  check_shape(xs.rank() == 2 && ws.rank() == 2 && ws[1] == xs[1] && bias.shape() == Shape{ws[0]},
              "linear: x " + xs.str() + ", weight " + ws.str() + ", bias " + bias.shape().str());
  const std::size_t B = xs[0], in = xs[1], outf = ws[0];
  Tensor out(Shape{B, outf});
  {
    ConstMapMat X(x.value().vec().data(), B, in);
    ConstMapMat W(weight.value().vec().data(), outf, in);
    MapMat Y(out.vec().data(), B, outf);
    gemm(Y, X, W.transpose(), false);
    const auto& bv = bias.value().vec();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t o = 0; o < outf; ++o) Y(b, o) += bv[o];
  }
  const auto ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.graph().record(std::move(out), {x, weight, bias},
                          [=](Graph& g, const Tensor& go) {
    ConstMapMat G(go.vec().data(), B, outf);
    accumulate_into(g, ix, [&](std::vector<double>& gi) {
      gemm(MapMat(gi.data(), B, in), G, ConstMapMat(g.value(iw).vec().data(), outf, in), true);
    });
    accumulate_into(g, iw, [&](std::vector<double>& gi) {
      gemm(MapMat(gi.data(), outf, in), G.transpose(),
           ConstMapMat(g.value(ix).vec().data(), B, in), true);
    });
    accumulate_into(g, ib, [&](std::vector<double>& gi) {
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t o = 0; o < outf; ++o) gi[o] += G(b, o);
    });
  });
}

Var conv1d(Var x, Var weight, Var bias, std::size_t stride, std::size_t padding) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  check_shape(xs.rank() == 3 && ws.rank() == 3 && ws[1] == xs[1] && bias.shape() == Shape{ws[0]},
              "conv1d: x " + xs.str() + ", weight " + ws.str() + ", bias " + bias.shape().str());
  check_shape(stride >= 1, "conv1d: stride must be >= 1");
  const std::size_t B = xs[0], Cin = xs[1], L = xs[2], Cout = ws[0], K = ws[2];
  check_shape(L + 2 * padding >= K, "conv1d: input length " + std::to_string(L) +
                                        " too short for kernel " + std::to_string(K));
  const std::size_t Lout = (L + 2 * padding - K) / stride + 1;
  const std::size_t rows = Cin * K, ncols = B * Lout;

  auto cols = std::make_shared<std::vector<double>>(rows * ncols);
  im2col(x.value().vec().data(), B, Cin, L, K, stride, padding, Lout, cols->data());

  Tensor out(Shape{B, Cout, Lout});
  {
    RowMat Y(Cout, ncols);
    gemm(Y, ConstMapMat(weight.value().vec().data(), Cout, rows),
         ConstMapMat(cols->data(), rows, ncols), false);
    const auto& bv = bias.value().vec();
    for (std::size_t o = 0; o < Cout; ++o) Y.row(static_cast<Eigen::Index>(o)).array() += bv[o];
    from_channel_major(Y.data(), B, Cout, Lout, out.vec().data());
  }

  const auto ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.graph().record(std::move(out), {x, weight, bias},
                          [=](Graph& g, const Tensor& go) {
    RowMat G(Cout, ncols);
    to_channel_major(go.vec().data(), B, Cout, Lout, G.data());
    accumulate_into(g, iw, [&](std::vector<double>& gi) {
      gemm(MapMat(gi.data(), Cout, rows), G,
           ConstMapMat(cols->data(), rows, ncols).transpose(), true);
    });
    accumulate_into(g, ib, [&](std::vector<double>& gi) {
      for (std::size_t o = 0; o < Cout; ++o) gi[o] += G.row(static_cast<Eigen::Index>(o)).sum();
    });
    accumulate_into(g, ix, [&](std::vector<double>& gi) {
      RowMat dcols(rows, ncols);
      gemm(dcols, ConstMapMat(g.value(iw).vec().data(), Cout, rows).transpose(), G, false);
      col2im(dcols.data(), B, Cin, L, K, stride, padding, Lout, gi.data());
    });
  });
}

Var conv_transpose1d(Var x, Var weight, Var bias, std::size_t stride, std::size_t padding,
                     std::size_t output_padding) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  check_shape(xs.rank() == 3 && ws.rank() == 3 && ws[0] == xs[1] && bias.shape() == Shape{ws[1]},
              "conv_transpose1d: x " + xs.str() + ", weight " + ws.str() + ", bias " +
                  bias.shape().str());
  check_shape(stride >= 1 && output_padding < stride,
              "conv_transpose1d: need stride >= 1 and output_padding < stride");
  const std::size_t B = xs[0], Cin = xs[1], L = xs[2], Cout = ws[1], K = ws[2];
  const long long lout = static_cast<long long>((L - 1) * stride + K + output_padding) -
                         2 * static_cast<long long>(padding);
  check_shape(L >= 1 && lout >= 1, "conv_transpose1d: empty output");
  const std::size_t Lout = static_cast<std::size_t>(lout);
  const std::size_t rows = Cout * K, ncols = B * L;

  auto xmat = std::make_shared<RowMat>(Cin, ncols);
  to_channel_major(x.value().vec().data(), B, Cin, L, xmat->data());

  Tensor out(Shape{B, Cout, Lout});
  {
    RowMat cols(rows, ncols);
    gemm(cols, ConstMapMat(weight.value().vec().data(), Cin, rows).transpose(),
         *xmat, false);
    col2im(cols.data(), B, Cout, Lout, K, stride, padding, L, out.vec().data());
    const auto& bv = bias.value().vec();
    auto& ov = out.vec();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t o = 0; o < Cout; ++o)
        for (std::size_t t = 0; t < Lout; ++t) ov[(b * Cout + o) * Lout + t] += bv[o];
  }

  const auto ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.graph().record(std::move(out), {x, weight, bias},
                          [=](Graph& g, const Tensor& go) {
    RowMat dcols(rows, ncols);
    im2col(go.vec().data(), B, Cout, Lout, K, stride, padding, L, dcols.data());
    accumulate_into(g, ix, [&](std::vector<double>& gi) {
      RowMat dx(Cin, ncols);
      gemm(dx, ConstMapMat(g.value(iw).vec().data(), Cin, rows), dcols, false);
      add_channel_major(dx.data(), B, Cin, L, gi.data());
    });
    accumulate_into(g, iw, [&](std::vector<double>& gi) {
      gemm(MapMat(gi.data(), Cin, rows), *xmat, dcols.transpose(), true);
    });
    accumulate_into(g, ib, [&](std::vector<double>& gi) {
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t o = 0; o < Cout; ++o) {
          const double* row = go.vec().data() + (b * Cout + o) * Lout;
          gi[o] += std::accumulate(row, row + Lout, 0.0);
        }
    });
  });
}

Var batchnorm1d(Var x, Var gamma, Var beta, Tensor& running_mean, Tensor& running_var, Mode mode,
                double eps, double momentum) {
  require(eps > 0.0, ErrorCode::ShapeMismatch, "batchnorm1d: eps must be > 0");
  const auto [B, C, L] = as_bcl(x.shape(), "batchnorm1d");
  check_shape(gamma.shape() == Shape{C} && beta.shape() == Shape{C} &&
                  running_mean.numel() == C && running_var.numel() == C,
              "batchnorm1d: channel count mismatch for " + x.shape().str());
  const double n = static_cast<double>(B * L);
  const auto& xv = x.value().vec();
  const auto& gv = gamma.value().vec();
  const auto& bv = beta.value().vec();

  auto xhat = std::make_shared<std::vector<double>>(xv.size());
  auto inv_std = std::make_shared<std::vector<double>>(C);
  Tensor out(x.shape());
  auto& ov = out.vec();
  for (std::size_t c = 0; c < C; ++c) {
    double mu, var;
    if (mode == Mode::train) {
      double s = 0.0;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < L; ++t) s += xv[(b * C + c) * L + t];
      mu = s / n;
      double ss = 0.0;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < L; ++t) {
          const double d = xv[(b * C + c) * L + t] - mu;
          ss += d * d;
        }
      var = ss / n;
      running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mu;
      running_var[c] = (1.0 - momentum) * running_var[c] + momentum * var;
    } else {
      mu = running_mean[c];
      var = running_var[c];
    }
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[c] = is;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < L; ++t) {
        const std::size_t i = (b * C + c) * L + t;
        (*xhat)[i] = (xv[i] - mu) * is;
        ov[i] = gv[c] * (*xhat)[i] + bv[c];
      }
  }

  const auto ix = x.id(), ig = gamma.id(), ibeta = beta.id();
  const bool train = mode == Mode::train;
  return x.graph().record(std::move(out), {x, gamma, beta},
                          [=, B = B, C = C, L = L](Graph& g, const Tensor& go) {
    const auto& gam = g.value(ig).vec();
    std::vector<double> sum_dy(C, 0.0), sum_dy_xhat(C, 0.0);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t t = 0; t < L; ++t) {
          const std::size_t i = (b * C + c) * L + t;
          sum_dy[c] += go[i];
          sum_dy_xhat[c] += go[i] * (*xhat)[i];
        }
    accumulate_into(g, ig, [&](std::vector<double>& gi) {
      for (std::size_t c = 0; c < C; ++c) gi[c] += sum_dy_xhat[c];
    });
    accumulate_into(g, ibeta, [&](std::vector<double>& gi) {
      for (std::size_t c = 0; c < C; ++c) gi[c] += sum_dy[c];
    });
    accumulate_into(g, ix, [&](std::vector<double>& gi) {
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c) {
          const double k = gam[c] * (*inv_std)[c];
          for (std::size_t t = 0; t < L; ++t) {
            const std::size_t i = (b * C + c) * L + t;
            if (train) {
              gi[i] += k * (go[i] - sum_dy[c] / n - (*xhat)[i] * sum_dy_xhat[c] / n);
            } else {
              gi[i] += k * go[i];
            }
          }
        }
    });
  });
}

Var maxpool1d(Var x, std::size_t kernel, std::size_t stride, std::size_t padding) {
  const Shape& xs = x.shape();
  check_shape(xs.rank() == 3, "maxpool1d: expected B x C x L, got " + xs.str());
  check_shape(kernel >= 1 && stride >= 1 && padding < kernel && xs[2] + 2 * padding >= kernel,
              "maxpool1d: bad kernel/stride/padding");
  const std::size_t B = xs[0], C = xs[1], L = xs[2];
  const std::size_t Lout = (L + 2 * padding - kernel) / stride + 1;
  Tensor out(Shape{B, C, Lout});
  auto argmax = std::make_shared<std::vector<std::size_t>>(B * C * Lout);
  const auto& xv = x.value().vec();
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    for (std::size_t t = 0; t < Lout; ++t) {
      double best = -std::numeric_limits<double>::infinity();
      std::size_t best_i = 0;
      for (std::size_t k = 0; k < kernel; ++k) {
        const long long idx = static_cast<long long>(t * stride + k) - static_cast<long long>(padding);
        if (idx < 0 || idx >= static_cast<long long>(L)) continue;
        const std::size_t i = bc * L + static_cast<std::size_t>(idx);
        if (xv[i] > best) {
          best = xv[i];
          best_i = i;
        }
      }
      out[bc * Lout + t] = best;
      (*argmax)[bc * Lout + t] = best_i;
    }
  }
  const auto ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix, argmax](Graph& g, const Tensor& go) {
    accumulate_into(g, ix, [&](std::vector<double>& gi) {
      for (std::size_t j = 0; j < argmax->size(); ++j) gi[(*argmax)[j]] += go[j];
    });
  });
}

Var global_avg_pool(Var x) {
  const Shape& xs = x.shape();
  check_shape(xs.rank() == 3 && xs[2] > 0, "global_avg_pool: expected B x C x L, got " + xs.str());
  const std::size_t B = xs[0], C = xs[1], L = xs[2];
  Tensor out(Shape{B, C});
  const auto& xv = x.value().vec();
  for (std::size_t bc = 0; bc < B * C; ++bc)
    out[bc] = std::accumulate(xv.begin() + static_cast<std::ptrdiff_t>(bc * L),
                              xv.begin() + static_cast<std::ptrdiff_t>((bc + 1) * L), 0.0) /
              static_cast<double>(L);
  const auto ix = x.id();
  return x.graph().record(std::move(out), {x}, [=](Graph& g, const Tensor& go) {
    accumulate_into(g, ix, [&](std::vector<double>& gi) {
      for (std::size_t bc = 0; bc < B * C; ++bc)
        for (std::size_t t = 0; t < L; ++t) gi[bc * L + t] += go[bc] / static_cast<double>(L);
    });
  });
}

Var dropout(Var x, double rate, Mode mode, Rng& rng) {
  require(rate >= 0.0 && rate < 1.0, ErrorCode::BadDropoutRate,
          "dropout rate must lie in [0, 1), got " + std::to_string(rate));
  if (mode == Mode::eval || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(x.value().numel());
  Tensor out = x.value();
  for (std::size_t i = 0; i < mask->size(); ++i) {
    (*mask)[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    out[i] *= (*mask)[i];
  }
  const auto ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix, mask](Graph& g, const Tensor& go) {
    accumulate_into(g, ix, [&](std::vector<double>& gi) {
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += go[i] * (*mask)[i];
    });
  });
}

Var mse_loss(Var pred, const Tensor& target) {
  check_shape(pred.value().numel() == target.numel() && target.numel() > 0,
              "mse_loss: prediction " + pred.shape().str() + " vs target " + target.shape().str());
  const auto& pv = pred.value().vec();
  const double n = static_cast<double>(pv.size());
  auto diff = std::make_shared<std::vector<double>>(pv.size());
  double s = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    (*diff)[i] = pv[i] - target[i];
    s += (*diff)[i] * (*diff)[i];
  }
  const auto ip = pred.id();
  return pred.graph().record(Tensor(Shape{1}, s / n), {pred}, [ip, diff, n](Graph& g, const Tensor& go) {
    accumulate_into(g, ip, [&](std::vector<double>& gi) {
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += go[0] * 2.0 * (*diff)[i] / n;
    });
  });
}

// ---------------------------------------------------------------------------
// Layers

Parameter& ParamStore::add(std::string name, Shape shape, bool trainable) {
  Parameter p;
  p.name = std::move(name);
  p.value = Tensor(shape, 0.0);
  p.grad = Tensor(shape, 0.0);
  p.trainable = trainable;
  params_.push_back(std::move(p));
  return params_.back();
}

std::vector<Parameter*> ParamStore::trainable() {
  std::vector<Parameter*> out;
  for (auto& p : params_)
    if (p.trainable) out.push_back(&p);
  return out;
}

std::vector<Parameter*> ParamStore::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> ParamStore::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

std::size_t ParamStore::trainable_count() const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p.trainable) n += p.value.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void kaiming_uniform(Parameter& weight, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& v : weight.value.vec()) v = rng.uniform(-bound, bound);
}

Conv1d::Conv1d(ParamStore& store, const std::string& name, std::size_t cin, std::size_t cout,
               std::size_t k, std::size_t stride_, std::size_t padding_, Rng& rng)
    : in_channels(cin), out_channels(cout), kernel(k), stride(stride_), padding(padding_) {
  weight = &store.add(name + ".weight", Shape{cout, cin, k});
  bias = &store.add(name + ".bias", Shape{cout});
  kaiming_uniform(*weight, cin * k, rng);
}

Var Conv1d::operator()(Graph& g, Var x) const {
  return conv1d(x, g.param(*weight), g.param(*bias), stride, padding);
}

std::size_t Conv1d::output_length(std::size_t length) const {
  return (length + 2 * padding - kernel) / stride + 1;
}

ConvTranspose1d::ConvTranspose1d(ParamStore& store, const std::string& name, std::size_t cin,
                                 std::size_t cout, std::size_t k, std::size_t stride_,
                                 std::size_t padding_, std::size_t output_padding_, Rng& rng)
    : in_channels(cin),
      out_channels(cout),
      kernel(k),
      stride(stride_),
      padding(padding_),
      output_padding(output_padding_) {
  weight = &store.add(name + ".weight", Shape{cin, cout, k});
  bias = &store.add(name + ".bias", Shape{cout});
  kaiming_uniform(*weight, cin * k, rng);
}

Var ConvTranspose1d::operator()(Graph& g, Var x) const {
  return conv_transpose1d(x, g.param(*weight), g.param(*bias), stride, padding, output_padding);
}

BatchNorm1d::BatchNorm1d(ParamStore& store, const std::string& name, std::size_t channels) {
  gamma = &store.add(name + ".gamma", Shape{channels});
  beta = &store.add(name + ".beta", Shape{channels});
  running_mean = &store.add(name + ".running_mean", Shape{channels}, false);
  running_var = &store.add(name + ".running_var", Shape{channels}, false);
  gamma->value.fill(1.0);
  running_var->value.fill(1.0);
}

Var BatchNorm1d::operator()(Graph& g, Var x, Mode mode) const {
  return batchnorm1d(x, g.param(*gamma), g.param(*beta), running_mean->value, running_var->value,
                     mode, eps, momentum);
}

Linear::Linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
               Rng& rng)
    : in_features(in), out_features(out) {
  weight = &store.add(name + ".weight", Shape{out, in});
  bias = &store.add(name + ".bias", Shape{out});
  kaiming_uniform(*weight, in, rng);
}

Var Linear::operator()(Graph& g, Var x) const {
  return linear(x, g.param(*weight), g.param(*bias));
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr std::string_view kMagic = "QDST1";

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
}

}  // namespace

std::string encode_checkpoint(const std::string& architecture,
                              const std::vector<const Parameter*>& params,
                              const std::string& metadata_json) {
  nlohmann::ordered_json header;
  header["architecture"] = architecture;
  header["meta"] = nlohmann::ordered_json::parse(metadata_json);
  auto entries = nlohmann::ordered_json::array();
  std::size_t offset = 0;
  for (const Parameter* p : params) {
    entries.push_back({{"name", p->name},
                       {"shape", p->value.shape().dims},
                       {"offset", offset},
                       {"trainable", p->trainable}});
    offset += p->value.numel();
  }
  header["params"] = std::move(entries);
  header["count"] = offset;

  std::string out(kMagic);
  out += '\n';
  out += header.dump();
  out += '\n';
  const std::size_t start = out.size();
  out.resize(start + offset * sizeof(double));
  char* dst = out.data() + start;
  for (const Parameter* p : params) {
    for (double v : p->value.vec()) {
      const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(v));
      std::memcpy(dst, &bits, sizeof(bits));
      dst += sizeof(bits);
    }
  }
  return out;
}

std::string encode_checkpoint(const std::string& architecture,
                              const std::vector<Parameter*>& params,
                              const std::string& metadata_json) {
  return encode_checkpoint(architecture,
                           std::vector<const Parameter*>(params.begin(), params.end()),
                           metadata_json);
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  const auto magic_end = bytes.find('\n');
  require(magic_end != std::string_view::npos && bytes.substr(0, magic_end) == kMagic,
          ErrorCode::BadCheckpoint, "missing QDST1 magic");
  const auto header_end = bytes.find('\n', magic_end + 1);
  require(header_end != std::string_view::npos, ErrorCode::BadCheckpoint, "missing JSON header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(magic_end + 1, header_end - magic_end - 1));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadCheckpoint, std::string("bad header: ") + e.what());
  }
  Checkpoint ckpt;
  try {
    ckpt.architecture = header.at("architecture").get<std::string>();
    ckpt.metadata_json = header.value("meta", nlohmann::json::object()).dump();
    for (const auto& e : header.at("params")) {
      CheckpointEntry entry;
      entry.name = e.at("name").get<std::string>();
      entry.shape = Shape(e.at("shape").get<std::vector<std::size_t>>());
      entry.offset = e.at("offset").get<std::size_t>();
      entry.trainable = e.value("trainable", true);
      ckpt.entries.push_back(std::move(entry));
    }
    const auto count = header.at("count").get<std::size_t>();
    const auto payload = bytes.substr(header_end + 1);
    require(payload.size() == count * sizeof(double), ErrorCode::BadCheckpoint,
            "payload size does not match header count");
    ckpt.data.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits = 0;
      std::memcpy(&bits, payload.data() + i * sizeof(bits), sizeof(bits));
      ckpt.data[i] = std::bit_cast<double>(to_little_endian(bits));
    }
    for (const auto& e : ckpt.entries)
      require(e.offset + e.shape.numel() <= count, ErrorCode::BadCheckpoint,
              "entry '" + e.name + "' exceeds payload");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadCheckpoint, std::string("bad header: ") + e.what());
  }
  return ckpt;
}

void load_parameters(const Checkpoint& ckpt, const std::vector<Parameter*>& params) {
  for (Parameter* p : params) {
    auto it = std::find_if(ckpt.entries.begin(), ckpt.entries.end(),
                           [&](const CheckpointEntry& e) { return e.name == p->name; });
    require(it != ckpt.entries.end(), ErrorCode::BadCheckpoint,
            "checkpoint has no entry '" + p->name + "'");
    require(it->shape == p->value.shape(), ErrorCode::BadCheckpoint,
            "shape mismatch for '" + p->name + "': " + it->shape.str() + " vs " +
                p->value.shape().str());
    std::copy_n(ckpt.data.begin() + static_cast<std::ptrdiff_t>(it->offset), p->value.numel(),
                p->value.vec().begin());
  }
}

}  // namespace qkd::ad
