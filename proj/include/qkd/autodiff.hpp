#pragma once

// Minimal reverse-mode differentiation over dense float64 arrays.
//
// A Graph records operations in creation order; that order is also a valid
// topological order, so backward() is a single reverse sweep. Parameters live
// outside the graph and receive accumulated gradients when backward() runs.

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "qkd/rng.hpp"

namespace qkd::ad {

struct Shape {
  std::vector<std::size_t> dims;

  Shape() = default;
  Shape(std::initializer_list<std::size_t> d) : dims(d) {}
  explicit Shape(std::vector<std::size_t> d) : dims(std::move(d)) {}

  std::size_t rank() const { return dims.size(); }
  std::size_t operator[](std::size_t i) const { return dims[i]; }
  std::size_t numel() const;
  std::string str() const;
  bool operator==(const Shape&) const = default;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t numel() const { return data_.size(); }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  void fill(double v);
  /// Reinterprets the same elements under a new shape.
  void reshape(Shape shape);

 private:
  Shape shape_;
  std::vector<double> data_;
};

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;  // false for running statistics and other buffers

  void zero_grad() { grad.fill(0.0); }
};

enum class Mode { train, eval };

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor& grad_out)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Input that never receives a gradient.
  Var constant(Tensor value);
  /// Free variable whose gradient is readable after backward().
  Var variable(Tensor value);
  /// Leaf bound to a parameter; backward() adds its gradient into p.grad.
  Var param(Parameter& p);

  /// Records an op node. `backward` receives the node's output gradient and
  /// accumulates into its inputs through grad_buffer().
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);

  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient buffer of an input node, allocated on first use. Only valid
  /// while backward() runs.
  Tensor& grad_buffer(std::size_t id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Operations. Feature maps are laid out batch x channels x length.

Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var sum(Var a);
Var mean(Var a);
Var relu(Var x);
Var sigmoid(Var x);
Var reshape(Var x, Shape shape);

/// x: B x In, weight: Out x In, bias: Out.
Var linear(Var x, Var weight, Var bias);

/// Cross-correlation. x: B x Cin x L, weight: Cout x Cin x K, bias: Cout.
Var conv1d(Var x, Var weight, Var bias, std::size_t stride, std::size_t padding);

/// Adjoint of conv1d. x: B x Cin x L, weight: Cin x Cout x K, bias: Cout.
/// L_out = (L - 1) * stride - 2 * padding + K + output_padding.
Var conv_transpose1d(Var x, Var weight, Var bias, std::size_t stride, std::size_t padding,
                     std::size_t output_padding);

/// Per-channel normalization over batch x length. Train mode uses batch
/// statistics and updates the running estimates with `momentum`.
Var batchnorm1d(Var x, Var gamma, Var beta, Tensor& running_mean, Tensor& running_var,
                Mode mode, double eps = 1e-5, double momentum = 0.1);

Var maxpool1d(Var x, std::size_t kernel, std::size_t stride, std::size_t padding);

/// B x C x L -> B x C.
Var global_avg_pool(Var x);

/// Inverted dropout; identity in eval mode.
Var dropout(Var x, double rate, Mode mode, Rng& rng);

/// Mean squared error against a fixed target.
Var mse_loss(Var pred, const Tensor& target);

// ---------------------------------------------------------------------------
// Layers: parameter owners with a forward call.

/// Stable-address parameter storage for a model.
class ParamStore {
 public:
  Parameter& add(std::string name, Shape shape, bool trainable = true);
  std::vector<Parameter*> trainable();
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t trainable_count() const;
  void zero_grad();

 private:
  std::deque<Parameter> params_;
};

/// Kaiming-uniform (fan-in, ReLU gain) weights; biases stay zero.
void kaiming_uniform(Parameter& weight, std::size_t fan_in, Rng& rng);

struct Conv1d {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;
  std::size_t in_channels = 0, out_channels = 0, kernel = 0, stride = 1, padding = 0;

  Conv1d() = default;
  Conv1d(ParamStore& store, const std::string& name, std::size_t cin, std::size_t cout,
         std::size_t k, std::size_t stride, std::size_t padding, Rng& rng);
  Var operator()(Graph& g, Var x) const;
  std::size_t output_length(std::size_t length) const;
  static std::size_t count(std::size_t cin, std::size_t cout, std::size_t k) {
    return cout * cin * k + cout;
  }
};

struct ConvTranspose1d {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;
  std::size_t in_channels = 0, out_channels = 0, kernel = 0, stride = 1, padding = 0,
              output_padding = 0;

  ConvTranspose1d() = default;
  ConvTranspose1d(ParamStore& store, const std::string& name, std::size_t cin,
                  std::size_t cout, std::size_t k, std::size_t stride, std::size_t padding,
                  std::size_t output_padding, Rng& rng);
  Var operator()(Graph& g, Var x) const;
  static std::size_t count(std::size_t cin, std::size_t cout, std::size_t k) {
    return cin * cout * k + cout;
  }
};

struct BatchNorm1d {
  Parameter* gamma = nullptr;
  Parameter* beta = nullptr;
  Parameter* running_mean = nullptr;
  Parameter* running_var = nullptr;
  double eps = 1e-5;
  double momentum = 0.1;

  BatchNorm1d() = default;
  BatchNorm1d(ParamStore& store, const std::string& name, std::size_t channels);
  Var operator()(Graph& g, Var x, Mode mode) const;
  static std::size_t count(std::size_t channels) { return 2 * channels; }
};

struct Linear {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;
  std::size_t in_features = 0, out_features = 0;

  Linear() = default;
  Linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  Var operator()(Graph& g, Var x) const;
  static std::size_t count(std::size_t in, std::size_t out) { return in * out + out; }
};

// ---------------------------------------------------------------------------
// QDST1 checkpoints: the magic line, one JSON header line listing every
// parameter (name, shape, element offset), then little-endian float64 data.

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::size_t offset = 0;
  bool trainable = true;
};

struct Checkpoint {
  std::string architecture;
  std::string metadata_json = "{}";  // free-form object stored under "meta"
  std::vector<CheckpointEntry> entries;
  std::vector<double> data;
};

std::string encode_checkpoint(const std::string& architecture,
                              const std::vector<const Parameter*>& params,
                              const std::string& metadata_json = "{}");
std::string encode_checkpoint(const std::string& architecture,
                              const std::vector<Parameter*>& params,
                              const std::string& metadata_json = "{}");
Checkpoint decode_checkpoint(std::string_view bytes);

/// Copies checkpoint values into `params` by name; shapes must match.
void load_parameters(const Checkpoint& ckpt, const std::vector<Parameter*>& params);

}  // namespace qkd::ad
