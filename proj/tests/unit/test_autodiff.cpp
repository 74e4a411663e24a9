#include <cmath>

#include "../support/gradcheck.hpp"
#include "doctest.h"
#include "qkd/autodiff.hpp"
#include "qkd/error.hpp"

using namespace qkd;
using namespace qkd::ad;
using qkd::testing::grad_check_inputs;
using qkd::testing::probe_loss;
using qkd::testing::random_tensor;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected qkd::Error");
  return ErrorCode::Empty;
}

constexpr double kTol = 1e-4;

}  // namespace

TEST_CASE("conv1d hand examples") {
  Graph g;
  auto x = g.constant(Tensor(Shape{1, 1, 3}, {1, 2, 3}));
  auto y = conv1d(x, g.constant(Tensor(Shape{1, 1, 2}, {1, 1})), g.constant(Tensor(Shape{1}, 0.0)), 1, 0);
  REQUIRE(y.shape() == Shape{1, 1, 2});
  CHECK(y.value()[0] == 3.0);
  CHECK(y.value()[1] == 5.0);

  auto id = conv1d(x, g.constant(Tensor(Shape{1, 1, 1}, {1})), g.constant(Tensor(Shape{1}, 0.0)), 1, 0);
  CHECK(id.value().vec() == x.value().vec());

  auto c = conv1d(x, g.constant(Tensor(Shape{1, 1, 2}, 0.0)), g.constant(Tensor(Shape{1}, 2.5)), 1, 0);
  REQUIRE(c.value().numel() == 2);
  for (double v : c.value().vec()) CHECK(v == 2.5);

  // L_out = floor((L + 2p - K)/s) + 1
  Rng rng(1);
  auto big = g.constant(random_tensor(Shape{2, 3, 256}, rng));
  auto w = g.constant(random_tensor(Shape{4, 3, 5}, rng));
  auto out = conv1d(big, w, g.constant(Tensor(Shape{4})), 2, 2);
  CHECK(out.shape() == Shape{2, 4, 128});

  CHECK(code_of([&] { conv1d(x, g.constant(Tensor(Shape{1, 2, 2})), g.constant(Tensor(Shape{1})), 1, 0); }) ==
        ErrorCode::ShapeMismatch);
  CHECK(code_of([&] { conv1d(x, g.constant(Tensor(Shape{1, 1, 5})), g.constant(Tensor(Shape{1})), 1, 0); }) ==
        ErrorCode::ShapeMismatch);
}

TEST_CASE("conv_transpose1d is the adjoint of conv1d") {
  Rng rng(2);
  const std::size_t B = 2, Cin = 3, Cout = 4, K = 5, L = 64, s = 4, p = 2;
  Tensor w = random_tensor(Shape{Cout, Cin, K}, rng);
  Tensor x = random_tensor(Shape{B, Cin, L}, rng);
  Graph g;
  auto y = conv1d(g.constant(x), g.constant(w), g.constant(Tensor(Shape{Cout})), s, p);
  const std::size_t Lout = y.shape()[2];
  CHECK(Lout == 16);
  Tensor r = random_tensor(Shape{B, Cout, Lout}, rng);
  // conv_transpose1d weight is Cin' x Cout' x K with Cin' = Cout (of conv).
  Tensor wt(Shape{Cout, Cin, K});
  wt.vec() = w.vec();
  auto xt = conv_transpose1d(g.constant(r), g.constant(wt), g.constant(Tensor(Shape{Cin})), s, p, 3);
  REQUIRE(xt.shape() == Shape{B, Cin, L});
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < r.numel(); ++i) lhs += y.value()[i] * r[i];
  for (std::size_t i = 0; i < x.numel(); ++i) rhs += x[i] * xt.value()[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("batchnorm1d definitions") {
  Rng rng(3);
  Tensor x = random_tensor(Shape{4, 3, 10}, rng, 3.0);
  for (double& v : x.vec()) v += 5.0;
  Tensor rm(Shape{3}, 0.0), rv(Shape{3}, 1.0);
  Graph g;
  auto y = batchnorm1d(g.constant(x), g.constant(Tensor(Shape{3}, 1.0)), g.constant(Tensor(Shape{3}, 0.0)),
                       rm, rv, Mode::train);
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0.0, v = 0.0;
    for (std::size_t b = 0; b < 4; ++b)
      for (std::size_t t = 0; t < 10; ++t) m += y.value()[(b * 3 + c) * 10 + t];
    m /= 40.0;
    for (std::size_t b = 0; b < 4; ++b)
      for (std::size_t t = 0; t < 10; ++t) {
        const double d = y.value()[(b * 3 + c) * 10 + t] - m;
        v += d * d;
      }
    v /= 40.0;
    CHECK(std::abs(m) < 1e-6);
    CHECK(std::abs(v - 1.0) < 1e-5 * 1.0 + 1e-6);  // eps in the denominator
  }
  // Running statistics moved by momentum 0.1.
  CHECK(rm[0] != 0.0);

  auto yc = batchnorm1d(g.constant(x), g.constant(Tensor(Shape{3}, 0.0)), g.constant(Tensor(Shape{3}, 1.25)),
                        rm, rv, Mode::train);
  for (double v : yc.value().vec()) CHECK(v == 1.25);

  Tensor flat(Shape{2, 1, 8}, 7.0);
  Tensor rm1(Shape{1}, 0.0), rv1(Shape{1}, 1.0);
  auto yf = batchnorm1d(g.constant(flat), g.constant(Tensor(Shape{1}, 1.0)), g.constant(Tensor(Shape{1}, 0.0)),
                        rm1, rv1, Mode::train);
  for (double v : yf.value().vec()) CHECK(v == 0.0);
}

TEST_CASE("batchnorm train-then-eval consistency") {
  Rng rng(4);
  Tensor x = random_tensor(Shape{8, 2, 16}, rng, 2.0);
  Tensor rm(Shape{2}, 0.0), rv(Shape{2}, 1.0);
  Tensor gamma = random_tensor(Shape{2}, rng), beta = random_tensor(Shape{2}, rng);
  Tensor train_out;
  for (int i = 0; i < 200; ++i) {
    Graph g;
    train_out = batchnorm1d(g.constant(x), g.constant(gamma), g.constant(beta), rm, rv, Mode::train).value();
  }
  Graph g;
  auto eval_out = batchnorm1d(g.constant(x), g.constant(gamma), g.constant(beta), rm, rv, Mode::eval).value();
  double worst = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) worst = std::max(worst, std::abs(eval_out[i] - train_out[i]));
  CHECK(worst < 1e-3);
}

TEST_CASE("elementwise ops and pooling") {
  Graph g;
  auto r = relu(g.constant(Tensor(Shape{3}, {-1, 0, 2})));
  CHECK(r.value().vec() == std::vector<double>{0, 0, 2});
  CHECK(sigmoid(g.constant(Tensor(Shape{1}, 0.0))).value()[0] == 0.5);
  auto p = global_avg_pool(g.constant(Tensor(Shape{1, 2, 3}, {1, 2, 3, 4, 5, 6})));
  CHECK(p.shape() == Shape{1, 2});
  CHECK(p.value().vec() == std::vector<double>{2, 5});
  auto m = maxpool1d(g.constant(Tensor(Shape{1, 1, 5}, {1, 5, 2, 0, 3})), 3, 2, 1);
  CHECK(m.value().vec() == std::vector<double>{5, 5, 3});
}

TEST_CASE("dropout") {
  Rng rng(5);
  Graph g;
  auto x = g.constant(random_tensor(Shape{4, 8}, rng));
  auto e = dropout(x, 0.3, Mode::eval, rng);
  CHECK(e.value().vec() == x.value().vec());
  auto t = dropout(x, 0.5, Mode::train, rng);
  for (std::size_t i = 0; i < 32; ++i) {
    const double v = t.value()[i];
    CHECK((v == 0.0 || std::abs(v - 2.0 * x.value()[i]) < 1e-15));
  }
  CHECK(code_of([&] { dropout(x, 1.0, Mode::train, rng); }) == ErrorCode::BadDropoutRate);
  CHECK(code_of([&] { dropout(x, -0.1, Mode::eval, rng); }) == ErrorCode::BadDropoutRate);
}

TEST_CASE("backward basics") {
  {
    Graph g;
    auto x = g.variable(Tensor(Shape{1}, 3.0));
    auto loss = mul(x, x);
    g.backward(loss);
    CHECK(x.grad()[0] == 6.0);
  }
  {
    Graph g;
    auto x = g.variable(Tensor(Shape{2}, {-1, 2}));
    g.backward(sum(relu(x)));
    CHECK(x.grad().vec() == std::vector<double>{0, 1});
  }
  {
    Graph g;
    auto x = g.variable(Tensor(Shape{2}, {-1, 2}));
    CHECK(code_of([&] { g.backward(relu(x)); }) == ErrorCode::NonScalarLoss);
  }
}

TEST_CASE("parameter gradients accumulate until zeroed") {
  Parameter p;
  p.name = "w";
  p.value = Tensor(Shape{3}, {1, 2, 3});
  p.grad = Tensor(Shape{3}, 0.0);
  Tensor a(Shape{3}, {0.5, -1, 2}), b(Shape{3}, {1, 1, -3});

  auto run = [&](const Tensor& coef) {
    Graph g;
    g.backward(sum(mul(g.param(p), g.constant(coef))));
  };
  run(a);
  run(b);
  std::vector<double> separate = p.grad.vec();
  p.zero_grad();
  {
    Graph g;
    auto w = g.param(p);
    g.backward(add(sum(mul(w, g.constant(a))), sum(mul(w, g.constant(b)))));
  }
  CHECK(p.grad.vec() == separate);
  CHECK(separate == std::vector<double>{1.5, 0, -1});
}

TEST_CASE("finite-difference gradient checks per layer type") {
  Rng rng(7);
  std::uint64_t probe = 100;
  auto check = [&](std::vector<Tensor> inputs,
                   const std::function<Var(Graph&, const std::vector<Var>&)>& f) {
    auto res = grad_check_inputs(
        std::move(inputs), [&](Graph& g, const std::vector<Var>& v) { return probe_loss(f(g, v), probe); },
        40, rng);
    ++probe;
    CHECK(res.max_rel_error < kTol);
    return res;
  };

  SUBCASE("conv1d strided and padded") {
    check({random_tensor(Shape{4, 3, 20}, rng), random_tensor(Shape{5, 3, 5}, rng), random_tensor(Shape{5}, rng)},
          [](Graph&, const std::vector<Var>& v) { return conv1d(v[0], v[1], v[2], 2, 2); });
  }
  SUBCASE("conv_transpose1d") {
    check({random_tensor(Shape{4, 3, 6}, rng), random_tensor(Shape{3, 2, 5}, rng), random_tensor(Shape{2}, rng)},
          [](Graph&, const std::vector<Var>& v) { return conv_transpose1d(v[0], v[1], v[2], 4, 2, 3); });
  }
  SUBCASE("batchnorm train") {
    check({random_tensor(Shape{4, 3, 7}, rng), random_tensor(Shape{3}, rng), random_tensor(Shape{3}, rng)},
          [](Graph&, const std::vector<Var>& v) {
            Tensor rm(Shape{3}, 0.0), rv(Shape{3}, 1.0);
            return batchnorm1d(v[0], v[1], v[2], rm, rv, Mode::train);
          });
  }
  SUBCASE("batchnorm eval") {
    check({random_tensor(Shape{4, 3, 7}, rng), random_tensor(Shape{3}, rng), random_tensor(Shape{3}, rng)},
          [](Graph&, const std::vector<Var>& v) {
            Tensor rm(Shape{3}, {0.1, -0.2, 0.3}), rv(Shape{3}, {0.5, 1.5, 2.0});
            return batchnorm1d(v[0], v[1], v[2], rm, rv, Mode::eval);
          });
  }
  SUBCASE("linear") {
    check({random_tensor(Shape{4, 6}, rng), random_tensor(Shape{3, 6}, rng), random_tensor(Shape{3}, rng)},
          [](Graph&, const std::vector<Var>& v) { return linear(v[0], v[1], v[2]); });
  }
  SUBCASE("relu, sigmoid, add, mul, scale") {
    check({random_tensor(Shape{4, 10}, rng), random_tensor(Shape{4, 10}, rng)},
          [](Graph&, const std::vector<Var>& v) {
            return add(relu(v[0]), scale(mul(sigmoid(v[1]), v[0]), 0.7));
          });
  }
  SUBCASE("maxpool and global average pooling") {
    check({random_tensor(Shape{4, 3, 16}, rng)}, [](Graph&, const std::vector<Var>& v) {
      return global_avg_pool(maxpool1d(v[0], 3, 2, 1));
    });
  }
  SUBCASE("dropout with a fixed mask") {
    check({random_tensor(Shape{4, 12}, rng)}, [](Graph&, const std::vector<Var>& v) {
      Rng mask_rng(99);
      return dropout(v[0], 0.3, Mode::train, mask_rng);
    });
  }
  SUBCASE("reshape and mse") {
    Tensor target = random_tensor(Shape{4, 12}, rng);
    auto res = grad_check_inputs(
        {random_tensor(Shape{4, 3, 4}, rng)},
        [&](Graph&, const std::vector<Var>& v) { return mse_loss(reshape(v[0], Shape{4, 12}), target); }, 48,
        rng);
    CHECK(res.max_rel_error < kTol);
  }
}

TEST_CASE("checkpoint round trip") {
  Rng rng(8);
  ParamStore store;
  Conv1d conv(store, "conv", 2, 3, 5, 1, 2, rng);
  BatchNorm1d bn(store, "bn", 3);
  bn.running_mean->value[1] = -0.25;
  const auto bytes = encode_checkpoint("toy", store.all(), R"({"seed":8})");
  CHECK(bytes.rfind("QDST1\n", 0) == 0);

  auto ckpt = decode_checkpoint(bytes);
  CHECK(ckpt.architecture == "toy");
  CHECK(ckpt.entries.size() == 6);
  CHECK(ckpt.entries[1].offset == 30);
  CHECK(ckpt.entries[4].trainable == false);

  ParamStore other;
  Rng rng2(123);
  Conv1d conv2(other, "conv", 2, 3, 5, 1, 2, rng2);
  BatchNorm1d bn2(other, "bn", 3);
  load_parameters(ckpt, other.all());
  CHECK(conv2.weight->value.vec() == conv.weight->value.vec());
  CHECK(bn2.running_mean->value[1] == -0.25);

  CHECK(code_of([&] { decode_checkpoint("QDST2\n{}\n"); }) == ErrorCode::BadCheckpoint);
  CHECK(code_of([&] { decode_checkpoint(bytes.substr(0, bytes.size() - 8)); }) == ErrorCode::BadCheckpoint);

  ParamStore wrong;
  Conv1d conv3(wrong, "conv", 2, 4, 5, 1, 2, rng2);
  CHECK(code_of([&] { load_parameters(ckpt, wrong.all()); }) == ErrorCode::BadCheckpoint);
}
