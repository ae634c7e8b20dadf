#include <cmath>
#include <memory>
#include <numeric>

#include "doctest.h"
#include "gradcheck.hpp"
#include "synthmatch/error.hpp"
#include "synthmatch/nn/layers.hpp"
#include "synthmatch/nn/loss.hpp"
#include "synthmatch/nn/optim.hpp"

using namespace synthmatch;
using namespace synthmatch::nn;

TEST_CASE("layer gradient checks") {
  std::mt19937_64 rng(42);
  Rng init(7);

  SUBCASE("dense") {
    Dense<double> d("d", 6, 4, init);
    const auto r = testing::check_layer(d, testing::random_tensor({6}, rng), rng);
    CHECK(r.max_rel < 1e-5);
  }
  SUBCASE("masked dense") {
    MaskedDense<double> m("m", {3, 2, 4}, {2, 3, 2}, init);
    const auto r = testing::check_layer(m, testing::random_tensor({9}, rng), rng);
    CHECK(r.max_rel < 1e-5);
  }
  SUBCASE("conv2d strided and padded") {
    Conv2d<double> c("c", Conv2dSpec{2, 3, 3, 3, 2, 1, 1, 1}, init);
    const auto r = testing::check_layer(c, testing::random_tensor({2, 7, 5}, rng), rng);
    CHECK(r.max_rel < 1e-5);
  }
  SUBCASE("pdc layer shared and per channel") {
    for (bool per_channel : {false, true}) {
      PdcLayer<double> p("p", 2, pdc::dilated_locations(12, 4, true), per_channel, init);
      const auto r = testing::check_layer(p, testing::random_tensor({2, 30, 4}, rng), rng);
      CHECK(r.max_rel < 1e-5);
    }
  }
  SUBCASE("activations") {
    Relu<double> relu;
    CHECK(testing::check_layer(relu, testing::random_tensor({12}, rng), rng).max_rel < 1e-5);
    Tanh<double> th;
    CHECK(testing::check_layer(th, testing::random_tensor({12}, rng), rng).max_rel < 1e-5);
  }
  SUBCASE("simple rnn") {
    SimpleRnn<double> rnn("r", 3, 5, init);
    const auto r = testing::check_layer(rnn, testing::random_tensor({6, 3}, rng), rng);
    CHECK(r.max_rel < 1e-5);
  }
  SUBCASE("three-layer net") {
    Sequential<double> net;
    net.add(std::make_unique<Dense<double>>("a", 5, 8, init));
    net.add(std::make_unique<Tanh<double>>());
    net.add(std::make_unique<Dense<double>>("b", 8, 6, init));
    net.add(std::make_unique<Relu<double>>());
    net.add(std::make_unique<Dense<double>>("c", 6, 3, init));
    const auto r = testing::check_layer(net, testing::random_tensor({5}, rng), rng);
    CHECK(r.max_rel < 1e-5);
  }
}

TEST_CASE("dense with identity weights passes input through") {
  Rng init(1);
  Dense<double> d("d", 4, 4, init);
  d.weight().value.fill(0.0);
  d.bias().value.fill(0.0);
  for (std::size_t i = 0; i < 4; ++i) d.weight().value[i * 4 + i] = 1.0;
  const Tensor<double> x({4}, std::vector<double>{0.5, -1.0, 2.0, 3.5});
  CHECK(d.forward(x).data == x.data);
  CHECK_THROWS_WITH_AS(d.forward(Tensor<double>({3})), doctest::Contains("[3]"), ShapeError);
  CHECK_FALSE(d.bias().decay);
}

TEST_CASE("masked dense blocks do not mix") {
  Rng init(2);
  MaskedDense<double> m("m", {2, 2}, {3, 3}, init);
  Tensor<double> x({4}, std::vector<double>{1, 2, 3, 4});
  const auto y0 = m.forward(x);
  x[3] += 10.0;  // second input group only
  const auto y1 = m.forward(x);
  for (std::size_t i = 0; i < 3; ++i) CHECK(y0[i] == y1[i]);
  CHECK(y0[4] != y1[4]);
}

TEST_CASE("softmax and losses") {
  const std::vector<double> z{1.0, -2.0, 0.5, 3.0};
  const auto p = softmax<double>(z);
  CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<double> uniform(64, 0.3), onehot(64, 0.0);
  onehot[5] = 1.0;
  CHECK(cross_entropy<double>(uniform, onehot).loss == doctest::Approx(std::log(64.0)).epsilon(1e-12));
  CHECK(std::log(64.0) == doctest::Approx(4.1589).epsilon(1e-4));

  std::vector<double> sharp(64, 0.0);
  sharp[5] = 60.0;
  CHECK(cross_entropy<double>(sharp, onehot).loss < 1e-20);

  // Gradient of expected-value MSE by central differences.
  std::vector<double> logits{0.3, -0.2, 0.9, 0.1}, values{0.0, 1.0 / 3, 2.0 / 3, 1.0};
  const auto lg = expected_value_mse<double>(logits, values, 0.25);
  for (std::size_t c = 0; c < logits.size(); ++c) {
    auto f = [&] { return expected_value_mse<double>(logits, values, 0.25).loss; };
    const double keep = logits[c];
    logits[c] = keep + 1e-6;
    const double up = f();
    logits[c] = keep - 1e-6;
    const double down = f();
    logits[c] = keep;
    CHECK(testing::grad_rel(lg.grad[c], (up - down) / 2e-6) < 1e-6);
  }
}

TEST_CASE("adamw") {
  SUBCASE("zero gradient and zero decay leave parameters unchanged") {
    Param<double> p("p", {3});
    p.value.data = {1.0, -2.0, 0.5};
    AdamW<double> opt({&p}, AdamWConfig{0.9, 0.999, 1e-8, 0.0});
    opt.step(0.1);
    CHECK(p.value.data == std::vector<double>{1.0, -2.0, 0.5});
  }
  SUBCASE("first step on x^2 matches the formula") {
    const double lr = 0.1, wd = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    Param<double> p("x", {1});
    p.value[0] = 1.0;
    p.grad[0] = 2.0 * p.value[0];
    AdamW<double> opt({&p}, AdamWConfig{b1, b2, eps, wd});
    opt.step(lr);
    const double g = 2.0;
    const double mhat = (1 - b1) * g / (1 - b1), vhat = (1 - b2) * g * g / (1 - b2);
    const double expected = (1.0 - lr * wd * 1.0) - lr * mhat / (std::sqrt(vhat) + eps);
    CHECK(p.value[0] == doctest::Approx(expected).epsilon(1e-15));
    CHECK(std::abs(p.value[0]) < 1.0);
  }
  SUBCASE("decay is decoupled and skips biases") {
    Param<double> w("w", {1}), b("b", {1}, false);
    w.value[0] = b.value[0] = 2.0;
    AdamW<double> opt({&w, &b}, AdamWConfig{0.9, 0.999, 1e-8, 0.5});
    opt.step(0.1);
    CHECK(w.value[0] == doctest::Approx(2.0 * (1.0 - 0.05)).epsilon(1e-15));
    CHECK(b.value[0] == 2.0);
  }
}

TEST_CASE("warmup cosine schedule") {
  CHECK(warmup_cosine_lr(0, 100, 10, 1e-3) == 0.0);
  CHECK(warmup_cosine_lr(10, 100, 10, 1e-3) == doctest::Approx(1e-3).epsilon(1e-15));
  CHECK(warmup_cosine_lr(55, 100, 10, 1e-3) == doctest::Approx(0.5e-3).epsilon(1e-12));
  CHECK(warmup_cosine_lr(100, 100, 10, 1e-3) == doctest::Approx(0.0).epsilon(1e-18));
  CHECK(warmup_cosine_lr(5, 100, 10, 1e-3) == doctest::Approx(0.5e-3).epsilon(1e-15));
}

TEST_CASE("gradient clipping and accumulation") {
  Rng init(3);
  Sequential<double> net;
  net.add(std::make_unique<Dense<double>>("a", 4, 6, init));
  net.add(std::make_unique<Relu<double>>());
  net.add(std::make_unique<Dense<double>>("b", 6, 3, init));
  const auto params = net.params();
  std::mt19937_64 rng(4);
  std::vector<Tensor<double>> xs;
  for (int i = 0; i < 8; ++i) xs.push_back(testing::random_tensor({4}, rng));
  const std::vector<double> target{0.2, 0.5, 0.3};

  auto accumulate = [&](std::size_t from, std::size_t to) {
    for (std::size_t i = from; i < to; ++i) {
      const auto y = net.forward(xs[i]);
      const auto lg = cross_entropy<double>(y.span(), target);
      net.backward(Tensor<double>({3}, lg.grad));
    }
  };
  auto flat = [&] {
    std::vector<double> g;
    for (auto* p : params) g.insert(g.end(), p->grad.data.begin(), p->grad.data.end());
    return g;
  };

  zero_grads(params);
  accumulate(0, 8);
  scale_grads(params, 1.0 / 8.0);
  const auto whole = flat();

  std::vector<double> micro(whole.size(), 0.0);
  for (std::size_t m = 0; m < 4; ++m) {
    zero_grads(params);
    accumulate(2 * m, 2 * m + 2);
    scale_grads(params, 0.5);
    const auto g = flat();
    for (std::size_t i = 0; i < g.size(); ++i) micro[i] += g[i] / 4.0;
  }
  for (std::size_t i = 0; i < whole.size(); ++i) CHECK(testing::grad_rel(micro[i], whole[i], 1e-12) < 1e-6);

  zero_grads(params);
  accumulate(0, 8);
  const double before = clip_grad_norm(params, 0.01);
  REQUIRE(before > 0.01);
  CHECK(global_grad_norm(params) == doctest::Approx(0.01).epsilon(1e-12));
  const double small = global_grad_norm(params);
  clip_grad_norm(params, 10.0);
  CHECK(global_grad_norm(params) == small);
}
