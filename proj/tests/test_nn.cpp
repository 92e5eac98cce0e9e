#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "neuroframe/common.hpp"
#include "neuroframe/nn.hpp"

using namespace neuroframe;

namespace {

// Inputs for derivative checks are drawn with magnitude >= 0.2 so ReLU and
// pool decisions sit far from their kinks at the probe step size.
TensorT<double> kink_safe_input(std::vector<int> shape, std::uint64_t seed) {
  TensorT<double> x(std::move(shape));
  Rng rng(seed);
  for (auto& v : x.data) {
    v = uniform(rng, 0.2, 1.2);
    if (uniform01(rng) < 0.5) v = -v;
  }
  return x;
}

}  // namespace

TEST_CASE("dense_td hand-computed affine map") {
  Rng rng(1);
  DenseTD<double> dense(2, 2, Activation::Linear, "d", rng);
  dense.weight().value.data = {1.0, 0.0, 0.0, 1.0};
  dense.bias().value.data = {1.0, 1.0};
  TensorT<double> x({1, 1, 2}, {1.0, 2.0});
  const auto y = dense.forward(x);
  CHECK(y.shape == std::vector<int>{1, 1, 2});
  CHECK(y.data[0] == doctest::Approx(2.0));
  CHECK(y.data[1] == doctest::Approx(3.0));
}

TEST_CASE("dense_td zero weights broadcast the bias") {
  Rng rng(2);
  DenseTD<float> dense(3, 4, Activation::Linear, "d", rng);
  std::fill(dense.weight().value.data.begin(), dense.weight().value.data.end(), 0.0f);
  dense.bias().value.data = {0.5f, -1.0f, 2.0f, 3.0f};
  TensorT<float> x({2, 3, 3});
  Rng xr(3);
  for (auto& v : x.data) v = static_cast<float>(uniform(xr, -5.0, 5.0));
  const auto y = dense.forward(x);
  for (int p = 0; p < 6; ++p)
    for (int u = 0; u < 4; ++u)
      CHECK(y.data[static_cast<std::size_t>(p * 4 + u)] ==
            doctest::Approx(dense.bias().value.data[static_cast<std::size_t>(u)]));
}

TEST_CASE("dense_td reaches the full 10000-unit decoder width") {
  Rng rng(4);
  DenseTD<float> dense(128, 10000, Activation::Linear, "d", rng);
  TensorT<float> x({1, 2, 128});
  const auto y = dense.forward(x);
  CHECK(y.shape == std::vector<int>{1, 2, 10000});
  CHECK_THROWS_AS(dense.forward(TensorT<float>({1, 2, 64})), std::invalid_argument);
}

TEST_CASE("conv2d hand-computed (1,3) cross-correlation with same padding") {
  Rng rng(5);
  Conv2d<double> conv(1, 1, 1, 3, Activation::Linear, "c", rng);
  conv.weight().value.data = {1.0, 0.0, -1.0};
  conv.bias().value.data = {0.0};
  TensorT<double> x({1, 1, 4, 1}, {1.0, 2.0, 3.0, 4.0});
  const auto y = conv.forward(x);
  REQUIRE(y.shape == std::vector<int>{1, 1, 4, 1});
  CHECK(y.data[0] == doctest::Approx(-2.0));
  CHECK(y.data[1] == doctest::Approx(-2.0));
  CHECK(y.data[2] == doctest::Approx(-2.0));
  CHECK(y.data[3] == doctest::Approx(3.0));
}

TEST_CASE("conv2d single-element kernel is plain scaling") {
  Rng rng(6);
  Conv2d<double> conv(1, 1, 1, 1, Activation::Linear, "c", rng);
  conv.weight().value.data = {2.5};
  conv.bias().value.data = {0.0};
  TensorT<double> x({1, 1, 1, 1}, {3.0});
  CHECK(conv.forward(x).data[0] == doctest::Approx(7.5));
}

TEST_CASE("conv2d keeps spatial shape with same padding") {
  Rng rng(7);
  Conv2d<float> conv(5, 7, 1, 3, Activation::Relu, "c", rng);
  TensorT<float> x({2, 3, 8, 5});
  Rng xr(8);
  for (auto& v : x.data) v = static_cast<float>(uniform(xr, -1.0, 1.0));
  const auto y = conv.forward(x);
  CHECK(y.shape == std::vector<int>{2, 3, 8, 7});
  for (float v : y.data) CHECK(v >= 0.0f);  // ReLU applied
  CHECK_THROWS_AS(Conv2d<float>(5, 7, 2, 3, Activation::Relu, "c", rng), std::invalid_argument);
}

TEST_CASE("conv2d_transpose (1,1) equals dense over the channel axis") {
  Rng rng1(9), rng2(9);
  ConvTranspose2d<double> convt(6, 4, 1, 1, Activation::Relu, "ct", rng1);
  DenseTD<double> dense(6, 4, Activation::Relu, "d", rng2);
  dense.weight().value.data = convt.weight().value.data;
  dense.bias().value.data = convt.bias().value.data;

  TensorT<double> x = kink_safe_input({2, 3, 5, 6}, 10);
  const auto a = convt.forward(x);
  const auto b = dense.forward(x);
  REQUIRE(a.shape == std::vector<int>{2, 3, 5, 4});
  for (std::size_t i = 0; i < a.data.size(); ++i)
    CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-6));

  CHECK_THROWS_AS(ConvTranspose2d<double>(6, 4, 1, 3, Activation::Relu, "ct", rng1),
                  std::invalid_argument);
}

TEST_CASE("conv2d_transpose identity weights pass non-negative input through") {
  Rng rng(11);
  ConvTranspose2d<double> convt(3, 3, 1, 1, Activation::Relu, "ct", rng);
  std::fill(convt.weight().value.data.begin(), convt.weight().value.data.end(), 0.0);
  for (int i = 0; i < 3; ++i) convt.weight().value.data[static_cast<std::size_t>(i * 3 + i)] = 1.0;
  std::fill(convt.bias().value.data.begin(), convt.bias().value.data.end(), 0.0);
  TensorT<double> x({1, 2, 2, 3});
  Rng xr(12);
  for (auto& v : x.data) v = uniform(xr, 0.0, 3.0);
  const auto y = convt.forward(x);
  for (std::size_t i = 0; i < x.data.size(); ++i) CHECK(y.data[i] == doctest::Approx(x.data[i]));
}

TEST_CASE("upsample2d (1,1) is the identity both ways") {
  Upsample2d<float> up(1, 1);
  TensorT<float> x({1, 2, 3, 2});
  Rng rng(13);
  for (auto& v : x.data) v = static_cast<float>(uniform(rng, -2.0, 2.0));
  const auto y = up.forward(x);
  CHECK(y.data == x.data);
  const auto dx = up.backward(y);
  CHECK(dx.data == y.data);
  CHECK_THROWS_AS(Upsample2d<float>(0, 1), std::invalid_argument);
}

TEST_CASE("upsample2d repeats rows and sums gradients") {
  Upsample2d<double> up(1, 2);
  TensorT<double> x({1, 1, 2, 1}, {3.0, 7.0});
  const auto y = up.forward(x);
  REQUIRE(y.shape == std::vector<int>{1, 1, 4, 1});
  CHECK(y.data == std::vector<double>{3.0, 3.0, 7.0, 7.0});

  TensorT<double> ones(y.shape);
  std::fill(ones.data.begin(), ones.data.end(), 1.0);
  const auto dx = up.backward(ones);
  CHECK(dx.data == std::vector<double>{2.0, 2.0});
}

TEST_CASE("maxpool2d picks window maxima and routes ties to the first element") {
  MaxPool2d<double> pool(1, 2);
  TensorT<double> x({1, 1, 4, 1}, {1.0, 5.0, 3.0, 2.0});
  const auto y = pool.forward(x);
  REQUIRE(y.shape == std::vector<int>{1, 1, 2, 1});
  CHECK(y.data == std::vector<double>{5.0, 3.0});

  TensorT<double> tie({1, 1, 2, 1}, {7.0, 7.0});
  MaxPool2d<double> pool2(1, 2);
  pool2.forward(tie);
  TensorT<double> g({1, 1, 1, 1}, {1.0});
  const auto dx = pool2.backward(g);
  CHECK(dx.data == std::vector<double>{1.0, 0.0});

  TensorT<double> small({1, 1, 1, 1}, {1.0});
  CHECK_THROWS_AS(pool.forward(small), std::invalid_argument);
}

TEST_CASE("maxpool2d halves the second spatial axis") {
  Rng rng(14);
  MaxPool2d<float> pool(1, 2);
  TensorT<float> x({2, 3, 10, 4});
  for (auto& v : x.data) v = static_cast<float>(uniform(rng, -1.0, 1.0));
  CHECK(pool.forward(x).shape == std::vector<int>{2, 3, 5, 4});
}

TEST_CASE("mse_loss values and gradient") {
  TensorT<double> a({1, 2}, {0.0, 0.0});
  TensorT<double> b({1, 2}, {3.0, 4.0});
  const auto [loss, grad] = mse_loss(a, b);
  CHECK(loss == doctest::Approx(12.5).epsilon(1e-12));
  CHECK(grad.data[0] == doctest::Approx(-3.0));
  CHECK(grad.data[1] == doctest::Approx(-4.0));

  const auto [zero, zgrad] = mse_loss(b, b);
  CHECK(zero == doctest::Approx(0.0));

  Rng rng(15);
  TensorT<double> p({2, 3});
  TensorT<double> q({2, 3});
  for (auto& v : p.data) v = uniform(rng, -4.0, 4.0);
  for (auto& v : q.data) v = uniform(rng, -4.0, 4.0);
  CHECK(mse_loss(p, q).first >= 0.0);
  CHECK_THROWS_AS(mse_loss(p, TensorT<double>({3, 2})), std::invalid_argument);
}

TEST_CASE("mse_loss gradient agrees with finite differences") {
  Rng rng(16);
  TensorT<double> pred({2, 4});
  TensorT<double> truth({2, 4});
  for (auto& v : pred.data) v = uniform(rng, -2.0, 2.0);
  for (auto& v : truth.data) v = uniform(rng, -2.0, 2.0);
  const auto [loss, grad] = mse_loss(pred, truth);
  const double h = 1e-6;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    TensorT<double> plus = pred, minus = pred;
    plus.data[i] += h;
    minus.data[i] -= h;
    const double numeric = (mse_loss(plus, truth).first - mse_loss(minus, truth).first) / (2 * h);
    CHECK(grad.data[i] == doctest::Approx(numeric).epsilon(1e-6));
  }
}

TEST_CASE("adam first step magnitude and zero-gradient fixed point") {
  Rng rng(17);
  DenseTD<float> dense(1, 1, Activation::Linear, "d", rng);
  auto& w = dense.weight();
  w.value.data = {1.0f};
  w.value.ensure_grad();

  AdamConfig cfg;
  cfg.lr = 0.05;

  // non-zero gradient: |update| == lr * |g| / (|g| + eps) at t = 1
  w.value.grad = {0.75f};
  adam_step(std::vector<ParameterT<float>*>{&w}, cfg);
  const double expected = 0.05 * 0.75 / (0.75 + cfg.epsilon);
  CHECK(std::abs(1.0 - w.value.data[0]) == doctest::Approx(expected).epsilon(1e-5));

  // zero gradient leaves the parameter unchanged
  DenseTD<float> dense2(1, 1, Activation::Linear, "d2", rng);
  auto& w2 = dense2.weight();
  w2.value.data = {2.5f};
  w2.value.ensure_grad();
  w2.value.grad = {0.0f};
  adam_step(std::vector<ParameterT<float>*>{&w2}, cfg);
  CHECK(w2.value.data[0] == 2.5f);
}

TEST_CASE("adam descends w^2 and matches a hand-rolled iteration") {
  Rng rng(18);
  DenseTD<double> dense(1, 1, Activation::Linear, "d", rng);
  auto& w = dense.weight();
  w.value.data = {1.0};
  w.value.ensure_grad();
  AdamConfig cfg;
  cfg.lr = 0.1;

  double hw = 1.0, hm = 0.0, hv = 0.0;  // hand-rolled shadow
  double prev = 1.0;
  for (int t = 1; t <= 2; ++t) {
    const double g = 2.0 * w.value.data[0];
    w.value.grad[0] = g;
    adam_step(std::vector<ParameterT<double>*>{&w}, cfg);

    const double hg = 2.0 * hw;
    hm = cfg.beta1 * hm + (1 - cfg.beta1) * hg;
    hv = cfg.beta2 * hv + (1 - cfg.beta2) * hg * hg;
    hw -= cfg.lr * (hm / (1 - std::pow(cfg.beta1, t))) /
          (std::sqrt(hv / (1 - std::pow(cfg.beta2, t))) + cfg.epsilon);

    CHECK(w.value.data[0] == doctest::Approx(hw).epsilon(1e-12));
    CHECK(w.value.data[0] < prev);
    prev = w.value.data[0];
  }
}

TEST_CASE("adam aborts on non-finite gradients") {
  Rng rng(19);
  DenseTD<float> dense(1, 1, Activation::Linear, "d", rng);
  auto& w = dense.weight();
  w.value.ensure_grad();
  w.value.grad = {std::numeric_limits<float>::quiet_NaN()};
  CHECK_THROWS_AS(adam_step(std::vector<ParameterT<float>*>{&w}, AdamConfig{}), NumericError);
}

TEST_CASE("tcn maps 30 input channels to 128 filters") {
  Rng rng(20);
  Tcn<float> tcn(30, 128, 3, {1, 2}, "tcn", rng);
  TensorT<float> x({2, 4, 30});
  Rng xr(21);
  for (auto& v : x.data) v = static_cast<float>(uniform(xr, -1.0, 1.0));
  CHECK(tcn.forward(x).shape == std::vector<int>{2, 4, 128});
}

TEST_CASE("tcn is causal: future samples never reach past outputs") {
  Rng rng(22);
  Tcn<float> tcn(3, 8, 3, {1, 2}, "tcn", rng);
  TensorT<float> x({1, 8, 3});
  Rng xr(23);
  for (auto& v : x.data) v = static_cast<float>(uniform(xr, -1.0, 1.0));
  const auto base = tcn.forward(x);

  for (int cut = 0; cut < 8; ++cut) {  // zero all inputs at t > cut
    TensorT<float> mutated = x;
    for (int t = cut + 1; t < 8; ++t)
      for (int c = 0; c < 3; ++c) mutated.data[static_cast<std::size_t>(t * 3 + c)] = 0.0f;
    const auto after = tcn.forward(mutated);
    for (int t = 0; t <= cut; ++t)
      for (int f = 0; f < 8; ++f)
        CHECK(after.data[static_cast<std::size_t>(t * 8 + f)] ==
              base.data[static_cast<std::size_t>(t * 8 + f)]);
  }
}

TEST_CASE("tcn block with zeroed convolutions reduces to the skip projection") {
  Rng rng(24);
  TcnBlock<double> block(2, 3, 1, 1, "blk", rng);
  std::fill(block.conv1().weight().value.data.begin(), block.conv1().weight().value.data.end(), 0.0);
  std::fill(block.conv1().bias().value.data.begin(), block.conv1().bias().value.data.end(), 0.0);
  std::fill(block.conv2().weight().value.data.begin(), block.conv2().weight().value.data.end(), 0.0);
  std::fill(block.conv2().bias().value.data.begin(), block.conv2().bias().value.data.end(), 0.0);
  REQUIRE(block.proj() != nullptr);
  // projection weight P maps 2 -> 3 channels per time step
  block.proj()->weight().value.data = {1.0, 2.0, 3.0, -1.0, 0.5, 0.0};  // [1][2][3]
  std::fill(block.proj()->bias().value.data.begin(), block.proj()->bias().value.data.end(), 0.0);

  TensorT<double> x({1, 2, 2}, {1.0, 2.0, -3.0, 4.0});
  const auto y = block.forward(x);
  // hand matrix multiply: row t of x times P
  CHECK(y.data[0] == doctest::Approx(1.0 * 1.0 + 2.0 * -1.0));
  CHECK(y.data[1] == doctest::Approx(1.0 * 2.0 + 2.0 * 0.5));
  CHECK(y.data[2] == doctest::Approx(1.0 * 3.0 + 2.0 * 0.0));
  CHECK(y.data[3] == doctest::Approx(-3.0 * 1.0 + 4.0 * -1.0));
  CHECK(y.data[4] == doctest::Approx(-3.0 * 2.0 + 4.0 * 0.5));
  CHECK(y.data[5] == doctest::Approx(-3.0 * 3.0 + 4.0 * 0.0));
}

TEST_CASE("tcn rejects non-positive dilations") {
  Rng rng(25);
  CHECK_THROWS_AS(Tcn<float>(3, 8, 3, {1, 0}, "tcn", rng), std::invalid_argument);
  CHECK_THROWS_AS(Tcn<float>(3, 8, 3, {}, "tcn", rng), std::invalid_argument);
}

TEST_CASE("gradient checks pass for every layer type") {
  const double tol = 1e-4;
  for (std::uint64_t seed : {11ull, 22ull, 33ull}) {
    {
      Rng rng(seed);
      DenseTD<double> layer(4, 5, Activation::Linear, "d", rng);
      CHECK(grad_check(layer, kink_safe_input({2, 3, 4}, seed), seed) < tol);
    }
    {
      Rng rng(seed);
      DenseTD<double> layer(4, 5, Activation::Relu, "d", rng);
      CHECK(grad_check(layer, kink_safe_input({2, 3, 4}, seed + 1), seed) < tol);
    }
    {
      Rng rng(seed);
      Conv2d<double> layer(3, 4, 1, 3, Activation::Relu, "c", rng);
      CHECK(grad_check(layer, kink_safe_input({1, 2, 5, 3}, seed + 2), seed) < tol);
    }
    {
      Rng rng(seed);
      ConvTranspose2d<double> layer(3, 4, 1, 1, Activation::Relu, "ct", rng);
      CHECK(grad_check(layer, kink_safe_input({1, 2, 3, 3}, seed + 3), seed) < tol);
    }
    {
      MaxPool2d<double> layer(1, 2);
      CHECK(grad_check(layer, kink_safe_input({1, 2, 6, 2}, seed + 4), seed) < tol);
    }
    {
      Upsample2d<double> layer(1, 2);
      CHECK(grad_check(layer, kink_safe_input({1, 2, 3, 2}, seed + 5), seed) < tol);
    }
    {
      Relu<double> layer;
      CHECK(grad_check(layer, kink_safe_input({2, 3, 4}, seed + 6), seed) < 1e-6);
    }
    {
      Rng rng(seed);
      TcnBlock<double> layer(3, 8, 3, 2, "blk", rng);
      CHECK(grad_check(layer, kink_safe_input({1, 6, 3}, seed + 7), seed) < tol);
    }
    {
      Rng rng(seed);
      FlattenTD<double> layer;
      CHECK(grad_check(layer, kink_safe_input({1, 2, 3, 4}, seed + 8), seed) < 1e-6);
    }
  }
}

TEST_CASE("shape contracts hold for randomized valid shapes") {
  Rng rng(2025);
  for (int trial = 0; trial < 10; ++trial) {
    const int B = 1 + static_cast<int>(uniform_index(rng, 3));
    const int Tn = 1 + static_cast<int>(uniform_index(rng, 5));
    const int F = 1 + static_cast<int>(uniform_index(rng, 6));
    const int U = 1 + static_cast<int>(uniform_index(rng, 7));
    Rng lr(trial);
    DenseTD<float> dense(F, U, Activation::Linear, "d", lr);
    CHECK(dense.forward(TensorT<float>({B, Tn, F})).shape == std::vector<int>{B, Tn, U});

    const int H = 2 + static_cast<int>(uniform_index(rng, 6));
    const int C = 1 + static_cast<int>(uniform_index(rng, 4));
    const int filters = 1 + static_cast<int>(uniform_index(rng, 5));
    Conv2d<float> conv(C, filters, 1, 3, Activation::Relu, "c", lr);
    CHECK(conv.forward(TensorT<float>({B, Tn, H, C})).shape ==
          std::vector<int>{B, Tn, H, filters});

    MaxPool2d<float> pool(1, 2);
    CHECK(pool.forward(TensorT<float>({B, Tn, H, C})).shape ==
          std::vector<int>{B, Tn, H / 2, C});
  }
}

TEST_CASE("reshape keeps [B,T] and validates element counts") {
  ReshapeTD<float> reshape({2, 3});
  TensorT<float> x({2, 2, 6});
  Rng rng(26);
  for (auto& v : x.data) v = static_cast<float>(uniform(rng, -1.0, 1.0));
  const auto y = reshape.forward(x);
  CHECK(y.shape == std::vector<int>{2, 2, 2, 3});
  CHECK(y.data == x.data);
  const auto back = reshape.backward(y);
  CHECK(back.shape == x.shape);

  ReshapeTD<float> bad({5, 2});
  CHECK_THROWS_AS(bad.forward(x), std::invalid_argument);
}
