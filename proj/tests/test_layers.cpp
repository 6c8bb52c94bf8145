#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "neurospike/layers.hpp"
#include "neurospike/tensor.hpp"
#include "testutil.hpp"

using namespace neurospike;

TEST_CASE("conv2d: zero input leaves only the bias") {
  auto x = Tensor<double>::zeros({1, 2, 6, 7});
  Rng rng(1);
  auto k = testutil::random_tensor<double>({3, 2, 5, 5}, rng, -1, 1, false);
  auto b = Tensor<double>::of({3}, {0.5, -1.25, 2.0});
  auto y = conv2d(x, k, b);
  CHECK(y.shape() == Shape{1, 3, 2, 3});
  for (int o = 0; o < 3; ++o)
    for (int p = 0; p < 6; ++p)
      CHECK(y.data()[o * 6 + p] == doctest::Approx(b.data()[o]).epsilon(1e-12));
}

TEST_CASE("conv2d: all-ones 5x5 sums to 25") {
  auto x = Tensor<double>::filled({1, 1, 5, 5}, 1.0);
  auto k = Tensor<double>::filled({1, 1, 5, 5}, 1.0);
  auto b = Tensor<double>::zeros({1});
  auto y = conv2d(x, k, b);
  CHECK(y.size() == 1);
  CHECK(y.item() == doctest::Approx(25.0).epsilon(1e-12));
}

TEST_CASE("conv2d: shape errors") {
  auto k = Tensor<double>::zeros({1, 1, 5, 5});
  auto b = Tensor<double>::zeros({1});
  CHECK_THROWS(conv2d(Tensor<double>::zeros({1, 1, 4, 9}), k, b));
  CHECK_THROWS(conv2d(Tensor<double>::zeros({1, 2, 9, 9}), k, b));
}

TEST_CASE("conv2d matches the six-loop reference on 50 random instances") {
  Rng rng(1234);
  for (int trial = 0; trial < 50; ++trial) {
    const int C = 1 + static_cast<int>(rng.below(3));
    const int O = 1 + static_cast<int>(rng.below(3));
    const int KH = 2 + static_cast<int>(rng.below(3));
    const int KW = 2 + static_cast<int>(rng.below(3));
    const int H = KH + static_cast<int>(rng.below(5));
    const int W = KW + static_cast<int>(rng.below(5));
    auto x = testutil::random_tensor<double>({1, C, H, W}, rng, -2, 2, false);
    auto k = testutil::random_tensor<double>({O, C, KH, KW}, rng, -2, 2, false);
    auto b = testutil::random_tensor<double>({O}, rng, -1, 1, false);

    auto y = conv2d(x, k, b);
    auto ref = testutil::conv2d_reference(x.vec(), C, H, W, k.vec(), O, KH, KW, b.vec());
    REQUIRE(static_cast<std::size_t>(y.size()) == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i)
      CHECK(y.data()[i] == doctest::Approx(ref[i]).epsilon(1e-6));
  }
}

TEST_CASE("conv2d gradients pass finite differences") {
  Rng rng(99);
  for (int trial = 0; trial < 3; ++trial) {
    auto x = testutil::random_tensor<double>({2, 2, 6, 6}, rng);
    auto k = testutil::random_tensor<double>({3, 2, 3, 3}, rng);
    auto b = testutil::random_tensor<double>({3}, rng);
    auto forward = [&] { return mean_all(mul(conv2d(x, k, b), conv2d(x, k, b))); };
    auto res = testutil::grad_check(forward, {&x, &k, &b});
    CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst);
  }
}

TEST_CASE("maxpool: constant input and single window") {
  auto c = Tensor<double>::filled({1, 1, 4, 6}, 3.25);
  auto y = maxpool2d(c);
  CHECK(y.shape() == Shape{1, 1, 2, 3});
  for (int i = 0; i < y.size(); ++i) CHECK(y.data()[i] == 3.25);

  auto w = Tensor<double>::of({1, 1, 2, 2}, {1, 2, 3, 4});
  CHECK(maxpool2d(w).item() == 4.0);
}

TEST_CASE("maxpool: odd trailing dims are dropped and scaling commutes") {
  Rng rng(5);
  auto x = testutil::random_tensor<double>({1, 2, 5, 7}, rng, 0.1, 2.0, false);
  auto y = maxpool2d(x);
  CHECK(y.shape() == Shape{1, 2, 2, 3});
  auto xs = scale(x, 2.5);
  auto ys = maxpool2d(xs);
  for (int i = 0; i < y.size(); ++i)
    CHECK(ys.data()[i] == doctest::Approx(2.5 * y.data()[i]).epsilon(1e-12));
  // Idempotent on constants after one pass.
  auto c = Tensor<double>::filled({1, 1, 8, 8}, 1.5);
  auto once = maxpool2d(c);
  auto twice = maxpool2d(once);
  for (int i = 0; i < twice.size(); ++i) CHECK(twice.data()[i] == 1.5);
}

TEST_CASE("maxpool: gradient routes to the first argmax on ties") {
  auto x = Tensor<double>::of({1, 1, 2, 2}, {7, 7, 7, 7}, true);
  auto y = maxpool2d(x);
  auto loss = sum_all(y);
  loss.backward();
  CHECK(x.grad_vec() == std::vector<double>{1, 0, 0, 0});
}

TEST_CASE("maxpool gradient passes finite differences away from ties") {
  Rng rng(17);
  auto x = testutil::random_tensor<double>({1, 2, 6, 6}, rng);
  auto forward = [&] { return mean_all(mul(maxpool2d(x), maxpool2d(x))); };
  auto res = testutil::grad_check(forward, {&x});
  CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst);
}

TEST_CASE("csnn shape chain from the 19x1848 epoch") {
  auto d = conv_stack_dims(19, 1848);
  CHECK(d.h1 == 15);
  CHECK(d.w1 == 1844);
  CHECK(d.hp1 == 7);
  CHECK(d.wp1 == 922);
  CHECK(d.h2 == 3);
  CHECK(d.w2 == 918);
  CHECK(d.hp2 == 1);
  CHECK(d.wp2 == 459);
  CHECK(d.flat == 29376);
}

TEST_CASE("dense: sigmoid of zero input is one half") {
  Rng rng(2);
  DenseLayer<double> layer(4, 3, rng);
  std::fill(layer.bias.data(), layer.bias.data() + 3, 0.0);
  auto y = layer.forward(Tensor<double>::zeros({2, 4}), Activation::kSigmoid);
  for (int i = 0; i < y.size(); ++i) CHECK(y.data()[i] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("dense: identity weight passes input through") {
  DenseLayer<double> layer;
  layer.weight = Tensor<double>::of({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}, true);
  layer.bias = Tensor<double>::zeros({3}, true);
  auto x = Tensor<double>::of({1, 3}, {0.3, -0.7, 2.0});
  auto y = layer.forward(x);
  for (int i = 0; i < 3; ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("dense matches a hand dot product") {
  auto w = Tensor<double>::of({2, 3}, {0.5, -1.0, 2.0, 1.5, 0.25, -0.75});
  auto b = Tensor<double>::of({2}, {0.1, -0.2});
  auto x = Tensor<double>::of({1, 3}, {1.0, 2.0, 3.0});
  auto y = linear(x, w, b);
  CHECK(y.data()[0] == doctest::Approx(0.5 - 2.0 + 6.0 + 0.1).epsilon(1e-9));
  CHECK(y.data()[1] == doctest::Approx(1.5 + 0.5 - 2.25 - 0.2).epsilon(1e-9));
}

TEST_CASE("dense gradients pass finite differences") {
  Rng rng(23);
  auto x = testutil::random_tensor<double>({3, 4}, rng);
  auto w = testutil::random_tensor<double>({2, 4}, rng);
  auto b = testutil::random_tensor<double>({2}, rng);
  auto forward = [&] { return mean_all(sigmoid(linear(x, w, b))); };
  auto res = testutil::grad_check(forward, {&x, &w, &b});
  CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst);
}

TEST_CASE("cnn stack produces outputs in (0,1)^2") {
  Rng rng(31);
  Conv2dLayer<double> conv1(1, 12, 5, rng);
  Conv2dLayer<double> conv2(12, 4, 5, rng);
  auto dims = conv_stack_dims(19, 64, 4);
  DenseLayer<double> fc(dims.flat, 2, rng);
  auto x = testutil::random_tensor<double>({2, 1, 19, 64}, rng, 0.0, 1.0, false);
  auto h = maxpool2d(conv2.forward(maxpool2d(conv1.forward(x))));
  auto y = fc.forward(reshape(h, {2, dims.flat}), Activation::kSigmoid);
  CHECK(y.shape() == Shape{2, 2});
  for (int i = 0; i < y.size(); ++i) {
    CHECK(y.data()[i] > 0.0);
    CHECK(y.data()[i] < 1.0);
  }
}

TEST_CASE("fan-in initialization stays within bounds and is seed-stable") {
  Rng rng1(77), rng2(77);
  Conv2dLayer<float> a(3, 8, 5, rng1), b(3, 8, 5, rng2);
  CHECK(a.kernels.vec() == b.kernels.vec());
  const float bound = 1.0f / std::sqrt(75.0f);
  for (int i = 0; i < a.kernels.size(); ++i) {
    CHECK(a.kernels.data()[i] <= bound);
    CHECK(a.kernels.data()[i] >= -bound);
  }
  for (int i = 0; i < a.bias.size(); ++i) CHECK(a.bias.data()[i] == 0.0f);
}
