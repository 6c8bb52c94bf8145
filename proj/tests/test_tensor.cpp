#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "neurospike/adam.hpp"
#include "neurospike/loss.hpp"
#include "neurospike/tensor.hpp"
#include "testutil.hpp"

using namespace neurospike;

TEST_CASE("shape bookkeeping and invariants") {
  auto t = Tensor<float>::of({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.size() == 6);
  CHECK(t.dim(1) == 3);
  CHECK_THROWS(Tensor<float>::of({2, 2}, {1, 2, 3}));
  CHECK_THROWS(Tensor<float>::zeros({0, 3}));
}

TEST_CASE("elementwise ops and backward accumulation") {
  auto a = Tensor<double>::of({3}, {1, 2, 3}, true);
  auto b = Tensor<double>::of({3}, {4, 5, 6}, true);
  auto loss = sum_all(mul(add(a, b), sub(a, b)));  // sum(a^2 - b^2)
  loss.backward();
  for (int i = 0; i < 3; ++i) {
    CHECK(a.grad_vec()[static_cast<std::size_t>(i)] == doctest::Approx(2.0 * a.data()[i]));
    CHECK(b.grad_vec()[static_cast<std::size_t>(i)] == doctest::Approx(-2.0 * b.data()[i]));
  }
}

TEST_CASE("finite differences: core op zoo") {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    auto a = testutil::random_tensor<double>({4, 3}, rng);
    auto b = testutil::random_tensor<double>({4, 3}, rng);
    auto w = testutil::random_tensor<double>({3, 2}, rng);
    auto v = testutil::random_tensor<double>({3}, rng);
    // Keep the relu argument away from its kink so central differences are valid.
    for (int i = 0; i < a.size(); ++i) {
      const double s = a.data()[i] + b.data()[i];
      if (std::abs(s) < 0.05) b.data()[i] += s >= 0 ? 0.1 : -0.1;
    }
    auto forward = [&] {
      auto h = mul(sigmoid(a), relu(add(a, b)));
      auto m = matmul(h, w);
      auto s = softmax_vec(matvec(h, v));
      return add(mean_all(m), sum_all(mul(s, s)));
    };
    auto res = testutil::grad_check(forward, {&a, &b, &w, &v});
    CHECK_MESSAGE(res.max_rel_err < 1e-6, res.worst);
  }
}

TEST_CASE("matmul, linear, tmatvec, stack against finite differences") {
  Rng rng(11);
  auto x = testutil::random_tensor<double>({2, 4}, rng);
  auto w = testutil::random_tensor<double>({3, 4}, rng);
  auto b = testutil::random_tensor<double>({3}, rng);
  auto alpha = testutil::random_tensor<double>({2}, rng);
  auto forward = [&] {
    auto y = linear(x, w, b);
    auto pooled = tmatvec(y, softmax_vec(alpha));
    std::vector<Tensor<double>> rows = {pooled, pooled};
    return mean_all(stack_rows(rows));
  };
  auto res = testutil::grad_check(forward, {&x, &w, &b, &alpha});
  CHECK_MESSAGE(res.max_rel_err < 1e-6, res.worst);
}

TEST_CASE("backward frees the tape") {
  auto a = Tensor<double>::of({2}, {1, 2}, true);
  auto y = scale(a, 3.0);
  auto loss = sum_all(y);
  loss.backward();
  CHECK(loss.node()->parents.empty());
  CHECK(y.node()->parents.empty());
  CHECK_FALSE(static_cast<bool>(y.node()->backward));
}

TEST_CASE("adam: zero gradient is the identity for any number of steps") {
  Rng rng(3);
  auto p = testutil::random_tensor<float>({5}, rng);
  const auto before = p.vec();
  AdamState<float> state;
  std::vector<Tensor<float>*> params{&p};
  state.init(params);
  p.grad_data();  // allocate zero grads
  for (int i = 0; i < 17; ++i) adam_step(params, state);
  CHECK(p.vec() == before);
  CHECK(state.step_count == 17);
}

TEST_CASE("adam: first-step update equals the bias-corrected hand value") {
  // At t=1 the bias-corrected update is -lr * g / (|g| + eps') with
  // eps' = eps scaled by the correction; numerically -lr / (1 + 1e-8) for g=1.
  auto p = Tensor<double>::scalar(0.0, true);
  p.grad_data()[0] = 1.0;
  AdamState<double> state;
  std::vector<Tensor<double>*> params{&p};
  state.init(params);
  adam_step(params, state);
  CHECK(p.item() == doctest::Approx(-4.99999995e-4).epsilon(1e-9));

  auto q = Tensor<double>::scalar(0.0, true);
  q.grad_data()[0] = -2.0;
  AdamState<double> s2;
  std::vector<Tensor<double>*> params2{&q};
  s2.init(params2);
  adam_step(params2, s2);
  CHECK(q.item() == doctest::Approx(5e-4).epsilon(1e-7));
  CHECK(q.item() > 0.0);
}

TEST_CASE("adam: moment buffer mismatch is an error") {
  auto p = Tensor<float>::zeros({3}, true);
  AdamState<float> state;
  std::vector<Tensor<float>*> params{&p};
  state.init(params);
  p.grad_data();
  state.m[0].resize(2);
  CHECK_THROWS_AS(adam_step(params, state), std::runtime_error);
  CHECK_THROWS(AdamState<float>(5e-4, 1.5, 0.999, 1e-8));
}

TEST_CASE("weighted bce: analytic values") {
  // Perfect prediction: loss ~ 0.
  auto perfect = weighted_bce(Tensor<double>::of({2}, {1.0, 0.0}),
                              Tensor<double>::of({2}, {1.0, 0.0}), ClassWeights(1.0, 1.0));
  CHECK(perfect.item() == doctest::Approx(0.0).epsilon(1e-5));

  // p = 0.5, t = 1, unit weight: ln 2.
  auto half = weighted_bce(Tensor<double>::of({1}, {0.5}), Tensor<double>::of({1}, {1.0}),
                           ClassWeights(1.0, 1.0));
  CHECK(half.item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // Same prediction scaled by the minority-class weight.
  const double w1 = 2.5133;
  auto weighted = weighted_bce(Tensor<double>::of({1}, {0.5}), Tensor<double>::of({1}, {1.0}),
                               ClassWeights(1.0, w1));
  CHECK(weighted.item() == doctest::Approx(w1 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("weighted bce: unit weights match plain bce accumulation") {
  Rng rng(5);
  const int n = 64;
  std::vector<double> p(n), t(n);
  for (int i = 0; i < n; ++i) {
    p[static_cast<std::size_t>(i)] = rng.uniform(0.01, 0.99);
    t[static_cast<std::size_t>(i)] = rng.below(2) ? 1.0 : 0.0;
  }
  auto pred = Tensor<double>::of({n}, p);
  auto target = Tensor<double>::of({n}, t);
  auto weighted = weighted_bce(pred, target, ClassWeights(1.0, 1.0));

  // Same accumulation order, weights folded in as exact 1.0 multiplies.
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    double pc = std::min(1.0 - kBceClamp, std::max(kBceClamp, p[static_cast<std::size_t>(i)]));
    acc += 1.0 * (t[static_cast<std::size_t>(i)] * std::log(pc) +
                  (1.0 - t[static_cast<std::size_t>(i)]) * std::log(1.0 - pc));
  }
  const double plain = -acc / n;
  CHECK(weighted.item() == plain);  // bit-identical
}

TEST_CASE("weighted bce: domain checks and gradient") {
  auto bad = Tensor<double>::of({1}, {1.5});
  CHECK_THROWS_AS(weighted_bce(bad, Tensor<double>::of({1}, {1.0}), ClassWeights()),
                  std::domain_error);
  CHECK_THROWS_AS(weighted_bce(Tensor<double>::of({1}, {0.5}), Tensor<double>::of({1}, {0.5}),
                               ClassWeights()),
                  std::domain_error);

  Rng rng(9);
  auto pred_src = testutil::random_tensor<double>({8}, rng, -2.0, 2.0);
  std::vector<double> tv(8);
  for (auto& v : tv) v = rng.below(2) ? 1.0 : 0.0;
  auto target = Tensor<double>::of({8}, tv);
  auto weights = Tensor<double>::of({8}, {0.6, 2.5, 0.6, 2.5, 1.0, 1.0, 0.3, 3.0});
  auto forward = [&] { return weighted_bce(sigmoid(pred_src), target, weights); };
  auto res = testutil::grad_check(forward, {&pred_src});
  CHECK_MESSAGE(res.max_rel_err < 1e-6, res.worst);
}

TEST_CASE("no-grad scope suppresses the tape") {
  auto a = Tensor<double>::of({2}, {1, 2}, true);
  NoGradGuard ng;
  auto y = scale(a, 2.0);
  CHECK_FALSE(y.requires_grad());
  CHECK(y.node()->parents.empty());
}

TEST_CASE("determinism: identical seed and op sequence is bit-identical") {
  auto run = [] {
    Rng rng(42);
    auto x = testutil::random_tensor<float>({4, 4}, rng);
    auto w = testutil::random_tensor<float>({4, 4}, rng);
    auto y = matmul(sigmoid(x), w);
    auto loss = mean_all(y);
    loss.backward();
    std::vector<float> out = y.vec();
    const auto& g = x.grad_vec();
    out.insert(out.end(), g.begin(), g.end());
    return out;
  };
  CHECK(run() == run());
}
