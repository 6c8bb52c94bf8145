#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "neurospike/spiking.hpp"
#include "testutil.hpp"

using namespace neurospike;

TEST_CASE("lif step: quiescent, firing and decaying hand values") {
  LifLayer<double> lif(0.5, 0.5, 0.25);

  lif.reset({1});
  auto s0 = lif.step(Tensor<double>::zeros({1}));
  CHECK(s0.item() == 0.0);
  CHECK(lif.membrane.item() == 0.0);

  lif.reset({1});
  auto s1 = lif.step(Tensor<double>::of({1}, {0.6}));
  CHECK(s1.item() == 1.0);  // 0.6 > 0.5 fires
  CHECK(lif.membrane.item() == doctest::Approx(0.1).epsilon(1e-12));  // reset by subtraction

  lif.reset({1});
  lif.membrane = Tensor<double>::of({1}, {0.4});
  auto s2 = lif.step(Tensor<double>::zeros({1}));
  CHECK(s2.item() == 0.0);
  CHECK(lif.membrane.item() == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("lif: strict threshold inequality") {
  LifLayer<double> lif(1.0, 0.5, 0.25);
  lif.reset({1});
  auto s = lif.step(Tensor<double>::of({1}, {0.5}));  // exactly at threshold
  CHECK(s.item() == 0.0);
}

TEST_CASE("lif: zero-input membrane decays geometrically") {
  LifLayer<double> lif(0.5, 10.0, 0.25);  // high threshold, no spikes
  lif.reset({1});
  lif.membrane = Tensor<double>::of({1}, {0.8});
  for (int t = 1; t <= 6; ++t) {
    lif.step(Tensor<double>::zeros({1}));
    CHECK(lif.membrane.item() == doctest::Approx(0.8 * std::pow(0.5, t)).epsilon(1e-12));
  }
}

TEST_CASE("lif: non-finite membrane raises") {
  LifLayer<double> lif(0.5, 0.5, 0.25);
  lif.reset({1});
  CHECK_THROWS_AS(lif.step(Tensor<double>::of({1}, {std::numeric_limits<double>::infinity()})),
                  std::runtime_error);
  CHECK_THROWS(LifLayer<double>(1.5, 0.5, 0.25));
  CHECK_THROWS(LifLayer<double>(0.5, -1.0, 0.25));
}

TEST_CASE("surrogate derivative: unit at threshold, exact value at unit distance") {
  CHECK(surrogate_derivative(0.5, 0.5, 0.25) == 1.0);
  CHECK(surrogate_derivative(1.5, 0.5, 0.25) == doctest::Approx(0.64).epsilon(1e-12));
  // Large slope recovers the all-zero-away-from-threshold derivative.
  CHECK(surrogate_derivative(1.0, 0.5, 1e9) < 1e-15);
}

TEST_CASE("surrogate derivative: symmetric, peaked at threshold, decreasing in |U-theta| and k") {
  const double theta = 0.5;
  for (double k : {0.25, 1.0, 4.0}) {
    double prev = surrogate_derivative(theta, theta, k);
    CHECK(prev == 1.0);
    for (double d : {0.1, 0.2, 0.5, 1.0, 3.0}) {
      const double up = surrogate_derivative(theta + d, theta, k);
      const double dn = surrogate_derivative(theta - d, theta, k);
      CHECK(up == doctest::Approx(dn).epsilon(1e-12));
      CHECK(up < prev);
      prev = up;
    }
  }
  CHECK(surrogate_derivative(1.0, 0.5, 1.0) < surrogate_derivative(1.0, 0.5, 0.25));
}

TEST_CASE("surrogate spike op: hard forward is binary, backward follows eq-4") {
  auto u = Tensor<double>::of({4}, {0.2, 0.5, 0.7, 1.5}, true);
  auto s = surrogate_spike(u, 0.5, 0.25);
  CHECK(s.vec() == std::vector<double>{0, 0, 1, 1});
  sum_all(s).backward();
  for (int i = 0; i < 4; ++i)
    CHECK(u.grad_vec()[static_cast<std::size_t>(i)] ==
          doctest::Approx(surrogate_derivative(u.data()[i], 0.5, 0.25)).epsilon(1e-12));
}

TEST_CASE("smoothed forward matches eq-3 and its FD gradient matches eq-4") {
  Rng rng(3);
  auto u = testutil::random_tensor<double>({6}, rng, -1.0, 2.0);
  auto forward = [&] { return sum_all(surrogate_spike(u, 0.5, 0.25, SpikeForward::kSmooth)); };
  auto v = forward();
  for (int i = 0; i < 6; ++i) {
    const double d = u.data()[i] - 0.5;
    (void)d;
  }
  auto res = testutil::grad_check(forward, {&u});
  CHECK_MESSAGE(res.max_rel_err < 1e-6, res.worst);
  (void)v;
}

// Straight-line simulation of one conv -> pool -> LIF block, written with
// plain loops and no autodiff, used as the independent oracle.
namespace {

struct BlockOracle {
  int C, H, W, O, K;
  std::vector<double> kernels, bias;

  std::vector<std::vector<double>> run(const std::vector<double>& x, int steps, double beta,
                                       double theta) const {
    const int OH = H - K + 1, OW = W - K + 1;
    auto conv = testutil::conv2d_reference(x, C, H, W, kernels, O, K, K, bias);
    const int PH = OH / 2, PW = OW / 2;
    std::vector<double> pooled(static_cast<std::size_t>(O) * PH * PW);
    for (int o = 0; o < O; ++o)
      for (int ph = 0; ph < PH; ++ph)
        for (int pw = 0; pw < PW; ++pw) {
          double best = -1e300;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx)
              best = std::max(best, conv[(static_cast<std::size_t>(o) * OH + 2 * ph + dy) * OW +
                                         2 * pw + dx]);
          pooled[(static_cast<std::size_t>(o) * PH + ph) * PW + pw] = best;
        }
    std::vector<double> membrane(pooled.size(), 0.0);
    std::vector<std::vector<double>> spikes;
    for (int t = 0; t < steps; ++t) {
      std::vector<double> s(pooled.size());
      for (std::size_t i = 0; i < pooled.size(); ++i) {
        const double u = beta * membrane[i] + pooled[i];
        s[i] = u > theta ? 1.0 : 0.0;
        membrane[i] = u - s[i] * theta;
      }
      spikes.push_back(std::move(s));
    }
    return spikes;
  }
};

}  // namespace

TEST_CASE("conv->pool->lif chain equals the straight-line oracle over 3 steps") {
  Rng rng(21);
  BlockOracle oracle;
  oracle.C = 1;
  oracle.H = 6;
  oracle.W = 8;
  oracle.O = 2;
  oracle.K = 5;
  // Scale up so currents actually cross the 0.5 threshold.
  oracle.kernels.resize(static_cast<std::size_t>(oracle.O) * oracle.C * 25);
  for (auto& v : oracle.kernels) v = rng.uniform(-0.3, 0.5);
  oracle.bias = {0.05, -0.05};

  std::vector<double> input(static_cast<std::size_t>(oracle.C) * oracle.H * oracle.W);
  for (auto& v : input) v = rng.uniform(0.0, 1.0);

  auto expected = oracle.run(input, 3, 0.5, 0.5);

  auto x = Tensor<double>::of({1, oracle.C, oracle.H, oracle.W}, input);
  auto k = Tensor<double>::of({oracle.O, oracle.C, 5, 5}, oracle.kernels);
  auto b = Tensor<double>::of({2}, oracle.bias);
  auto pooled = maxpool2d(conv2d(x, k, b));
  LifLayer<double> lif(0.5, 0.5, 0.25);
  lif.reset(pooled.shape());
  bool any_spike = false;
  for (int t = 0; t < 3; ++t) {
    auto s = lif.step(pooled);
    REQUIRE(static_cast<std::size_t>(s.size()) == expected[static_cast<std::size_t>(t)].size());
    for (int i = 0; i < s.size(); ++i) {
      CHECK(s.data()[i] == doctest::Approx(expected[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)]).epsilon(1e-6));
      if (s.data()[i] != 0.0) any_spike = true;
    }
  }
  CHECK(any_spike);  // the instance exercises both spike and no-spike paths
}

TEST_CASE("csnn: zero weights give zero currents, zero spikes, rates (0,0)") {
  Rng rng(4);
  CsnnConfig cfg;
  cfg.conv1_filters = 2;
  cfg.conv2_filters = 3;
  cfg.steps = 25;
  CsnnModel<double> model(19, 24, cfg, rng);
  for (auto* p : model.params()) std::fill(p->data(), p->data() + p->size(), 0.0);
  auto x = testutil::random_tensor<double>({1, 1, 19, 24}, rng, 0.0, 1.0, false);
  auto rates = model.forward(x);
  CHECK(rates.data()[0] == 0.0);
  CHECK(rates.data()[1] == 0.0);
}

TEST_CASE("csnn: spikes are binary at every layer and counts bounded by steps") {
  Rng rng(6);
  CsnnConfig cfg;
  cfg.conv1_filters = 3;
  cfg.conv2_filters = 4;
  cfg.steps = 25;
  CsnnModel<double> model(19, 24, cfg, rng);
  // Inflate weights so hidden layers actually fire.
  for (auto* p : model.params())
    for (int i = 0; i < p->size(); ++i) p->data()[i] *= 6.0;

  auto x = testutil::random_tensor<double>({1, 1, 19, 24}, rng, 0.0, 1.0, false);
  model.lif1.reset({1, cfg.conv1_filters, model.dims.hp1, model.dims.wp1});
  model.lif2.reset({1, cfg.conv2_filters, model.dims.hp2, model.dims.wp2});
  model.lif_out.reset({1, 2});
  auto pooled1 = maxpool2d(model.conv1.forward(x));
  bool fired = false;
  for (int t = 0; t < cfg.steps; ++t) {
    auto s1 = model.lif1.step(pooled1);
    for (int i = 0; i < s1.size(); ++i)
      CHECK((s1.data()[i] == 0.0 || s1.data()[i] == 1.0));
    auto s2 = model.lif2.step(maxpool2d(model.conv2.forward(s1)));
    for (int i = 0; i < s2.size(); ++i) {
      CHECK((s2.data()[i] == 0.0 || s2.data()[i] == 1.0));
      if (s2.data()[i] == 1.0) fired = true;
    }
  }
  CHECK(fired);

  auto epoch = testutil::random_tensor<double>({19, 24}, rng, 0.0, 1.0, false);
  auto [rates, counts] = model.forward_sample(epoch);
  for (int c = 0; c < 2; ++c) {
    CHECK(counts[static_cast<std::size_t>(c)] >= 0);
    CHECK(counts[static_cast<std::size_t>(c)] <= cfg.steps);
    CHECK(rates[static_cast<std::size_t>(c)] ==
          doctest::Approx(counts[static_cast<std::size_t>(c)] / 25.0).epsilon(1e-9));
  }
}

TEST_CASE("csnn: input shape errors") {
  Rng rng(8);
  CsnnConfig cfg;
  cfg.conv1_filters = 2;
  cfg.conv2_filters = 2;
  CsnnModel<double> model(19, 24, cfg, rng);
  CHECK_THROWS(model.forward(Tensor<double>::zeros({1, 1, 19, 23})));
  CHECK_THROWS(model.forward(Tensor<double>::zeros({1, 2, 19, 24})));
}

TEST_CASE("end-to-end smoothed csnn gradient matches finite differences") {
  Rng rng(13);
  CsnnConfig cfg;
  cfg.conv1_filters = 2;
  cfg.conv2_filters = 2;
  cfg.steps = 25;
  CsnnModel<double> model(19, 24, cfg, rng);
  model.set_forward_mode(SpikeForward::kSmooth);
  auto x = testutil::random_tensor<double>({1, 1, 19, 24}, rng, 0.0, 1.0, false);
  auto forward = [&] {
    auto rates = model.forward(x);
    return mean_all(mul(rates, rates));
  };
  auto res = testutil::grad_check(forward, model.params(), 1e-5);
  CHECK_MESSAGE(res.max_rel_err < 1e-3, res.worst);
}
