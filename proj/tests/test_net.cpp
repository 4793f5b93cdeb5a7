#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fd.hpp"
#include "nlyap/errors.hpp"
#include "nlyap/net.hpp"

using namespace nlyap;

namespace {

NetParams one_one_one() {
  NetParams net = NetParams::zeros({1, 1, 1});
  net.weights[0][0] = 1.0;
  net.weights[1][0] = 1.0;
  return net;
}

// Plain loop evaluation, independent of forward().
double reference_eval(const NetParams& net, std::span<const double> x) {
  std::vector<double> a(x.begin(), x.end());
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const std::size_t rows = net.layer_dims[l + 1], cols = net.layer_dims[l];
    std::vector<double> z(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      double s = net.biases[l][i];
      for (std::size_t j = 0; j < cols; ++j) s += net.weights[l][i * cols + j] * a[j];
      const bool last = l + 1 == net.layer_count();
      z[i] = last ? (net.head == OutputHead::Sigmoid ? 1.0 / (1.0 + std::exp(-s)) : s) : std::tanh(s);
    }
    a = z;
  }
  return a[0];
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("nlyap_test_net_" + name);
}

}  // namespace

TEST(Net, ZeroNetIsZero) {
  const NetParams net = NetParams::zeros({3, 8, 8, 1});
  const std::vector<double> x{0.3, -2.0, 5.0};
  auto [w, tape] = forward(net, x);
  EXPECT_EQ(w, 0.0);
  for (double g : input_gradient(net, tape)) EXPECT_EQ(g, 0.0);
}

TEST(Net, OneOneOneClosedForms) {
  const NetParams net = one_one_one();
  for (double x : {-1.3, 0.0, 0.3, 2.0}) {
    auto [w, tape] = forward(net, std::vector<double>{x});
    EXPECT_DOUBLE_EQ(w, std::tanh(x));
    EXPECT_NEAR(input_gradient(net, tape)[0], 1.0 - std::tanh(x) * std::tanh(x), 1e-15);
  }
  // Canonical order: H1, b1, H2, b2.
  auto [w, tape] = forward(net, std::vector<double>{0.3});
  const auto g = param_gradient_output(net, tape);
  ASSERT_EQ(g.size(), 4u);
  EXPECT_NEAR(g[0], 0.3 * (1.0 - std::tanh(0.3) * std::tanh(0.3)), 1e-15);
  EXPECT_DOUBLE_EQ(g[3], 1.0);

  auto [w0, tape0] = forward(net, std::vector<double>{0.0});
  const std::vector<double> v{1.0};
  const auto gd = param_gradient_directional_input_grad(net, tape0, v);
  EXPECT_NEAR(gd[0], 1.0, 1e-15);
}

TEST(Net, LastBiasGradientIsOne) {
  Rng rng(1);
  const NetParams net = random_net(rng, 2, 2, 6);
  const std::vector<double> zero{0.0, 0.0};
  auto [w, tape] = forward(net, zero);
  EXPECT_DOUBLE_EQ(param_gradient_output(net, tape).back(), 1.0);
}

TEST(Net, LinearNetDirectionalGradient) {
  NetParams net = NetParams::zeros({3, 1});
  net.weights[0] = {0.5, -1.0, 2.0};
  net.biases[0] = {0.25};
  const std::vector<double> x{1.0, 2.0, 3.0}, v{0.1, -0.7, 0.4};
  auto [w, tape] = forward(net, x);
  EXPECT_DOUBLE_EQ(w, 0.5 - 2.0 + 6.0 + 0.25);
  const auto g = param_gradient_directional_input_grad(net, tape, v);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(g[i], v[i]);
  EXPECT_EQ(g[3], 0.0);
  TangentTape tan;
  EXPECT_NEAR(directional_forward(net, tape, v, tan), 0.05 + 0.7 + 0.8, 1e-15);
}

TEST(Net, ForwardMatchesReference) {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    NetParams net = random_net(rng, 1 + rng.below(4), 3, 30);
    if (t % 2) net.head = OutputHead::Sigmoid;
    std::vector<double> x(net.input_dim());
    for (auto& v : x) v = rng.uniform(-2.0, 2.0);
    EXPECT_NEAR(forward(net, x).first, reference_eval(net, x), 1e-12);
  }
}

TEST(Net, GradientsMatchFiniteDifferences) {
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    NetParams net = random_net(rng, 1 + rng.below(4), 3, 30);
    if (t % 3 == 2) net.head = OutputHead::Sigmoid;
    const std::size_t n = net.input_dim();
    std::vector<double> x(n), v(n);
    for (auto& e : x) e = rng.uniform(-1.5, 1.5);
    for (auto& e : v) e = rng.uniform(-1.0, 1.0);
    auto [w, tape] = forward(net, x);

    const auto gx = input_gradient(net, tape);
    const auto fdx = richardson_gradient([&](std::span<const double> p) { return forward(net, p).first; }, x, 1e-3);
    EXPECT_LE(max_rel_error(gx, fdx), 1e-6);

    const std::vector<double> theta = net.flatten();
    NetParams probe = net;
    const auto gp = param_gradient_output(net, tape);
    const auto fdp = richardson_gradient(
        [&](std::span<const double> th) {
          probe.assign(th);
          return forward(probe, x).first;
        },
        theta, 1e-3);
    EXPECT_LE(max_rel_error(gp, fdp), 1e-6);

    const auto gd = param_gradient_directional_input_grad(net, tape, v);
    const auto fdd = richardson_gradient(
        [&](std::span<const double> th) {
          probe.assign(th);
          ForwardTape tp;
          forward(probe, x, tp);
          const auto g = input_gradient(probe, tp);
          double s = 0.0;
          for (std::size_t i = 0; i < n; ++i) s += g[i] * v[i];
          return s;
        },
        theta, 1e-3);
    EXPECT_LE(max_rel_error(gd, fdd), 1e-5);

    // The fused accumulation agrees with the two separate gradients.
    TangentTape tan;
    directional_forward(net, tape, v, tan);
    std::vector<double> acc(theta.size(), 0.0);
    accumulate_param_gradient(net, tape, tan, 0.7, -1.3, acc);
    for (std::size_t i = 0; i < acc.size(); ++i) EXPECT_NEAR(acc[i], 0.7 * gp[i] - 1.3 * gd[i], 1e-12);
  }
}

TEST(Net, ForwardIsOrderIndependent) {
  Rng rng(4);
  const NetParams net = random_net(rng, 2, 2, 10);
  const std::vector<double> a{0.1, 0.2}, b{-1.0, 0.5};
  const double wa = forward(net, a).first;
  forward(net, b);
  EXPECT_EQ(forward(net, a).first, wa);
}

TEST(Net, IntervalEnclosuresContainSamples) {
  Rng rng(5);
  for (int t = 0; t < 40; ++t) {
    const NetParams net = random_net(rng, 1 + rng.below(3), 3, 20);
    const NetCandidate cand(net);
    const std::size_t n = net.input_dim();
    std::vector<Interval> box(n);
    const double width = std::pow(10.0, rng.uniform(-4.0, 0.0));
    for (auto& s : box) {
      const double c = rng.uniform(-1.0, 1.0);
      s = Interval(c - width, c + width);
    }
    std::vector<Interval> grad(n);
    const Interval v = cand.enclose_value_and_gradient(box, grad);
    const Interval v_only = cand.enclose_value(box);
    std::vector<double> x(n), g(n);
    for (int s = 0; s < 200; ++s) {
      for (std::size_t i = 0; i < n; ++i) x[i] = rng.uniform(box[i].lo(), box[i].hi());
      const double w = cand.value_and_gradient(x, g);
      EXPECT_TRUE(v.contains(w));
      EXPECT_TRUE(v_only.contains(w));
      for (std::size_t i = 0; i < n; ++i) EXPECT_TRUE(grad[i].contains(g[i]));
    }
  }
}

TEST(Net, PointBoxEnclosureIsTight) {
  Rng rng(6);
  const NetParams net = random_net(rng, 2, 2, 16);
  const std::vector<double> x{0.3, -0.4};
  const std::vector<Interval> box{Interval(0.3), Interval(-0.4)};
  const Interval v = enclose_output(net, box);
  EXPECT_TRUE(v.contains(forward(net, x).first));
  EXPECT_LT(v.width(), 1e-12);
}

TEST(Net, HexDoubleRoundTrip) {
  for (double v : {0.0, -0.0, 1.0 / 3.0, 1e-300, -123456.789, 5e-324}) {
    const double back = parse_hex_double(hex_double(v));
    EXPECT_EQ(std::signbit(back), std::signbit(v));
    EXPECT_EQ(back, v);
  }
  EXPECT_THROW(parse_hex_double("not a number"), ArgumentError);
}

TEST(Net, CheckpointRoundTripIsBitwise) {
  Rng rng(7);
  const NetParams net = random_net(rng, 3, 3, 30);
  Checkpoint ck;
  ck.net = net;
  ck.metadata = {{"note", "round trip"}};
  const auto path = temp_file("ckpt.json");
  save_checkpoint(path.string(), ck);
  const Checkpoint back = load_checkpoint(path.string());
  ASSERT_TRUE(back.net.has_value());
  EXPECT_EQ(*back.net, net);
  const std::vector<double> x{0.1, 0.2, -0.3};
  EXPECT_EQ(back.candidate()->value(x), NetCandidate(net).value(x));
  std::filesystem::remove(path);
}

TEST(Net, OracleCheckpoint) {
  Checkpoint ck;
  ck.oracle_alpha = 2.0;
  const auto path = temp_file("oracle.json");
  save_checkpoint(path.string(), ck);
  const auto back = load_checkpoint(path.string());
  EXPECT_EQ(back.input_dim(), 1u);
  EXPECT_NEAR(back.candidate()->value(std::vector<double>{0.6}), 0.36, 1e-15);
  std::filesystem::remove(path);
}

TEST(Net, CorruptCheckpointsAreRejected) {
  const auto path = temp_file("bad.json");
  {
    std::ofstream os(path);
    os << "{\"kind\": \"network\", \"layer_dims\": [2, 3";
  }
  EXPECT_THROW(load_checkpoint(path.string()), ArgumentError);
  EXPECT_THROW(load_checkpoint((path.string() + ".missing")), ArgumentError);
  std::filesystem::remove(path);

  NetParams bad = NetParams::zeros({2, 3, 1});
  bad.weights[0].pop_back();
  EXPECT_THROW(bad.validate(), ArgumentError);
  bad = NetParams::zeros({2, 3, 1});
  bad.biases[1][0] = std::nan("");
  EXPECT_THROW(bad.validate(), ArgumentError);
}

TEST(Net, XavierIsSeeded) {
  const auto a = NetParams::xavier({2, 30, 30, 1}, 11), b = NetParams::xavier({2, 30, 30, 1}, 11);
  const auto c = NetParams::xavier({2, 30, 30, 1}, 12);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  const double bound = std::sqrt(6.0 / (2 + 30));
  for (double w : a.weights[0]) EXPECT_LE(std::fabs(w), bound);
  EXPECT_EQ(a.param_count(), 2u * 30 + 30 + 30 * 30 + 30 + 30 + 1);
}
