#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "pclab/mlp.hpp"
#include "support/oracles.hpp"

using namespace pclab;

namespace {

std::vector<Sample> random_batch(const Mlp& net, std::mt19937_64& rng, int n) {
  std::normal_distribution<double> x(0.0, 1.0);
  std::uniform_int_distribution<int> a(0, net.output_dim() - 1);
  std::vector<Sample> batch;
  for (int i = 0; i < n; ++i) {
    Sample s;
    for (int k = 0; k < net.input_dim(); ++k) s.state.push_back(x(rng));
    s.action = a(rng);
    s.target = 3 * x(rng);
    batch.push_back(std::move(s));
  }
  return batch;
}

}  // namespace

TEST(Mlp, ZeroParametersGiveZeroOutput) {
  const Mlp net({4, 8, 3});
  const std::vector<double> x{1, -2, 3, 4};
  EXPECT_EQ(net.forward(x), std::vector<double>(3, 0.0));
}

TEST(Mlp, SingleLayerIdentity) {
  Mlp net({2, 2});
  net.layers()[0].at(0, 0) = 1;
  net.layers()[0].at(1, 1) = 1;
  const std::vector<double> x{1, 2};
  EXPECT_EQ(net.forward(x), (std::vector<double>{1, 2}));
}

TEST(Mlp, ForwardMatchesExplicitMatrixProducts) {
  const auto net = Mlp::initialised({3, 5, 2}, 11);
  const std::vector<double> x{0.3, -1.2, 2.0};
  const auto& l0 = net.layers()[0];
  const auto& l1 = net.layers()[1];
  std::vector<double> h(5);
  for (int o = 0; o < 5; ++o) {
    double s = l0.b[static_cast<std::size_t>(o)];
    for (int i = 0; i < 3; ++i) s += l0.at(o, i) * x[static_cast<std::size_t>(i)];
    h[static_cast<std::size_t>(o)] = std::max(s, 0.0);
  }
  const auto y = net.forward(x);
  for (int o = 0; o < 2; ++o) {
    double s = l1.b[static_cast<std::size_t>(o)];
    for (int i = 0; i < 5; ++i) s += l1.at(o, i) * h[static_cast<std::size_t>(i)];
    EXPECT_NEAR(y[static_cast<std::size_t>(o)], s, 1e-12);
  }
}

TEST(Mlp, DimensionMismatchIsRejected) {
  const auto net = Mlp::initialised({3, 4, 2}, 1);
  EXPECT_THROW(net.forward(std::vector<double>{1, 2}), MlpError);
  EXPECT_THROW(Mlp({3}), MlpError);
  EXPECT_THROW(Mlp({3, 0, 2}), MlpError);
}

TEST(Mlp, AnalyticGradientMatchesCentralDifferences) {
  std::mt19937_64 rng(2024);
  int probes = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<std::vector<int>> shapes{{3, 4, 2}, {5, 6, 6, 3}, {18, 8, 3}, {2, 3}};
    const auto dims = shapes[static_cast<std::size_t>(trial) % shapes.size()];
    const auto net = Mlp::initialised(dims, 100 + static_cast<std::uint64_t>(trial));
    const auto batch = random_batch(net, rng, 4);
    for (int k = 0; k < 10; ++k) {
      const auto layer = std::uniform_int_distribution<std::size_t>(0, net.layers().size() - 1)(rng);
      const bool bias = std::uniform_int_distribution<int>(0, 3)(rng) == 0;
      const auto size = bias ? net.layers()[layer].b.size() : net.layers()[layer].w.size();
      const auto index = std::uniform_int_distribution<std::size_t>(0, size - 1)(rng);
      const auto p = oracle::probe_gradient(net, batch, layer, bias, index);
      if (!p) continue;
      EXPECT_LT(p->relative_error, 1e-4) << "analytic " << p->analytic << " numeric " << p->numeric;
      ++probes;
    }
  }
  EXPECT_GE(probes, 150);
}

TEST(Mlp, OnlyTheChosenActionCarriesGradient) {
  auto net = Mlp::initialised({3, 4, 3}, 5);
  const std::vector<Sample> batch{{{0.5, -0.5, 1.0}, 1, 2.0}};
  const auto g = net.gradient(batch);
  const auto& out = g.back();
  for (int i = 0; i < out.in; ++i) {
    EXPECT_EQ(out.at(0, i), 0.0);
    EXPECT_EQ(out.at(2, i), 0.0);
  }
  EXPECT_EQ(out.b[0], 0.0);
  EXPECT_EQ(out.b[2], 0.0);
  EXPECT_NE(out.b[1], 0.0);
}

TEST(Mlp, TargetEqualToPredictionLeavesParametersUnchanged) {
  auto net = Mlp::initialised({3, 4, 2}, 6);
  const std::vector<double> x{1, 2, 3};
  const std::vector<Sample> batch{{x, 0, net.forward(x)[0]}};
  const auto before = serialize_weights(net);
  Trainer sgd(OptimizerConfig{OptimizerKind::sgd, 0.1});
  EXPECT_EQ(sgd.train_batch(net, batch), 0.0);
  EXPECT_EQ(serialize_weights(net), before);
}

TEST(Mlp, OneParameterSgdStepHasClosedForm) {
  // Q = w x with one weight: dL/dw = -(y - w x) x, so w' = w + lr (y - w x) x.
  Mlp net({1, 1});
  net.layers()[0].at(0, 0) = 0.5;
  const std::vector<Sample> batch{{{2.0}, 0, 3.0}};
  Trainer sgd(OptimizerConfig{OptimizerKind::sgd, 0.1});
  sgd.train_batch(net, batch);
  EXPECT_NEAR(net.layers()[0].at(0, 0), 0.5 + 0.1 * (3.0 - 1.0) * 2.0, 1e-12);
  EXPECT_NEAR(net.layers()[0].b[0], 0.1 * (3.0 - 1.0), 1e-12);
}

TEST(Mlp, NonFiniteTargetIsRejected) {
  auto net = Mlp::initialised({2, 2}, 1);
  Trainer t;
  const std::vector<Sample> batch{{{1, 1}, 0, std::nan("")}};
  EXPECT_THROW(t.train_batch(net, batch), MlpError);
}

TEST(Mlp, TrainingReducesLossOnAFixedBatch) {
  for (auto kind : {OptimizerKind::sgd, OptimizerKind::adam}) {
    std::mt19937_64 rng(3);
    auto net = Mlp::initialised({4, 16, 2}, 9);
    const auto batch = random_batch(net, rng, 16);
    Trainer t(OptimizerConfig{kind, 0.01});
    const double before = net.loss(batch);
    for (int i = 0; i < 300; ++i) t.train_batch(net, batch);
    EXPECT_LT(net.loss(batch), 0.5 * before) << to_string(kind);
  }
}

TEST(Mlp, CopyIsIndependent) {
  auto a = Mlp::initialised({3, 4, 2}, 1);
  auto b = Mlp::initialised({3, 4, 2}, 2);
  copy_into(a, b);
  EXPECT_EQ(serialize_weights(a), serialize_weights(b));
  a.layers()[0].w[0] += 1.0;
  EXPECT_NE(serialize_weights(a), serialize_weights(b));
  Mlp c({3, 5, 2});
  EXPECT_THROW(copy_into(a, c), MlpError);
}

TEST(Mlp, WeightsRoundTripByteForByte) {
  const auto net = Mlp::initialised({18, 64, 64, 3}, 77);
  const auto dir = std::filesystem::temp_directory_path() / "pclab_mlp_test";
  std::filesystem::create_directories(dir);
  const auto p1 = (dir / "a.weights").string(), p2 = (dir / "b.weights").string();
  save_weights(net, p1);
  save_weights(load_weights(p1), p2);
  EXPECT_EQ(serialize_weights(load_weights(p1)), serialize_weights(load_weights(p2)));
  const std::vector<double> x(18, 0.25);
  EXPECT_EQ(load_weights(p1).forward(x), net.forward(x));
  std::filesystem::remove_all(dir);
}

TEST(Mlp, CorruptWeightsAreRejected) {
  const auto bytes = serialize_weights(Mlp::initialised({2, 3, 1}, 1));
  auto wrong_magic = bytes;
  wrong_magic[0] = 'X';
  EXPECT_THROW(deserialize_weights(wrong_magic), MlpError);
  EXPECT_THROW(deserialize_weights(bytes.substr(0, bytes.size() - 3)), MlpError);
  EXPECT_THROW(deserialize_weights(bytes + "extra"), MlpError);
  try {
    deserialize_weights(wrong_magic);
  } catch (const MlpError& e) {
    EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos);
  }
  EXPECT_THROW(load_weights("/nonexistent/pclab.weights"), MlpError);
}
