#include "spvt/tensor.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "spvt/mlp.hpp"
#include "spvt/optim.hpp"
#include "spvt/serialize.hpp"
#include "testutil.hpp"

using namespace spvt;

TEST(Tensor, ScalarSquareGradient) {
  Tensor x = Tensor::param({3.0}, {1});
  Tensor loss = square(x);
  loss.backward();
  EXPECT_DOUBLE_EQ(loss.grad()[0], 1.0);  // seed gradient
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Tensor, TanhGradientAtZero) {
  Tensor x = Tensor::param({0.0}, {1});
  Tensor loss = spvt::tanh(x);
  loss.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 1.0);
}

TEST(Tensor, BackwardRequiresScalarSeed) {
  Tensor x = Tensor::param({1.0, 2.0}, {2});
  Tensor y = square(x);
  EXPECT_THROW(y.backward(), ContractError);
}

TEST(Tensor, MatmulMatchesEigenAndGradients) {
  Tensor a = Tensor::param({1, 2, 3, 4, 5, 6}, {2, 3});
  Tensor x = Tensor::param({1, -1, 2}, {3});
  Tensor y = matmul(a, x);
  ASSERT_EQ(y.numel(), 2u);
  EXPECT_DOUBLE_EQ(y.at(0), 1 - 2 + 6);
  EXPECT_DOUBLE_EQ(y.at(1), 4 - 5 + 12);
  Tensor loss = sum(y);
  loss.backward();
  // d(sum)/da_ij = x_j, d(sum)/dx_j = sum_i a_ij
  EXPECT_DOUBLE_EQ(a.grad()[0], 1.0);
  EXPECT_DOUBLE_EQ(a.grad()[1], -1.0);
  EXPECT_DOUBLE_EQ(a.grad()[2], 2.0);
  EXPECT_DOUBLE_EQ(x.grad()[0], 5.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 7.0);
  EXPECT_DOUBLE_EQ(x.grad()[2], 9.0);
}

TEST(Tensor, MatmulShapeMismatchThrows) {
  Tensor a = Tensor::constant({1, 2, 3, 4}, {2, 2});
  Tensor x = Tensor::constant({1, 2, 3}, {3});
  EXPECT_THROW(matmul(a, x), ShapeError);
}

TEST(Tensor, ConcatSliceGradientsRoute) {
  Tensor a = Tensor::param({1.0, 2.0}, {2});
  Tensor b = Tensor::param({3.0}, {1});
  Tensor c = concat(a, b);
  Tensor s = slice(c, 1, 2);
  Tensor loss = sum(mul(s, s));
  loss.backward();
  EXPECT_DOUBLE_EQ(a.grad()[0], 0.0);
  EXPECT_DOUBLE_EQ(a.grad()[1], 4.0);
  EXPECT_DOUBLE_EQ(b.grad()[0], 6.0);
}

TEST(Tensor, MaximumMinimumSubgradients) {
  Tensor a = Tensor::param({1.0, -2.0}, {2});
  Tensor b = Tensor::param({0.5, 3.0}, {2});
  Tensor hi = maximum(a, b);
  Tensor loss = sum(hi);
  loss.backward();
  EXPECT_DOUBLE_EQ(a.grad()[0], 1.0);
  EXPECT_DOUBLE_EQ(a.grad()[1], 0.0);
  EXPECT_DOUBLE_EQ(b.grad()[1], 1.0);
}

// Gradient correctness against central finite differences on random MLPs.
TEST(Tensor, GradcheckRandomMlps) {
  Rng rng(7, "gradcheck");
  int total = 0, fine = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    auto net = testutil::random_mlp(rng, 3, 2, 3, 16);
    std::vector<double> x0 = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    auto loss_of = [&]() {
      Tensor x = Tensor::vector(x0);
      Tensor y = net.forward_t(x);
      return mean(square(y));
    };
    Tensor loss = loss_of();
    loss.backward();
    for (auto& p : net.parameters()) {
      ASSERT_EQ(p.grad().size(), p.data().size());
      for (std::size_t i = 0; i < p.data().size(); ++i) {
        double saved = p.data()[i];
        double fd = testutil::central_diff(
            [&](double v) {
              p.data()[i] = v;
              double out = loss_of().value();
              p.data()[i] = saved;
              return out;
            },
            saved);
        double err = testutil::rel_err(p.grad()[i], fd);
        worst = std::max(worst, err);
        ++total;
        if (err <= 1e-4) ++fine;
        EXPECT_LE(err, 1e-3) << "param " << i;
      }
    }
  }
  EXPECT_GE(static_cast<double>(fine) / total, 0.99) << "worst rel err " << worst;
}

TEST(Mlp, ForwardIdentityLayer) {
  std::vector<Layer> layers;
  layers.push_back(Layer{Tensor::constant({1, 0, 0, 1}, {2, 2}),
                         Tensor::constant({0, 0}, {2}), Activation::kIdentity});
  MlpNetwork net(std::move(layers));
  auto y = net.forward(std::vector<double>{0.3, -0.7});
  EXPECT_DOUBLE_EQ(y[0], 0.3);
  EXPECT_DOUBLE_EQ(y[1], -0.7);
}

TEST(Mlp, ForwardTanhZero) {
  std::vector<Layer> layers;
  layers.push_back(Layer{Tensor::constant({1, 0, 0, 1}, {2, 2}),
                         Tensor::constant({0, 0}, {2}), Activation::kTanh});
  MlpNetwork net(std::move(layers));
  auto y = net.forward(std::vector<double>{0.0, 0.0});
  EXPECT_DOUBLE_EQ(y[0], 0.0);
  EXPECT_DOUBLE_EQ(y[1], 0.0);
}

TEST(Mlp, ForwardMatchesIndependentReference) {
  Rng rng(11, "fwd-oracle");
  auto net = testutil::random_mlp(rng, 4, 3, 2, 32, false);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> x(4);
    for (auto& v : x) v = rng.uniform(-2, 2);
    auto got = net.forward(x);
    auto want = testutil::reference_forward(net, x);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(got[j], want[j], 1e-12);
  }
}

TEST(Mlp, ForwardDeterministic) {
  Rng rng(12, "fwd-det");
  auto net = testutil::random_mlp(rng, 4, 2);
  std::vector<double> x = {0.1, -0.2, 0.3, 0.9};
  auto a = net.forward(x);
  auto b = net.forward(x);
  EXPECT_EQ(0, std::memcmp(a.data(), b.data(), a.size() * sizeof(double)));
}

TEST(Mlp, InputDimMismatchThrows) {
  Rng rng(13, "dim");
  auto net = testutil::random_mlp(rng, 4, 2);
  EXPECT_THROW(net.forward(std::vector<double>{1.0, 2.0}), ShapeError);
}

TEST(Mlp, BatchForwardAgreesWithSingle) {
  Rng rng(14, "batch");
  auto net = testutil::random_mlp(rng, 5, 3);
  Mat x(7, 5);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 5; ++j) x(i, j) = rng.uniform(-1, 1);
  Mat y = net.forward_batch(x);
  for (int i = 0; i < 7; ++i) {
    std::vector<double> xi(5);
    for (int j = 0; j < 5; ++j) xi[j] = x(i, j);
    auto yi = net.forward(xi);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(y(i, j), yi[j], 1e-12);
  }
}

TEST(Adam, ZeroGradientIsFixedPoint) {
  Tensor p = Tensor::param({1.5}, {1});
  p.zero_grad();
  Adam opt({p}, {.lr = 0.1});
  opt.step();
  EXPECT_DOUBLE_EQ(p.data()[0], 1.5);
}

TEST(Adam, FirstStepMovesByLrSign) {
  Tensor p = Tensor::param({0.0}, {1});
  p.zero_grad();
  p.grad()[0] = 1.0;
  Adam opt({p}, {.lr = 0.1});
  opt.step();
  EXPECT_NEAR(p.data()[0], -0.1, 1e-6);
  EXPECT_EQ(opt.step_count(), 1u);
}

TEST(Adam, ConvergesOnConvexScalar) {
  Tensor p = Tensor::param({0.0}, {1});
  Adam opt({p}, {.lr = 0.05});
  for (int i = 0; i < 1000; ++i) {
    opt.zero_grad();
    Tensor loss = square(add_scalar(p, -2.0));
    loss.backward();
    opt.step();
  }
  EXPECT_LT(std::fabs(p.data()[0] - 2.0), 1e-2);
}

TEST(Adam, NonFiniteGradientThrows) {
  Tensor p = Tensor::param({0.0}, {1});
  p.zero_grad();
  p.grad()[0] = std::numeric_limits<double>::quiet_NaN();
  Adam opt({p});
  EXPECT_THROW(opt.step(), NumericError);
}

TEST(CosineLr, Endpoints) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 100, 8e-5, 1e-5), 8e-5);
  EXPECT_DOUBLE_EQ(cosine_lr(100, 100, 8e-5, 1e-5), 1e-5);
}

TEST(CosineLr, MidpointOfTable3Schedule) {
  EXPECT_NEAR(cosine_lr(50, 100, 8e-5, 1e-5), 4.5e-5, 1e-12);
}

TEST(CosineLr, ClampsOutOfRangeStep) {
  EXPECT_DOUBLE_EQ(cosine_lr(250, 100, 1e-3, 1e-5), 1e-5);
}

class SerializeTest : public ::testing::Test {
 protected:
  std::filesystem::path dir_ = std::filesystem::temp_directory_path() / "spvt_ser_test";
  void SetUp() override { std::filesystem::create_directories(dir_); }
  void TearDown() override { std::filesystem::remove_all(dir_); }
};

static std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

TEST_F(SerializeTest, RoundTripIsByteIdentical) {
  Rng rng(21, "ser");
  auto net = testutil::random_mlp(rng, 6, 2);
  auto p1 = (dir_ / "a.spvn").string();
  auto p2 = (dir_ / "b.spvn").string();
  save_weights(net, p1, {.role = "test", .config_hash = "c0ffee", .seed = 21});
  WeightMeta meta;
  auto loaded = load_weights(p1, &meta);
  EXPECT_EQ(meta.role, "test");
  EXPECT_EQ(meta.seed, 21u);
  save_weights(loaded, p2, meta);
  EXPECT_EQ(slurp(p1), slurp(p2));
  // And every bit of every weight survives.
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    EXPECT_EQ(0, std::memcmp(net.layers()[l].w.data().data(), loaded.layers()[l].w.data().data(),
                             net.layers()[l].w.numel() * sizeof(double)));
  }
}

TEST_F(SerializeTest, CorruptMagicIsMagicError) {
  Rng rng(22, "ser2");
  auto net = testutil::random_mlp(rng, 3, 1);
  auto p = (dir_ / "c.spvn").string();
  save_weights(net, p);
  auto bytes = slurp(p);
  bytes[0] = 'X';
  std::ofstream(p, std::ios::binary | std::ios::trunc).write(bytes.data(), bytes.size());
  try {
    load_weights(p);
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_EQ(e.kind, LoadError::Kind::kBadMagic);
  }
}

TEST_F(SerializeTest, TruncationIsTruncationError) {
  Rng rng(23, "ser3");
  auto net = testutil::random_mlp(rng, 3, 1);
  auto p = (dir_ / "d.spvn").string();
  save_weights(net, p);
  auto bytes = slurp(p);
  bytes.resize(bytes.size() - 8);
  std::ofstream(p, std::ios::binary | std::ios::trunc).write(bytes.data(), bytes.size());
  try {
    load_weights(p);
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_EQ(e.kind, LoadError::Kind::kTruncated);
  }
}

TEST_F(SerializeTest, VersionMismatchIsVersionError) {
  Rng rng(24, "ser4");
  auto net = testutil::random_mlp(rng, 3, 1);
  auto p = (dir_ / "e.spvn").string();
  save_weights(net, p);
  auto bytes = slurp(p);
  bytes[4] = 99;
  std::ofstream(p, std::ios::binary | std::ios::trunc).write(bytes.data(), bytes.size());
  try {
    load_weights(p);
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_EQ(e.kind, LoadError::Kind::kBadVersion);
  }
}

TEST(Rng, StreamsAreIndependentAndReproducible) {
  Rng a(5, "x"), b(5, "x"), c(5, "y"), d(6, "x");
  for (int i = 0; i < 10; ++i) {
    uint64_t va = a.next_u64();
    EXPECT_EQ(va, b.next_u64());
    EXPECT_NE(va, c.next_u64());
    EXPECT_NE(va, d.next_u64());
  }
}

TEST(Rng, UniformInRange) {
  Rng r(1, "u");
  for (int i = 0; i < 1000; ++i) {
    double v = r.uniform(-0.25, 0.75);
    EXPECT_GE(v, -0.25);
    EXPECT_LT(v, 0.75);
  }
}
