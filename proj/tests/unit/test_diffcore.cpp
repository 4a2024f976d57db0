#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "dualkd/diffcore/ops.hpp"
#include "dualkd/diffcore/rng.hpp"
#include "dualkd/diffcore/serialize.hpp"
#include "dualkd/errors.hpp"
#include "oracles.hpp"

namespace d = dualkd::diff;
using d::Tensor;

namespace {

// Contracts an arbitrary output against a fixed random tensor so every
// output element gets a distinct cotangent.
Tensor contract(const Tensor& out, std::uint64_t seed = 99) {
  std::mt19937_64 gen(seed);
  const Tensor w = oracle::random_tensor(gen, out.shape(), -1.0, 1.0, false);
  return d::sum(d::mul(out, w));
}

void expect_gradients(const std::function<Tensor(const std::vector<Tensor>&)>& fn,
                      const std::vector<Tensor>& inputs) {
  const oracle::GradCheck r = oracle::check_gradients(fn, inputs);
  EXPECT_GT(r.checked, 0u);
  EXPECT_EQ(r.failures, 0u) << "worst relative error " << r.worst_rel;
}

}  // namespace

TEST(Philox, KnownAnswerVectors) {
  EXPECT_EQ(d::philox4x32_10({0, 0, 0, 0}, {0, 0}),
            (std::array<std::uint32_t, 4>{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(d::philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                             {0xffffffff, 0xffffffff}),
            (std::array<std::uint32_t, 4>{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(d::philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                             {0xa4093822, 0x299f31d0}),
            (std::array<std::uint32_t, 4>{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Rng, StreamLayoutMatchesCounterMapping) {
  d::Rng rng(0x1234567890abcdefULL, 0x0fedcba987654321ULL);
  for (std::uint64_t block = 0; block < 3; ++block) {
    const auto expect = d::philox4x32_10(
        {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32), 0x87654321u,
         0x0fedcba9u},
        {0x90abcdefu, 0x12345678u});
    for (std::uint32_t w : expect) EXPECT_EQ(rng.next_u32(), w);
  }
}

TEST(Rng, DeterministicAndForkIndependent) {
  d::Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  const d::Rng base(5);
  d::Rng f1 = base.fork(1), f1b = base.fork(1), f2 = base.fork(2);
  EXPECT_EQ(f1.next_u64(), f1b.next_u64());
  EXPECT_NE(d::Rng(5).fork(1).next_u64(), f2.next_u64());
  EXPECT_EQ(base.state(), d::Rng(5).state());
}

TEST(Rng, RangesAndMoments) {
  d::Rng rng(9);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const auto k = rng.below(7);
    ASSERT_LT(k, 7u);
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.05);
  EXPECT_NEAR(sq / n, 1.0, 0.05);
}

TEST(Tensor, FactoriesAndShapes) {
  const Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.dim(1), 3u);
  EXPECT_EQ(t.at(4), 5.0);
  EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), dualkd::ShapeError);
  EXPECT_EQ(Tensor::scalar(2.5).item(), 2.5);
  EXPECT_THROW(t.item(), dualkd::ShapeError);
  EXPECT_EQ(d::shape_to_string({2, 3}), "[2,3]");
}

TEST(Tensor, BackwardTwiceNeedsReset) {
  const Tensor x = Tensor::from({3}, {1, 2, 3}, true);
  Tensor y = d::sum(d::mul(x, x));
  y.backward();
  EXPECT_DOUBLE_EQ(x.grad()[2], 6.0);
  EXPECT_THROW(y.backward(), std::logic_error);
  y.reset_graph();
  y.backward();
  EXPECT_DOUBLE_EQ(x.grad()[2], 6.0);
}

TEST(Tensor, GradientsAccumulateAcrossUses) {
  const Tensor x = Tensor::from({2}, {1.5, -2.0}, true);
  Tensor y = d::sum(d::add(d::mul(x, x), x));
  y.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], -3.0);
}

TEST(Tensor, NoGradGuardSkipsRecording) {
  const Tensor x = Tensor::from({2}, {1, 2}, true);
  {
    d::NoGradGuard guard;
    EXPECT_FALSE(d::grad_enabled());
    const Tensor y = d::mul(x, x);
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(d::grad_enabled());
}

TEST(Ops, BroadcastTrailingSuffixOnly) {
  const Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor b = Tensor::from({3}, {10, 20, 30});
  const Tensor c = d::add(a, b);
  EXPECT_EQ(c.at(5), 36.0);
  EXPECT_EQ(d::mul(a, Tensor::scalar(2.0)).at(3), 8.0);
  EXPECT_THROW(d::add(a, Tensor::from({2}, {1, 2})), dualkd::ShapeError);
}

TEST(Ops, ValuesAgainstLongDoubleOracles) {
  std::mt19937_64 gen(3);
  const Tensor x = oracle::random_tensor(gen, {64}, -8.0, 8.0, false);
  const Tensor s = d::sigmoid(x);
  const Tensor g = d::gelu(x);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    EXPECT_NEAR(s.at(i), static_cast<double>(oracle::logistic(x.at(i))), 1e-15);
    EXPECT_NEAR(g.at(i), oracle::gelu(x.at(i)), 1e-14);
  }
  EXPECT_THROW(d::log(Tensor::from({2}, {1.0, 0.0})), dualkd::DomainError);
}

TEST(Ops, SoftmaxRowsSumToOne) {
  std::mt19937_64 gen(4);
  const Tensor x = oracle::random_tensor(gen, {3, 5}, -50.0, 50.0, false);
  const Tensor y = d::softmax_rows(x);
  for (std::size_t r = 0; r < 3; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 5; ++c) s += y.at(r * 5 + c);
    EXPECT_NEAR(s, 1.0, 1e-14);
  }
}

TEST(Ops, LayerNormNormalizes) {
  std::mt19937_64 gen(5);
  const Tensor x = oracle::random_tensor(gen, {4, 8}, -3.0, 3.0, false);
  const Tensor y = d::layer_norm(x, Tensor::full({8}, 1.0), Tensor::zeros({8}));
  for (std::size_t r = 0; r < 4; ++r) {
    double m = 0.0, v = 0.0;
    for (std::size_t c = 0; c < 8; ++c) m += y.at(r * 8 + c);
    m /= 8;
    for (std::size_t c = 0; c < 8; ++c) v += (y.at(r * 8 + c) - m) * (y.at(r * 8 + c) - m);
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v / 8, 1.0, 1e-5);
  }
}

TEST(Ops, CosineAndDistance) {
  const Tensor a = Tensor::from({3}, {1, 0, 0});
  const Tensor b = Tensor::from({3}, {0, 2, 0});
  EXPECT_DOUBLE_EQ(d::cosine_similarity(a, a).item(), 1.0);
  EXPECT_DOUBLE_EQ(d::cosine_similarity(a, b).item(), 0.0);
  EXPECT_DOUBLE_EQ(d::squared_distance(a, b).item(), 5.0);
  EXPECT_DOUBLE_EQ(d::cosine_similarity(Tensor::zeros({3}), a).item(), 0.0);
}

TEST(Ops, DropoutEvalIsIdentityAndTrainingIsInverted) {
  const Tensor x = Tensor::full({1000}, 1.0);
  d::Rng rng(1);
  EXPECT_EQ(d::dropout(x, 0.5, false, rng).impl(), x.impl());
  const Tensor y = d::dropout(x, 0.25, true, rng);
  std::size_t kept = 0;
  for (double v : y.values()) {
    ASSERT_TRUE(v == 0.0 || std::abs(v - 1.0 / 0.75) < 1e-15);
    kept += v != 0.0;
  }
  EXPECT_NEAR(static_cast<double>(kept) / 1000.0, 0.75, 0.05);
  EXPECT_THROW(d::dropout(x, 1.0, true, rng), dualkd::DomainError);
}

TEST(Ops, SlicingAndConcat) {
  const Tensor x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(d::rows(x, 1, 1).at(0), 4.0);
  EXPECT_EQ(d::cols(x, 1, 2).at(3), 6.0);
  const Tensor c = d::concat_cols({d::cols(x, 0, 1), d::cols(x, 1, 2)});
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(c.at(i), x.at(i));
  EXPECT_THROW(d::rows(x, 2, 1), dualkd::ShapeError);
}

// ---- gradient checks against central differences -------------------------

class OpGradients : public ::testing::TestWithParam<int> {};

TEST_P(OpGradients, MatchFiniteDifferences) {
  const int seed = GetParam();
  std::mt19937_64 gen(static_cast<std::uint64_t>(seed));
  const Tensor a = oracle::random_tensor(gen, {3, 4});
  const Tensor b = oracle::random_tensor(gen, {3, 4});
  const Tensor row = oracle::random_tensor(gen, {4});
  const Tensor m = oracle::random_tensor(gen, {4, 2});
  const Tensor pos = oracle::random_tensor(gen, {3, 4}, 0.5, 2.0);
  const Tensor g = oracle::random_tensor(gen, {4}, 0.5, 1.5);

  expect_gradients([](const auto& v) { return contract(d::add(v[0], v[1])); }, {a, row});
  expect_gradients([](const auto& v) { return contract(d::sub(v[0], v[1])); }, {a, b});
  expect_gradients([](const auto& v) { return contract(d::mul(v[0], v[1])); }, {a, row});
  expect_gradients([](const auto& v) { return contract(d::sigmoid(v[0])); }, {a});
  expect_gradients([](const auto& v) { return contract(d::log(v[0])); }, {pos});
  expect_gradients([](const auto& v) { return contract(d::gelu(v[0])); }, {a});
  expect_gradients([](const auto& v) { return contract(d::exp(v[0])); }, {a});
  expect_gradients([](const auto& v) { return contract(d::scale(v[0], -1.7)); }, {a});
  expect_gradients([](const auto& v) { return contract(d::add_scalar(v[0], 0.3)); }, {a});
  expect_gradients([](const auto& v) { return contract(d::clamp(v[0], -2.0, 2.0)); }, {a});
  expect_gradients([](const auto& v) { return contract(d::matmul(v[0], v[1])); }, {a, m});
  expect_gradients([](const auto& v) { return contract(d::transpose(v[0])); }, {a});
  expect_gradients([](const auto& v) { return contract(d::reshape(v[0], {2, 6})); }, {a});
  expect_gradients([](const auto& v) { return contract(d::softmax_rows(v[0])); }, {a});
  expect_gradients([](const auto& v) { return contract(d::layer_norm(v[0], v[1], v[2])); },
                   {a, g, row});
  expect_gradients([](const auto& v) { return contract(d::reduce(d::Reduce::kSum, v[0], {0})); },
                   {a});
  expect_gradients([](const auto& v) { return contract(d::reduce(d::Reduce::kMean, v[0], {1})); },
                   {a});
  expect_gradients([](const auto& v) { return d::mean(d::mul(v[0], v[0])); }, {a});
  expect_gradients([](const auto& v) { return d::cosine_similarity(v[0], v[1]); }, {a, b});
  expect_gradients([](const auto& v) { return d::squared_distance(v[0], v[1]); }, {a, b});
  expect_gradients(
      [seed](const auto& v) {
        d::Rng rng(static_cast<std::uint64_t>(seed));
        return contract(d::dropout(v[0], 0.3, true, rng));
      },
      {a});
  expect_gradients([](const auto& v) { return contract(d::rows(v[0], 1, 2)); }, {a});
  expect_gradients([](const auto& v) { return contract(d::cols(v[0], 1, 2)); }, {a});
  expect_gradients([](const auto& v) { return contract(d::concat_rows({v[0], v[1]})); }, {a, b});
  expect_gradients([](const auto& v) { return contract(d::concat_cols({v[0], v[1]})); }, {a, b});
  expect_gradients([](const auto& v) { return contract(d::average({v[0], v[1], v[0]})); },
                   {a, b});
}

INSTANTIATE_TEST_SUITE_P(Seeds, OpGradients, ::testing::Range(1, 6));

// ---- serialization -------------------------------------------------------

TEST(Serialize, RoundTripPreservesBitsAndOrder) {
  const auto dir = std::filesystem::temp_directory_path() / "dualkd_test_serialize";
  std::filesystem::create_directories(dir);
  const std::vector<d::NamedTensor> entries = {
      {"a.weight", Tensor::from({2, 2}, {1.0, -0.0, 1e-300, 3.141592653589793})},
      {"b", Tensor::scalar(7.0)},
      {"c.bias", Tensor::from({3}, {0.1, 0.2, 0.3})}};
  d::save_tensors(dir / "t", entries);
  const auto back = d::load_tensors(dir / "t");
  ASSERT_EQ(back.size(), entries.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].name, entries[i].name);
    EXPECT_EQ(back[i].tensor.shape(), entries[i].tensor.shape());
    for (std::size_t k = 0; k < back[i].tensor.numel(); ++k) {
      EXPECT_EQ(std::signbit(back[i].tensor.at(k)), std::signbit(entries[i].tensor.at(k)));
      EXPECT_EQ(back[i].tensor.at(k), entries[i].tensor.at(k));
    }
  }
  EXPECT_EQ(d::checksum(back), d::checksum(entries));
  std::filesystem::remove_all(dir);
}

TEST(Serialize, ChecksumSeesSingleBitChanges) {
  std::vector<d::NamedTensor> e = {{"x", Tensor::from({2}, {1.0, 2.0})}};
  const auto before = d::checksum(e);
  e[0].tensor.mutable_values()[1] = std::nextafter(2.0, 3.0);
  EXPECT_NE(before, d::checksum(e));
}

TEST(Serialize, MissingFileThrows) {
  EXPECT_THROW(d::load_tensors("/nonexistent/dualkd/stem"), dualkd::DataError);
}
