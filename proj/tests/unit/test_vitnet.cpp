#include <gtest/gtest.h>

#include <random>

#include "dualkd/diffcore/ops.hpp"
#include "dualkd/errors.hpp"
#include "dualkd/vitnet/bottleneck.hpp"
#include "dualkd/vitnet/pyramid.hpp"
#include "dualkd/vitnet/vit.hpp"
#include "oracles.hpp"

namespace d = dualkd::diff;
namespace v = dualkd::vit;
using d::Tensor;

namespace {

v::ViTConfig small_config(std::size_t depth = 3, bool cls = true) {
  v::ViTConfig c;
  c.image_size = 8;
  c.patch_size = 4;
  c.in_channels = 2;
  c.embed_dim = 8;
  c.depth = depth;
  c.num_heads = 2;
  c.mlp_ratio = 2.0;
  c.has_class_token = cls;
  c.seed = 17;
  return c;
}

// Nudges every parameter away from its (near-trivial) init so the
// reference comparison exercises attention and norm parameters.
void perturb(const v::VisionTransformer& net, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (auto nt : net.parameters()) {
    for (double& x : nt.tensor.mutable_values()) x += u(gen);
  }
}

}  // namespace

TEST(ViTConfig, ValidateRejectsBadGeometry) {
  v::ViTConfig c = small_config();
  c.patch_size = 3;
  EXPECT_THROW(c.validate(), dualkd::UsageError);
  c = small_config();
  c.num_heads = 3;
  EXPECT_THROW(c.validate(), dualkd::UsageError);
  c = small_config();
  c.depth = 0;
  EXPECT_THROW(c.validate(), dualkd::UsageError);
}

TEST(Patchify, RasterOrderWithChannelMajorColumns) {
  std::vector<double> px(2 * 4 * 4);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<double>(i);
  const Tensor p = v::patchify(Tensor::from({2, 4, 4}, px), 2);
  ASSERT_EQ(p.shape(), (d::Shape{4, 8}));
  // patch (gy=0, gx=1), channel 1, dy=1, dx=0 -> pixel (1, 1, 2)
  EXPECT_EQ(p.at(1 * 8 + 4 + 2 + 0), px[(1 * 4 + 1) * 4 + 2]);
  EXPECT_EQ(p.at(3 * 8 + 0), px[2 * 4 + 2]);
}

TEST(VisionTransformer, MatchesPlainLoopReference) {
  const v::VisionTransformer net(small_config());
  perturb(net, 3);
  std::mt19937_64 gen(8);
  const Tensor image = oracle::random_tensor(gen, {2, 8, 8}, 0.0, 1.0, false);
  const v::FeaturePyramid out = net.forward_image(image);
  const std::vector<double> img(image.values().begin(), image.values().end());
  const oracle::RefOutput ref = oracle::reference_forward(net, img);
  ASSERT_EQ(out.depth(), 3u);
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t c = 0; c < 8; ++c) {
      EXPECT_NEAR(out.class_tokens[j].at(c), ref.class_tokens[j][c], 1e-12);
      for (std::size_t n = 0; n < 4; ++n) {
        // f^j is channel-major: [C', H', W']
        EXPECT_NEAR(out.patch_features[j].at(c * 4 + n), ref.tokens[j][n + 1][c], 1e-12);
      }
    }
  }
  for (std::size_t c = 0; c < 8; ++c) {
    EXPECT_NEAR(out.final_class_token.at(c), ref.final_token[c], 1e-12);
  }
}

TEST(VisionTransformer, SeededInitIsReproducible) {
  const v::VisionTransformer a(small_config()), b(small_config());
  v::ViTConfig other = small_config();
  other.seed = 18;
  const v::VisionTransformer c(other);
  EXPECT_EQ(d::checksum(a.parameters()), d::checksum(b.parameters()));
  EXPECT_NE(d::checksum(a.parameters()), d::checksum(c.parameters()));
}

TEST(VisionTransformer, ParameterNamesAndOrder) {
  const v::VisionTransformer net(small_config(2));
  const auto params = net.parameters("teacher.");
  EXPECT_EQ(params.front().name, "teacher.patch_embed.weight");
  EXPECT_EQ(params.back().name, "teacher.final_norm.beta");
  bool found = false;
  for (const auto& p : params) found |= p.name == "teacher.blocks.2.attn.qkv.weight";
  EXPECT_TRUE(found);
  const v::VisionTransformer dec(small_config(2, false));
  for (const auto& p : dec.parameters()) {
    EXPECT_EQ(p.name.find("class_token"), std::string::npos);
    EXPECT_EQ(p.name.find("final_norm"), std::string::npos);
  }
}

TEST(VisionTransformer, EncoderCanSkipPatchFeatures) {
  const v::VisionTransformer net(small_config());
  const Tensor image = Tensor::full({2, 8, 8}, 0.5);
  const auto full = net.forward_image(image);
  const auto lean = net.forward_image(image, {.patch_features = false});
  EXPECT_TRUE(lean.patch_features.empty());
  ASSERT_EQ(lean.class_tokens.size(), 3u);
  for (std::size_t c = 0; c < 8; ++c) {
    EXPECT_EQ(lean.final_class_token.at(c), full.final_class_token.at(c));
  }
}

TEST(VisionTransformer, ShapeErrors) {
  const v::VisionTransformer net(small_config());
  EXPECT_THROW(net.forward_image(Tensor::zeros({1, 8, 8})), dualkd::ShapeError);
  const v::VisionTransformer dec(small_config(2, false));
  EXPECT_THROW(dec.forward_features(Tensor::zeros({8, 3, 3})), dualkd::ShapeError);
  EXPECT_THROW(dec.forward_image(Tensor::zeros({2, 8, 8})), std::logic_error);
}

TEST(VisionTransformer, EndToEndGradientsMatchFiniteDifferences) {
  v::ViTConfig c = small_config(2);
  c.embed_dim = 4;
  const v::VisionTransformer net(c);
  perturb(net, 5);
  const Tensor image = Tensor::full({2, 8, 8}, 0.25);
  std::mt19937_64 gen(2);
  const Tensor target = oracle::random_tensor(gen, {4}, -1.0, 1.0, false);
  std::vector<Tensor> params;
  for (const auto& p : net.parameters()) params.push_back(p.tensor);
  const auto fn = [&](const std::vector<Tensor>&) {
    const auto out = net.forward_image(image);
    return d::add(d::squared_distance(out.final_class_token, target),
                  d::sum(d::mul(out.patch_features.back(), out.patch_features.front())));
  };
  const oracle::GradCheck r = oracle::check_gradients(fn, params);
  EXPECT_EQ(r.failures, 0u) << "worst " << r.worst_rel;
}

TEST(Pyramid, GroupingUsesDocumentedLayers) {
  v::FeaturePyramid p;
  for (std::size_t j = 1; j <= 12; ++j) {
    p.patch_features.push_back(Tensor::full({2, 1, 1}, static_cast<double>(j)));
  }
  EXPECT_DOUBLE_EQ(v::group_features(p, v::PyramidRole::kTeacher, 1).at(0), 4.5);
  EXPECT_DOUBLE_EQ(v::group_features(p, v::PyramidRole::kTeacher, 2).at(0), 8.5);
  EXPECT_DOUBLE_EQ(v::group_features(p, v::PyramidRole::kDecoder, 1).at(0), 2.5);
  EXPECT_DOUBLE_EQ(v::group_features(p, v::PyramidRole::kDecoder, 2).at(0), 6.5);
  EXPECT_DOUBLE_EQ(v::fuse_teacher_mid(p).at(0), 6.5);
  EXPECT_THROW(p.layer(0), dualkd::ShapeError);
  EXPECT_THROW(p.layer(13), dualkd::ShapeError);
}

TEST(Bottleneck, IdentityConfigurationPassesThrough) {
  v::BottleneckConfig bc;
  bc.hidden_ratio = 2.0;
  v::NoisyBottleneck b(3, bc);
  b.set_identity();
  std::mt19937_64 gen(1);
  const Tensor x = oracle::random_tensor(gen, {3, 2, 2}, -2.0, 2.0, false);
  d::Rng rng(0);
  const Tensor y = b.forward(x, false, rng);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(y.at(i), x.at(i), 1e-12);
}

TEST(Bottleneck, TrainingModeIsStochasticEvalIsNot) {
  v::NoisyBottleneck b(4, {});
  const Tensor x = Tensor::full({4, 2, 2}, 0.7);
  d::Rng r1(1), r2(2);
  const Tensor e1 = b.forward(x, false, r1), e2 = b.forward(x, false, r2);
  for (std::size_t i = 0; i < e1.numel(); ++i) EXPECT_EQ(e1.at(i), e2.at(i));
  const Tensor t1 = b.forward(x, true, r1), t2 = b.forward(x, true, r2);
  bool differs = false;
  for (std::size_t i = 0; i < t1.numel(); ++i) differs |= t1.at(i) != t2.at(i);
  EXPECT_TRUE(differs);
  v::BottleneckConfig bad;
  bad.drop_rate = 1.0;
  EXPECT_THROW(v::NoisyBottleneck(4, bad), dualkd::UsageError);
}
