#include "dualkd/vitnet/vit.hpp"

#include <cmath>

#include "dualkd/diffcore/ops.hpp"
#include "dualkd/errors.hpp"

namespace dualkd::vit {

namespace d = dualkd::diff;

namespace {

constexpr double kEmbedInitStd = 0.02;

Tensor random_tensor(d::Shape shape, double stddev, d::Rng& rng) {
  std::vector<double> values(d::numel_of(shape));
  for (double& v : values) v = rng.normal(0.0, stddev);
  return Tensor::from(std::move(shape), std::move(values), true);
}

}  // namespace

std::size_t ViTConfig::mlp_hidden() const {
  return static_cast<std::size_t>(std::lround(mlp_ratio * static_cast<double>(embed_dim)));
}

void ViTConfig::validate() const {
  if (patch_size == 0 || image_size == 0 || image_size % patch_size != 0) {
    throw UsageError("image_size must be a positive multiple of patch_size");
  }
  if (num_heads == 0 || embed_dim == 0 || embed_dim % num_heads != 0) {
    throw UsageError("embed_dim must be a positive multiple of num_heads");
  }
  if (depth == 0) throw UsageError("depth must be positive");
  if (in_channels == 0) throw UsageError("in_channels must be positive");
  if (!(mlp_ratio > 0.0) || mlp_hidden() == 0) throw UsageError("mlp_ratio must be positive");
}

ViTConfig default_teacher_config() {
  ViTConfig c;
  c.seed = 1;
  return c;
}

ViTConfig default_encoder_config() {
  ViTConfig c;
  c.seed = 2;
  return c;
}

ViTConfig default_decoder_config() {
  ViTConfig c;
  c.depth = 8;
  c.has_class_token = false;
  c.seed = 3;
  return c;
}

Tensor patchify(const Tensor& image, std::size_t p) {
  if (image.rank() != 3) throw ShapeError("patchify expects a [C, H, W] image");
  const std::size_t c = image.dim(0);
  const std::size_t h = image.dim(1);
  const std::size_t w = image.dim(2);
  if (h % p != 0 || w % p != 0) throw ShapeError("image not divisible into patches");
  const std::size_t gh = h / p;
  const std::size_t gw = w / p;
  const std::size_t row_len = c * p * p;
  const auto px = image.values();
  std::vector<double> out(gh * gw * row_len);
  for (std::size_t gy = 0; gy < gh; ++gy) {
    for (std::size_t gx = 0; gx < gw; ++gx) {
      double* dst = out.data() + (gy * gw + gx) * row_len;
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t dy = 0; dy < p; ++dy) {
          for (std::size_t dx = 0; dx < p; ++dx) {
            *dst++ = px[(ch * h + gy * p + dy) * w + gx * p + dx];
          }
        }
      }
    }
  }
  return Tensor::from({gh * gw, row_len}, std::move(out));
}

VisionTransformer::VisionTransformer(const ViTConfig& config) : config_(config) {
  config_.validate();
  d::Rng rng(config_.seed);
  const std::size_t dim = config_.embed_dim;
  const std::size_t tokens = config_.num_patches() + (config_.has_class_token ? 1 : 0);
  if (config_.has_class_token) {
    const std::size_t patch_len = config_.in_channels * config_.patch_size * config_.patch_size;
    patch_embed_ = Linear(patch_len, dim, rng);
    class_token_ = random_tensor({1, dim}, kEmbedInitStd, rng);
  }
  pos_embed_ = random_tensor({tokens, dim}, kEmbedInitStd, rng);
  blocks_.reserve(config_.depth);
  for (std::size_t j = 0; j < config_.depth; ++j) {
    blocks_.emplace_back(dim, config_.num_heads, config_.mlp_hidden(), rng);
  }
  if (config_.has_class_token) final_norm_ = LayerNorm(dim);
}

FeaturePyramid VisionTransformer::forward_image(const Tensor& image,
                                                ForwardOptions options) const {
  if (!config_.has_class_token) {
    throw std::logic_error("forward_image on a network without a class token");
  }
  const d::Shape expected{config_.in_channels, config_.image_size, config_.image_size};
  if (image.shape() != expected) {
    throw ShapeError("image shape " + d::shape_to_string(image.shape()) + ", expected " +
                     d::shape_to_string(expected));
  }
  const Tensor embedded = patch_embed_(patchify(image, config_.patch_size));
  const Tensor tokens = d::add(d::concat_rows({class_token_, embedded}), pos_embed_);
  return run_blocks(tokens, options);
}

FeaturePyramid VisionTransformer::forward_features(const Tensor& features,
                                                   ForwardOptions options) const {
  if (config_.has_class_token) {
    throw std::logic_error("forward_features on a class-token network");
  }
  const std::size_t g = config_.grid();
  const d::Shape expected{config_.embed_dim, g, g};
  if (features.shape() != expected) {
    throw ShapeError("feature map shape " + d::shape_to_string(features.shape()) +
                     ", expected " + d::shape_to_string(expected));
  }
  const Tensor tokens =
      d::transpose(d::reshape(features, {config_.embed_dim, config_.num_patches()}));
  return run_blocks(d::add(tokens, pos_embed_), options);
}

FeaturePyramid VisionTransformer::run_blocks(Tensor x, ForwardOptions options) const {
  const std::size_t dim = config_.embed_dim;
  const std::size_t g = config_.grid();
  const std::size_t n = config_.num_patches();
  const std::size_t first_patch = config_.has_class_token ? 1 : 0;
  FeaturePyramid out;
  for (const Block& block : blocks_) {
    x = block(x);
    if (config_.has_class_token) {
      out.class_tokens.push_back(d::reshape(d::rows(x, 0, 1), {dim}));
    }
    if (options.patch_features) {
      const Tensor patches = first_patch == 0 ? x : d::rows(x, first_patch, n);
      out.patch_features.push_back(d::reshape(d::transpose(patches), {dim, g, g}));
    }
  }
  if (config_.has_class_token) {
    out.final_class_token = d::reshape(final_norm_(d::rows(x, 0, 1)), {dim});
  }
  return out;
}

std::vector<NamedTensor> VisionTransformer::parameters(const std::string& prefix) const {
  std::vector<NamedTensor> out;
  if (config_.has_class_token) {
    patch_embed_.collect(out, prefix + "patch_embed.");
    register_param(out, prefix, "class_token", class_token_);
  }
  register_param(out, prefix, "pos_embed", pos_embed_);
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    blocks_[j].collect(out, prefix + "blocks." + std::to_string(j + 1) + ".");
  }
  if (config_.has_class_token) final_norm_.collect(out, prefix + "final_norm.");
  return out;
}

void VisionTransformer::set_trainable(bool trainable) {
  for (NamedTensor& p : parameters()) p.tensor.set_requires_grad(trainable);
}

void VisionTransformer::copy_weights_from(const VisionTransformer& other) {
  assign_params(parameters(), other.parameters());
}

}  // namespace dualkd::vit
