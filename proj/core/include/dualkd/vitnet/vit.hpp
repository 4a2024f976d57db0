#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dualkd/vitnet/layers.hpp"
#include "dualkd/vitnet/pyramid.hpp"

namespace dualkd::vit {

struct ViTConfig {
  std::size_t image_size = 32;
  std::size_t patch_size = 4;
  std::size_t in_channels = 1;
  std::size_t embed_dim = 32;
  std::size_t depth = 12;
  std::size_t num_heads = 4;
  double mlp_ratio = 4.0;
  // Networks with a class token embed images (teacher, encoder student);
  // networks without one consume C' x H' x W' feature maps (decoder student).
  bool has_class_token = true;
  std::uint64_t seed = 0;

  std::size_t grid() const { return image_size / patch_size; }
  std::size_t num_patches() const { return grid() * grid(); }
  std::size_t mlp_hidden() const;
  // Throws UsageError when an invariant is violated.
  void validate() const;

  bool operator==(const ViTConfig&) const = default;
};

ViTConfig default_teacher_config();
ViTConfig default_encoder_config();
ViTConfig default_decoder_config();

struct ForwardOptions {
  // Skip materializing f^j (the encoder student only needs class tokens).
  bool patch_features = true;
};

class VisionTransformer {
 public:
  explicit VisionTransformer(const ViTConfig& config);

  // image: [C, H, W]. Requires a class-token network.
  FeaturePyramid forward_image(const Tensor& image, ForwardOptions options = {}) const;
  // features: [C', H', W']. Requires a network without a class token.
  FeaturePyramid forward_features(const Tensor& features, ForwardOptions options = {}) const;

  const ViTConfig& config() const { return config_; }

  // Parameter handles named "<prefix>patch_embed.weight",
  // "<prefix>blocks.<j>.attn.qkv.weight" (j 1-based), ... in a fixed order.
  std::vector<NamedTensor> parameters(const std::string& prefix = "") const;
  void set_trainable(bool trainable);
  void copy_weights_from(const VisionTransformer& other);

 private:
  FeaturePyramid run_blocks(Tensor tokens, ForwardOptions options) const;

  ViTConfig config_;
  Linear patch_embed_;
  Tensor class_token_;
  Tensor pos_embed_;
  std::vector<Block> blocks_;
  LayerNorm final_norm_;
};

// Flattens non-overlapping patches of a [C, H, W] image into rows of a
// [N, C*p*p] matrix; row order is raster order over the patch grid and the
// column order is (channel, dy, dx).
Tensor patchify(const Tensor& image, std::size_t patch_size);

}  // namespace dualkd::vit
