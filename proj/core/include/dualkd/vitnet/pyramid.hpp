#pragma once

#include <cstddef>
#include <vector>

#include "dualkd/diffcore/tensor.hpp"

namespace dualkd::vit {

using diff::Tensor;

// Per-block outputs of one forward pass. Block j (1-based, as in the layer
// numbering used throughout) is stored at index j - 1.
struct FeaturePyramid {
  // f^j, each [C', H', W'] in channel-major order.
  std::vector<Tensor> patch_features;
  // CLS^j, each [C']: the class-token row of block j's output. Empty for
  // networks without a class token.
  std::vector<Tensor> class_tokens;
  // CLS^m after the final normalization; undefined without a class token.
  Tensor final_class_token;

  std::size_t depth() const { return patch_features.size(); }
  bool has_class_tokens() const { return !class_tokens.empty(); }
  // 1-based accessor.
  const Tensor& layer(std::size_t j) const;
};

enum class PyramidRole { kTeacher, kDecoder };

// Mean of teacher layers 3..10, the decoder's input before the bottleneck.
Tensor fuse_teacher_mid(const FeaturePyramid& teacher);

// Grouped maps of the decoder reconstruction loss:
//   teacher group i averages layers 4i-1 .. 4i+2  ({3..6}, {7..10})
//   decoder group i averages layers 4i-3 .. 4i    ({1..4}, {5..8})
Tensor group_features(const FeaturePyramid& pyramid, PyramidRole role, int group);

// Copies every tensor out of any graph.
FeaturePyramid detach(const FeaturePyramid& pyramid);

}  // namespace dualkd::vit
