#include "dualkd/vitnet/pyramid.hpp"

#include "dualkd/diffcore/ops.hpp"
#include "dualkd/errors.hpp"

namespace dualkd::vit {

namespace {

Tensor mean_of_layers(const FeaturePyramid& p, std::size_t first, std::size_t last) {
  if (last > p.depth()) {
    throw ShapeError("pyramid of depth " + std::to_string(p.depth()) +
                     " has no layer " + std::to_string(last));
  }
  std::vector<Tensor> parts;
  for (std::size_t j = first; j <= last; ++j) parts.push_back(p.layer(j));
  return diff::average(parts);
}

}  // namespace

const Tensor& FeaturePyramid::layer(std::size_t j) const {
  if (j == 0 || j > patch_features.size()) {
    throw ShapeError("layer index " + std::to_string(j) + " out of range 1.." +
                     std::to_string(patch_features.size()));
  }
  return patch_features[j - 1];
}

Tensor fuse_teacher_mid(const FeaturePyramid& teacher) {
  if (teacher.depth() < 10) {
    throw ShapeError("fuse_teacher_mid needs teacher depth >= 10, got " +
                     std::to_string(teacher.depth()));
  }
  return mean_of_layers(teacher, 3, 10);
}

Tensor group_features(const FeaturePyramid& pyramid, PyramidRole role, int group) {
  if (group != 1 && group != 2) {
    throw ShapeError("group index must be 1 or 2, got " + std::to_string(group));
  }
  const auto i = static_cast<std::size_t>(group);
  if (role == PyramidRole::kTeacher) return mean_of_layers(pyramid, 4 * i - 1, 4 * i + 2);
  return mean_of_layers(pyramid, 4 * i - 3, 4 * i);
}

FeaturePyramid detach(const FeaturePyramid& pyramid) {
  FeaturePyramid out;
  for (const Tensor& t : pyramid.patch_features) out.patch_features.push_back(t.detach_copy());
  for (const Tensor& t : pyramid.class_tokens) out.class_tokens.push_back(t.detach_copy());
  if (pyramid.final_class_token.defined()) {
    out.final_class_token = pyramid.final_class_token.detach_copy();
  }
  return out;
}

}  // namespace dualkd::vit
