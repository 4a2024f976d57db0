#include "dualkd/distill/losses.hpp"

#include "dualkd/diffcore/ops.hpp"
#include "dualkd/errors.hpp"

namespace dualkd::distill {

namespace d = dualkd::diff;
using vit::PyramidRole;

namespace {

void require_tokens(const FeaturePyramid& teacher, const FeaturePyramid& encoder) {
  if (!teacher.has_class_tokens() || !encoder.has_class_tokens()) {
    throw ShapeError("encoder losses need class tokens on both pyramids");
  }
  if (teacher.class_tokens.size() != encoder.class_tokens.size()) {
    throw ShapeError("class-token counts differ: " +
                     std::to_string(teacher.class_tokens.size()) + " vs " +
                     std::to_string(encoder.class_tokens.size()));
  }
}

void require_final(const FeaturePyramid& teacher, const FeaturePyramid& encoder) {
  if (!teacher.final_class_token.defined() || !encoder.final_class_token.defined()) {
    throw ShapeError("final class token missing");
  }
}

Tensor token_distance(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("class-token shapes differ");
  return d::squared_distance(a, b);
}

}  // namespace

Tensor decoder_loss(const FeaturePyramid& teacher, const FeaturePyramid& decoder) {
  return decoder_loss({vit::group_features(teacher, PyramidRole::kTeacher, 1),
                       vit::group_features(teacher, PyramidRole::kTeacher, 2)},
                      decoder);
}

Tensor decoder_loss(const std::array<Tensor, 2>& teacher_groups, const FeaturePyramid& decoder) {
  Tensor total;
  for (int i = 1; i <= 2; ++i) {
    const Tensor& t = teacher_groups[static_cast<std::size_t>(i - 1)];
    const Tensor s = vit::group_features(decoder, PyramidRole::kDecoder, i);
    if (t.shape() != s.shape()) {
      throw ShapeError("grouped map shapes differ: " + d::shape_to_string(t.shape()) +
                       " vs " + d::shape_to_string(s.shape()));
    }
    const Tensor term = d::sub(Tensor::scalar(1.0), d::cosine_similarity(t, s));
    total = total.defined() ? d::add(total, term) : term;
  }
  return d::scale(total, 0.5);
}

Tensor encoder_loss(const FeaturePyramid& teacher, const FeaturePyramid& encoder) {
  require_tokens(teacher, encoder);
  require_final(teacher, encoder);
  const std::size_t m = teacher.class_tokens.size();
  Tensor total = token_distance(teacher.final_class_token, encoder.final_class_token);
  for (std::size_t j = 0; j + 1 < m; ++j) {
    total = d::add(total, token_distance(teacher.class_tokens[j], encoder.class_tokens[j]));
  }
  return d::scale(total, 1.0 / static_cast<double>(m));
}

Tensor encoder_score_last(const FeaturePyramid& teacher, const FeaturePyramid& encoder) {
  require_final(teacher, encoder);
  return token_distance(teacher.final_class_token, encoder.final_class_token);
}

Tensor encoder_score_mean_prefix(const FeaturePyramid& teacher,
                                 const FeaturePyramid& encoder) {
  require_tokens(teacher, encoder);
  const std::size_t m = teacher.class_tokens.size();
  if (m < 2) throw ShapeError("mean-prefix score needs at least 2 class tokens");
  Tensor total = token_distance(teacher.class_tokens[0], encoder.class_tokens[0]);
  for (std::size_t j = 1; j + 1 < m; ++j) {
    total = d::add(total, token_distance(teacher.class_tokens[j], encoder.class_tokens[j]));
  }
  return d::scale(total, 1.0 / static_cast<double>(m - 1));
}

BranchLosses branch_losses(const FeaturePyramid& teacher, const FeaturePyramid& encoder,
                           const FeaturePyramid& decoder) {
  d::NoGradGuard no_grad;
  BranchLosses out;
  out.L_SE = encoder_loss(teacher, encoder).item();
  out.L_prime = encoder_score_last(teacher, encoder).item();
  out.L_doubleprime = encoder_score_mean_prefix(teacher, encoder).item();
  out.L_SD = decoder_loss(teacher, decoder).item();
  return out;
}

}  // namespace dualkd::distill
