#pragma once

#include <array>

#include "dualkd/diffcore/tensor.hpp"
#include "dualkd/vitnet/pyramid.hpp"

namespace dualkd::distill {

using diff::Tensor;
using vit::FeaturePyramid;

// Decoder-student reconstruction loss:
//   (1/2) * sum_{i=1,2} [1 - cos(vec(F_T^i), vec(F_SD^i))]
// with teacher groups {3..6}, {7..10} and decoder groups {1..4}, {5..8}.
// vec() is the channel-major flattening of a [C', H', W'] map. Range [0, 2].
Tensor decoder_loss(const FeaturePyramid& teacher, const FeaturePyramid& decoder);
// Same loss with the teacher groups F_T^1, F_T^2 precomputed.
Tensor decoder_loss(const std::array<Tensor, 2>& teacher_groups, const FeaturePyramid& decoder);

// Encoder-student class-token loss over m = depth terms:
//   (1/m) * sum_j ||CLS_T^j - CLS_SE^j||^2
// Terms 1..m-1 use block outputs; term m uses the final-normalized token.
Tensor encoder_loss(const FeaturePyramid& teacher, const FeaturePyramid& encoder);

// L' = ||CLS_T^m - CLS_SE^m||^2 on the final-normalized tokens.
Tensor encoder_score_last(const FeaturePyramid& teacher, const FeaturePyramid& encoder);

// L'' = mean over the first m-1 block tokens of the squared difference.
Tensor encoder_score_mean_prefix(const FeaturePyramid& teacher,
                                 const FeaturePyramid& encoder);

struct BranchLosses {
  double L_SE = 0.0;
  double L_SD = 0.0;
  double L_prime = 0.0;
  double L_doubleprime = 0.0;
};

// Evaluates all four branch quantities (no gradient recording).
BranchLosses branch_losses(const FeaturePyramid& teacher, const FeaturePyramid& encoder,
                           const FeaturePyramid& decoder);

}  // namespace dualkd::distill
