#pragma once

#include <cstddef>
#include <vector>

#include "dualkd/diffcore/rng.hpp"
#include "dualkd/diffcore/tensor.hpp"

// Differentiable operations. Every function records a backward closure when
// gradient recording is enabled and at least one input requires grad.
//
// Binary operations broadcast by trailing-axis alignment only: the shape of
// the smaller operand must equal a suffix of the larger operand's shape (a
// rank-0 scalar is a suffix of everything).
namespace dualkd::diff {

inline constexpr double kLayerNormEps = 1e-6;
inline constexpr double kCosineEps = 1e-8;

enum class Elementwise { kAdd, kSub, kMul, kSigmoid, kLog, kGelu };

Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor& b = {});

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor sigmoid(const Tensor& x);
Tensor log(const Tensor& x);  // throws DomainError on non-positive input
Tensor gelu(const Tensor& x);  // exact: x * Phi(x)
Tensor exp(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);
// Gradient passes only where lo <= x <= hi.
Tensor clamp(const Tensor& x, double lo, double hi);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);  // rank 2
Tensor reshape(const Tensor& x, Shape shape);

Tensor softmax_rows(const Tensor& x);  // over the last axis
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = kLayerNormEps);

enum class Reduce { kSum, kMean };

// Reduces over `axes` (removed from the result). Empty `axes` reduces all.
Tensor reduce(Reduce kind, const Tensor& x, const std::vector<std::size_t>& axes = {});
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// dot(a, b) / max(|a| |b|, eps) over the flattened values.
Tensor cosine_similarity(const Tensor& a, const Tensor& b, double eps = kCosineEps);
// Squared Euclidean distance over the flattened values.
Tensor squared_distance(const Tensor& a, const Tensor& b);

// Inverted dropout. Eval mode (or rate 0) returns `x` itself.
Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng);

// Rank-2 slicing and concatenation.
Tensor rows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor cols(const Tensor& x, std::size_t begin, std::size_t count);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);

// Elementwise mean of same-shaped tensors.
Tensor average(const std::vector<Tensor>& parts);

}  // namespace dualkd::diff
