#include "dualkd/vitnet/bottleneck.hpp"

#include <algorithm>
#include <cmath>

#include "dualkd/diffcore/ops.hpp"
#include "dualkd/errors.hpp"

namespace dualkd::vit {

namespace d = dualkd::diff;

void BottleneckConfig::validate() const {
  if (!(drop_rate >= 0.0) || drop_rate >= 1.0) {
    throw UsageError("bottleneck drop_rate must lie in [0, 1)");
  }
  if (!(hidden_ratio > 0.0)) throw UsageError("bottleneck hidden_ratio must be positive");
}

namespace {

std::size_t hidden_width(std::size_t dim, double ratio) {
  return std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(ratio * static_cast<double>(dim))));
}

}  // namespace

NoisyBottleneck::NoisyBottleneck(std::size_t dim, const BottleneckConfig& config)
    : config_(config), dim_(dim) {
  config_.validate();
  d::Rng rng(config_.seed);
  const std::size_t hidden = hidden_width(dim, config_.hidden_ratio);
  fc1_ = Linear(dim, hidden, rng);
  fc2_ = Linear(hidden, dim, rng);
}

Tensor NoisyBottleneck::forward(const Tensor& fused, bool training, d::Rng& rng) const {
  if (fused.rank() != 3 || fused.dim(0) != dim_) {
    throw ShapeError("bottleneck input must be [" + std::to_string(dim_) +
                     ", H', W'], got " + d::shape_to_string(fused.shape()));
  }
  const d::Shape shape = fused.shape();
  const std::size_t n = shape[1] * shape[2];
  const Tensor tokens = d::transpose(d::reshape(fused, {dim_, n}));
  const Tensor hidden =
      d::dropout(d::gelu(fc1_(tokens)), config_.drop_rate, training, rng);
  return d::reshape(d::transpose(fc2_(hidden)), shape);
}

void NoisyBottleneck::set_identity() {
  const std::size_t hidden = fc1_.out_features();
  if (hidden < 2 * dim_) {
    throw UsageError("identity bottleneck needs hidden width >= 2 * dim");
  }
  Tensor w1 = fc1_.weight;
  Tensor w2 = fc2_.weight;
  auto v1 = w1.mutable_values();
  auto v2 = w2.mutable_values();
  std::fill(v1.begin(), v1.end(), 0.0);
  std::fill(v2.begin(), v2.end(), 0.0);
  for (std::size_t i = 0; i < dim_; ++i) {
    v1[i * hidden + i] = 1.0;          // W1[i][i]
    v1[i * hidden + dim_ + i] = -1.0;  // W1[i][dim + i]
    v2[i * dim_ + i] = 1.0;            // W2[i][i]
    v2[(dim_ + i) * dim_ + i] = -1.0;  // W2[dim + i][i]
  }
  for (Tensor b : {fc1_.bias, fc2_.bias}) {
    auto bv = b.mutable_values();
    std::fill(bv.begin(), bv.end(), 0.0);
  }
}

std::vector<NamedTensor> NoisyBottleneck::parameters(const std::string& prefix) const {
  std::vector<NamedTensor> out;
  fc1_.collect(out, prefix + "fc1.");
  fc2_.collect(out, prefix + "fc2.");
  return out;
}

}  // namespace dualkd::vit
