#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dualkd/diffcore/rng.hpp"
#include "dualkd/vitnet/layers.hpp"

namespace dualkd::vit {

struct BottleneckConfig {
  double drop_rate = 0.2;
  double hidden_ratio = 4.0;
  std::uint64_t seed = 4;

  void validate() const;
  bool operator==(const BottleneckConfig&) const = default;
};

// Token-wise one-hidden-layer projection between the fused teacher map and
// the decoder student:
//
//   y = W2 * dropout(gelu(W1 x + b1)) + b2
//
// Dropout sits in front of the (linear) output layer, so the training-mode
// output is an unbiased estimate of the eval-mode output.
class NoisyBottleneck {
 public:
  NoisyBottleneck(std::size_t dim, const BottleneckConfig& config);

  // fused: [C', H', W'] -> [C', H', W'].
  Tensor forward(const Tensor& fused, bool training, diff::Rng& rng) const;

  // W1 = [I; -I], W2 = [I, -I] (zero-padded), zero biases. Because
  // gelu(x) - gelu(-x) = x, the eval-mode map is then the identity.
  void set_identity();

  const BottleneckConfig& config() const { return config_; }
  std::size_t hidden() const { return fc1_.out_features(); }
  std::vector<NamedTensor> parameters(const std::string& prefix = "") const;

 private:
  BottleneckConfig config_;
  std::size_t dim_;
  Linear fc1_;
  Linear fc2_;
};

}  // namespace dualkd::vit
