#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dualkd/diffcore/ops.hpp"
#include "dualkd/diffcore/rng.hpp"
#include "dualkd/diffcore/serialize.hpp"
#include "dualkd/diffcore/tensor.hpp"

namespace dualkd::vit {

using diff::NamedTensor;
using diff::Tensor;

void register_param(std::vector<NamedTensor>& out, const std::string& prefix,
                    const std::string& name, const Tensor& tensor);

// Block attention output and MLP linears start N(0, 0.02^2); qkv and all
// other linears N(0, 1/in).
inline constexpr double kBlockInitStd = 0.02;

// y = x W + b with W stored [in, out].
struct Linear {
  Tensor weight;
  Tensor bias;

  Linear() = default;
  Linear(std::size_t in, std::size_t out, diff::Rng& rng);
  Linear(std::size_t in, std::size_t out, double stddev, diff::Rng& rng);

  Tensor operator()(const Tensor& x) const;
  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
  void collect(std::vector<NamedTensor>& out, const std::string& prefix) const;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;
  double eps = diff::kLayerNormEps;

  LayerNorm() = default;
  explicit LayerNorm(std::size_t dim);

  Tensor operator()(const Tensor& x) const;
  void collect(std::vector<NamedTensor>& out, const std::string& prefix) const;
};

// Pre-norm transformer block: x + attn(norm1(x)), then + mlp(norm2(x)).
struct Block {
  LayerNorm norm1;
  Linear qkv;
  Linear proj;
  LayerNorm norm2;
  Linear fc1;
  Linear fc2;
  std::size_t num_heads = 1;

  Block() = default;
  Block(std::size_t dim, std::size_t num_heads, std::size_t hidden, diff::Rng& rng);

  Tensor operator()(const Tensor& x) const;
  Tensor attention(const Tensor& x) const;
  void collect(std::vector<NamedTensor>& out, const std::string& prefix) const;
};

// Overwrites the values of every entry of `target` with the same-named entry
// of `source`. Throws DataError on a missing name or a shape mismatch.
void assign_params(const std::vector<NamedTensor>& target,
                   const std::vector<NamedTensor>& source);

}  // namespace dualkd::vit
