#include "dualkd/vitnet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "dualkd/errors.hpp"

namespace dualkd::vit {

namespace d = dualkd::diff;

void register_param(std::vector<NamedTensor>& out, const std::string& prefix,
                    const std::string& name, const Tensor& tensor) {
  out.push_back({prefix + name, tensor});
}

Linear::Linear(std::size_t in, std::size_t out, d::Rng& rng)
    : Linear(in, out, 1.0 / std::sqrt(static_cast<double>(in)), rng) {}

Linear::Linear(std::size_t in, std::size_t out, double stddev, d::Rng& rng) {
  std::vector<double> w(in * out);
  for (double& v : w) v = rng.normal(0.0, stddev);
  weight = Tensor::from({in, out}, std::move(w), true);
  bias = Tensor::zeros({out}, true);
}

Tensor Linear::operator()(const Tensor& x) const {
  return d::add(d::matmul(x, weight), bias);
}

void Linear::collect(std::vector<NamedTensor>& out, const std::string& prefix) const {
  register_param(out, prefix, "weight", weight);
  register_param(out, prefix, "bias", bias);
}

LayerNorm::LayerNorm(std::size_t dim)
    : gamma(Tensor::full({dim}, 1.0, true)), beta(Tensor::zeros({dim}, true)) {}

Tensor LayerNorm::operator()(const Tensor& x) const {
  return d::layer_norm(x, gamma, beta, eps);
}

void LayerNorm::collect(std::vector<NamedTensor>& out, const std::string& prefix) const {
  register_param(out, prefix, "gamma", gamma);
  register_param(out, prefix, "beta", beta);
}

Block::Block(std::size_t dim, std::size_t heads, std::size_t hidden, d::Rng& rng)
    : norm1(dim),
      qkv(dim, 3 * dim, rng),
      proj(dim, dim, kBlockInitStd, rng),
      norm2(dim),
      fc1(dim, hidden, kBlockInitStd, rng),
      fc2(hidden, dim, kBlockInitStd, rng),
      num_heads(heads) {}

Tensor Block::attention(const Tensor& x) const {
  const std::size_t dim = x.dim(1);
  const std::size_t head_dim = dim / num_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  const Tensor packed = qkv(x);
  std::vector<Tensor> heads;
  heads.reserve(num_heads);
  for (std::size_t h = 0; h < num_heads; ++h) {
    const Tensor q = d::cols(packed, h * head_dim, head_dim);
    const Tensor k = d::cols(packed, dim + h * head_dim, head_dim);
    const Tensor v = d::cols(packed, 2 * dim + h * head_dim, head_dim);
    const Tensor weights = d::softmax_rows(d::scale(d::matmul(q, d::transpose(k)), inv_sqrt));
    heads.push_back(d::matmul(weights, v));
  }
  return proj(num_heads == 1 ? heads.front() : d::concat_cols(heads));
}

Tensor Block::operator()(const Tensor& x) const {
  const Tensor mid = d::add(x, attention(norm1(x)));
  return d::add(mid, fc2(d::gelu(fc1(norm2(mid)))));
}

void Block::collect(std::vector<NamedTensor>& out, const std::string& prefix) const {
  norm1.collect(out, prefix + "norm1.");
  qkv.collect(out, prefix + "attn.qkv.");
  proj.collect(out, prefix + "attn.proj.");
  norm2.collect(out, prefix + "norm2.");
  fc1.collect(out, prefix + "mlp.fc1.");
  fc2.collect(out, prefix + "mlp.fc2.");
}

void assign_params(const std::vector<NamedTensor>& target,
                   const std::vector<NamedTensor>& source) {
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const NamedTensor& s : source) by_name.emplace(s.name, &s.tensor);
  for (const NamedTensor& t : target) {
    auto it = by_name.find(t.name);
    if (it == by_name.end()) throw DataError("missing parameter " + t.name);
    const Tensor& src = *it->second;
    if (src.shape() != t.tensor.shape()) {
      throw DataError("shape mismatch for " + t.name + ": " +
                      d::shape_to_string(src.shape()) + " vs " +
                      d::shape_to_string(t.tensor.shape()));
    }
    Tensor dst = t.tensor;
    std::copy(src.values().begin(), src.values().end(), dst.mutable_values().begin());
  }
}

}  // namespace dualkd::vit
