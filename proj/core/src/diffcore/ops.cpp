#include "dualkd/diffcore/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <numbers>
#include <utility>

#include "dualkd/errors.hpp"

namespace dualkd::diff {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (!grad_enabled()) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

Tensor make_result(Shape shape, std::vector<double> data, bool record,
                   std::vector<std::shared_ptr<TensorImpl>> parents,
                   BackwardFn backward) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  if (record) {
    impl->requires_grad = true;
    impl->node = std::make_shared<Node>();
    impl->node->parents = std::move(parents);
    impl->node->backward = std::move(backward);
  }
  return Tensor(std::move(impl));
}

bool is_suffix(const Shape& small, const Shape& large) {
  if (small.size() > large.size()) return false;
  return std::equal(small.rbegin(), small.rend(), large.rbegin());
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  if (is_suffix(b, a)) return a;
  if (is_suffix(a, b)) return b;
  throw ShapeError("shapes " + shape_to_string(a) + " and " + shape_to_string(b) +
                   " are not trailing-axis compatible");
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + shape_to_string(t.shape()));
  }
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double gelu_scalar(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

double gelu_grad_scalar(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) * 0.5 * std::numbers::inv_sqrtpi *
                     std::numbers::sqrt2;
  return cdf + x * pdf;
}

template <typename Fwd, typename Bwd>
Tensor unary(const Tensor& x, Fwd fwd, Bwd dfdx) {
  const auto in = x.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  const bool record = should_record({&x});
  return make_result(
      x.shape(), std::move(out), record, {x.impl()},
      [dfdx](const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ps) {
        TensorImpl& p = *ps[0];
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
          p.grad[i] += o.grad[i] * dfdx(p.data[i], o.data[i]);
        }
      });
}

}  // namespace

Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor& b) {
  switch (kind) {
    case Elementwise::kAdd:
      return add(a, b);
    case Elementwise::kSub:
      return sub(a, b);
    case Elementwise::kMul:
      return mul(a, b);
    case Elementwise::kSigmoid:
      return sigmoid(a);
    case Elementwise::kLog:
      return log(a);
    case Elementwise::kGelu:
      return gelu(a);
  }
  throw std::logic_error("unknown elementwise kind");
}

namespace {

enum class BinaryKind { kAdd, kSub, kMul };

Tensor binary(BinaryKind kind, const Tensor& a, const Tensor& b) {
  Shape out_shape = broadcast_shape(a.shape(), b.shape());
  const auto av = a.values();
  const auto bv = b.values();
  const std::size_t n = numel_of(out_shape);
  const std::size_t na = av.size();
  const std::size_t nb = bv.size();
  std::vector<double> out(n);
  switch (kind) {
    case BinaryKind::kAdd:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i % na] + bv[i % nb];
      break;
    case BinaryKind::kSub:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i % na] - bv[i % nb];
      break;
    case BinaryKind::kMul:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i % na] * bv[i % nb];
      break;
  }
  const bool record = should_record({&a, &b});
  return make_result(
      std::move(out_shape), std::move(out), record, {a.impl(), b.impl()},
      [kind](const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ps) {
        TensorImpl& pa = *ps[0];
        TensorImpl& pb = *ps[1];
        const std::size_t n = o.grad.size();
        const std::size_t na = pa.data.size();
        const std::size_t nb = pb.data.size();
        if (pa.requires_grad) {
          for (std::size_t i = 0; i < n; ++i) {
            const double g = o.grad[i];
            pa.grad[i % na] += kind == BinaryKind::kMul ? g * pb.data[i % nb] : g;
          }
        }
        if (pb.requires_grad) {
          for (std::size_t i = 0; i < n; ++i) {
            const double g = o.grad[i];
            double d = g;
            if (kind == BinaryKind::kSub) d = -g;
            if (kind == BinaryKind::kMul) d = g * pa.data[i % na];
            pb.grad[i % nb] += d;
          }
        }
      });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(BinaryKind::kAdd, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(BinaryKind::kSub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(BinaryKind::kMul, a, b); }

Tensor sigmoid(const Tensor& x) {
  return unary(x, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Tensor log(const Tensor& x) {
  for (double v : x.values()) {
    if (!(v > 0.0)) throw DomainError("log requires strictly positive input");
  }
  return unary(x, [](double v) { return std::log(v); },
               [](double v, double) { return 1.0 / v; });
}

Tensor gelu(const Tensor& x) {
  return unary(x, gelu_scalar, [](double v, double) { return gelu_grad_scalar(v); });
}

Tensor exp(const Tensor& x) {
  return unary(x, [](double v) { return std::exp(v); },
               [](double, double y) { return y; });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(x, [factor](double v) { return v * factor; },
               [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double offset) {
  return unary(x, [offset](double v) { return v + offset; },
               [](double, double) { return 1.0; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (lo > hi) throw DomainError("clamp: lo > hi");
  return unary(x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
               [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0);
  const std::size_t k = a.dim(1);
  const std::size_t n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner extents differ: " + shape_to_string(a.shape()) +
                     " x " + shape_to_string(b.shape()));
  }
  std::vector<double> out(m * n);
  const auto ei = [](std::size_t v) { return static_cast<Eigen::Index>(v); };
  MutMap(out.data(), ei(m), ei(n)).noalias() =
      ConstMap(a.values().data(), ei(m), ei(k)) * ConstMap(b.values().data(), ei(k), ei(n));
  const bool record = should_record({&a, &b});
  return make_result(
      {m, n}, std::move(out), record, {a.impl(), b.impl()},
      [m, k, n, ei](const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ps) {
        TensorImpl& pa = *ps[0];
        TensorImpl& pb = *ps[1];
        ConstMap g(o.grad.data(), ei(m), ei(n));
        if (pa.requires_grad) {
          MutMap(pa.grad.data(), ei(m), ei(k)).noalias() +=
              g * ConstMap(pb.data.data(), ei(k), ei(n)).transpose();
        }
        if (pb.requires_grad) {
          MutMap(pb.grad.data(), ei(k), ei(n)).noalias() +=
              ConstMap(pa.data.data(), ei(m), ei(k)).transpose() * g;
        }
      });
}

Tensor transpose(const Tensor& x) {
  require_rank(x, 2, "transpose");
  const std::size_t r = x.dim(0);
  const std::size_t c = x.dim(1);
  const auto in = x.values();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = in[i * c + j];
  }
  const bool record = should_record({&x});
  return make_result(
      {c, r}, std::move(out), record, {x.impl()},
      [r, c](const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ps) {
        TensorImpl& p = *ps[0];
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < c; ++j) p.grad[i * c + j] += o.grad[j * r + i];
        }
      });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel_of(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_to_string(x.shape()) + " -> " +
                     shape_to_string(shape));
  }
  const auto in = x.values();
  const bool record = should_record({&x});
  return make_result(
      std::move(shape), std::vector<double>(in.begin(), in.end()), record, {x.impl()},
      [](const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ps) {
        TensorImpl& p = *ps[0];
        for (std::size_t i = 0; i < o.grad.size(); ++i) p.grad[i] += o.grad[i];
      });
}

Tensor softmax_rows(const Tensor& x) {
  if (x.rank() == 0) throw ShapeError("softmax_rows: rank-0 input");
  const std::size_t d = x.shape().back();
  const std::size_t rows_n = x.numel() / d;
  const auto in = x.values();
  std::vector<double> out(in.size());
  for (std::size_t r = 0; r < rows_n; ++r) {
    const double* src = in.data() + r * d;
    double* dst = out.data() + r * d;
    const double mx = *std::max_element(src, src + d);
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dst[j] = std::exp(src[j] - mx);
      total += dst[j];
    }
    for (std::size_t j = 0; j < d; ++j) dst[j] /= total;
  }
  const bool record = should_record({&x});
  return make_result(
      x.shape(), std::move(out), record, {x.impl()},
      [d, rows_n](const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ps) {
        TensorImpl& p = *ps[0];
        for (std::size_t r = 0; r < rows_n; ++r) {
          const double* y = o.data.data() + r * d;
          const double* g = o.grad.data() + r * d;
          double dot = 0.0;
          for (std::size_t j = 0; j < d; ++j) dot += g[j] * y[j];
          double* dx = p.grad.data() + r * d;
          for (std::size_t j = 0; j < d; ++j) dx[j] += y[j] * (g[j] - dot);
        }
      });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.rank() == 0) throw ShapeError("layer_norm: rank-0 input");
  const std::size_t d = x.shape().back();
  if (gamma.numel() != d || beta.numel() != d || gamma.rank() != 1 || beta.rank() != 1) {
    throw ShapeError("layer_norm: gamma/beta must be vectors of length " +
                     std::to_string(d));
  }
  const std::size_t rows_n = x.numel() / d;
  const auto in = x.values();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  std::vector<double> out(in.size());
  std::vector<double> xhat(in.size());
  std::vector<double> rstd(rows_n);
  for (std::size_t r = 0; r < rows_n; ++r) {
    const double* src = in.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += src[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (src[j] - mu) * (src[j] - mu);
    var /= static_cast<double>(d);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (src[j] - mu) * rstd[r];
      xhat[r * d + j] = h;
      out[r * d + j] = h * gv[j] + bv[j];
    }
  }
  const bool record = should_record({&x, &gamma, &beta});
  return make_result(
      x.shape(), std::move(out), record, {x.impl(), gamma.impl(), beta.impl()},
      [d, rows_n, xhat = std::move(xhat), rstd = std::move(rstd)](
          const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ps) {
        TensorImpl& px = *ps[0];
        TensorImpl& pg = *ps[1];
        TensorImpl& pb = *ps[2];
        std::vector<double> dxhat(d);
        for (std::size_t r = 0; r < rows_n; ++r) {
          const double* g = o.grad.data() + r * d;
          const double* h = xhat.data() + r * d;
          if (pg.requires_grad) {
            for (std::size_t j = 0; j < d; ++j) pg.grad[j] += g[j] * h[j];
          }
          if (pb.requires_grad) {
            for (std::size_t j = 0; j < d; ++j) pb.grad[j] += g[j];
          }
          if (px.requires_grad) {
            double mean_dh = 0.0;
            double mean_dh_h = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              dxhat[j] = g[j] * pg.data[j];
              mean_dh += dxhat[j];
              mean_dh_h += dxhat[j] * h[j];
            }
            mean_dh /= static_cast<double>(d);
            mean_dh_h /= static_cast<double>(d);
            double* dx = px.grad.data() + r * d;
            for (std::size_t j = 0; j < d; ++j) {
              dx[j] += rstd[r] * (dxhat[j] - mean_dh - h[j] * mean_dh_h);
            }
          }
        }
      });
}

Tensor reduce(Reduce kind, const Tensor& x, const std::vector<std::size_t>& axes) {
  const Shape& in_shape = x.shape();
  std::vector<bool> reduced(in_shape.size(), axes.empty());
  for (std::size_t axis : axes) {
    if (axis >= in_shape.size()) {
      throw ShapeError("reduce: axis " + std::to_string(axis) + " invalid for shape " +
                       shape_to_string(in_shape));
    }
    if (reduced[axis]) throw ShapeError("reduce: repeated axis");
    reduced[axis] = true;
  }
  Shape out_shape;
  for (std::size_t i = 0; i < in_shape.size(); ++i) {
    if (!reduced[i]) out_shape.push_back(in_shape[i]);
  }
  const std::size_t out_n = numel_of(out_shape);
  const std::size_t in_n = x.numel();
  const double factor =
      kind == Reduce::kMean ? static_cast<double>(out_n) / static_cast<double>(in_n) : 1.0;

  // Map each input element to its output slot by walking the index odometer.
  std::vector<std::size_t> target(in_n);
  {
    std::vector<std::size_t> out_stride(in_shape.size(), 0);
    std::size_t stride = 1;
    for (std::size_t i = in_shape.size(); i-- > 0;) {
      if (!reduced[i]) {
        out_stride[i] = stride;
        stride *= in_shape[i];
      }
    }
    std::vector<std::size_t> idx(in_shape.size(), 0);
    std::size_t slot = 0;
    for (std::size_t flat = 0; flat < in_n; ++flat) {
      target[flat] = slot;
      for (std::size_t i = in_shape.size(); i-- > 0;) {
        ++idx[i];
        slot += out_stride[i];
        if (idx[i] < in_shape[i]) break;
        slot -= out_stride[i] * idx[i];
        idx[i] = 0;
      }
    }
  }
  const auto in = x.values();
  std::vector<double> out(out_n, 0.0);
  for (std::size_t i = 0; i < in_n; ++i) out[target[i]] += in[i];
  for (double& v : out) v *= factor;

  const bool record = should_record({&x});
  return make_result(
      std::move(out_shape), std::move(out), record, {x.impl()},
      [factor, target = std::move(target)](
          const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ps) {
        TensorImpl& p = *ps[0];
        for (std::size_t i = 0; i < target.size(); ++i) {
          p.grad[i] += factor * o.grad[target[i]];
        }
      });
}

Tensor sum(const Tensor& x) { return reduce(Reduce::kSum, x); }
Tensor mean(const Tensor& x) { return reduce(Reduce::kMean, x); }

Tensor cosine_similarity(const Tensor& a, const Tensor& b, double eps) {
  if (a.numel() != b.numel()) {
    throw ShapeError("cosine_similarity: lengths differ: " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
  if (!(eps > 0.0)) throw DomainError("cosine_similarity: eps must be positive");
  const auto av = a.values();
  const auto bv = b.values();
  double dot = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    dot += av[i] * bv[i];
    aa += av[i] * av[i];
    bb += bv[i] * bv[i];
  }
  const double norm_product = std::sqrt(aa) * std::sqrt(bb);
  const bool clamped = norm_product < eps;
  const double denom = clamped ? eps : norm_product;
  const double value = dot / denom;
  const bool record = should_record({&a, &b});
  return make_result(
      {}, {value}, record, {a.impl(), b.impl()},
      [=](const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ps) {
        TensorImpl& pa = *ps[0];
        TensorImpl& pb = *ps[1];
        const double g = o.grad[0];
        const std::size_t n = pa.data.size();
        if (pa.requires_grad) {
          for (std::size_t i = 0; i < n; ++i) {
            double d = pb.data[i] / denom;
            if (!clamped) d -= value * pa.data[i] / aa;
            pa.grad[i] += g * d;
          }
        }
        if (pb.requires_grad) {
          for (std::size_t i = 0; i < n; ++i) {
            double d = pa.data[i] / denom;
            if (!clamped) d -= value * pb.data[i] / bb;
            pb.grad[i] += g * d;
          }
        }
      });
}

Tensor squared_distance(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) {
    throw ShapeError("squared_distance: lengths differ: " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
  const auto av = a.values();
  const auto bv = b.values();
  double total = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double diff = av[i] - bv[i];
    total += diff * diff;
  }
  const bool record = should_record({&a, &b});
  return make_result(
      {}, {total}, record, {a.impl(), b.impl()},
      [](const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ps) {
        TensorImpl& pa = *ps[0];
        TensorImpl& pb = *ps[1];
        const double g = o.grad[0];
        for (std::size_t i = 0; i < pa.data.size(); ++i) {
          const double d = 2.0 * g * (pa.data[i] - pb.data[i]);
          if (pa.requires_grad) pa.grad[i] += d;
          if (pb.requires_grad) pb.grad[i] -= d;
        }
      });
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0) || rate >= 1.0) {
    throw DomainError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  const auto in = x.values();
  std::vector<double> mask(in.size());
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    mask[i] = rng.uniform() >= rate ? keep_scale : 0.0;
    out[i] = in[i] * mask[i];
  }
  const bool record = should_record({&x});
  return make_result(
      x.shape(), std::move(out), record, {x.impl()},
      [mask = std::move(mask)](const TensorImpl& o,
                               std::span<const std::shared_ptr<TensorImpl>> ps) {
        TensorImpl& p = *ps[0];
        for (std::size_t i = 0; i < mask.size(); ++i) p.grad[i] += o.grad[i] * mask[i];
      });
}

Tensor rows(const Tensor& x, std::size_t begin, std::size_t count) {
  require_rank(x, 2, "rows");
  const std::size_t c = x.dim(1);
  if (count == 0 || begin + count > x.dim(0)) throw ShapeError("rows: range out of bounds");
  const auto in = x.values();
  std::vector<double> out(in.begin() + static_cast<std::ptrdiff_t>(begin * c),
                          in.begin() + static_cast<std::ptrdiff_t>((begin + count) * c));
  const bool record = should_record({&x});
  return make_result(
      {count, c}, std::move(out), record, {x.impl()},
      [offset = begin * c](const TensorImpl& o,
                           std::span<const std::shared_ptr<TensorImpl>> ps) {
        TensorImpl& p = *ps[0];
        for (std::size_t i = 0; i < o.grad.size(); ++i) p.grad[offset + i] += o.grad[i];
      });
}

Tensor cols(const Tensor& x, std::size_t begin, std::size_t count) {
  require_rank(x, 2, "cols");
  const std::size_t r = x.dim(0);
  const std::size_t c = x.dim(1);
  if (count == 0 || begin + count > c) throw ShapeError("cols: range out of bounds");
  const auto in = x.values();
  std::vector<double> out(r * count);
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(in.data() + i * c + begin, count, out.data() + i * count);
  }
  const bool record = should_record({&x});
  return make_result(
      {r, count}, std::move(out), record, {x.impl()},
      [r, c, begin, count](const TensorImpl& o,
                           std::span<const std::shared_ptr<TensorImpl>> ps) {
        TensorImpl& p = *ps[0];
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < count; ++j) {
            p.grad[i * c + begin + j] += o.grad[i * count + j];
          }
        }
      });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t c = parts.front().dim(1);
  std::size_t total_rows = 0;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  bool record = false;
  for (const Tensor& p : parts) {
    require_rank(p, 2, "concat_rows");
    if (p.dim(1) != c) throw ShapeError("concat_rows: column counts differ");
    total_rows += p.dim(0);
    parents.push_back(p.impl());
    record = record || should_record({&p});
  }
  std::vector<double> out;
  out.reserve(total_rows * c);
  for (const Tensor& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  return make_result(
      {total_rows, c}, std::move(out), record, std::move(parents),
      [](const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ps) {
        std::size_t offset = 0;
        for (const auto& p : ps) {
          if (p->requires_grad) {
            for (std::size_t i = 0; i < p->data.size(); ++i) p->grad[i] += o.grad[offset + i];
          }
          offset += p->data.size();
        }
      });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t r = parts.front().dim(0);
  std::size_t total_cols = 0;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::vector<std::size_t> widths;
  bool record = false;
  for (const Tensor& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != r) throw ShapeError("concat_cols: row counts differ");
    total_cols += p.dim(1);
    widths.push_back(p.dim(1));
    parents.push_back(p.impl());
    record = record || should_record({&p});
  }
  std::vector<double> out(r * total_cols);
  std::size_t col0 = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto in = parts[k].values();
    for (std::size_t i = 0; i < r; ++i) {
      std::copy_n(in.data() + i * widths[k], widths[k], out.data() + i * total_cols + col0);
    }
    col0 += widths[k];
  }
  return make_result(
      {r, total_cols}, std::move(out), record, std::move(parents),
      [r, total_cols, widths = std::move(widths)](
          const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ps) {
        std::size_t col = 0;
        for (std::size_t k = 0; k < ps.size(); ++k) {
          TensorImpl& p = *ps[k];
          if (p.requires_grad) {
            for (std::size_t i = 0; i < r; ++i) {
              for (std::size_t j = 0; j < widths[k]; ++j) {
                p.grad[i * widths[k] + j] += o.grad[i * total_cols + col + j];
              }
            }
          }
          col += widths[k];
        }
      });
}

Tensor average(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("average: no inputs");
  const Shape& shape = parts.front().shape();
  std::vector<double> out(parts.front().numel(), 0.0);
  std::vector<std::shared_ptr<TensorImpl>> parents;
  bool record = false;
  for (const Tensor& p : parts) {
    if (p.shape() != shape) {
      throw ShapeError("average: shapes differ: " + shape_to_string(shape) + " vs " +
                       shape_to_string(p.shape()));
    }
    const auto v = p.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
    parents.push_back(p.impl());
    record = record || should_record({&p});
  }
  const double w = 1.0 / static_cast<double>(parts.size());
  for (double& v : out) v *= w;
  return make_result(
      shape, std::move(out), record, std::move(parents),
      [w](const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ps) {
        for (const auto& p : ps) {
          if (!p->requires_grad) continue;
          for (std::size_t i = 0; i < o.grad.size(); ++i) p->grad[i] += w * o.grad[i];
        }
      });
}

}  // namespace dualkd::diff
