#include "dualkd/distill/maps.hpp"

#include <algorithm>
#include <cmath>

#include "dualkd/diffcore/ops.hpp"
#include "dualkd/errors.hpp"

namespace dualkd::distill {

namespace d = dualkd::diff;
using vit::PyramidRole;

Tensor patch_anomaly_map(const FeaturePyramid& teacher, const FeaturePyramid& decoder) {
  d::NoGradGuard no_grad;
  std::vector<double> acc;
  d::Shape grid;
  for (int i = 1; i <= 2; ++i) {
    const Tensor t = vit::group_features(teacher, PyramidRole::kTeacher, i);
    const Tensor s = vit::group_features(decoder, PyramidRole::kDecoder, i);
    if (t.shape() != s.shape() || t.rank() != 3) {
      throw ShapeError("grouped map shapes differ: " + d::shape_to_string(t.shape()) +
                       " vs " + d::shape_to_string(s.shape()));
    }
    const std::size_t c = t.dim(0);
    const std::size_t hw = t.dim(1) * t.dim(2);
    if (acc.empty()) {
      acc.assign(hw, 0.0);
      grid = {t.dim(1), t.dim(2)};
    }
    const auto tv = t.values();
    const auto sv = s.values();
    for (std::size_t loc = 0; loc < hw; ++loc) {
      double dot = 0.0, tt = 0.0, ss = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double a = tv[ch * hw + loc];
        const double b = sv[ch * hw + loc];
        dot += a * b;
        tt += a * a;
        ss += b * b;
      }
      const double denom = std::max(std::sqrt(tt) * std::sqrt(ss), d::kCosineEps);
      acc[loc] += 1.0 - dot / denom;
    }
  }
  return Tensor::from(grid, std::move(acc));
}

Tensor upsample_bilinear(const Tensor& map, std::size_t out_h, std::size_t out_w) {
  if (map.rank() != 2 || out_h == 0 || out_w == 0) {
    throw ShapeError("upsample_bilinear expects a rank-2 map and a positive size");
  }
  const std::size_t in_h = map.dim(0);
  const std::size_t in_w = map.dim(1);
  const auto src = map.values();
  const auto axis = [](std::size_t dst, std::size_t in, std::size_t out, std::size_t& i0,
                       std::size_t& i1, double& frac) {
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    const double pos = std::max((static_cast<double>(dst) + 0.5) * scale - 0.5, 0.0);
    i0 = std::min(static_cast<std::size_t>(pos), in - 1);
    i1 = std::min(i0 + 1, in - 1);
    frac = pos - static_cast<double>(i0);
  };
  std::vector<double> out(out_h * out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    std::size_t y0, y1;
    double fy;
    axis(y, in_h, out_h, y0, y1, fy);
    for (std::size_t x = 0; x < out_w; ++x) {
      std::size_t x0, x1;
      double fx;
      axis(x, in_w, out_w, x0, x1, fx);
      const double top = (1.0 - fx) * src[y0 * in_w + x0] + fx * src[y0 * in_w + x1];
      const double bottom = (1.0 - fx) * src[y1 * in_w + x0] + fx * src[y1 * in_w + x1];
      out[y * out_w + x] = (1.0 - fy) * top + fy * bottom;
    }
  }
  return Tensor::from({out_h, out_w}, std::move(out));
}

Tensor box_smooth3(const Tensor& map) {
  if (map.rank() != 2) throw ShapeError("box_smooth3 expects a rank-2 map");
  const std::size_t h = map.dim(0);
  const std::size_t w = map.dim(1);
  const auto src = map.values();
  std::vector<double> out(h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double total = 0.0;
      int count = 0;
      for (std::size_t yy = y == 0 ? 0 : y - 1; yy <= std::min(y + 1, h - 1); ++yy) {
        for (std::size_t xx = x == 0 ? 0 : x - 1; xx <= std::min(x + 1, w - 1); ++xx) {
          total += src[yy * w + xx];
          ++count;
        }
      }
      out[y * w + x] = total / count;
    }
  }
  return Tensor::from({h, w}, std::move(out));
}

Tensor anomaly_map(const FeaturePyramid& teacher, const FeaturePyramid& decoder,
                   std::size_t target_size, AnomalyMapOptions options) {
  Tensor map = upsample_bilinear(patch_anomaly_map(teacher, decoder), target_size, target_size);
  return options.box_smooth ? box_smooth3(map) : map;
}

Tensor feature_variance_map(std::span<const Tensor> features) {
  if (features.size() < 2) throw DataError("feature_variance_map needs at least 2 samples");
  const d::Shape shape = features.front().shape();
  if (shape.size() != 3) throw ShapeError("feature maps must be [C', H', W']");
  const std::size_t c = shape[0];
  const std::size_t hw = shape[1] * shape[2];
  // Channel means first, then centred moments per location.
  std::vector<std::vector<double>> means(features.size(), std::vector<double>(hw, 0.0));
  for (std::size_t s = 0; s < features.size(); ++s) {
    if (features[s].shape() != shape) throw ShapeError("feature map shapes differ");
    const auto v = features[s].values();
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t loc = 0; loc < hw; ++loc) means[s][loc] += v[ch * hw + loc];
    }
    for (double& m : means[s]) m /= static_cast<double>(c);
  }
  const double n = static_cast<double>(features.size());
  std::vector<double> out(hw, 0.0);
  for (std::size_t loc = 0; loc < hw; ++loc) {
    double mu = 0.0;
    for (const auto& m : means) mu += m[loc];
    mu /= n;
    double var = 0.0;
    for (const auto& m : means) var += (m[loc] - mu) * (m[loc] - mu);
    out[loc] = var / n;
  }
  return Tensor::from({shape[1], shape[2]}, std::move(out));
}

}  // namespace dualkd::distill
