#pragma once

#include <cstddef>
#include <span>

#include "dualkd/diffcore/tensor.hpp"
#include "dualkd/vitnet/pyramid.hpp"

namespace dualkd::distill {

using diff::Tensor;
using vit::FeaturePyramid;

// Per-location discrepancy sum_{i=1,2} [1 - cos(F_T^i(:,h,w), F_SD^i(:,h,w))]
// on the patch grid, [H', W'].
Tensor patch_anomaly_map(const FeaturePyramid& teacher, const FeaturePyramid& decoder);

struct AnomalyMapOptions {
  // 3x3 box filter after upsampling (mean over in-bounds neighbours).
  bool box_smooth = false;
};

// patch_anomaly_map bilinearly upsampled (half-pixel centres, i.e.
// align-corners off) to [target_size, target_size].
Tensor anomaly_map(const FeaturePyramid& teacher, const FeaturePyramid& decoder,
                   std::size_t target_size, AnomalyMapOptions options = {});

// Bilinear resize of a [h, w] map to [out_h, out_w] with half-pixel centres
// and edge clamping.
Tensor upsample_bilinear(const Tensor& map, std::size_t out_h, std::size_t out_w);
Tensor box_smooth3(const Tensor& map);

// Per-location population variance, across samples, of the channel-mean of
// each [C', H', W'] map. Needs at least two samples.
Tensor feature_variance_map(std::span<const Tensor> features);

}  // namespace dualkd::distill
