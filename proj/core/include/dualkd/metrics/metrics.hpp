#pragma once

#include <span>
#include <vector>

#include "dualkd/diffcore/tensor.hpp"
#include "dualkd/synthdata/image.hpp"

namespace dualkd::metrics {

// Scores with binary labels where 1 = anomalous (the positive class). Higher
// scores mean more anomalous. Weights default to 1 per sample.
struct ScoreSet {
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<double> weights;

  void validate() const;
};

// P(score of a random anomaly > score of a random normal), ties count 1/2.
// Throws DataError unless both classes are present.
double auroc(const ScoreSet& s);

// sum_k (R_k - R_{k-1}) * P_k over distinct thresholds in descending order.
double average_precision(const ScoreSet& s);

// max over t in {observed scores, +inf} of F1 for "anomalous iff score >= t".
double f1_max(const ScoreSet& s);

struct PixelMetrics {
  double auroc = 0.0;
  double average_precision = 0.0;
  double f1_max = 0.0;
};

// Flattens every pixel of every map into one ScoreSet (mask 1 = positive).
PixelMetrics pixel_metrics(std::span<const diff::Tensor> maps,
                           std::span<const data::Mask> masks);

}  // namespace dualkd::metrics
