#include "dualkd/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dualkd/errors.hpp"

namespace dualkd::metrics {

namespace {

double weight_of(const ScoreSet& s, std::size_t i) {
  return s.weights.empty() ? 1.0 : s.weights[i];
}

// Tie groups in descending score order: (positive weight, negative weight).
struct Group {
  double pos = 0.0;
  double neg = 0.0;
};

std::vector<Group> descending_groups(const ScoreSet& s) {
  std::vector<std::size_t> order(s.scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return s.scores[a] > s.scores[b]; });
  std::vector<Group> groups;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    if (k == 0 || s.scores[i] != s.scores[order[k - 1]]) groups.emplace_back();
    (s.labels[i] == 1 ? groups.back().pos : groups.back().neg) += weight_of(s, i);
  }
  return groups;
}

void totals(const std::vector<Group>& groups, double& pos, double& neg) {
  pos = 0.0;
  neg = 0.0;
  for (const Group& g : groups) {
    pos += g.pos;
    neg += g.neg;
  }
}

}  // namespace

void ScoreSet::validate() const {
  if (scores.size() != labels.size()) throw DataError("scores and labels differ in length");
  if (!weights.empty() && weights.size() != scores.size()) {
    throw DataError("weights and scores differ in length");
  }
  for (int l : labels) {
    if (l != 0 && l != 1) throw DataError("metric labels must be 0 or 1");
  }
  for (double v : scores) {
    if (!std::isfinite(v)) throw DataError("non-finite score");
  }
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DataError("weights must be finite and >= 0");
  }
}

double auroc(const ScoreSet& s) {
  s.validate();
  const auto groups = descending_groups(s);
  double pos = 0.0, neg = 0.0;
  totals(groups, pos, neg);
  if (pos <= 0.0 || neg <= 0.0) throw DataError("auroc needs both anomalous and normal samples");
  // Walk from the lowest score up, counting negatives strictly below.
  double wins = 0.0;
  double neg_below = 0.0;
  for (auto it = groups.rbegin(); it != groups.rend(); ++it) {
    wins += it->pos * neg_below + 0.5 * it->pos * it->neg;
    neg_below += it->neg;
  }
  return wins / (pos * neg);
}

double average_precision(const ScoreSet& s) {
  s.validate();
  const auto groups = descending_groups(s);
  double pos = 0.0, neg = 0.0;
  totals(groups, pos, neg);
  if (pos <= 0.0) throw DataError("average precision needs at least one anomalous sample");
  double ap = 0.0;
  double tp = 0.0, fp = 0.0;
  for (const Group& g : groups) {
    const double prev_tp = tp;
    tp += g.pos;
    fp += g.neg;
    if (tp > prev_tp) ap += ((tp - prev_tp) / pos) * (tp / (tp + fp));
  }
  return ap;
}

double f1_max(const ScoreSet& s) {
  s.validate();
  const auto groups = descending_groups(s);
  double pos = 0.0, neg = 0.0;
  totals(groups, pos, neg);
  if (pos <= 0.0) throw DataError("f1_max needs at least one anomalous sample");
  double best = 0.0;  // threshold +inf: nothing flagged, F1 = 0
  double tp = 0.0, fp = 0.0;
  for (const Group& g : groups) {
    tp += g.pos;
    fp += g.neg;
    const double fn = pos - tp;
    best = std::max(best, 2.0 * tp / (2.0 * tp + fp + fn));
  }
  return best;
}

PixelMetrics pixel_metrics(std::span<const diff::Tensor> maps,
                           std::span<const data::Mask> masks) {
  if (maps.size() != masks.size()) throw ShapeError("maps and masks differ in count");
  ScoreSet flat;
  for (std::size_t k = 0; k < maps.size(); ++k) {
    const diff::Tensor& m = maps[k];
    const data::Mask& mask = masks[k];
    if (m.rank() != 2 || m.dim(0) != mask.height || m.dim(1) != mask.width) {
      throw ShapeError("anomaly map " + diff::shape_to_string(m.shape()) +
                       " does not match its mask");
    }
    const auto v = m.values();
    flat.scores.insert(flat.scores.end(), v.begin(), v.end());
    for (std::uint8_t b : mask.bits) flat.labels.push_back(b ? 1 : 0);
  }
  return {auroc(flat), average_precision(flat), f1_max(flat)};
}

}  // namespace dualkd::metrics
