#include "dualkd/distill/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dualkd/diffcore/ops.hpp"
#include "dualkd/errors.hpp"

namespace dualkd::distill {

namespace d = dualkd::diff;

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

FusionResult noisy_or_probability(double L_SE, double L_SD) {
  FusionResult r;
  const double s_se = logistic(L_SE);
  const double s_sd = logistic(L_SD);
  r.P_SE = logistic(-L_SE);
  r.P_SD = logistic(-L_SD);
  r.AC = s_se * s_sd;
  r.P = 1.0 - r.AC;
  return r;
}

double total_loss(std::span<const LossSample> batch) {
  if (batch.empty()) throw DataError("total_loss on an empty batch");
  double acc = 0.0;
  for (const LossSample& s : batch) {
    if (s.y != 0 && s.y != 1) throw DomainError("label must be 0 or 1");
    const double p = std::clamp(noisy_or_probability(s.L_SE, s.L_SD).P, kProbabilityClamp,
                                1.0 - kProbabilityClamp);
    acc += s.y == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return -acc / static_cast<double>(batch.size());
}

Tensor total_loss(std::span<const LossTerm> batch, Objective objective) {
  if (batch.empty()) throw DataError("total_loss on an empty batch");
  Tensor acc;
  for (const LossTerm& t : batch) {
    if (t.y != 0 && t.y != 1) throw DomainError("label must be 0 or 1");
    if (!t.L_SE.defined() && !t.L_SD.defined()) {
      throw UsageError("total_loss needs at least one enabled branch");
    }
    Tensor term;
    if (objective == Objective::kPlainSum) {
      if (t.y != 1) throw UsageError("plain-sum objective is defined for normal samples only");
      if (t.L_SE.defined()) term = t.L_SE;
      if (t.L_SD.defined()) term = term.defined() ? d::add(term, t.L_SD) : t.L_SD;
    } else {
      Tensor anomalous;  // prod of sigmoid(L_b) = 1 - P
      for (const Tensor* branch : {&t.L_SE, &t.L_SD}) {
        if (!branch->defined()) continue;
        const Tensor s = d::sigmoid(*branch);
        anomalous = anomalous.defined() ? d::mul(anomalous, s) : s;
      }
      const Tensor p = t.y == 1 ? d::sub(Tensor::scalar(1.0), anomalous) : anomalous;
      term = d::scale(
          d::log(d::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp)), -1.0);
    }
    acc = acc.defined() ? d::add(acc, term) : term;
  }
  return d::scale(acc, 1.0 / static_cast<double>(batch.size()));
}

double gate_coefficient(double P_SD, double P) {
  if (!(P > 0.0)) throw DomainError("gate_coefficient needs P > 0");
  return (1.0 - P_SD) / P;
}

double anomaly_score(double L_prime, double L_SD, Fusion fusion) {
  if (fusion == Fusion::kPlainSum) return L_prime + L_SD;
  return logistic(L_prime) * logistic(L_SD);
}

}  // namespace dualkd::distill
