#pragma once

#include <span>

#include "dualkd/diffcore/tensor.hpp"

namespace dualkd::distill {

using diff::Tensor;

// Probability clamp applied inside the log terms of the training objective.
inline constexpr double kProbabilityClamp = 1e-7;

// Numerically stable logistic function exp(x) / (1 + exp(x)).
double logistic(double x);

// Per-branch normality probabilities P_S = 1 / (1 + exp(L_S)) and their
// Noisy-OR combination P = 1 - sigmoid(L_SE) * sigmoid(L_SD).
struct FusionResult {
  double P = 0.0;
  double AC = 0.0;
  double P_SE = 0.0;
  double P_SD = 0.0;
};

FusionResult noisy_or_probability(double L_SE, double L_SD);

// Sample labels follow the normality convention: 1 = normal, 0 = anomalous.
struct LossSample {
  double L_SE = 0.0;
  double L_SD = 0.0;
  int y = 1;
};

// Binary cross-entropy on the Noisy-OR probability, averaged over the batch:
//   -(1/n) sum [y log P + (1 - y) log(1 - P)]
// with P clamped to [1e-7, 1 - 1e-7] inside the logs.
double total_loss(std::span<const LossSample> batch);

enum class Objective { kNoisyOr, kPlainSum };

// Differentiable per-sample terms. An undefined tensor disables that branch.
struct LossTerm {
  Tensor L_SE;
  Tensor L_SD;
  int y = 1;
};

// kNoisyOr: the BCE above with P = 1 - prod_{enabled} sigmoid(L_b).
// kPlainSum: (1/n) sum_i sum_{enabled} L_b; only defined for normal samples.
Tensor total_loss(std::span<const LossTerm> batch, Objective objective);

// (1 - P_SD) / P: the factor scaling the encoder gradient of -log P for a
// normal sample. Swap the arguments' roles for the decoder.
double gate_coefficient(double P_SD, double P);

enum class Fusion { kNoisyOr, kPlainSum };

// noisy_or: sigmoid(L') * sigmoid(L_SD) = 1 - P; plain_sum: L' + L_SD.
double anomaly_score(double L_prime, double L_SD, Fusion fusion);

}  // namespace dualkd::distill
