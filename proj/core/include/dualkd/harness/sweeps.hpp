#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dualkd/harness/evaluate.hpp"

namespace dualkd::harness {

struct AblationRow {
  std::size_t index = 0;  // 1..6
  LossFlags flags;
  ScoreVariant variant = ScoreVariant::kLastToken;
  distill::Fusion fusion = distill::Fusion::kNoisyOr;
  MetricsReport report;
};

// The six ablation flag rows in table order:
//   1 L_SE                 4 L_SE L_SD       noisy_or
//   2 L_SD                 5 L_SE L_SD CLS_m
//   3 L_SE CLS_m           6 L_SE L_SD CLS_m noisy_or
// A disabled Noisy-OR column trains on plain loss sums.
std::vector<LossFlags> ablation_flags();

using Progress = std::function<void(const std::string&)>;

// Trains each distinct training configuration once (rows that differ only in
// the inference score share a model) under output_dir/ablation/ and
// evaluates all six rows.
std::vector<AblationRow> run_ablation(const ExperimentConfig& base, const Progress& progress = {});
void write_ablation(const std::filesystem::path& dir, const std::vector<AblationRow>& rows);

struct FewShotRow {
  std::size_t shots = 0;
  MetricsReport report;
};

inline const std::vector<std::size_t> kDefaultShots = {1, 2, 4, 8};

// Trains and evaluates the base config once per shot count under
// output_dir/fewshot/shots_<k>/.
std::vector<FewShotRow> run_fewshot(const ExperimentConfig& base,
                                    const std::vector<std::size_t>& shots = kDefaultShots,
                                    const Progress& progress = {});
void write_fewshot(const std::filesystem::path& dir, const std::vector<FewShotRow>& rows);

}  // namespace dualkd::harness
