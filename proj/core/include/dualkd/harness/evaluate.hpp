#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dualkd/distill/fusion.hpp"
#include "dualkd/distill/maps.hpp"
#include "dualkd/harness/config.hpp"
#include "dualkd/harness/model.hpp"
#include "dualkd/synthdata/splits.hpp"

namespace dualkd::harness {

// The only conversion from sample labels (1 = normal) to metric labels
// (1 = anomalous).
std::vector<int> to_metric_labels(std::span<const int> normality_labels);

struct ScoreRecord {
  std::string id;
  std::string entry;
  data::Split split = data::Split::kTest;
  int label = data::kNormal;  // normality convention
  double L_SE = 0.0;
  double L_prime = 0.0;
  double L_doubleprime = 0.0;
  double L_SD = 0.0;
  double AC_noisy_or = 0.0;   // sigmoid(L') * sigmoid(L_SD)
  double AC_plain_sum = 0.0;  // L' + L_SD
  double score = 0.0;         // the image score the metrics were computed on

  bool operator==(const ScoreRecord&) const = default;
};

struct EntryMetrics {
  std::string name;
  std::size_t num_test = 0;
  double image_auroc = 0.0;
  double image_ap = 0.0;
  double image_f1max = 0.0;
  // Single-branch image AUROCs of the same model: the selected encoder score
  // alone and L_SD alone.
  double encoder_auroc = 0.0;
  double decoder_auroc = 0.0;
  bool has_pixel = false;
  double pixel_auroc = 0.0;
  double pixel_ap = 0.0;
  double pixel_f1max = 0.0;

  bool operator==(const EntryMetrics&) const = default;
};

struct MetricsReport {
  std::string score_variant;
  std::string fusion;
  LossFlags flags;
  std::vector<EntryMetrics> entries;
  EntryMetrics mean;  // arithmetic mean of the entries
  std::vector<ScoreRecord> records;
  std::string config_hash;
  double wall_clock_seconds = 0.0;

  bool operator==(const MetricsReport&) const = default;
};

struct EvalOptions {
  ScoreVariant variant = ScoreVariant::kLastToken;
  distill::Fusion fusion = distill::Fusion::kNoisyOr;
  bool pixel_metrics = true;
  distill::AnomalyMapOptions maps;
};

EvalOptions default_eval_options(const ExperimentConfig& config);

// Encoder score of a record under a variant (L', L'' or L_SE).
double encoder_score(const ScoreRecord& r, ScoreVariant variant);

// Image score: the fused score when both branches are enabled, otherwise the
// enabled branch's own score.
double image_score(const ScoreRecord& r, const LossFlags& flags, const EvalOptions& options);

// Eval-mode scoring of one roster entry's test set.
MetricsReport evaluate_entry(const Model& model, const ExperimentConfig& config,
                             const data::LabeledDataset& dataset, const data::RosterEntry& entry,
                             const EvalOptions& options);

// Concatenates per-entry reports and fills the mean row.
MetricsReport combine_reports(const std::vector<MetricsReport>& parts);
EntryMetrics mean_row(const std::vector<EntryMetrics>& entries);

// Loads output_dir/<entry>/final for every roster entry of `config`.
MetricsReport evaluate(const ExperimentConfig& config, const EvalOptions& options);

}  // namespace dualkd::harness
