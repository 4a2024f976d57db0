#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "dualkd/distill/fusion.hpp"
#include "dualkd/harness/kvfile.hpp"
#include "dualkd/synthdata/dataset.hpp"
#include "dualkd/synthdata/splits.hpp"
#include "dualkd/vitnet/bottleneck.hpp"
#include "dualkd/vitnet/vit.hpp"

namespace dualkd::harness {

// The four ablation switches. use_CLS_m selects the last-token encoder score
// (L') over the mean-prefix score (L''); use_noisy_or selects the Noisy-OR
// objective and fusion over plain sums.
struct LossFlags {
  bool use_L_SE = true;
  bool use_L_SD = true;
  bool use_CLS_m = true;
  bool use_noisy_or = true;

  void validate() const;
  bool operator==(const LossFlags&) const = default;
};

struct OptimizerConfig {
  double lr_encoder = 1e-3;
  double lr_decoder = 1e-3;  // decoder student and bottleneck
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-4;
  double eps = 1e-10;
  bool amsgrad = true;       // maximum-of-second-moment accumulator
  bool update_clamp = true;  // divide lr by max(1, RMS(g^2 / v_hat))

  void validate() const;
  bool operator==(const OptimizerConfig&) const = default;
};

struct TrainConfig {
  std::size_t iterations = 2000;
  std::size_t batch_size = 8;
  std::size_t checkpoint_every = 500;
  std::uint64_t seed = 11;  // batch sampling and dropout masks

  bool operator==(const TrainConfig&) const = default;
};

enum class ScoreVariant { kLastToken, kMeanPrefix, kAllLayers };

std::string to_string(ScoreVariant v);
ScoreVariant score_variant_from_string(const std::string& text);
std::string to_string(distill::Fusion f);
distill::Fusion fusion_from_string(const std::string& text);

struct ExperimentConfig {
  vit::ViTConfig teacher = vit::default_teacher_config();
  vit::ViTConfig encoder = vit::default_encoder_config();
  vit::ViTConfig decoder = vit::default_decoder_config();
  std::filesystem::path teacher_weights;  // optional tensor container stem
  vit::BottleneckConfig bottleneck;
  LossFlags flags;
  OptimizerConfig optimizer;
  TrainConfig train;
  data::DatasetSpec dataset;
  data::SplitMode split_mode = data::SplitMode::kMultiClass;
  std::size_t shots = 0;  // 0 = use every training sample
  std::filesystem::path output_dir = "runs/default";

  // Encoder score and fusion implied by the flags.
  ScoreVariant default_variant() const;
  distill::Fusion default_fusion() const;

  // Checks every section and the cross-network geometry. Throws UsageError.
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

KeyValues to_kv(const ExperimentConfig& config);
// Starts from the defaults and applies every key; unknown keys are errors.
ExperimentConfig from_kv(const KeyValues& kv);
// Applies "key=value" overrides on top of an existing config.
void apply_overrides(ExperimentConfig& config, const KeyValues& overrides);

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& config);

// Dataset-only view used by the synth command ("dataset." keys).
KeyValues dataset_to_kv(const data::DatasetSpec& spec);
data::DatasetSpec dataset_from_kv(const KeyValues& kv);

// 16 hex digits of FNV-1a over the serialized config.
std::string config_hash(const ExperimentConfig& config);

}  // namespace dualkd::harness
