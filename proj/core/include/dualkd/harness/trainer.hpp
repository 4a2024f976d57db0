#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "dualkd/harness/config.hpp"
#include "dualkd/harness/model.hpp"
#include "dualkd/harness/optimizer.hpp"
#include "dualkd/synthdata/splits.hpp"
#include "dualkd/vitnet/pyramid.hpp"

namespace dualkd::harness {

struct LossLogRow {
  std::size_t iteration = 0;  // 1-based step number
  double total = 0.0;
  double L_SE = 0.0;  // batch means; 0 for a disabled branch
  double L_SD = 0.0;
  bool skipped = false;
};

struct TrainOptions {
  // Checkpoint stem to continue from.
  std::filesystem::path resume_from;
  // Stop (with a checkpoint) once this many iterations are done.
  std::optional<std::size_t> stop_after;
  std::function<void(const LossLogRow&)> on_iteration;
};

struct TrainResult {
  std::string entry;
  std::size_t iterations_done = 0;
  std::filesystem::path final_checkpoint;  // stem
  std::vector<LossLogRow> log;
  std::uint64_t teacher_checksum_before = 0;
  std::uint64_t teacher_checksum_after = 0;
  std::size_t skipped_steps = 0;
};

// Dataset, roster and (few-shot reduced) training lists of one config.
struct RunPlan {
  data::LabeledDataset dataset;
  data::Roster roster;
};

RunPlan prepare(const ExperimentConfig& config);

// Frozen-teacher quantities needed by the losses, computed once per
// training sample.
struct TeacherTargets {
  vit::FeaturePyramid tokens;  // class tokens only
  std::array<diff::Tensor, 2> groups;
  diff::Tensor fused;
};

TeacherTargets teacher_targets(const vit::VisionTransformer& teacher, const diff::Tensor& image);

// Files written to run_dir: config.cfg, loss_log.csv, ckpt_<iteration>.{hdr,bin,csv}
// at iteration 0, every train.checkpoint_every iterations and at the end,
// and final.{hdr,bin,csv} when the run completes.
TrainResult train_entry(const ExperimentConfig& config, const data::LabeledDataset& dataset,
                        const data::RosterEntry& entry, const std::filesystem::path& run_dir,
                        const TrainOptions& options = {});

// Trains every roster entry into output_dir/<entry name>.
std::vector<TrainResult> train(const ExperimentConfig& config, const TrainOptions& options = {});

std::filesystem::path entry_dir(const ExperimentConfig& config, const data::RosterEntry& entry);
std::filesystem::path checkpoint_stem(const std::filesystem::path& run_dir, std::size_t iteration);
std::filesystem::path final_stem(const std::filesystem::path& run_dir);

void save_checkpoint(const std::filesystem::path& stem, const Model& model,
                     const StableAdamW* optimizer, std::size_t iteration);
// Restores model weights (and optimizer state when given); returns the
// stored iteration.
std::size_t load_checkpoint(const std::filesystem::path& stem, Model& model,
                            StableAdamW* optimizer);

std::vector<LossLogRow> read_loss_log(const std::filesystem::path& path);
void write_loss_log(const std::filesystem::path& path, const std::vector<LossLogRow>& rows);

}  // namespace dualkd::harness
