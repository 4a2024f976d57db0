#include "dualkd/harness/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "dualkd/distill/fusion.hpp"
#include "dualkd/distill/losses.hpp"
#include "dualkd/errors.hpp"
#include "dualkd/synthdata/generators.hpp"

namespace dualkd::harness {

namespace fs = std::filesystem;
using diff::NamedTensor;
using diff::Rng;

namespace {

constexpr const char* kIterationKey = "state.iteration";

std::string format_row(const LossLogRow& r) {
  return std::to_string(r.iteration) + "," + format_double(r.total) + "," +
         format_double(r.L_SE) + "," + format_double(r.L_SD) + "," + (r.skipped ? "1" : "0");
}

}  // namespace

RunPlan prepare(const ExperimentConfig& config) {
  config.validate();
  RunPlan plan;
  plan.dataset = data::generate(config.dataset);
  plan.roster =
      data::make_splits(plan.dataset, config.split_mode, config.dataset.resolved_normal_ids());
  if (config.shots > 0) {
    for (data::RosterEntry& e : plan.roster) {
      e.train = data::few_shot_subsample(plan.dataset, e.train, config.shots, config.train.seed);
    }
  }
  return plan;
}

TeacherTargets teacher_targets(const vit::VisionTransformer& teacher, const Tensor& image) {
  diff::NoGradGuard no_grad;
  const vit::FeaturePyramid p = teacher.forward_image(image);
  TeacherTargets t;
  t.tokens.class_tokens = p.class_tokens;
  t.tokens.final_class_token = p.final_class_token;
  t.groups = {vit::group_features(p, vit::PyramidRole::kTeacher, 1),
              vit::group_features(p, vit::PyramidRole::kTeacher, 2)};
  t.fused = vit::fuse_teacher_mid(p);
  return t;
}

fs::path entry_dir(const ExperimentConfig& config, const data::RosterEntry& entry) {
  return config.output_dir / entry.name;
}

fs::path checkpoint_stem(const fs::path& run_dir, std::size_t iteration) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_%06zu", iteration);
  return run_dir / buf;
}

fs::path final_stem(const fs::path& run_dir) { return run_dir / "final"; }

void save_checkpoint(const fs::path& stem, const Model& model, const StableAdamW* optimizer,
                     std::size_t iteration) {
  std::vector<NamedTensor> entries;
  entries.push_back({kIterationKey, Tensor::scalar(static_cast<double>(iteration))});
  const auto params = model.all_parameters();
  entries.insert(entries.end(), params.begin(), params.end());
  if (optimizer) {
    const auto state = optimizer->state();
    entries.insert(entries.end(), state.begin(), state.end());
  }
  diff::save_tensors(stem, entries);
  fs::path manifest = stem;
  manifest += ".csv";
  write_manifest(manifest, params);
}

std::size_t load_checkpoint(const fs::path& stem, Model& model, StableAdamW* optimizer) {
  const std::vector<NamedTensor> entries = diff::load_tensors(stem);
  std::size_t iteration = 0;
  bool found = false;
  for (const NamedTensor& e : entries) {
    if (e.name == kIterationKey) {
      iteration = static_cast<std::size_t>(e.tensor.item());
      found = true;
    }
  }
  if (!found) throw DataError("checkpoint " + stem.string() + " lacks " + kIterationKey);
  vit::assign_params(model.all_parameters(), entries);
  if (optimizer) optimizer->load_state(entries);
  return iteration;
}

std::vector<LossLogRow> read_loss_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read loss log " + path.string());
  std::vector<LossLogRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string f[5];
    for (auto& x : f) std::getline(ss, x, ',');
    LossLogRow r;
    r.iteration = static_cast<std::size_t>(parse_u64("iteration", f[0]));
    r.total = parse_double("total", f[1]);
    r.L_SE = parse_double("L_SE", f[2]);
    r.L_SD = parse_double("L_SD", f[3]);
    r.skipped = f[4] == "1";
    rows.push_back(r);
  }
  return rows;
}

void write_loss_log(const fs::path& path, const std::vector<LossLogRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "iteration,total,L_SE,L_SD,skipped\n";
  for (const LossLogRow& r : rows) out << format_row(r) << '\n';
}

TrainResult train_entry(const ExperimentConfig& config, const data::LabeledDataset& dataset,
                        const data::RosterEntry& entry, const fs::path& run_dir,
                        const TrainOptions& options) {
  config.validate();
  if (entry.train.empty()) throw DataError("roster entry " + entry.name + " has no training data");
  fs::create_directories(run_dir);
  save_config(run_dir / "config.cfg", config);

  Model model(config);
  TrainResult result;
  result.entry = entry.name;
  result.teacher_checksum_before = model.teacher_checksum();

  const LossFlags& flags = config.flags;
  std::vector<ParamGroup> groups;
  if (flags.use_L_SE) groups.push_back({model.encoder_parameters(), config.optimizer.lr_encoder});
  if (flags.use_L_SD) groups.push_back({model.decoder_parameters(), config.optimizer.lr_decoder});
  StableAdamW optimizer(groups, config.optimizer);

  std::vector<Tensor> images;
  std::vector<TeacherTargets> targets;
  std::vector<int> labels;
  for (std::size_t idx : entry.train) {
    const data::Sample& s = dataset.samples.at(idx);
    images.push_back(s.image.to_tensor());
    targets.push_back(teacher_targets(model.teacher, images.back()));
    labels.push_back(s.label);
  }

  std::size_t start = 0;
  if (!options.resume_from.empty()) {
    start = load_checkpoint(options.resume_from, model, &optimizer);
    const fs::path old_log = options.resume_from.parent_path() / "loss_log.csv";
    if (fs::exists(old_log)) {
      for (const LossLogRow& r : read_loss_log(old_log)) {
        if (r.iteration <= start) result.log.push_back(r);
      }
    }
  } else {
    save_checkpoint(checkpoint_stem(run_dir, 0), model, &optimizer, 0);
  }

  const std::size_t total_iterations = config.train.iterations;
  const std::size_t end =
      options.stop_after ? std::min(*options.stop_after, total_iterations) : total_iterations;
  const distill::Objective objective =
      flags.use_noisy_or ? distill::Objective::kNoisyOr : distill::Objective::kPlainSum;
  const std::size_t n = images.size();

  for (std::size_t it = start; it < end; ++it) {
    Rng rng = Rng(config.train.seed).fork(it);
    std::vector<distill::LossTerm> terms;
    double se_sum = 0.0;
    double sd_sum = 0.0;
    for (std::size_t b = 0; b < config.train.batch_size; ++b) {
      const std::size_t pos = static_cast<std::size_t>(rng.below(n));
      distill::LossTerm term;
      term.y = labels[pos];
      if (flags.use_L_SD) {
        const Tensor noisy = model.bottleneck.forward(targets[pos].fused, true, rng);
        const vit::FeaturePyramid dec = model.decoder.forward_features(noisy);
        term.L_SD = distill::decoder_loss(targets[pos].groups, dec);
        sd_sum += term.L_SD.item();
      }
      if (flags.use_L_SE) {
        const vit::FeaturePyramid enc =
            model.encoder.forward_image(images[pos], vit::ForwardOptions{false});
        term.L_SE = distill::encoder_loss(targets[pos].tokens, enc);
        se_sum += term.L_SE.item();
      }
      terms.push_back(std::move(term));
    }
    Tensor loss = distill::total_loss(terms, objective);
    const double bs = static_cast<double>(config.train.batch_size);
    LossLogRow row{it + 1, loss.item(), se_sum / bs, sd_sum / bs, false};
    if (!std::isfinite(row.total)) {
      result.log.push_back(row);
      write_loss_log(run_dir / "loss_log.csv", result.log);
      throw NumericError("non-finite training loss at iteration " + std::to_string(it + 1) +
                         " (L_SE mean " + format_double(row.L_SE) + ", L_SD mean " +
                         format_double(row.L_SD) + ")");
    }
    loss.backward();
    row.skipped = !optimizer.step();
    optimizer.zero_grad();
    result.log.push_back(row);
    if (options.on_iteration) options.on_iteration(row);
    const std::size_t done = it + 1;
    if (done % config.train.checkpoint_every == 0 || done == end) {
      save_checkpoint(checkpoint_stem(run_dir, done), model, &optimizer, done);
    }
  }

  result.iterations_done = std::max(start, end);
  if (end == total_iterations) {
    result.final_checkpoint = final_stem(run_dir);
    save_checkpoint(result.final_checkpoint, model, &optimizer, end);
  } else {
    result.final_checkpoint = checkpoint_stem(run_dir, end);
  }
  write_loss_log(run_dir / "loss_log.csv", result.log);
  result.skipped_steps = optimizer.skipped();
  result.teacher_checksum_after = model.teacher_checksum();
  return result;
}

std::vector<TrainResult> train(const ExperimentConfig& config, const TrainOptions& options) {
  const RunPlan plan = prepare(config);
  if (!options.resume_from.empty() && plan.roster.size() != 1) {
    throw UsageError("resume needs a config with exactly one roster entry");
  }
  std::vector<TrainResult> out;
  for (const data::RosterEntry& e : plan.roster) {
    out.push_back(train_entry(config, plan.dataset, e, entry_dir(config, e), options));
  }
  return out;
}

}  // namespace dualkd::harness
