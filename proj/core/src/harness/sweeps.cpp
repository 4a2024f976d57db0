#include "dualkd/harness/sweeps.hpp"

#include <cstdio>
#include <fstream>
#include <map>

#include "dualkd/errors.hpp"
#include "dualkd/harness/report.hpp"
#include "dualkd/harness/trainer.hpp"

namespace dualkd::harness {

namespace fs = std::filesystem;

namespace {

std::string flag_tag(const LossFlags& f) {
  std::string tag;
  if (f.use_L_SE) tag += "se_";
  if (f.use_L_SD) tag += "sd_";
  tag += f.use_noisy_or ? "noisyor" : "sum";
  return tag;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string metric_columns(const EntryMetrics& m) {
  std::string out = format_double(m.image_auroc) + "," + format_double(m.image_ap) + "," +
                    format_double(m.image_f1max) + "," + format_double(m.encoder_auroc) + "," +
                    format_double(m.decoder_auroc);
  if (m.has_pixel) {
    out += "," + format_double(m.pixel_auroc) + "," + format_double(m.pixel_ap) + "," +
           format_double(m.pixel_f1max);
  } else {
    out += ",,,";
  }
  return out;
}

std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

constexpr const char* kMetricHeader =
    "image_auroc,image_ap,image_f1max,encoder_auroc,decoder_auroc,pixel_auroc,pixel_ap,"
    "pixel_f1max";

}  // namespace

std::vector<LossFlags> ablation_flags() {
  return {
      {true, false, false, false}, {false, true, false, false}, {true, false, true, false},
      {true, true, false, true},   {true, true, true, false},   {true, true, true, true},
  };
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& base, const Progress& progress) {
  base.validate();
  const RunPlan plan = prepare(base);
  std::vector<AblationRow> rows;
  std::map<std::string, fs::path> trained;
  const auto flags = ablation_flags();
  for (std::size_t i = 0; i < flags.size(); ++i) {
    ExperimentConfig config = base;
    config.flags = flags[i];
    LossFlags train_flags = flags[i];
    train_flags.use_CLS_m = false;  // inference-only switch
    const std::string tag = flag_tag(train_flags);
    config.output_dir = base.output_dir / "ablation" / ("train_" + tag);
    if (!trained.count(tag)) {
      if (progress) progress("ablation: training " + tag);
      ExperimentConfig train_config = config;
      train_config.flags = train_flags;
      for (const data::RosterEntry& e : plan.roster) {
        train_entry(train_config, plan.dataset, e, entry_dir(train_config, e));
      }
      trained[tag] = config.output_dir;
    }
    AblationRow row;
    row.index = i + 1;
    row.flags = flags[i];
    row.variant = config.default_variant();
    row.fusion = config.default_fusion();
    EvalOptions options = default_eval_options(config);
    std::vector<MetricsReport> parts;
    for (const data::RosterEntry& e : plan.roster) {
      Model model(config);
      load_checkpoint(final_stem(entry_dir(config, e)), model, nullptr);
      parts.push_back(evaluate_entry(model, config, plan.dataset, e, options));
    }
    row.report = combine_reports(parts);
    if (progress) {
      progress("ablation: row " + std::to_string(row.index) + " image AUROC " +
               short_number(row.report.mean.image_auroc));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation(const fs::path& dir, const std::vector<AblationRow>& rows) {
  fs::create_directories(dir);
  std::string csv = std::string("row,L_SE,L_SD,CLS_m,noisy_or,score_variant,fusion,") +
                    kMetricHeader + "\n";
  for (const AblationRow& r : rows) {
    const auto mark = [](bool b) { return b ? "1" : "0"; };
    csv += std::to_string(r.index) + "," + mark(r.flags.use_L_SE) + "," +
           mark(r.flags.use_L_SD) + "," + mark(r.flags.use_CLS_m) + "," +
           mark(r.flags.use_noisy_or) + "," + to_string(r.variant) + "," + to_string(r.fusion) +
           "," + metric_columns(r.report.mean) + "\n";
    emit_report(r.report, dir / ("row_" + std::to_string(r.index)));
  }
  write_text(dir / "ablation.csv", csv);
}

std::vector<FewShotRow> run_fewshot(const ExperimentConfig& base,
                                    const std::vector<std::size_t>& shots,
                                    const Progress& progress) {
  std::vector<FewShotRow> rows;
  for (std::size_t k : shots) {
    if (k == 0) throw UsageError("shot counts must be positive");
    ExperimentConfig config = base;
    config.shots = k;
    config.output_dir = base.output_dir / "fewshot" / ("shots_" + std::to_string(k));
    if (progress) progress("fewshot: training with " + std::to_string(k) + " shots");
    const RunPlan plan = prepare(config);
    std::vector<MetricsReport> parts;
    const EvalOptions options = default_eval_options(config);
    for (const data::RosterEntry& e : plan.roster) {
      train_entry(config, plan.dataset, e, entry_dir(config, e));
      Model model(config);
      load_checkpoint(final_stem(entry_dir(config, e)), model, nullptr);
      parts.push_back(evaluate_entry(model, config, plan.dataset, e, options));
    }
    FewShotRow row{k, combine_reports(parts)};
    if (progress) {
      progress("fewshot: " + std::to_string(k) + " shots, mean image AUROC " +
               short_number(row.report.mean.image_auroc));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_fewshot(const fs::path& dir, const std::vector<FewShotRow>& rows) {
  fs::create_directories(dir);
  std::string csv = std::string("shots,") + kMetricHeader + "\n";
  for (const FewShotRow& r : rows) {
    csv += std::to_string(r.shots) + "," + metric_columns(r.report.mean) + "\n";
    emit_report(r.report, dir / ("shots_" + std::to_string(r.shots)));
  }
  write_text(dir / "fewshot.csv", csv);
}

}  // namespace dualkd::harness
