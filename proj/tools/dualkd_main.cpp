// dualkd: synthetic data, training, evaluation and sweeps for the dual-student
// distillation anomaly detector.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dualkd/errors.hpp"
#include "dualkd/harness/config.hpp"
#include "dualkd/harness/evaluate.hpp"
#include "dualkd/harness/report.hpp"
#include "dualkd/harness/sweeps.hpp"
#include "dualkd/harness/trainer.hpp"
#include "dualkd/synthdata/dump.hpp"
#include "dualkd/synthdata/generators.hpp"

namespace fs = std::filesystem;
using namespace dualkd;
using namespace dualkd::harness;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct CommonArgs {
  std::string config;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config, "config file (flat dotted keys)");
  cmd->add_option("-s,--set", args.overrides, "override, key=value (repeatable)");
}

KeyValues parse_overrides(const std::vector<std::string>& items) {
  std::string text;
  for (const std::string& item : items) {
    if (item.find('=') == std::string::npos) throw UsageError("--set expects key=value: " + item);
    text += item + "\n";
  }
  return parse_kv(text, "--set");
}

ExperimentConfig resolve(const CommonArgs& args) {
  ExperimentConfig config = args.config.empty() ? ExperimentConfig{} : load_config(args.config);
  apply_overrides(config, parse_overrides(args.overrides));
  config.validate();
  return config;
}

void say(const std::string& line) { std::cerr << line << std::endl; }

void print_mean(const MetricsReport& r) {
  const EntryMetrics& m = r.mean;
  std::printf("%-14s image_auroc=%.4f ap=%.4f f1max=%.4f encoder=%.4f decoder=%.4f", "mean",
              m.image_auroc, m.image_ap, m.image_f1max, m.encoder_auroc, m.decoder_auroc);
  if (m.has_pixel) std::printf(" pixel_auroc=%.4f", m.pixel_auroc);
  std::printf("\n");
}

int run(int argc, char** argv) {
  CLI::App app{"dual-student distillation anomaly detector"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "write a dataset described by dataset.* keys");
  std::string spec_path, synth_out;
  std::vector<std::string> synth_sets;
  synth->add_option("--spec", spec_path, "dataset spec file");
  synth->add_option("-s,--set", synth_sets, "override, key=value");
  synth->add_option("-o,--out", synth_out, "output directory")->required();

  // config
  auto* show = app.add_subcommand("config", "print the resolved configuration");
  CommonArgs show_args;
  add_common(show, show_args);

  // train
  auto* train_cmd = app.add_subcommand("train", "train every roster entry of a config");
  CommonArgs train_args;
  add_common(train_cmd, train_args);
  std::string resume;
  std::size_t stop_after = 0;
  std::size_t log_every = 100;
  train_cmd->add_option("--resume", resume, "checkpoint stem to continue from");
  train_cmd->add_option("--stop-after", stop_after, "stop after this many iterations");
  train_cmd->add_option("--log-every", log_every, "progress line cadence (0 = silent)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score the test sets with the final checkpoints");
  CommonArgs eval_args;
  add_common(eval_cmd, eval_args);
  std::string variant, fusion, eval_out;
  bool no_pixel = false;
  eval_cmd->add_option("--variant", variant, "last_token | mean_prefix | all_layers");
  eval_cmd->add_option("--fusion", fusion, "noisy_or | plain_sum");
  eval_cmd->add_option("-o,--out", eval_out, "report directory (default <output.dir>/eval)");
  eval_cmd->add_flag("--no-pixel", no_pixel, "skip anomaly maps and pixel metrics");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "train and evaluate the six ablation rows");
  CommonArgs ablate_args;
  add_common(ablate, ablate_args);

  // fewshot
  auto* fewshot = app.add_subcommand("fewshot", "train and evaluate over shot counts");
  CommonArgs fewshot_args;
  add_common(fewshot, fewshot_args);
  std::vector<std::size_t> shots = kDefaultShots;
  fewshot->add_option("--shots", shots, "shot counts")->delimiter(',');

  // report
  auto* report_cmd = app.add_subcommand("report", "render a report.json to CSV and histograms");
  std::string report_in, report_out;
  report_cmd->add_option("-i,--input", report_in, "report.json")->required();
  report_cmd->add_option("-o,--out", report_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (*synth) {
    KeyValues kv = spec_path.empty() ? KeyValues{} : read_kv_file(spec_path);
    for (const auto& [k, v] : parse_overrides(synth_sets)) kv[k] = v;
    const data::DatasetSpec spec = dataset_from_kv(kv);
    const data::LabeledDataset ds = data::generate(spec);
    for (const std::string& w : ds.warnings) say("warning: " + w);
    data::write_dataset_dump(synth_out, ds);
    std::printf("wrote %zu samples to %s\n", ds.samples.size(), synth_out.c_str());
    return kOk;
  }
  if (*show) {
    std::fputs(format_kv(to_kv(resolve(show_args))).c_str(), stdout);
    return kOk;
  }
  if (*train_cmd) {
    const ExperimentConfig config = resolve(train_args);
    TrainOptions options;
    if (!resume.empty()) options.resume_from = resume;
    if (train_cmd->count("--stop-after")) options.stop_after = stop_after;
    if (log_every > 0) {
      options.on_iteration = [log_every](const LossLogRow& r) {
        if (r.iteration % log_every == 0) {
          char buf[160];
          std::snprintf(buf, sizeof buf, "iter %6zu  loss %.6f  L_SE %.6f  L_SD %.6f",
                        r.iteration, r.total, r.L_SE, r.L_SD);
          say(buf);
        }
      };
    }
    for (const TrainResult& r : train(config, options)) {
      std::printf("%s: %zu iterations, checkpoint %s, skipped steps %zu\n", r.entry.c_str(),
                  r.iterations_done, r.final_checkpoint.string().c_str(), r.skipped_steps);
      if (r.teacher_checksum_before != r.teacher_checksum_after) {
        throw NumericError("teacher parameters changed during training");
      }
    }
    return kOk;
  }
  if (*eval_cmd) {
    const ExperimentConfig config = resolve(eval_args);
    EvalOptions options = default_eval_options(config);
    if (!variant.empty()) options.variant = score_variant_from_string(variant);
    if (!fusion.empty()) options.fusion = fusion_from_string(fusion);
    options.pixel_metrics = !no_pixel;
    const MetricsReport report = evaluate(config, options);
    const fs::path out = eval_out.empty() ? config.output_dir / "eval" : fs::path(eval_out);
    emit_report(report, out);
    for (const EntryMetrics& m : report.entries) {
      std::printf("%-14s image_auroc=%.4f\n", m.name.c_str(), m.image_auroc);
    }
    print_mean(report);
    return kOk;
  }
  if (*ablate) {
    const ExperimentConfig config = resolve(ablate_args);
    const auto rows = run_ablation(config, say);
    write_ablation(config.output_dir / "ablation", rows);
    std::printf("row L_SE L_SD CLS_m noisy_or  image_auroc\n");
    for (const AblationRow& r : rows) {
      std::printf("%3zu %4d %4d %5d %8d  %.4f\n", r.index, r.flags.use_L_SE, r.flags.use_L_SD,
                  r.flags.use_CLS_m, r.flags.use_noisy_or, r.report.mean.image_auroc);
    }
    return kOk;
  }
  if (*fewshot) {
    const ExperimentConfig config = resolve(fewshot_args);
    const auto rows = run_fewshot(config, shots, say);
    write_fewshot(config.output_dir / "fewshot", rows);
    for (const FewShotRow& r : rows) {
      std::printf("shots %zu  mean image_auroc %.4f\n", r.shots, r.report.mean.image_auroc);
    }
    return kOk;
  }
  if (*report_cmd) {
    const MetricsReport report = read_report(report_in);
    emit_report(report, report_out);
    print_mean(report);
    return kOk;
  }
  return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const DomainError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  }
}
