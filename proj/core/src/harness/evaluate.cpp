#include "dualkd/harness/evaluate.hpp"

#include <chrono>

#include "dualkd/distill/losses.hpp"
#include "dualkd/errors.hpp"
#include "dualkd/harness/trainer.hpp"
#include "dualkd/metrics/metrics.hpp"

namespace dualkd::harness {

namespace fs = std::filesystem;

std::vector<int> to_metric_labels(std::span<const int> normality_labels) {
  std::vector<int> out;
  out.reserve(normality_labels.size());
  for (int y : normality_labels) {
    if (y != data::kNormal && y != data::kAnomalous) throw DataError("labels must be 0 or 1");
    out.push_back(y == data::kNormal ? 0 : 1);
  }
  return out;
}

EvalOptions default_eval_options(const ExperimentConfig& config) {
  EvalOptions o;
  o.variant = config.default_variant();
  o.fusion = config.default_fusion();
  return o;
}

double encoder_score(const ScoreRecord& r, ScoreVariant variant) {
  switch (variant) {
    case ScoreVariant::kLastToken:
      return r.L_prime;
    case ScoreVariant::kMeanPrefix:
      return r.L_doubleprime;
    case ScoreVariant::kAllLayers:
      return r.L_SE;
  }
  return r.L_prime;
}

double image_score(const ScoreRecord& r, const LossFlags& flags, const EvalOptions& options) {
  const double e = encoder_score(r, options.variant);
  if (flags.use_L_SE && flags.use_L_SD) return distill::anomaly_score(e, r.L_SD, options.fusion);
  return flags.use_L_SE ? e : r.L_SD;
}

MetricsReport evaluate_entry(const Model& model, const ExperimentConfig& config,
                             const data::LabeledDataset& dataset, const data::RosterEntry& entry,
                             const EvalOptions& options) {
  if (entry.test.empty()) throw DataError("roster entry " + entry.name + " has an empty test set");
  const auto t0 = std::chrono::steady_clock::now();
  diff::NoGradGuard no_grad;
  diff::Rng unused(0);

  MetricsReport report;
  report.score_variant = to_string(options.variant);
  report.fusion = to_string(options.fusion);
  report.flags = config.flags;
  report.config_hash = config_hash(config);

  std::vector<diff::Tensor> maps;
  std::vector<data::Mask> masks;
  const bool want_pixels = options.pixel_metrics && [&] {
    for (std::size_t k = 0; k < entry.test.size(); ++k) {
      if (dataset.samples[entry.test[k]].mask) return true;
    }
    return false;
  }();

  for (std::size_t k = 0; k < entry.test.size(); ++k) {
    const data::Sample& s = dataset.samples.at(entry.test[k]);
    const diff::Tensor image = s.image.to_tensor();
    const vit::FeaturePyramid t = model.teacher.forward_image(image);
    const vit::FeaturePyramid e = model.encoder.forward_image(image, vit::ForwardOptions{false});
    const diff::Tensor noisy = model.bottleneck.forward(vit::fuse_teacher_mid(t), false, unused);
    const vit::FeaturePyramid d = model.decoder.forward_features(noisy);
    const distill::BranchLosses b = distill::branch_losses(t, e, d);

    ScoreRecord r;
    r.id = s.id;
    r.entry = entry.name;
    r.split = s.split;
    r.label = entry.test_labels[k];
    r.L_SE = b.L_SE;
    r.L_prime = b.L_prime;
    r.L_doubleprime = b.L_doubleprime;
    r.L_SD = b.L_SD;
    r.AC_noisy_or = distill::anomaly_score(b.L_prime, b.L_SD, distill::Fusion::kNoisyOr);
    r.AC_plain_sum = distill::anomaly_score(b.L_prime, b.L_SD, distill::Fusion::kPlainSum);
    r.score = image_score(r, config.flags, options);
    report.records.push_back(r);

    const bool normal = r.label == data::kNormal;
    if (want_pixels && (normal || s.mask)) {
      maps.push_back(distill::anomaly_map(t, d, s.image.height, options.maps));
      masks.push_back(normal ? data::Mask(s.image.height, s.image.width) : *s.mask);
    }
  }

  std::vector<int> normality;
  metrics::ScoreSet fused, enc, dec;
  for (const ScoreRecord& r : report.records) {
    normality.push_back(r.label);
    fused.scores.push_back(r.score);
    enc.scores.push_back(encoder_score(r, options.variant));
    dec.scores.push_back(r.L_SD);
  }
  fused.labels = enc.labels = dec.labels = to_metric_labels(normality);

  EntryMetrics m;
  m.name = entry.name;
  m.num_test = report.records.size();
  m.image_auroc = metrics::auroc(fused);
  m.image_ap = metrics::average_precision(fused);
  m.image_f1max = metrics::f1_max(fused);
  m.encoder_auroc = metrics::auroc(enc);
  m.decoder_auroc = metrics::auroc(dec);
  if (!maps.empty()) {
    const metrics::PixelMetrics p = metrics::pixel_metrics(maps, masks);
    m.has_pixel = true;
    m.pixel_auroc = p.auroc;
    m.pixel_ap = p.average_precision;
    m.pixel_f1max = p.f1_max;
  }
  report.entries.push_back(m);
  report.mean = mean_row(report.entries);
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

EntryMetrics mean_row(const std::vector<EntryMetrics>& entries) {
  EntryMetrics mean;
  mean.name = "mean";
  if (entries.empty()) return mean;
  const double n = static_cast<double>(entries.size());
  std::size_t pixel_count = 0;
  for (const EntryMetrics& e : entries) {
    mean.num_test += e.num_test;
    mean.image_auroc += e.image_auroc;
    mean.image_ap += e.image_ap;
    mean.image_f1max += e.image_f1max;
    mean.encoder_auroc += e.encoder_auroc;
    mean.decoder_auroc += e.decoder_auroc;
    if (e.has_pixel) {
      ++pixel_count;
      mean.pixel_auroc += e.pixel_auroc;
      mean.pixel_ap += e.pixel_ap;
      mean.pixel_f1max += e.pixel_f1max;
    }
  }
  mean.image_auroc /= n;
  mean.image_ap /= n;
  mean.image_f1max /= n;
  mean.encoder_auroc /= n;
  mean.decoder_auroc /= n;
  if (pixel_count > 0) {
    const double p = static_cast<double>(pixel_count);
    mean.has_pixel = true;
    mean.pixel_auroc /= p;
    mean.pixel_ap /= p;
    mean.pixel_f1max /= p;
  }
  return mean;
}

MetricsReport combine_reports(const std::vector<MetricsReport>& parts) {
  if (parts.empty()) throw DataError("no reports to combine");
  MetricsReport out;
  out.score_variant = parts.front().score_variant;
  out.fusion = parts.front().fusion;
  out.flags = parts.front().flags;
  out.config_hash = parts.front().config_hash;
  for (const MetricsReport& p : parts) {
    out.entries.insert(out.entries.end(), p.entries.begin(), p.entries.end());
    out.records.insert(out.records.end(), p.records.begin(), p.records.end());
    out.wall_clock_seconds += p.wall_clock_seconds;
  }
  out.mean = mean_row(out.entries);
  return out;
}

MetricsReport evaluate(const ExperimentConfig& config, const EvalOptions& options) {
  const RunPlan plan = prepare(config);
  std::vector<MetricsReport> parts;
  for (const data::RosterEntry& e : plan.roster) {
    const fs::path stem = final_stem(entry_dir(config, e));
    if (!fs::exists(diff::header_path(stem))) {
      throw DataError("no final checkpoint at " + stem.string() + " (train first)");
    }
    Model model(config);
    load_checkpoint(stem, model, nullptr);
    parts.push_back(evaluate_entry(model, config, plan.dataset, e, options));
  }
  return combine_reports(parts);
}

}  // namespace dualkd::harness
