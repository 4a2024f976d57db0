// One PASS/FAIL line per acceptance criterion. Exit status is non-zero when
// any criterion fails.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dualkd/diffcore/ops.hpp"
#include "dualkd/diffcore/serialize.hpp"
#include "dualkd/distill/fusion.hpp"
#include "dualkd/distill/losses.hpp"
#include "dualkd/harness/config.hpp"
#include "dualkd/harness/evaluate.hpp"
#include "dualkd/harness/model.hpp"
#include "dualkd/harness/report.hpp"
#include "dualkd/harness/sweeps.hpp"
#include "dualkd/harness/trainer.hpp"
#include "dualkd/metrics/metrics.hpp"
#include "dualkd/synthdata/generators.hpp"
#include "oracles.hpp"

namespace d = dualkd::diff;
namespace ds = dualkd::distill;
namespace dd = dualkd::data;
namespace h = dualkd::harness;
namespace fs = std::filesystem;
using d::Tensor;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void report_line(int id, const std::string& name, const Outcome& o) {
  std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++g_failures;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// report.json minus the timing field, which is exempt from byte equality.
std::string report_without_timing(const fs::path& p) {
  static const std::regex timing("\\n *\"wall_clock_seconds\": [^\\n]*");
  return std::regex_replace(slurp(p), timing, "");
}

// Small network geometry shared by the gradient, gating and sweep checks.
h::ExperimentConfig toy_config(const fs::path& out) {
  h::ExperimentConfig c;
  for (auto* v : {&c.teacher, &c.encoder, &c.decoder}) {
    v->image_size = 8;
    v->patch_size = 4;
    v->embed_dim = 8;
    v->num_heads = 2;
    v->mlp_ratio = 2.0;
  }
  c.teacher.depth = 10;
  c.encoder.depth = 10;
  c.decoder.depth = 8;
  c.dataset.num_classes = 2;
  c.dataset.train_per_class = 25;
  c.dataset.test_normal_per_class = 4;
  c.dataset.test_anomalous_per_class = 4;
  c.dataset.image_size = 8;
  c.dataset.defect.size_min = 2;
  c.dataset.defect.size_max = 4;
  c.train.iterations = 20;
  c.train.batch_size = 4;
  c.train.checkpoint_every = 10;
  c.output_dir = out;
  return c;
}

// The default networks and generators at the iteration budget used for the
// synthetic benchmarks.
h::ExperimentConfig bench_config(dd::DatasetKind kind, const fs::path& out) {
  h::ExperimentConfig c;
  c.dataset.kind = kind;
  c.train.iterations = 300;
  c.train.checkpoint_every = 100000;
  c.output_dir = out;
  return c;
}

// ---- per-sample loss assembly shared by criteria 1 and 3 ----------------

struct SampleLosses {
  Tensor L_SE;
  Tensor L_SD;
};

SampleLosses sample_losses(const h::Model& model, const Tensor& image, std::uint64_t dropout_seed) {
  const h::TeacherTargets t = h::teacher_targets(model.teacher, image);
  d::Rng rng(dropout_seed);
  const Tensor z = model.bottleneck.forward(t.fused, true, rng);
  const auto dec = model.decoder.forward_features(z);
  const auto enc = model.encoder.forward_image(image, {.patch_features = false});
  return {ds::encoder_loss(t.tokens, enc), ds::decoder_loss(t.groups, dec)};
}

std::vector<Tensor> trainable(const h::Model& model) {
  std::vector<Tensor> out;
  for (const auto& p : model.encoder_parameters()) out.push_back(p.tensor);
  for (const auto& p : model.decoder_parameters()) out.push_back(p.tensor);
  return out;
}

// ---- criterion 1 --------------------------------------------------------

Tensor contract(const Tensor& out, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  return d::sum(d::mul(out, oracle::random_tensor(gen, out.shape(), -1.0, 1.0, false)));
}

Outcome gradient_suite(const fs::path& work) {
  const auto t0 = Clock::now();
  using Fn = std::function<Tensor(const std::vector<Tensor>&)>;
  std::size_t cases = 0, failed = 0, coords = 0, nonzero = 0;
  double worst = 0.0;
  const auto run = [&](const Fn& fn, const std::vector<Tensor>& in,
                       const std::vector<oracle::Coordinate>* at = nullptr) {
    const oracle::GradCheck r =
        at ? oracle::check_gradients_at(fn, in, *at) : oracle::check_gradients(fn, in);
    ++cases;
    coords += r.checked;
    nonzero += r.nonzero;
    failed += r.failures > 0 ? 1 : 0;
    worst = std::max(worst, r.worst_rel);
  };
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    std::mt19937_64 gen(seed);
    const Tensor a = oracle::random_tensor(gen, {3, 4});
    const Tensor b = oracle::random_tensor(gen, {3, 4});
    const Tensor row = oracle::random_tensor(gen, {4});
    const Tensor m = oracle::random_tensor(gen, {4, 2});
    const Tensor pos = oracle::random_tensor(gen, {3, 4}, 0.5, 2.0);
    const Tensor g = oracle::random_tensor(gen, {4}, 0.5, 1.5);
    const auto c = [seed](const Tensor& t) { return contract(t, seed + 100); };
    run([&](const auto& v) { return c(d::add(v[0], v[1])); }, {a, row});
    run([&](const auto& v) { return c(d::sub(v[0], v[1])); }, {a, b});
    run([&](const auto& v) { return c(d::mul(v[0], v[1])); }, {a, row});
    run([&](const auto& v) { return c(d::sigmoid(v[0])); }, {a});
    run([&](const auto& v) { return c(d::log(v[0])); }, {pos});
    run([&](const auto& v) { return c(d::gelu(v[0])); }, {a});
    run([&](const auto& v) { return c(d::exp(v[0])); }, {a});
    run([&](const auto& v) { return c(d::scale(v[0], -1.7)); }, {a});
    run([&](const auto& v) { return c(d::add_scalar(v[0], 0.3)); }, {a});
    run([&](const auto& v) { return c(d::clamp(v[0], -2.0, 2.0)); }, {a});
    run([&](const auto& v) { return c(d::matmul(v[0], v[1])); }, {a, m});
    run([&](const auto& v) { return c(d::transpose(v[0])); }, {a});
    run([&](const auto& v) { return c(d::reshape(v[0], {2, 6})); }, {a});
    run([&](const auto& v) { return c(d::softmax_rows(v[0])); }, {a});
    run([&](const auto& v) { return c(d::layer_norm(v[0], v[1], v[2])); }, {a, g, row});
    run([&](const auto& v) { return c(d::reduce(d::Reduce::kSum, v[0], {0})); }, {a});
    run([&](const auto& v) { return c(d::reduce(d::Reduce::kMean, v[0], {1})); }, {a});
    run([&](const auto& v) { return d::mean(d::mul(v[0], v[0])); }, {a});
    run([&](const auto& v) { return d::cosine_similarity(v[0], v[1]); }, {a, b});
    run([&](const auto& v) { return d::squared_distance(v[0], v[1]); }, {a, b});
    run(
        [&](const auto& v) {
          d::Rng rng(seed);
          return c(d::dropout(v[0], 0.3, true, rng));
        },
        {a});
    run([&](const auto& v) { return c(d::rows(v[0], 1, 2)); }, {a});
    run([&](const auto& v) { return c(d::cols(v[0], 1, 2)); }, {a});
    run([&](const auto& v) { return c(d::concat_rows({v[0], v[1]})); }, {a, b});
    run([&](const auto& v) { return c(d::concat_cols({v[0], v[1]})); }, {a, b});
    run([&](const auto& v) { return c(d::average({v[0], v[1], v[0]})); }, {a, b});
  }

  // End-to-end L_total on the toy config: a normal and an anomalous sample,
  // Noisy-OR objective, fixed dropout masks, sampled parameter coordinates.
  const h::ExperimentConfig cfg = toy_config(work / "grad");
  const h::Model model(cfg);
  const dd::LabeledDataset data = dd::generate(cfg.dataset);
  const std::vector<Tensor> params = trainable(model);
  for (std::uint64_t trial = 0; trial < 8; ++trial) {
    const Tensor img0 = data.samples[2 * trial].image.to_tensor();
    const Tensor img1 = data.samples[2 * trial + 1].image.to_tensor();
    const Fn fn = [&](const std::vector<Tensor>&) {
      const SampleLosses s0 = sample_losses(model, img0, 10 + trial);
      const SampleLosses s1 = sample_losses(model, img1, 20 + trial);
      const std::vector<ds::LossTerm> batch = {{s0.L_SE, s0.L_SD, 1}, {s1.L_SE, s1.L_SD, 0}};
      return ds::total_loss(batch, ds::Objective::kNoisyOr);
    };
    std::mt19937_64 gen(trial);
    std::vector<oracle::Coordinate> at;
    for (int k = 0; k < 40; ++k) {
      const std::size_t t = std::uniform_int_distribution<std::size_t>(0, params.size() - 1)(gen);
      const std::size_t i =
          std::uniform_int_distribution<std::size_t>(0, params[t].numel() - 1)(gen);
      at.push_back({t, i});
    }
    run(fn, params, &at);
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = failed == 0 && cases >= 200 && secs < 120.0;
  o.detail = fmt("%zu cases (%zu coordinates, %zu with |grad| > 1e-6), %zu failing, worst rel "
                 "err %.2e, %.1f s [need 0 failing at rel 1e-4, >= 200 cases, < 120 s]",
                 cases, coords, nonzero, failed, worst, secs);
  return o;
}

// ---- criterion 2 --------------------------------------------------------

Outcome noisy_or_identities() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double a = u(gen), b = u(gen);
    const ds::FusionResult r = ds::noisy_or_probability(a, b);
    const double sa = static_cast<double>(oracle::logistic(a));
    const double sb = static_cast<double>(oracle::logistic(b));
    worst = std::max({worst, std::abs(r.P - (1.0 - sa * sb)),
                      std::abs(r.P - (1.0 - (1.0 - r.P_SE) * (1.0 - r.P_SD))),
                      std::abs(r.AC - (1.0 - r.P)), std::abs(sa - (1.0 - r.P_SE)),
                      std::abs(sb - (1.0 - r.P_SD))});
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && secs < 10.0,
          fmt("10000 loss pairs, max deviation %.2e, %.2f s [need <= 1e-12]", worst, secs)};
}

// ---- criterion 3 --------------------------------------------------------

Outcome gating(const fs::path& work) {
  const h::ExperimentConfig cfg = toy_config(work / "gate");
  const h::Model model(cfg);
  const dd::LabeledDataset data = dd::generate(cfg.dataset);
  std::vector<const dd::Sample*> normals;
  for (const auto& s : data.samples) {
    if (s.split == dd::Split::kTrain && s.label == dd::kNormal) normals.push_back(&s);
  }
  const std::vector<Tensor> enc = [&] {
    std::vector<Tensor> v;
    for (const auto& p : model.encoder_parameters()) v.push_back(p.tensor);
    return v;
  }();
  const std::vector<Tensor> dec = [&] {
    std::vector<Tensor> v;
    for (const auto& p : model.decoder_parameters()) v.push_back(p.tensor);
    return v;
  }();
  std::mt19937_64 gen(3);
  const auto pick = [&](const std::vector<Tensor>& group) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, group.size() - 1)(gen);
    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, group[t].numel() - 1)(gen);
    return std::pair{group[t], i};
  };
  const double step = 1e-5;
  std::size_t checks = 0, failures = 0, nonzero = 0;
  double worst = 0.0;
  const auto compare = [&](double autodiff, double predicted) {
    ++checks;
    if (std::abs(predicted) > 1e-6) ++nonzero;
    const double scale = std::max({std::abs(autodiff), std::abs(predicted), 1e-6});
    if (!oracle::grad_close(autodiff, predicted)) ++failures;
    worst = std::max(worst, std::abs(autodiff - predicted) / scale);
  };
  for (std::size_t n = 0; n < 50; ++n) {
    const Tensor image = normals[n % normals.size()]->image.to_tensor();
    const std::uint64_t seed = 1000 + n;
    for (Tensor& p : trainable(model)) p.clear_grad();
    const SampleLosses s = sample_losses(model, image, seed);
    const std::vector<ds::LossTerm> batch = {{s.L_SE, s.L_SD, 1}};
    Tensor total = ds::total_loss(batch, ds::Objective::kNoisyOr);
    total.backward();
    const ds::FusionResult r = ds::noisy_or_probability(s.L_SE.item(), s.L_SD.item());

    // encoder coordinate: dP_SE/dtheta by central differences
    auto [te, ie] = pick(enc);
    const double g_enc = te.has_grad() ? te.grad()[ie] : 0.0;
    const auto p_se_at = [&](double delta) {
      d::NoGradGuard guard;
      const double orig = te.values()[ie];
      te.mutable_values()[ie] = orig + delta;
      const double L = sample_losses(model, image, seed).L_SE.item();
      te.mutable_values()[ie] = orig;
      return 1.0 / (1.0 + std::exp(L));
    };
    const double dpse = (p_se_at(step) - p_se_at(-step)) / (2.0 * step);
    compare(g_enc, -ds::gate_coefficient(r.P_SD, r.P) * dpse);

    auto [td, id] = pick(dec);
    const double g_dec = td.has_grad() ? td.grad()[id] : 0.0;
    const auto p_sd_at = [&](double delta) {
      d::NoGradGuard guard;
      const double orig = td.values()[id];
      td.mutable_values()[id] = orig + delta;
      const double L = sample_losses(model, image, seed).L_SD.item();
      td.mutable_values()[id] = orig;
      return 1.0 / (1.0 + std::exp(L));
    };
    const double dpsd = (p_sd_at(step) - p_sd_at(-step)) / (2.0 * step);
    compare(g_dec, -ds::gate_coefficient(r.P_SE, r.P) * dpsd);
  }
  return {failures == 0 && checks >= 100,
          fmt("50 normal samples, %zu encoder+decoder coordinates (%zu with |grad| > 1e-6), %zu "
              "failing, worst rel err %.2e [need rel 1e-4]",
              checks, nonzero, failures, worst)};
}

// ---- criterion 4 --------------------------------------------------------

using dualkd::vit::FeaturePyramid;

FeaturePyramid random_pyramid(std::mt19937_64& gen, std::size_t depth, bool cls) {
  FeaturePyramid p;
  for (std::size_t j = 0; j < depth; ++j) {
    p.patch_features.push_back(oracle::random_tensor(gen, {4, 3, 3}, -1.0, 1.0, false));
    if (cls) p.class_tokens.push_back(oracle::random_tensor(gen, {4}, -1.0, 1.0, false));
  }
  if (cls) p.final_class_token = oracle::random_tensor(gen, {4}, -1.0, 1.0, false);
  return p;
}

long double direct_cos_term(const FeaturePyramid& t, std::size_t t0, const FeaturePyramid& s,
                            std::size_t s0) {
  const std::size_t n = t.patch_features[0].numel();
  long double dot = 0, tt = 0, ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    long double a = 0, b = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      a += t.patch_features[t0 + j - 1].at(i);
      b += s.patch_features[s0 + j - 1].at(i);
    }
    a /= 4;
    b /= 4;
    dot += a * b;
    tt += a * a;
    ss += b * b;
  }
  return 1.0L - dot / (std::sqrt(tt) * std::sqrt(ss));
}

long double direct_sqdist(const Tensor& a, const Tensor& b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const long double diff = static_cast<long double>(a.at(i)) - b.at(i);
    s += diff * diff;
  }
  return s;
}

Outcome loss_oracles() {
  std::mt19937_64 gen(4);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const FeaturePyramid t = random_pyramid(gen, 12, true);
    const FeaturePyramid e = random_pyramid(gen, 12, true);
    const FeaturePyramid s = random_pyramid(gen, 8, false);
    const long double sd = 0.5L * (direct_cos_term(t, 3, s, 1) + direct_cos_term(t, 7, s, 5));
    long double prefix = 0;
    for (std::size_t j = 0; j < 11; ++j) prefix += direct_sqdist(t.class_tokens[j], e.class_tokens[j]);
    const long double last = direct_sqdist(t.final_class_token, e.final_class_token);
    worst = std::max({worst, std::abs(ds::decoder_loss(t, s).item() - static_cast<double>(sd)),
                      std::abs(ds::encoder_loss(t, e).item() -
                               static_cast<double>((prefix + last) / 12)),
                      std::abs(ds::encoder_score_last(t, e).item() - static_cast<double>(last)),
                      std::abs(ds::encoder_score_mean_prefix(t, e).item() -
                               static_cast<double>(prefix / 11))});
  }
  return {worst <= 1e-10,
          fmt("100 random pyramids, L_SD/L_SE/L'/L'' max deviation %.2e [need <= 1e-10]", worst)};
}

// ---- criterion 5 --------------------------------------------------------

Outcome metric_oracles() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(5);
  std::size_t mismatches = 0, tied = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 50)(gen);
    const int levels = trial % 2 == 0 ? 5 : 1000;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::uniform_int_distribution<int>(0, levels)(gen) / static_cast<double>(levels);
      y[i] = std::bernoulli_distribution(0.35)(gen) ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    tied += std::set<double>(s.begin(), s.end()).size() < n;
    const dualkd::metrics::ScoreSet set{s, y, {}};
    mismatches += dualkd::metrics::auroc(set) != oracle::auroc(s, y);
    mismatches += dualkd::metrics::average_precision(set) != oracle::average_precision(s, y);
    mismatches += dualkd::metrics::f1_max(set) != oracle::f1_max(s, y);
    // the same values as a stack of 1 x k maps
    std::vector<Tensor> maps;
    std::vector<dd::Mask> masks;
    for (std::size_t start = 0; start < n; start += 7) {
      const std::size_t k = std::min<std::size_t>(7, n - start);
      maps.push_back(Tensor::from({1, k}, std::vector<double>(s.begin() + start, s.begin() + start + k)));
      dd::Mask mk(1, k);
      for (std::size_t i = 0; i < k; ++i) mk.bits[i] = static_cast<std::uint8_t>(y[start + i]);
      masks.push_back(mk);
    }
    const auto px = dualkd::metrics::pixel_metrics(maps, masks);
    mismatches += px.auroc != oracle::auroc(s, y);
    mismatches += px.average_precision != oracle::average_precision(s, y);
    mismatches += px.f1_max != oracle::f1_max(s, y);
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 60.0,
          fmt("1000 instances (%zu with ties), %zu inexact values, %.1f s [need exact, < 60 s]",
              tied, mismatches, secs)};
}

// ---- training helpers ---------------------------------------------------

struct Run {
  h::MetricsReport report;
  double train_seconds = 0.0;
  std::vector<h::TrainResult> results;
};

std::vector<h::TrainResult> g_all_results;

Run train_and_evaluate(const h::ExperimentConfig& config) {
  Run r;
  const auto t0 = Clock::now();
  r.results = h::train(config);
  r.train_seconds = seconds_since(t0);
  g_all_results.insert(g_all_results.end(), r.results.begin(), r.results.end());
  r.report = h::evaluate(config, h::default_eval_options(config));
  return r;
}

h::ExperimentConfig with_flags(h::ExperimentConfig c, bool se, bool sd, const std::string& sub) {
  c.flags.use_L_SE = se;
  c.flags.use_L_SD = sd;
  c.output_dir /= sub;
  return c;
}

// ---- criterion 6 --------------------------------------------------------

Outcome complementarity(const fs::path& work) {
  double train_total = 0.0;
  const auto branch = [&](dd::DatasetKind kind, bool se, const std::string& name) {
    const h::ExperimentConfig c =
        with_flags(bench_config(kind, work / "complementarity" / dd::to_string(kind)), se, !se, name);
    const Run r = train_and_evaluate(c);
    train_total += r.train_seconds;
    return r.report.mean.image_auroc;
  };
  const double str_enc = branch(dd::DatasetKind::kStructural, true, "encoder_only");
  const double str_dec = branch(dd::DatasetKind::kStructural, false, "decoder_only");
  const double sem_enc = branch(dd::DatasetKind::kSemantic, true, "encoder_only");
  const double sem_dec = branch(dd::DatasetKind::kSemantic, false, "decoder_only");
  const double mix_enc = branch(dd::DatasetKind::kMixed, true, "encoder_only");
  const double mix_dec = branch(dd::DatasetKind::kMixed, false, "decoder_only");
  const h::ExperimentConfig full =
      with_flags(bench_config(dd::DatasetKind::kMixed, work / "complementarity" / "mixed"), true,
                 true, "full");
  const Run fr = train_and_evaluate(full);
  train_total += fr.train_seconds;
  const double fused = fr.report.mean.image_auroc;

  const bool structural_ok = str_dec - str_enc >= 0.05;
  const bool semantic_ok = sem_enc - sem_dec >= 0.05;
  const bool mixed_ok = fused >= std::max(mix_enc, mix_dec) - 0.02 && fused >= 0.90;
  const bool time_ok = train_total < 600.0;
  return {structural_ok && semantic_ok && mixed_ok && time_ok,
          fmt("structural decoder %.4f vs encoder %.4f (%s); semantic encoder %.4f vs decoder "
              "%.4f (%s); mixed fused %.4f vs encoder %.4f / decoder %.4f (%s); training %.0f s "
              "(%s) [need +0.05, +0.05, >= max-0.02 and >= 0.90, < 600 s]",
              str_dec, str_enc, structural_ok ? "ok" : "short", sem_enc, sem_dec,
              semantic_ok ? "ok" : "short", fused, mix_enc, mix_dec, mixed_ok ? "ok" : "short",
              train_total, time_ok ? "ok" : "slow")};
}

// ---- criterion 7 --------------------------------------------------------

Outcome ablation_shape(const fs::path& work) {
  h::ExperimentConfig c = toy_config(work / "ablation_run");
  const auto rows = h::run_ablation(c);
  h::write_ablation(c.output_dir / "ablation", rows);
  const bool expect[6][4] = {{1, 0, 0, 0}, {0, 1, 0, 0}, {1, 0, 1, 0},
                             {1, 1, 0, 1}, {1, 1, 1, 0}, {1, 1, 1, 1}};
  bool shape_ok = rows.size() == 6;
  for (std::size_t i = 0; shape_ok && i < 6; ++i) {
    const h::LossFlags& f = rows[i].flags;
    shape_ok = rows[i].index == i + 1 && f.use_L_SE == expect[i][0] &&
               f.use_L_SD == expect[i][1] && f.use_CLS_m == expect[i][2] &&
               f.use_noisy_or == expect[i][3];
  }
  std::size_t sum_rows = 0, exact = 0, records = 0;
  for (const auto& r : rows) {
    if (!(r.flags.use_L_SE && r.flags.use_L_SD && !r.flags.use_noisy_or)) continue;
    ++sum_rows;
    for (const auto& rec : r.report.records) {
      ++records;
      exact += rec.score == rec.L_prime + rec.L_SD && rec.AC_plain_sum == rec.L_prime + rec.L_SD;
    }
  }
  std::size_t csv_lines = 0;
  {
    std::ifstream in(c.output_dir / "ablation" / "ablation.csv");
    std::string line;
    while (std::getline(in, line)) csv_lines += !line.empty();
  }
  const bool ok = shape_ok && sum_rows == 1 && records > 0 && exact == records && csv_lines == 7;
  return {ok, fmt("%zu rows in table order: %s; plain-sum row scores equal L'+L_SD exactly on "
                  "%zu/%zu records; ablation.csv %zu lines",
                  rows.size(), shape_ok ? "yes" : "no", exact, records, csv_lines)};
}

// ---- criterion 8 --------------------------------------------------------

std::uint64_t teacher_checksum_of(const fs::path& stem) {
  std::vector<d::NamedTensor> teacher;
  for (auto& e : d::load_tensors(stem)) {
    if (e.name.rfind("teacher.", 0) == 0) teacher.push_back(e);
  }
  return d::checksum(teacher);
}

std::vector<std::pair<std::uint64_t, std::uint64_t>> g_sweep_teachers;

Outcome fewshot(const fs::path& work) {
  const h::ExperimentConfig c = bench_config(dd::DatasetKind::kStructural, work / "fewshot_run");
  const auto rows = h::run_fewshot(c);
  h::write_fewshot(c.output_dir / "fewshot", rows);
  std::vector<double> auroc;
  for (const auto& r : rows) auroc.push_back(r.report.mean.image_auroc);
  bool monotone = rows.size() == 4;
  for (std::size_t i = 1; i < auroc.size(); ++i) monotone &= auroc[i] >= auroc[i - 1] - 0.03;

  // rerun the 1-shot point in a fresh directory
  h::ExperimentConfig again = c;
  again.output_dir = work / "fewshot_rerun";
  const auto rerun = h::run_fewshot(again, {1});
  h::write_fewshot(again.output_dir / "fewshot", rerun);
  const fs::path a = c.output_dir / "fewshot" / "shots_1";
  const fs::path b = again.output_dir / "fewshot" / "shots_1";
  const bool deterministic =
      report_without_timing(a / "report.json") == report_without_timing(b / "report.json") &&
      slurp(a / "scores.csv") == slurp(b / "scores.csv") &&
      slurp(d::payload_path(h::final_stem(a / "multi_class"))) ==
          slurp(d::payload_path(h::final_stem(b / "multi_class")));

  const std::uint64_t fresh = h::Model(c).teacher_checksum();
  for (std::size_t k : h::kDefaultShots) {
    g_sweep_teachers.push_back(
        {fresh, teacher_checksum_of(h::final_stem(c.output_dir / "fewshot" /
                                                  ("shots_" + std::to_string(k)) / "multi_class"))});
  }
  std::string series;
  for (std::size_t i = 0; i < auroc.size(); ++i) {
    series += fmt("%s%zu:%.4f", i ? " " : "", rows[i].shots, auroc[i]);
  }
  return {monotone && deterministic,
          fmt("mean AUROC by shots %s (%s); 1-shot rerun identical: %s [need each >= previous "
              "- 0.03]",
              series.c_str(), monotone ? "non-decreasing within band" : "violates band",
              deterministic ? "yes" : "no")};
}

// ---- criterion 9 --------------------------------------------------------

Outcome determinism(const fs::path& work) {
  const auto run_dir = [&](const std::string& name) { return work / "determinism" / name; };
  h::ExperimentConfig a = toy_config(run_dir("a"));
  h::ExperimentConfig b = toy_config(run_dir("b"));
  const Run ra = train_and_evaluate(a);
  const Run rb = train_and_evaluate(b);
  h::emit_report(ra.report, run_dir("a") / "eval");
  h::emit_report(rb.report, run_dir("b") / "eval");
  const std::string entry = ra.results.at(0).entry;

  std::size_t compared = 0, differing = 0;
  const auto same = [&](const fs::path& x, const fs::path& y) {
    ++compared;
    if (slurp(x) != slurp(y) || slurp(x).empty()) ++differing;
  };
  for (const char* stem : {"ckpt_000000", "ckpt_000010", "ckpt_000020", "final"}) {
    same(run_dir("a") / entry / (std::string(stem) + ".bin"),
         run_dir("b") / entry / (std::string(stem) + ".bin"));
    same(run_dir("a") / entry / (std::string(stem) + ".hdr"),
         run_dir("b") / entry / (std::string(stem) + ".hdr"));
  }
  same(run_dir("a") / entry / "loss_log.csv", run_dir("b") / entry / "loss_log.csv");
  same(run_dir("a") / "eval" / "scores.csv", run_dir("b") / "eval" / "scores.csv");
  same(run_dir("a") / "eval" / "hist_fused.ppm", run_dir("b") / "eval" / "hist_fused.ppm");
  ++compared;
  if (report_without_timing(run_dir("a") / "eval" / "report.json") !=
      report_without_timing(run_dir("b") / "eval" / "report.json")) {
    ++differing;
  }

  // stop at iteration 10, resume, and compare with the uninterrupted run
  h::ExperimentConfig c = toy_config(run_dir("c"));
  h::TrainOptions stop;
  stop.stop_after = 10;
  g_all_results.push_back(h::train(c, stop).at(0));
  h::TrainOptions resume;
  resume.resume_from = h::checkpoint_stem(run_dir("c") / entry, 10);
  g_all_results.push_back(h::train(c, resume).at(0));
  std::size_t resume_diff = 0;
  for (const char* f : {"final.bin", "final.hdr", "ckpt_000020.bin", "loss_log.csv"}) {
    if (slurp(run_dir("a") / entry / f) != slurp(run_dir("c") / entry / f)) ++resume_diff;
  }
  return {differing == 0 && resume_diff == 0,
          fmt("%zu artifacts compared across two runs, %zu differ; resumed run differs in %zu of "
              "4 artifacts",
              compared, differing, resume_diff)};
}

// ---- criterion 10 -------------------------------------------------------

Outcome teacher_freeze(const fs::path& work) {
  // an ablation sweep too, checked through its checkpoints
  h::ExperimentConfig c = toy_config(work / "freeze_ablation");
  h::run_ablation(c);
  const std::uint64_t fresh = h::Model(c).teacher_checksum();
  for (const auto& dir : fs::directory_iterator(c.output_dir / "ablation")) {
    g_sweep_teachers.push_back({fresh, teacher_checksum_of(h::final_stem(dir.path() / "multi_class"))});
  }
  std::size_t runs = 0, changed = 0;
  for (const auto& r : g_all_results) {
    ++runs;
    changed += r.teacher_checksum_before != r.teacher_checksum_after;
  }
  for (const auto& [before, after] : g_sweep_teachers) {
    ++runs;
    changed += before != after;
  }
  return {runs > 0 && changed == 0,
          fmt("%zu training runs checked, %zu teacher checksum changes", runs, changed)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("acceptance checks");
  std::string workdir = (fs::temp_directory_path() / "dualkd_acceptance").string();
  std::vector<int> only;
  app.add_option("--workdir", workdir, "scratch directory (recreated)");
  app.add_option("--only", only, "run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const fs::path work = workdir;
  fs::remove_all(work);
  fs::create_directories(work);
  const auto wanted = [&](int id) {
    return only.empty() || std::find(only.begin(), only.end(), id) != only.end();
  };
  const auto t0 = Clock::now();
  const auto guarded = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    if (!wanted(id)) return;
    try {
      report_line(id, name, fn());
    } catch (const std::exception& e) {
      report_line(id, name, {false, std::string("exception: ") + e.what()});
    }
  };
  guarded(1, "gradient suite", [&] { return gradient_suite(work); });
  guarded(2, "noisy-or identities", [&] { return noisy_or_identities(); });
  guarded(3, "gradient gating", [&] { return gating(work); });
  guarded(4, "loss oracles", [&] { return loss_oracles(); });
  guarded(5, "metric oracles", [&] { return metric_oracles(); });
  guarded(6, "directional complementarity", [&] { return complementarity(work); });
  guarded(7, "ablation table shape", [&] { return ablation_shape(work); });
  guarded(8, "few-shot trend", [&] { return fewshot(work); });
  guarded(9, "determinism and resume", [&] { return determinism(work); });
  guarded(10, "teacher freeze", [&] { return teacher_freeze(work); });
  std::printf("acceptance: %d failing, %.0f s total\n", g_failures, seconds_since(t0));
  return g_failures == 0 ? 0 : 1;
}
