#include "dualkd/harness/config.hpp"

#include <cstdio>
#include <functional>
#include <vector>

#include "dualkd/errors.hpp"

namespace dualkd::harness {

namespace {

struct Binding {
  std::string key;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

using Bindings = std::vector<Binding>;

void bind_size(Bindings& b, const std::string& key, std::size_t& field) {
  b.push_back({key, [&field] { return std::to_string(field); },
               [&field, key](const std::string& v) {
                 field = static_cast<std::size_t>(parse_u64(key, v));
               }});
}

void bind_u64(Bindings& b, const std::string& key, std::uint64_t& field) {
  b.push_back({key, [&field] { return std::to_string(field); },
               [&field, key](const std::string& v) { field = parse_u64(key, v); }});
}

void bind_double(Bindings& b, const std::string& key, double& field) {
  b.push_back({key, [&field] { return format_double(field); },
               [&field, key](const std::string& v) { field = parse_double(key, v); }});
}

void bind_bool(Bindings& b, const std::string& key, bool& field) {
  b.push_back({key, [&field] { return std::string(field ? "true" : "false"); },
               [&field, key](const std::string& v) { field = parse_bool(key, v); }});
}

void bind_path(Bindings& b, const std::string& key, std::filesystem::path& field) {
  b.push_back({key, [&field] { return field.generic_string(); },
               [&field](const std::string& v) { field = v; }});
}

template <typename E, typename FromString>
void bind_enum(Bindings& b, const std::string& key, E& field, FromString from) {
  b.push_back({key, [&field] { return to_string(field); },
               [&field, from, key](const std::string& v) {
                 try {
                   field = from(v);
                 } catch (const std::exception& e) {
                   throw UsageError("key '" + key + "': " + e.what());
                 }
               }});
}

void bind_ids(Bindings& b, const std::string& key, std::vector<int>& field) {
  b.push_back({key,
               [&field] {
                 std::string out;
                 for (std::size_t i = 0; i < field.size(); ++i) {
                   if (i) out += ",";
                   out += std::to_string(field[i]);
                 }
                 return out;
               },
               [&field, key](const std::string& v) {
                 field.clear();
                 std::size_t start = 0;
                 while (start < v.size()) {
                   auto comma = v.find(',', start);
                   if (comma == std::string::npos) comma = v.size();
                   std::string item = v.substr(start, comma - start);
                   while (!item.empty() && item.front() == ' ') item.erase(item.begin());
                   while (!item.empty() && item.back() == ' ') item.pop_back();
                   field.push_back(static_cast<int>(parse_u64(key, item)));
                   start = comma + 1;
                 }
               }});
}

void bind_vit(Bindings& b, const std::string& p, vit::ViTConfig& c) {
  bind_size(b, p + "image_size", c.image_size);
  bind_size(b, p + "patch_size", c.patch_size);
  bind_size(b, p + "in_channels", c.in_channels);
  bind_size(b, p + "embed_dim", c.embed_dim);
  bind_size(b, p + "depth", c.depth);
  bind_size(b, p + "num_heads", c.num_heads);
  bind_double(b, p + "mlp_ratio", c.mlp_ratio);
  bind_u64(b, p + "seed", c.seed);
}

void bind_dataset(Bindings& b, data::DatasetSpec& d) {
  bind_enum(b, "dataset.kind", d.kind, data::dataset_kind_from_string);
  bind_size(b, "dataset.num_classes", d.num_classes);
  bind_ids(b, "dataset.normal_class_ids", d.normal_class_ids);
  bind_size(b, "dataset.train_per_class", d.train_per_class);
  bind_size(b, "dataset.test_normal_per_class", d.test_normal_per_class);
  bind_size(b, "dataset.test_anomalous_per_class", d.test_anomalous_per_class);
  bind_size(b, "dataset.defect.size_min", d.defect.size_min);
  bind_size(b, "dataset.defect.size_max", d.defect.size_max);
  bind_double(b, "dataset.defect.intensity_min", d.defect.intensity_min);
  bind_double(b, "dataset.defect.intensity_max", d.defect.intensity_max);
  bind_double(b, "dataset.noise", d.noise);
  bind_size(b, "dataset.image_size", d.image_size);
  bind_size(b, "dataset.channels", d.channels);
  bind_u64(b, "dataset.seed", d.seed);
  bind_path(b, "dataset.root", d.root);
}

Bindings bind_all(ExperimentConfig& c) {
  Bindings b;
  bind_vit(b, "teacher.", c.teacher);
  bind_path(b, "teacher.weights", c.teacher_weights);
  bind_vit(b, "encoder.", c.encoder);
  bind_vit(b, "decoder.", c.decoder);
  bind_double(b, "bottleneck.drop_rate", c.bottleneck.drop_rate);
  bind_double(b, "bottleneck.hidden_ratio", c.bottleneck.hidden_ratio);
  bind_u64(b, "bottleneck.seed", c.bottleneck.seed);
  bind_bool(b, "loss.use_L_SE", c.flags.use_L_SE);
  bind_bool(b, "loss.use_L_SD", c.flags.use_L_SD);
  bind_bool(b, "loss.use_CLS_m", c.flags.use_CLS_m);
  bind_bool(b, "loss.use_noisy_or", c.flags.use_noisy_or);
  bind_double(b, "optimizer.lr_encoder", c.optimizer.lr_encoder);
  bind_double(b, "optimizer.lr_decoder", c.optimizer.lr_decoder);
  bind_double(b, "optimizer.beta1", c.optimizer.beta1);
  bind_double(b, "optimizer.beta2", c.optimizer.beta2);
  bind_double(b, "optimizer.weight_decay", c.optimizer.weight_decay);
  bind_double(b, "optimizer.eps", c.optimizer.eps);
  bind_bool(b, "optimizer.amsgrad", c.optimizer.amsgrad);
  bind_bool(b, "optimizer.update_clamp", c.optimizer.update_clamp);
  bind_size(b, "train.iterations", c.train.iterations);
  bind_size(b, "train.batch_size", c.train.batch_size);
  bind_size(b, "train.checkpoint_every", c.train.checkpoint_every);
  bind_u64(b, "train.seed", c.train.seed);
  bind_dataset(b, c.dataset);
  bind_enum(b, "split.mode", c.split_mode, data::split_mode_from_string);
  bind_size(b, "fewshot.shots", c.shots);
  bind_path(b, "output.dir", c.output_dir);
  return b;
}

KeyValues collect(const Bindings& b) {
  KeyValues kv;
  for (const Binding& x : b) kv[x.key] = x.get();
  return kv;
}

void apply_bindings(const Bindings& b, const KeyValues& kv) {
  for (const auto& [key, value] : kv) {
    const Binding* hit = nullptr;
    for (const Binding& x : b) {
      if (x.key == key) hit = &x;
    }
    if (!hit) throw UsageError("unknown config key '" + key + "'");
    hit->set(value);
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

}  // namespace

void LossFlags::validate() const {
  require(use_L_SE || use_L_SD, "at least one of loss.use_L_SE and loss.use_L_SD must be true");
}

void OptimizerConfig::validate() const {
  require(lr_encoder >= 0.0 && lr_decoder >= 0.0, "learning rates must be >= 0");
  require(beta1 >= 0.0 && beta1 < 1.0, "optimizer.beta1 must lie in [0, 1)");
  require(beta2 >= 0.0 && beta2 < 1.0, "optimizer.beta2 must lie in [0, 1)");
  require(weight_decay >= 0.0, "optimizer.weight_decay must be >= 0");
  require(eps > 0.0, "optimizer.eps must be > 0");
}

std::string to_string(ScoreVariant v) {
  switch (v) {
    case ScoreVariant::kLastToken:
      return "last_token";
    case ScoreVariant::kMeanPrefix:
      return "mean_prefix";
    case ScoreVariant::kAllLayers:
      return "all_layers";
  }
  return "?";
}

ScoreVariant score_variant_from_string(const std::string& text) {
  if (text == "last_token") return ScoreVariant::kLastToken;
  if (text == "mean_prefix") return ScoreVariant::kMeanPrefix;
  if (text == "all_layers") return ScoreVariant::kAllLayers;
  throw UsageError("unknown score variant '" + text + "'");
}

std::string to_string(distill::Fusion f) {
  return f == distill::Fusion::kNoisyOr ? "noisy_or" : "plain_sum";
}

distill::Fusion fusion_from_string(const std::string& text) {
  if (text == "noisy_or") return distill::Fusion::kNoisyOr;
  if (text == "plain_sum") return distill::Fusion::kPlainSum;
  throw UsageError("unknown fusion '" + text + "'");
}

ScoreVariant ExperimentConfig::default_variant() const {
  return flags.use_CLS_m ? ScoreVariant::kLastToken : ScoreVariant::kMeanPrefix;
}

distill::Fusion ExperimentConfig::default_fusion() const {
  return flags.use_noisy_or ? distill::Fusion::kNoisyOr : distill::Fusion::kPlainSum;
}

void ExperimentConfig::validate() const {
  teacher.validate();
  encoder.validate();
  decoder.validate();
  bottleneck.validate();
  flags.validate();
  optimizer.validate();
  dataset.validate();
  require(teacher.has_class_token && encoder.has_class_token && !decoder.has_class_token,
          "teacher and encoder carry class tokens, the decoder does not");
  require(teacher.depth >= 10, "teacher.depth must be >= 10 for the layer grouping");
  require(decoder.depth >= 8, "decoder.depth must be >= 8 for the layer grouping");
  require(encoder.depth == teacher.depth, "encoder.depth must equal teacher.depth");
  require(encoder.depth >= 2, "encoder.depth must be >= 2");
  require(teacher.embed_dim == encoder.embed_dim && teacher.embed_dim == decoder.embed_dim,
          "embed_dim must agree across teacher, encoder and decoder");
  require(teacher.image_size == encoder.image_size && teacher.image_size == decoder.image_size &&
              teacher.patch_size == encoder.patch_size &&
              teacher.patch_size == decoder.patch_size,
          "image_size and patch_size must agree across teacher, encoder and decoder");
  require(teacher.in_channels == encoder.in_channels,
          "teacher and encoder in_channels must agree");
  require(dataset.image_size == teacher.image_size,
          "dataset.image_size must equal teacher.image_size");
  require(dataset.channels == teacher.in_channels,
          "dataset.channels must equal teacher.in_channels");
  require(train.batch_size > 0, "train.batch_size must be > 0");
  require(train.checkpoint_every > 0, "train.checkpoint_every must be > 0");
  require(!output_dir.empty(), "output.dir must be set");
}

KeyValues to_kv(const ExperimentConfig& config) {
  ExperimentConfig copy = config;
  return collect(bind_all(copy));
}

ExperimentConfig from_kv(const KeyValues& kv) {
  ExperimentConfig c;
  apply_bindings(bind_all(c), kv);
  return c;
}

void apply_overrides(ExperimentConfig& config, const KeyValues& overrides) {
  apply_bindings(bind_all(config), overrides);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return from_kv(read_kv_file(path));
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& config) {
  write_kv_file(path, to_kv(config));
}

KeyValues dataset_to_kv(const data::DatasetSpec& spec) {
  data::DatasetSpec copy = spec;
  Bindings b;
  bind_dataset(b, copy);
  return collect(b);
}

data::DatasetSpec dataset_from_kv(const KeyValues& kv) {
  data::DatasetSpec spec;
  Bindings b;
  bind_dataset(b, spec);
  apply_bindings(b, kv);
  return spec;
}

std::string config_hash(const ExperimentConfig& config) {
  KeyValues kv = to_kv(config);
  kv.erase("output.dir");
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : format_kv(kv)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace dualkd::harness
