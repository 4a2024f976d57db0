#include "dualkd/synthdata/generators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "dualkd/diffcore/rng.hpp"
#include "dualkd/errors.hpp"
#include "dualkd/synthdata/folder.hpp"

namespace dualkd::data {

namespace {

using diff::Rng;
constexpr double kPi = std::numbers::pi;

// Stream tags keep class parameters, train samples and test samples on
// disjoint counter ranges so samples can be generated independently.
enum StreamRole : std::uint64_t { kClassParams = 1, kTrainSample = 2, kTestSample = 3 };

Rng sample_rng(const DatasetSpec& spec, StreamRole role, std::size_t class_id,
               std::size_t index) {
  const std::uint64_t tag = (static_cast<std::uint64_t>(role) << 56) ^
                            (static_cast<std::uint64_t>(class_id) << 32) ^ index;
  return Rng(spec.seed).fork(tag);
}

std::string sample_id(std::size_t class_id, Split split, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "c%02zu_%s_%04zu", class_id,
                split == Split::kTrain ? "train" : "test", index);
  return buf;
}

struct Grating {
  double fx = 0.0;  // cycles per image along x
  double fy = 0.0;
  double amplitude = 0.0;
};

double grating_value(const Grating& g, double x, double y, double size, double phase) {
  return g.amplitude * std::sin(2.0 * kPi * (g.fx * x + g.fy * y) / size + phase);
}

Grating oriented(double cycles, double angle, double amplitude) {
  return {cycles * std::cos(angle), cycles * std::sin(angle), amplitude};
}

// Per-class colour tint so multi-channel datasets are not trivially grey.
double channel_gain(std::size_t class_id, std::size_t channel, std::size_t channels) {
  if (channels == 1) return 1.0;
  return 0.8 + 0.2 * std::cos(2.0 * kPi * (static_cast<double>(class_id) / 7.0 +
                                           static_cast<double>(channel) / channels));
}

struct TextureClass {
  Grating primary;
  Grating secondary;
};

TextureClass texture_class(const DatasetSpec& spec, std::size_t k) {
  Rng rng = sample_rng(spec, kClassParams, k, 0);
  const double n = static_cast<double>(spec.num_classes);
  const double angle = kPi * static_cast<double>(k) / n + rng.uniform(-0.1, 0.1);
  const double cycles = 4.0 + 2.0 * static_cast<double>(k % 3) + rng.uniform(0.0, 0.5);
  const double angle2 = angle + kPi / 2.0 + rng.uniform(-0.3, 0.3);
  const double cycles2 = cycles * 1.5;
  return {oriented(cycles, angle, 0.22), oriented(cycles2, angle2, 0.08)};
}

Image texture_image(const DatasetSpec& spec, const TextureClass& cls, std::size_t k, Rng& rng) {
  const std::size_t s = spec.image_size;
  const double size = static_cast<double>(s);
  const double phase1 = rng.uniform(0.0, 2.0 * kPi);
  const double phase2 = rng.uniform(0.0, 2.0 * kPi);
  Image img(spec.channels, s, s);
  for (std::size_t y = 0; y < s; ++y) {
    for (std::size_t x = 0; x < s; ++x) {
      const double base = 0.5 + grating_value(cls.primary, x, y, size, phase1) +
                          grating_value(cls.secondary, x, y, size, phase2);
      for (std::size_t c = 0; c < spec.channels; ++c) {
        const double v = base * channel_gain(k, c, spec.channels) +
                         rng.uniform(-spec.noise, spec.noise);
        img.at(c, y, x) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return img;
}

// Paints one rectangular or elliptical intensity defect and returns its mask.
Mask paint_defect(const DatasetSpec& spec, Image& img, Rng& rng) {
  const DefectParams& d = spec.defect;
  const std::size_t s = spec.image_size;
  const std::size_t h = d.size_min + rng.below(d.size_max - d.size_min + 1);
  const std::size_t w = d.size_min + rng.below(d.size_max - d.size_min + 1);
  const std::size_t y0 = rng.below(s - h + 1);
  const std::size_t x0 = rng.below(s - w + 1);
  const bool ellipse = rng.uniform() < 0.5;
  const double magnitude = rng.uniform(d.intensity_min, d.intensity_max);
  const double delta = rng.uniform() < 0.5 ? -magnitude : magnitude;

  Mask mask(s, s);
  const double cy = static_cast<double>(y0) + static_cast<double>(h) / 2.0;
  const double cx = static_cast<double>(x0) + static_cast<double>(w) / 2.0;
  const double ry = static_cast<double>(h) / 2.0;
  const double rx = static_cast<double>(w) / 2.0;
  for (std::size_t y = y0; y < y0 + h; ++y) {
    for (std::size_t x = x0; x < x0 + w; ++x) {
      if (ellipse) {
        const double dy = (static_cast<double>(y) + 0.5 - cy) / ry;
        const double dx = (static_cast<double>(x) + 0.5 - cx) / rx;
        if (dx * dx + dy * dy > 1.0) continue;
      }
      mask.at(y, x) = 1;
      for (std::size_t c = 0; c < spec.channels; ++c) {
        img.at(c, y, x) = std::clamp(img.at(c, y, x) + delta, 0.0, 1.0);
      }
    }
  }
  return mask;
}

LabeledDataset texture_dataset(const DatasetSpec& spec) {
  spec.validate();
  LabeledDataset ds;
  ds.cross_class_anomalies = false;
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    ds.class_names.push_back("texture" + std::to_string(k));
    const TextureClass cls = texture_class(spec, k);
    for (std::size_t i = 0; i < spec.train_per_class; ++i) {
      Rng rng = sample_rng(spec, kTrainSample, k, i);
      ds.samples.push_back({sample_id(k, Split::kTrain, i), texture_image(spec, cls, k, rng),
                            kNormal, std::nullopt, static_cast<int>(k), Split::kTrain,
                            "good"});
    }
    const std::size_t n_test = spec.test_normal_per_class + spec.test_anomalous_per_class;
    for (std::size_t i = 0; i < n_test; ++i) {
      Rng rng = sample_rng(spec, kTestSample, k, i);
      Sample s{sample_id(k, Split::kTest, i), texture_image(spec, cls, k, rng), kNormal,
               std::nullopt, static_cast<int>(k), Split::kTest, "good"};
      if (i >= spec.test_normal_per_class) {
        s.mask = paint_defect(spec, s.image, rng);
        s.label = kAnomalous;
        s.defect_type = "defect";
      }
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

}  // namespace

LabeledDataset gen_structural(const DatasetSpec& spec) {
  if (spec.kind != DatasetKind::kStructural) {
    throw UsageError("gen_structural needs kind = structural");
  }
  return texture_dataset(spec);
}

namespace {

// Texture-pair classes; with_defects adds defect anomalies to the normal
// classes' test sets on top of the cross-class anomalies.
LabeledDataset pair_dataset(const DatasetSpec& spec, bool with_defects) {
  spec.validate();
  if (spec.num_classes < 2) throw DataError("semantic datasets need at least 2 classes");
  const std::vector<int> normal = spec.resolved_normal_ids();
  LabeledDataset ds;
  ds.cross_class_anomalies = true;
  const std::size_t s = spec.image_size;
  const double size = static_cast<double>(s);
  // Class k pairs textures k and k+1 (mod n): every texture appears in some
  // class, so classes differ only in which textures occur together.
  std::vector<TextureClass> textures;
  for (std::size_t k = 0; k < spec.num_classes; ++k) textures.push_back(texture_class(spec, k));
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    ds.class_names.push_back("pair" + std::to_string(k));
    const std::size_t ta = k;
    const std::size_t tb = (k + 1) % spec.num_classes;
    const auto render = [&](Rng& rng) {
      const bool vertical = rng.uniform() < 0.5;
      const bool swap = rng.uniform() < 0.5;
      const double cut = rng.uniform(0.3 * size, 0.7 * size);
      const TextureClass& first = textures[swap ? tb : ta];
      const TextureClass& second = textures[swap ? ta : tb];
      const double p1 = rng.uniform(0.0, 2.0 * kPi), p2 = rng.uniform(0.0, 2.0 * kPi);
      const double q1 = rng.uniform(0.0, 2.0 * kPi), q2 = rng.uniform(0.0, 2.0 * kPi);
      Image img(spec.channels, s, s);
      for (std::size_t y = 0; y < s; ++y) {
        for (std::size_t x = 0; x < s; ++x) {
          const double along = vertical ? static_cast<double>(x) : static_cast<double>(y);
          const bool in_first = along + 0.5 < cut;
          const TextureClass& t = in_first ? first : second;
          const double base = 0.5 + grating_value(t.primary, x, y, size, in_first ? p1 : q1) +
                              grating_value(t.secondary, x, y, size, in_first ? p2 : q2);
          for (std::size_t c = 0; c < spec.channels; ++c) {
            const double v = base * channel_gain(in_first == swap ? tb : ta, c, spec.channels) +
                             rng.uniform(-spec.noise, spec.noise);
            img.at(c, y, x) = std::clamp(v, 0.0, 1.0);
          }
        }
      }
      return img;
    };
    for (std::size_t i = 0; i < spec.train_per_class; ++i) {
      Rng rng = sample_rng(spec, kTrainSample, k, i);
      ds.samples.push_back({sample_id(k, Split::kTrain, i), render(rng), kNormal, std::nullopt,
                            static_cast<int>(k), Split::kTrain, "good"});
    }
    const bool defects_here = with_defects && std::count(normal.begin(), normal.end(),
                                                         static_cast<int>(k)) > 0;
    const std::size_t n_test =
        spec.test_normal_per_class + (defects_here ? spec.test_anomalous_per_class : 0);
    for (std::size_t i = 0; i < n_test; ++i) {
      Rng rng = sample_rng(spec, kTestSample, k, i);
      Sample sample{sample_id(k, Split::kTest, i), render(rng), kNormal, std::nullopt,
                    static_cast<int>(k), Split::kTest, "good"};
      if (i >= spec.test_normal_per_class) {
        sample.mask = paint_defect(spec, sample.image, rng);
        sample.label = kAnomalous;
        sample.defect_type = "defect";
      }
      ds.samples.push_back(std::move(sample));
    }
  }
  if (normal.size() == spec.num_classes) {
    ds.warnings.push_back("every class is normal: the anomalous test set is empty");
  }
  return ds;
}

}  // namespace

LabeledDataset gen_semantic(const DatasetSpec& spec) {
  if (spec.kind != DatasetKind::kSemantic) {
    throw UsageError("gen_semantic needs kind = semantic");
  }
  return pair_dataset(spec, false);
}

LabeledDataset gen_mixed(const DatasetSpec& spec) {
  if (spec.kind != DatasetKind::kMixed) throw UsageError("gen_mixed needs kind = mixed");
  return pair_dataset(spec, true);
}

LabeledDataset generate(const DatasetSpec& spec) {
  switch (spec.kind) {
    case DatasetKind::kStructural:
      return gen_structural(spec);
    case DatasetKind::kSemantic:
      return gen_semantic(spec);
    case DatasetKind::kMixed:
      return gen_mixed(spec);
    case DatasetKind::kFolder: {
      FolderOptions options;
      options.image_size = spec.image_size;
      options.channels = spec.channels;
      return load_folder(spec.root, options);
    }
  }
  throw std::logic_error("unknown dataset kind");
}

}  // namespace dualkd::data
