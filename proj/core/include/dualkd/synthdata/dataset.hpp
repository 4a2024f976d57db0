#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dualkd/synthdata/image.hpp"

namespace dualkd::data {

// Sample labels use the normality convention of the training objective:
// 1 = normal, 0 = anomalous. Metrics invert this in one place
// (harness::to_metric_labels).
inline constexpr int kNormal = 1;
inline constexpr int kAnomalous = 0;

enum class Split { kTrain, kTest };

struct Sample {
  std::string id;
  Image image;
  int label = kNormal;
  std::optional<Mask> mask;  // present iff anomalous with pixel ground truth
  int class_id = 0;
  Split split = Split::kTrain;
  std::string defect_type;  // "good" for normal samples

  bool operator==(const Sample&) const = default;
};

struct LabeledDataset {
  std::vector<Sample> samples;
  std::vector<std::string> class_names;
  // Clean images of one class count as anomalies for the others (semantic
  // and mixed datasets). Structural datasets only have defect anomalies.
  bool cross_class_anomalies = false;
  std::vector<std::string> warnings;

  std::size_t num_classes() const { return class_names.size(); }
  std::size_t count(Split split) const;
  bool operator==(const LabeledDataset&) const = default;
};

enum class DatasetKind { kStructural, kSemantic, kMixed, kFolder };

std::string to_string(DatasetKind kind);
DatasetKind dataset_kind_from_string(const std::string& text);
std::string to_string(Split split);
Split split_from_string(const std::string& text);

struct DefectParams {
  std::size_t size_min = 6;  // side length in pixels
  std::size_t size_max = 12;
  double intensity_min = 0.35;  // |delta| applied inside the defect
  double intensity_max = 0.6;

  bool operator==(const DefectParams&) const = default;
};

struct DatasetSpec {
  DatasetKind kind = DatasetKind::kStructural;
  std::size_t num_classes = 4;
  // Empty means "kind default": all classes for structural, the even class
  // ids for semantic and mixed.
  std::vector<int> normal_class_ids;
  std::size_t train_per_class = 200;
  std::size_t test_normal_per_class = 50;
  std::size_t test_anomalous_per_class = 50;
  DefectParams defect;
  double noise = 0.02;  // half-width of the uniform pixel noise
  std::size_t image_size = 32;
  std::size_t channels = 1;
  std::uint64_t seed = 7;
  std::filesystem::path root;  // folder datasets only

  std::vector<int> resolved_normal_ids() const;
  void validate() const;
  bool operator==(const DatasetSpec&) const = default;
};

}  // namespace dualkd::data
