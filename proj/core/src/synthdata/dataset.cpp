#include "dualkd/synthdata/dataset.hpp"

#include <algorithm>
#include <set>

#include "dualkd/errors.hpp"

namespace dualkd::data {

std::size_t LabeledDataset::count(Split split) const {
  return static_cast<std::size_t>(std::count_if(
      samples.begin(), samples.end(), [split](const Sample& s) { return s.split == split; }));
}

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kStructural:
      return "structural";
    case DatasetKind::kSemantic:
      return "semantic";
    case DatasetKind::kMixed:
      return "mixed";
    case DatasetKind::kFolder:
      return "folder";
  }
  return "unknown";
}

DatasetKind dataset_kind_from_string(const std::string& text) {
  if (text == "structural") return DatasetKind::kStructural;
  if (text == "semantic") return DatasetKind::kSemantic;
  if (text == "mixed") return DatasetKind::kMixed;
  if (text == "folder") return DatasetKind::kFolder;
  throw UsageError("unknown dataset kind '" + text + "'");
}

std::string to_string(Split split) { return split == Split::kTrain ? "train" : "test"; }

Split split_from_string(const std::string& text) {
  if (text == "train") return Split::kTrain;
  if (text == "test") return Split::kTest;
  throw DataError("unknown split '" + text + "'");
}

std::vector<int> DatasetSpec::resolved_normal_ids() const {
  if (!normal_class_ids.empty()) return normal_class_ids;
  std::vector<int> ids;
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (kind == DatasetKind::kStructural || kind == DatasetKind::kFolder || k % 2 == 0) {
      ids.push_back(static_cast<int>(k));
    }
  }
  return ids;
}

void DatasetSpec::validate() const {
  if (kind == DatasetKind::kFolder) {
    if (root.empty()) throw UsageError("folder datasets need dataset.root");
    return;
  }
  if (num_classes == 0) throw UsageError("num_classes must be positive");
  if (train_per_class == 0) throw UsageError("train_per_class must be >= 1");
  if (image_size == 0 || channels == 0) throw UsageError("image geometry must be positive");
  std::set<int> seen;
  for (int id : normal_class_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= num_classes) {
      throw DataError("normal class id " + std::to_string(id) + " outside 0.." +
                      std::to_string(num_classes - 1));
    }
    if (!seen.insert(id).second) throw DataError("duplicate normal class id");
  }
  if (noise < 0.0) throw UsageError("noise must be non-negative");
  if (kind != DatasetKind::kSemantic && test_anomalous_per_class > 0) {
    if (defect.size_min == 0) throw DataError("defect size 0 is degenerate");
    if (defect.size_max < defect.size_min) throw DataError("defect size range is empty");
    if (defect.size_max > image_size) throw DataError("defect larger than the image");
    if (defect.intensity_min <= 0.0 || defect.intensity_max < defect.intensity_min) {
      throw DataError("defect intensity range must be positive and ordered");
    }
  }
}

}  // namespace dualkd::data
