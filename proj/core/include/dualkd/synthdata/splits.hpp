#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dualkd/synthdata/dataset.hpp"

namespace dualkd::data {

enum class SplitMode { kSingleClass, kMultiClass };

std::string to_string(SplitMode mode);
SplitMode split_mode_from_string(const std::string& text);

// One train/test experiment over a dataset. Indices refer to
// LabeledDataset::samples; test labels may differ from the sample's own
// label (clean images of non-normal classes become anomalies).
struct RosterEntry {
  std::string name;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::vector<int> test_labels;  // normality convention, parallel to `test`

  bool operator==(const RosterEntry&) const = default;
};

using Roster = std::vector<RosterEntry>;

// single_class: one entry per id in `normal_ids`; train = that class's
//   training normals, test = that class's test samples plus, for datasets
//   with cross-class anomalies, every other class's test samples as label 0.
// multi_class: one entry; train = training normals of all `normal_ids`,
//   test = their test samples with their own labels plus every test sample
//   of the remaining classes as label 0.
// Throws DataError for an empty or unknown id, or when an entry's test set
// lacks either normals or anomalies.
Roster make_splits(const LabeledDataset& dataset, SplitMode mode,
                   const std::vector<int>& normal_ids);

// Seeded choice of exactly `shots` training samples per class, returned in
// their original order. Throws DataError if a class has fewer.
std::vector<std::size_t> few_shot_subsample(const LabeledDataset& dataset,
                                            const std::vector<std::size_t>& train,
                                            std::size_t shots, std::uint64_t seed);

}  // namespace dualkd::data
