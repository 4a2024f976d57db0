#include "dualkd/synthdata/splits.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "dualkd/diffcore/rng.hpp"
#include "dualkd/errors.hpp"

namespace dualkd::data {

std::string to_string(SplitMode mode) {
  return mode == SplitMode::kSingleClass ? "single_class" : "multi_class";
}

SplitMode split_mode_from_string(const std::string& text) {
  if (text == "single_class") return SplitMode::kSingleClass;
  if (text == "multi_class") return SplitMode::kMultiClass;
  throw UsageError("unknown split mode '" + text + "'");
}

namespace {

void check_entry(const RosterEntry& e) {
  const bool has_normal = std::count(e.test_labels.begin(), e.test_labels.end(), kNormal) > 0;
  const bool has_anomaly =
      std::count(e.test_labels.begin(), e.test_labels.end(), kAnomalous) > 0;
  if (e.train.empty()) throw DataError("roster entry " + e.name + " has no training samples");
  if (!has_normal || !has_anomaly) {
    throw DataError("roster entry " + e.name +
                    " rejected: its test set needs both normal and anomalous samples");
  }
}

}  // namespace

Roster make_splits(const LabeledDataset& dataset, SplitMode mode,
                   const std::vector<int>& normal_ids) {
  if (normal_ids.empty()) throw DataError("normal class ids must be non-empty");
  std::set<int> normal;
  for (int id : normal_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= dataset.num_classes()) {
      throw DataError("unknown class id " + std::to_string(id));
    }
    normal.insert(id);
  }

  Roster roster;
  if (mode == SplitMode::kSingleClass) {
    for (int id : normal) {
      RosterEntry e;
      e.name = dataset.class_names[static_cast<std::size_t>(id)];
      for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const Sample& s = dataset.samples[i];
        if (s.split == Split::kTrain) {
          if (s.class_id == id && s.label == kNormal) e.train.push_back(i);
        } else if (s.class_id == id) {
          e.test.push_back(i);
          e.test_labels.push_back(s.label);
        } else if (dataset.cross_class_anomalies) {
          e.test.push_back(i);
          e.test_labels.push_back(kAnomalous);
        }
      }
      check_entry(e);
      roster.push_back(std::move(e));
    }
    return roster;
  }

  RosterEntry e;
  e.name = "multi_class";
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const Sample& s = dataset.samples[i];
    const bool in_normal = normal.count(s.class_id) > 0;
    if (s.split == Split::kTrain) {
      if (in_normal && s.label == kNormal) e.train.push_back(i);
    } else {
      e.test.push_back(i);
      e.test_labels.push_back(in_normal ? s.label : kAnomalous);
    }
  }
  check_entry(e);
  roster.push_back(std::move(e));
  return roster;
}

std::vector<std::size_t> few_shot_subsample(const LabeledDataset& dataset,
                                            const std::vector<std::size_t>& train,
                                            std::size_t shots, std::uint64_t seed) {
  if (shots == 0) throw DataError("shots must be positive");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t idx : train) {
    const Sample& s = dataset.samples.at(idx);
    if (s.label != kNormal) throw DataError("few-shot input contains an anomalous sample");
    by_class[s.class_id].push_back(idx);
  }
  std::vector<std::size_t> chosen;
  for (auto& [class_id, pool] : by_class) {
    if (shots > pool.size()) {
      throw DataError("class " + std::to_string(class_id) + " has " +
                      std::to_string(pool.size()) + " training samples, " +
                      std::to_string(shots) + " shots requested");
    }
    diff::Rng rng = diff::Rng(seed).fork(static_cast<std::uint64_t>(class_id));
    // Partial Fisher-Yates over positions, then restore the original order.
    std::vector<std::size_t> positions(pool.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
    for (std::size_t i = 0; i < shots; ++i) {
      const std::size_t j = i + rng.below(positions.size() - i);
      std::swap(positions[i], positions[j]);
    }
    positions.resize(shots);
    std::sort(positions.begin(), positions.end());
    for (std::size_t p : positions) chosen.push_back(pool[p]);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace dualkd::data
