#pragma once

#include <cstddef>
#include <filesystem>

#include "dualkd/synthdata/dataset.hpp"

namespace dualkd::data {

struct FolderOptions {
  std::size_t image_size = 0;  // resize to square images; 0 keeps the file size
  std::size_t channels = 0;    // 0 keeps the file's channel count
};

// Industrial-benchmark layout, either one category at `root` or one per
// sub-directory (class ids follow sorted category names):
//
//   <category>/train/good/*
//   <category>/test/<defect_type>/*        ("good" = normal)
//   <category>/ground_truth/<defect_type>/<stem>_mask.*
//
// Anomalous images without a mask are kept (mask absent) and reported in
// `warnings`. Unreadable images and a missing root throw DataError.
LabeledDataset load_folder(const std::filesystem::path& root, FolderOptions options = {});

}  // namespace dualkd::data
