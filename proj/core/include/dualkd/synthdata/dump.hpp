#pragma once

#include <filesystem>

#include "dualkd/synthdata/dataset.hpp"

namespace dualkd::data {

// Writes images (16-bit netpbm), masks and `manifest.csv` with columns
// path,label,class_id,split,mask_path (paths relative to `dir`), plus
// `classes.txt` naming the classes. Labels use 1 = normal.
void write_dataset_dump(const std::filesystem::path& dir, const LabeledDataset& dataset);

// Reads a directory written by write_dataset_dump. Pixel values come back
// quantized to 16 bits.
LabeledDataset read_dataset_dump(const std::filesystem::path& dir);

}  // namespace dualkd::data
