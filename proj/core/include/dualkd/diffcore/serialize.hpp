#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dualkd/diffcore/tensor.hpp"

namespace dualkd::diff {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Tensor container on disk is a pair of files sharing a stem:
//
//   <stem>.bin  concatenated payloads, little-endian IEEE-754 binary64
//   <stem>.hdr  text header: a magic line, then one line per entry
//               "<name> f64 <extents joined by 'x', or 'scalar'> <offset>"
//               where <offset> counts elements from the start of .bin
//
// Entry order in the header matches payload order. Names may not contain
// whitespace.
void save_tensors(const std::filesystem::path& stem, std::span<const NamedTensor> entries);
std::vector<NamedTensor> load_tensors(const std::filesystem::path& stem);

std::filesystem::path payload_path(const std::filesystem::path& stem);
std::filesystem::path header_path(const std::filesystem::path& stem);

// FNV-1a over the bit patterns of every value, in entry order. Used as a
// parameter checksum.
std::uint64_t checksum(std::span<const NamedTensor> entries);

}  // namespace dualkd::diff
