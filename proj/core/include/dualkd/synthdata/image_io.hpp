#pragma once

#include <filesystem>

#include "dualkd/synthdata/image.hpp"

namespace dualkd::data {

// Binary netpbm (P5 grey / P6 colour, maxval up to 65535) and, when built
// with libpng, PNG. Throws DataError on unreadable or malformed files.
Image read_image(const std::filesystem::path& path);
// Any non-zero pixel is a defect pixel.
Mask read_mask(const std::filesystem::path& path);

// Writes P5 (1 channel) or P6 (3 channels) at 16 bits per sample.
void write_pnm(const std::filesystem::path& path, const Image& image);
void write_mask_pnm(const std::filesystem::path& path, const Mask& mask);

bool is_image_file(const std::filesystem::path& path);
bool png_supported();

}  // namespace dualkd::data
