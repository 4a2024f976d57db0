#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dualkd/diffcore/tensor.hpp"

namespace dualkd::data {

// Planar [C, H, W] image with values in [0, 1].
struct Image {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
      : channels(c), height(h), width(w), pixels(c * h * w, fill) {}

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return pixels[(c * height + y) * width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return pixels[(c * height + y) * width + x];
  }
  diff::Tensor to_tensor() const;
  bool operator==(const Image&) const = default;
};

// Binary H x W mask, 1 = defect pixel.
struct Mask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(std::size_t h, std::size_t w) : height(h), width(w), bits(h * w, 0) {}

  std::uint8_t& at(std::size_t y, std::size_t x) { return bits[y * width + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return bits[y * width + x]; }
  std::size_t area() const;
  bool operator==(const Mask&) const = default;
};

// Bilinear resize with half-pixel centres.
Image resize_bilinear(const Image& image, std::size_t height, std::size_t width);
// Nearest-neighbour resize (masks stay binary).
Mask resize_nearest(const Mask& mask, std::size_t height, std::size_t width);
// Replicates or averages channels to reach `channels`.
Image convert_channels(const Image& image, std::size_t channels);

}  // namespace dualkd::data
