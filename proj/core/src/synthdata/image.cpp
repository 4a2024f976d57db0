#include "dualkd/synthdata/image.hpp"

#include <algorithm>
#include <numeric>

#include "dualkd/errors.hpp"

namespace dualkd::data {

diff::Tensor Image::to_tensor() const {
  return diff::Tensor::from({channels, height, width}, pixels);
}

std::size_t Mask::area() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

namespace {

void source_coord(std::size_t dst, std::size_t in, std::size_t out, std::size_t& i0,
                  std::size_t& i1, double& frac) {
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  const double pos = std::max((static_cast<double>(dst) + 0.5) * scale - 0.5, 0.0);
  i0 = std::min(static_cast<std::size_t>(pos), in - 1);
  i1 = std::min(i0 + 1, in - 1);
  frac = pos - static_cast<double>(i0);
}

}  // namespace

Image resize_bilinear(const Image& image, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw ShapeError("resize to an empty image");
  if (image.height == height && image.width == width) return image;
  Image out(image.channels, height, width);
  for (std::size_t c = 0; c < image.channels; ++c) {
    for (std::size_t y = 0; y < height; ++y) {
      std::size_t y0, y1;
      double fy;
      source_coord(y, image.height, height, y0, y1, fy);
      for (std::size_t x = 0; x < width; ++x) {
        std::size_t x0, x1;
        double fx;
        source_coord(x, image.width, width, x0, x1, fx);
        const double top = (1 - fx) * image.at(c, y0, x0) + fx * image.at(c, y0, x1);
        const double bottom = (1 - fx) * image.at(c, y1, x0) + fx * image.at(c, y1, x1);
        out.at(c, y, x) = (1 - fy) * top + fy * bottom;
      }
    }
  }
  return out;
}

Mask resize_nearest(const Mask& mask, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw ShapeError("resize to an empty mask");
  if (mask.height == height && mask.width == width) return mask;
  Mask out(height, width);
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = std::min(y * mask.height / height, mask.height - 1);
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t sx = std::min(x * mask.width / width, mask.width - 1);
      out.at(y, x) = mask.at(sy, sx);
    }
  }
  return out;
}

Image convert_channels(const Image& image, std::size_t channels) {
  if (channels == 0) throw ShapeError("channel count must be positive");
  if (image.channels == channels) return image;
  Image out(channels, image.height, image.width);
  const std::size_t plane = image.height * image.width;
  if (image.channels == 1) {
    for (std::size_t c = 0; c < channels; ++c) {
      std::copy_n(image.pixels.begin(), plane,
                  out.pixels.begin() + static_cast<std::ptrdiff_t>(c * plane));
    }
    return out;
  }
  if (channels == 1) {
    for (std::size_t i = 0; i < plane; ++i) {
      double total = 0.0;
      for (std::size_t c = 0; c < image.channels; ++c) total += image.pixels[c * plane + i];
      out.pixels[i] = total / static_cast<double>(image.channels);
    }
    return out;
  }
  throw ShapeError("cannot convert " + std::to_string(image.channels) + " channels to " +
                   std::to_string(channels));
}

}  // namespace dualkd::data
