#include "dualkd/synthdata/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "dualkd/errors.hpp"

#ifdef DUALKD_HAVE_PNG
#include <png.h>
#endif

namespace dualkd::data {

namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string pnm_token(std::istream& in) {
  std::string token;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  return token;
}

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path.string());
  const std::string magic = pnm_token(in);
  if (magic != "P5" && magic != "P6") {
    throw DataError("unsupported netpbm variant '" + magic + "' in " + path.string());
  }
  std::size_t width = 0, height = 0;
  unsigned long maxval = 0;
  try {
    width = std::stoul(pnm_token(in));
    height = std::stoul(pnm_token(in));
    maxval = std::stoul(pnm_token(in));
  } catch (const std::exception&) {
    throw DataError("malformed netpbm header in " + path.string());
  }
  if (width == 0 || height == 0 || maxval == 0 || maxval > 65535) {
    throw DataError("invalid netpbm geometry in " + path.string());
  }
  const std::size_t channels = magic == "P5" ? 1 : 3;
  const std::size_t bytes_per = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(width * height * channels * bytes_per);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw DataError("truncated netpbm payload in " + path.string());
  }
  Image img(channels, height, width);
  const double scale = 1.0 / static_cast<double>(maxval);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t i = ((y * width + x) * channels + c) * bytes_per;
        const unsigned v = bytes_per == 2 ? (raw[i] << 8) | raw[i + 1] : raw[i];
        img.at(c, y, x) = std::min(1.0, v * scale);
      }
    }
  }
  return img;
}

#ifdef DUALKD_HAVE_PNG
Image read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
    throw DataError("cannot read PNG " + path.string() + ": " + png.message);
  }
  const bool colour = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = colour ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&png);
    throw DataError("cannot decode PNG " + path.string() + ": " + png.message);
  }
  const std::size_t channels = colour ? 3 : 1;
  Image img(channels, png.height, png.width);
  for (std::size_t y = 0; y < png.height; ++y) {
    for (std::size_t x = 0; x < png.width; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        img.at(c, y, x) = buffer[(y * png.width + x) * channels + c] / 255.0;
      }
    }
  }
  return img;
}
#endif

}  // namespace

bool png_supported() {
#ifdef DUALKD_HAVE_PNG
  return true;
#else
  return false;
#endif
}

bool is_image_file(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return true;
  return ext == ".png" && png_supported();
}

Image read_image(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
#ifdef DUALKD_HAVE_PNG
    return read_png(path);
#else
    throw DataError("PNG support not compiled in: " + path.string());
#endif
  }
  return read_pnm(path);
}

Mask read_mask(const std::filesystem::path& path) {
  const Image img = read_image(path);
  Mask mask(img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      double v = 0.0;
      for (std::size_t c = 0; c < img.channels; ++c) v = std::max(v, img.at(c, y, x));
      mask.at(y, x) = v > 0.0 ? 1 : 0;
    }
  }
  return mask;
}

void write_pnm(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw DataError("netpbm output needs 1 or 3 channels");
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << (image.channels == 1 ? "P5" : "P6") << '\n'
      << image.width << ' ' << image.height << "\n65535\n";
  std::vector<unsigned char> raw;
  raw.reserve(image.pixels.size() * 2);
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      for (std::size_t c = 0; c < image.channels; ++c) {
        const double v = std::clamp(image.at(c, y, x), 0.0, 1.0);
        const auto q = static_cast<unsigned>(std::lround(v * 65535.0));
        raw.push_back(static_cast<unsigned char>(q >> 8));
        raw.push_back(static_cast<unsigned char>(q & 0xFF));
      }
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

void write_mask_pnm(const std::filesystem::path& path, const Mask& mask) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P5\n" << mask.width << ' ' << mask.height << "\n255\n";
  for (std::uint8_t b : mask.bits) out.put(static_cast<char>(b ? 255 : 0));
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace dualkd::data
