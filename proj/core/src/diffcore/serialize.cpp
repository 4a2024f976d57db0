#include "dualkd/diffcore/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dualkd/errors.hpp"

namespace dualkd::diff {

namespace {

constexpr const char* kMagic = "# dualkd tensor container v1";

std::string shape_field(const Shape& shape) {
  if (shape.empty()) return "scalar";
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(shape[i]);
  }
  return out;
}

Shape parse_shape_field(const std::string& field) {
  if (field == "scalar") return {};
  Shape shape;
  std::stringstream in(field);
  std::string part;
  while (std::getline(in, part, 'x')) {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(part, &pos);
    if (pos != part.size() || v == 0) throw DataError("bad shape field: " + field);
    shape.push_back(static_cast<std::size_t>(v));
  }
  if (shape.empty()) throw DataError("bad shape field: " + field);
  return shape;
}

void put_le64(std::ostream& out, double value) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(bytes, 8);
}

double get_le64(const unsigned char* bytes) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

std::filesystem::path payload_path(const std::filesystem::path& stem) {
  return std::filesystem::path(stem.string() + ".bin");
}

std::filesystem::path header_path(const std::filesystem::path& stem) {
  return std::filesystem::path(stem.string() + ".hdr");
}

void save_tensors(const std::filesystem::path& stem, std::span<const NamedTensor> entries) {
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  std::ofstream bin(payload_path(stem), std::ios::binary | std::ios::trunc);
  std::ofstream hdr(header_path(stem), std::ios::trunc);
  if (!bin || !hdr) throw DataError("cannot write tensor container " + stem.string());
  hdr << kMagic << '\n';
  std::size_t offset = 0;
  for (const NamedTensor& e : entries) {
    if (e.name.empty() || e.name.find_first_of(" \t\r\n") != std::string::npos) {
      throw DataError("invalid tensor name '" + e.name + "'");
    }
    hdr << e.name << " f64 " << shape_field(e.tensor.shape()) << ' ' << offset << '\n';
    for (double v : e.tensor.values()) put_le64(bin, v);
    offset += e.tensor.numel();
  }
  if (!bin || !hdr) throw DataError("write failed for tensor container " + stem.string());
}

std::vector<NamedTensor> load_tensors(const std::filesystem::path& stem) {
  std::ifstream hdr(header_path(stem));
  if (!hdr) throw DataError("cannot open " + header_path(stem).string());
  std::ifstream bin(payload_path(stem), std::ios::binary);
  if (!bin) throw DataError("cannot open " + payload_path(stem).string());
  const std::string payload((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  if (payload.size() % 8 != 0) throw DataError("payload size is not a multiple of 8");
  const auto* bytes = reinterpret_cast<const unsigned char*>(payload.data());
  const std::size_t total = payload.size() / 8;

  std::string line;
  if (!std::getline(hdr, line) || line != kMagic) {
    throw DataError("missing container magic in " + header_path(stem).string());
  }
  std::vector<NamedTensor> out;
  while (std::getline(hdr, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string name, dtype, shape_text;
    std::size_t offset = 0;
    if (!(fields >> name >> dtype >> shape_text >> offset)) {
      throw DataError("malformed header line: " + line);
    }
    if (dtype != "f64") throw DataError("unsupported dtype " + dtype);
    Shape shape = parse_shape_field(shape_text);
    const std::size_t n = numel_of(shape);
    if (offset + n > total) throw DataError("entry " + name + " exceeds payload");
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = get_le64(bytes + 8 * (offset + i));
    out.push_back({name, Tensor::from(std::move(shape), std::move(values))});
  }
  return out;
}

std::uint64_t checksum(std::span<const NamedTensor> entries) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const NamedTensor& e : entries) {
    for (double v : e.tensor.values()) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xFF;
        h *= 0x100000001b3ull;
      }
    }
  }
  return h;
}

}  // namespace dualkd::diff
