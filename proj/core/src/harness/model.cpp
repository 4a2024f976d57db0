#include "dualkd/harness/model.hpp"

#include <fstream>

#include "dualkd/errors.hpp"

namespace dualkd::harness {

namespace {

std::string extents(const diff::Shape& shape) {
  if (shape.empty()) return "scalar";
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(shape[i]);
  }
  return out;
}

}  // namespace

Model::Model(const ExperimentConfig& config)
    : teacher(config.teacher),
      encoder(config.encoder),
      decoder(config.decoder),
      bottleneck(config.decoder.embed_dim, config.bottleneck) {
  if (!config.teacher_weights.empty()) {
    vit::assign_params(teacher.parameters(), diff::load_tensors(config.teacher_weights));
  }
  teacher.set_trainable(false);
}

std::vector<diff::NamedTensor> Model::teacher_parameters() const {
  return teacher.parameters("teacher.");
}

std::vector<diff::NamedTensor> Model::encoder_parameters() const {
  return encoder.parameters("encoder.");
}

std::vector<diff::NamedTensor> Model::decoder_parameters() const {
  auto out = decoder.parameters("decoder.");
  for (auto& p : bottleneck.parameters("bottleneck.")) out.push_back(p);
  return out;
}

std::vector<diff::NamedTensor> Model::all_parameters() const {
  auto out = teacher_parameters();
  for (auto& p : encoder_parameters()) out.push_back(p);
  for (auto& p : decoder_parameters()) out.push_back(p);
  return out;
}

std::uint64_t Model::teacher_checksum() const {
  const auto params = teacher_parameters();
  return diff::checksum(params);
}

void write_manifest(const std::filesystem::path& path,
                    const std::vector<diff::NamedTensor>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "name,network,block,role,shape\n";
  for (const diff::NamedTensor& e : entries) {
    const std::string& n = e.name;
    const auto dot = n.find('.');
    const std::string network = n.substr(0, dot);
    std::string rest = dot == std::string::npos ? "" : n.substr(dot + 1);
    std::string block = "0";
    if (rest.rfind("blocks.", 0) == 0) {
      rest = rest.substr(7);
      const auto d2 = rest.find('.');
      block = rest.substr(0, d2);
      rest = rest.substr(d2 + 1);
    }
    out << n << ',' << network << ',' << block << ',' << rest << ','
        << extents(e.tensor.shape()) << '\n';
  }
}

}  // namespace dualkd::harness
