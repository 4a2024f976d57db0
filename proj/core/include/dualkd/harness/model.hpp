#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dualkd/diffcore/serialize.hpp"
#include "dualkd/harness/config.hpp"
#include "dualkd/vitnet/bottleneck.hpp"
#include "dualkd/vitnet/vit.hpp"

namespace dualkd::harness {

// Teacher, both students and the bottleneck of one experiment.
struct Model {
  vit::VisionTransformer teacher;
  vit::VisionTransformer encoder;
  vit::VisionTransformer decoder;
  vit::NoisyBottleneck bottleneck;

  // Seeded initialization; loads config.teacher_weights when set. The
  // teacher is frozen.
  explicit Model(const ExperimentConfig& config);

  // Prefixed "teacher.", "encoder.", "decoder.", "bottleneck.".
  std::vector<diff::NamedTensor> teacher_parameters() const;
  std::vector<diff::NamedTensor> encoder_parameters() const;
  std::vector<diff::NamedTensor> decoder_parameters() const;  // decoder + bottleneck
  std::vector<diff::NamedTensor> all_parameters() const;

  std::uint64_t teacher_checksum() const;
};

// One line per tensor: name, network, block (0 outside blocks), role, shape.
void write_manifest(const std::filesystem::path& path,
                    const std::vector<diff::NamedTensor>& entries);

}  // namespace dualkd::harness
