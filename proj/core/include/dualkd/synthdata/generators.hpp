#pragma once

#include "dualkd/synthdata/dataset.hpp"

namespace dualkd::data {

// Texture classes (oriented sinusoidal gratings, class-specific frequency and
// orientation, random phase, uniform noise). Test anomalies carry one
// rectangular or elliptical intensity defect with an exact mask.
LabeledDataset gen_structural(const DatasetSpec& spec);

// Texture-pair classes: class k shows texture k on one side of a random
// straight cut and texture k+1 (mod n) on the other. Every texture occurs in
// some normal class when the even ids are normal, so a held-out class
// differs only in which textures co-occur. No masks; anomalies arise from the
// class roster.
LabeledDataset gen_semantic(const DatasetSpec& spec);
// The texture-pair classes of gen_semantic plus intensity defects (with
// masks) on the test images of the normal classes.
LabeledDataset gen_mixed(const DatasetSpec& spec);
// Dispatches on spec.kind (folder specs go through load_folder).
LabeledDataset generate(const DatasetSpec& spec);

}  // namespace dualkd::data
