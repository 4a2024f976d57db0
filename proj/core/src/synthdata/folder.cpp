#include "dualkd/synthdata/folder.hpp"

#include <algorithm>
#include <map>

#include "dualkd/errors.hpp"
#include "dualkd/synthdata/image_io.hpp"

namespace dualkd::data {

namespace fs = std::filesystem;

namespace {

std::vector<fs::path> sorted_children(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (directories ? entry.is_directory() : (entry.is_regular_file() && is_image_file(entry.path()))) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Image prepare(Image img, const FolderOptions& options) {
  if (options.channels != 0) img = convert_channels(img, options.channels);
  if (options.image_size != 0) img = resize_bilinear(img, options.image_size, options.image_size);
  return img;
}

// Index of mask files under ground_truth/<defect>/ keyed by image stem.
std::map<std::string, fs::path> mask_index(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  for (const fs::path& p : sorted_children(dir, false)) {
    const std::string stem = p.stem().string();
    const auto pos = stem.find("_mask");
    out.emplace(pos == std::string::npos ? stem : stem.substr(0, pos), p);
  }
  return out;
}

void load_category(const fs::path& dir, int class_id, const FolderOptions& options,
                   LabeledDataset& ds) {
  const std::string category = dir.filename().string();
  std::size_t train_index = 0;
  for (const fs::path& p : sorted_children(dir / "train" / "good", false)) {
    Sample s;
    s.id = category + "/train/good/" + p.stem().string();
    s.image = prepare(read_image(p), options);
    s.label = kNormal;
    s.class_id = class_id;
    s.split = Split::kTrain;
    s.defect_type = "good";
    ds.samples.push_back(std::move(s));
    ++train_index;
  }
  if (train_index == 0) ds.warnings.push_back(category + ": no training images");

  for (const fs::path& defect_dir : sorted_children(dir / "test", true)) {
    const std::string defect = defect_dir.filename().string();
    const bool normal = defect == "good";
    const auto masks = normal ? std::map<std::string, fs::path>{}
                              : mask_index(dir / "ground_truth" / defect);
    for (const fs::path& p : sorted_children(defect_dir, false)) {
      Sample s;
      s.id = category + "/test/" + defect + "/" + p.stem().string();
      s.image = prepare(read_image(p), options);
      s.label = normal ? kNormal : kAnomalous;
      s.class_id = class_id;
      s.split = Split::kTest;
      s.defect_type = defect;
      if (!normal) {
        auto it = masks.find(p.stem().string());
        if (it == masks.end()) {
          ds.warnings.push_back("missing mask for " + s.id);
        } else {
          s.mask = resize_nearest(read_mask(it->second), s.image.height, s.image.width);
        }
      }
      ds.samples.push_back(std::move(s));
    }
  }
}

}  // namespace

LabeledDataset load_folder(const fs::path& root_in, FolderOptions options) {
  if (!fs::is_directory(root_in)) throw DataError("dataset root not found: " + root_in.string());
  fs::path root = fs::absolute(root_in).lexically_normal();
  if (root.filename().empty()) root = root.parent_path();
  LabeledDataset ds;
  std::vector<fs::path> categories;
  if (fs::is_directory(root / "train")) {
    categories.push_back(root);
  } else {
    for (const fs::path& p : sorted_children(root, true)) {
      if (fs::is_directory(p / "train")) categories.push_back(p);
    }
  }
  if (categories.empty()) {
    throw DataError("no <category>/train directories under " + root.string());
  }
  for (std::size_t k = 0; k < categories.size(); ++k) {
    ds.class_names.push_back(categories[k].filename().string());
    load_category(categories[k], static_cast<int>(k), options, ds);
  }
  return ds;
}

}  // namespace dualkd::data
