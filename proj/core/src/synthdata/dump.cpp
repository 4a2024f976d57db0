#include "dualkd/synthdata/dump.hpp"

#include <fstream>
#include <sstream>

#include "dualkd/errors.hpp"
#include "dualkd/synthdata/image_io.hpp"

namespace dualkd::data {

namespace fs = std::filesystem;

namespace {

std::string file_stem_for(const Sample& s) {
  std::string stem = s.id;
  for (char& c : stem) {
    if (c == '/' || c == '\\' || c == ' ' || c == ',') c = '_';
  }
  return stem;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream in(line);
  std::string field;
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_dataset_dump(const fs::path& dir, const LabeledDataset& dataset) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  std::ofstream manifest(dir / "manifest.csv", std::ios::trunc);
  std::ofstream classes(dir / "classes.txt", std::ios::trunc);
  if (!manifest || !classes) throw DataError("cannot write dataset dump to " + dir.string());
  classes << "cross_class_anomalies " << (dataset.cross_class_anomalies ? 1 : 0) << '\n';
  for (const std::string& name : dataset.class_names) classes << name << '\n';

  manifest << "path,label,class_id,split,mask_path\n";
  for (const Sample& s : dataset.samples) {
    const std::string stem = file_stem_for(s);
    const std::string ext = s.image.channels == 1 ? ".pgm" : ".ppm";
    const fs::path image_rel = fs::path("images") / (stem + ext);
    write_pnm(dir / image_rel, s.image);
    std::string mask_rel;
    if (s.mask) {
      mask_rel = (fs::path("masks") / (stem + "_mask.pgm")).generic_string();
      write_mask_pnm(dir / mask_rel, *s.mask);
    }
    manifest << image_rel.generic_string() << ',' << s.label << ',' << s.class_id << ','
             << to_string(s.split) << ',' << mask_rel << '\n';
  }
  if (!manifest) throw DataError("write failed for " + (dir / "manifest.csv").string());
}

LabeledDataset read_dataset_dump(const fs::path& dir) {
  std::ifstream manifest(dir / "manifest.csv");
  std::ifstream classes(dir / "classes.txt");
  if (!manifest || !classes) throw DataError("no dataset dump in " + dir.string());
  LabeledDataset ds;
  std::string line;
  std::string key;
  int flag = 0;
  if (!(classes >> key >> flag) || key != "cross_class_anomalies") {
    throw DataError("malformed classes.txt in " + dir.string());
  }
  ds.cross_class_anomalies = flag != 0;
  std::getline(classes, line);
  while (std::getline(classes, line)) {
    if (!line.empty()) ds.class_names.push_back(line);
  }

  std::getline(manifest, line);
  if (line != "path,label,class_id,split,mask_path") {
    throw DataError("unexpected manifest header in " + dir.string());
  }
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 5) throw DataError("malformed manifest row: " + line);
    Sample s;
    s.id = fs::path(f[0]).stem().string();
    s.image = read_image(dir / f[0]);
    s.label = std::stoi(f[1]);
    s.class_id = std::stoi(f[2]);
    s.split = split_from_string(f[3]);
    s.defect_type = s.label == kNormal ? "good" : "defect";
    if (!f[4].empty()) s.mask = read_mask(dir / f[4]);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace dualkd::data
