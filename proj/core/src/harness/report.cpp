#include "dualkd/harness/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dualkd/errors.hpp"
#include "json.hpp"

namespace dualkd::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json entry_json(const EntryMetrics& e) {
  json j = {{"name", e.name},
            {"num_test", e.num_test},
            {"image_auroc", e.image_auroc},
            {"image_ap", e.image_ap},
            {"image_f1max", e.image_f1max},
            {"encoder_auroc", e.encoder_auroc},
            {"decoder_auroc", e.decoder_auroc}};
  if (e.has_pixel) {
    j["pixel_auroc"] = e.pixel_auroc;
    j["pixel_ap"] = e.pixel_ap;
    j["pixel_f1max"] = e.pixel_f1max;
  }
  return j;
}

EntryMetrics entry_from(const json& j) {
  EntryMetrics e;
  e.name = j.at("name").get<std::string>();
  e.num_test = j.at("num_test").get<std::size_t>();
  e.image_auroc = j.at("image_auroc").get<double>();
  e.image_ap = j.at("image_ap").get<double>();
  e.image_f1max = j.at("image_f1max").get<double>();
  e.encoder_auroc = j.at("encoder_auroc").get<double>();
  e.decoder_auroc = j.at("decoder_auroc").get<double>();
  if (j.contains("pixel_auroc")) {
    e.has_pixel = true;
    e.pixel_auroc = j.at("pixel_auroc").get<double>();
    e.pixel_ap = j.at("pixel_ap").get<double>();
    e.pixel_f1max = j.at("pixel_f1max").get<double>();
  }
  return e;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace

std::string report_to_json(const MetricsReport& r) {
  json records = json::array();
  for (const ScoreRecord& s : r.records) {
    records.push_back({{"id", s.id},
                       {"entry", s.entry},
                       {"split", data::to_string(s.split)},
                       {"label", s.label},
                       {"L_SE", s.L_SE},
                       {"L_prime", s.L_prime},
                       {"L_doubleprime", s.L_doubleprime},
                       {"L_SD", s.L_SD},
                       {"AC_noisy_or", s.AC_noisy_or},
                       {"AC_plain_sum", s.AC_plain_sum},
                       {"score", s.score}});
  }
  json entries = json::array();
  for (const EntryMetrics& e : r.entries) entries.push_back(entry_json(e));
  const json j = {{"score_variant", r.score_variant},
                  {"fusion", r.fusion},
                  {"flags",
                   {{"use_L_SE", r.flags.use_L_SE},
                    {"use_L_SD", r.flags.use_L_SD},
                    {"use_CLS_m", r.flags.use_CLS_m},
                    {"use_noisy_or", r.flags.use_noisy_or}}},
                  {"entries", entries},
                  {"mean", entry_json(r.mean)},
                  {"records", records},
                  {"config_hash", r.config_hash},
                  {"wall_clock_seconds", r.wall_clock_seconds}};
  return j.dump(2) + "\n";
}

MetricsReport report_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    MetricsReport r;
    r.score_variant = j.at("score_variant").get<std::string>();
    r.fusion = j.at("fusion").get<std::string>();
    const json& f = j.at("flags");
    r.flags.use_L_SE = f.at("use_L_SE").get<bool>();
    r.flags.use_L_SD = f.at("use_L_SD").get<bool>();
    r.flags.use_CLS_m = f.at("use_CLS_m").get<bool>();
    r.flags.use_noisy_or = f.at("use_noisy_or").get<bool>();
    for (const json& e : j.at("entries")) r.entries.push_back(entry_from(e));
    r.mean = entry_from(j.at("mean"));
    for (const json& s : j.at("records")) {
      ScoreRecord x;
      x.id = s.at("id").get<std::string>();
      x.entry = s.at("entry").get<std::string>();
      x.split = data::split_from_string(s.at("split").get<std::string>());
      x.label = s.at("label").get<int>();
      x.L_SE = s.at("L_SE").get<double>();
      x.L_prime = s.at("L_prime").get<double>();
      x.L_doubleprime = s.at("L_doubleprime").get<double>();
      x.L_SD = s.at("L_SD").get<double>();
      x.AC_noisy_or = s.at("AC_noisy_or").get<double>();
      x.AC_plain_sum = s.at("AC_plain_sum").get<double>();
      x.score = s.at("score").get<double>();
      r.records.push_back(x);
    }
    r.config_hash = j.at("config_hash").get<std::string>();
    r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report JSON: ") + e.what());
  }
}

MetricsReport read_report(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read report " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return report_from_json(buf.str());
}

void write_scores_csv(const fs::path& path, std::span<const ScoreRecord> records) {
  std::string out =
      "id,entry,split,label,L_SE,L_prime,L_doubleprime,L_SD,AC_noisy_or,AC_plain_sum,score\n";
  for (const ScoreRecord& r : records) {
    out += r.id + "," + r.entry + "," + data::to_string(r.split) + "," +
           std::to_string(r.label) + "," + format_double(r.L_SE) + "," +
           format_double(r.L_prime) + "," + format_double(r.L_doubleprime) + "," +
           format_double(r.L_SD) + "," + format_double(r.AC_noisy_or) + "," +
           format_double(r.AC_plain_sum) + "," + format_double(r.score) + "\n";
  }
  write_text(path, out);
}

std::size_t Histogram::total() const {
  std::size_t t = 0;
  for (std::size_t c : normal) t += c;
  for (std::size_t c : anomalous) t += c;
  return t;
}

Histogram make_histogram(std::span<const double> scores, std::span<const int> metric_labels,
                         std::size_t bins) {
  if (scores.size() != metric_labels.size()) throw DataError("scores and labels differ in length");
  if (bins == 0) throw UsageError("histogram needs at least one bin");
  Histogram h;
  h.normal.assign(bins, 0);
  h.anomalous.assign(bins, 0);
  if (scores.empty()) return h;
  h.lo = *std::min_element(scores.begin(), scores.end());
  h.hi = *std::max_element(scores.begin(), scores.end());
  const double width = h.hi - h.lo;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    std::size_t b = 0;
    if (width > 0.0) {
      b = static_cast<std::size_t>((scores[i] - h.lo) / width * static_cast<double>(bins));
      b = std::min(b, bins - 1);
    }
    (metric_labels[i] == 1 ? h.anomalous : h.normal)[b] += 1;
  }
  return h;
}

void write_histogram_ppm(const fs::path& path, const Histogram& h) {
  constexpr std::size_t kBarWidth = 6;
  constexpr std::size_t kHeight = 120;
  const std::size_t bins = h.normal.size();
  const std::size_t width = bins * kBarWidth;
  std::size_t peak = 1;
  for (std::size_t b = 0; b < bins; ++b) peak = std::max({peak, h.normal[b], h.anomalous[b]});
  std::string pixels(width * kHeight * 3, static_cast<char>(255));
  for (std::size_t b = 0; b < bins; ++b) {
    const std::size_t hn = h.normal[b] * kHeight / peak;
    const std::size_t ha = h.anomalous[b] * kHeight / peak;
    for (std::size_t y = 0; y < kHeight; ++y) {
      const std::size_t level = kHeight - y;  // 1..kHeight from the bottom
      const bool in_n = level <= hn;
      const bool in_a = level <= ha;
      if (!in_n && !in_a) continue;
      const unsigned char r = in_a ? 220 : 40;
      const unsigned char g = 40;
      const unsigned char bl = in_n ? 220 : 40;
      for (std::size_t x = b * kBarWidth; x + 1 < (b + 1) * kBarWidth; ++x) {
        char* px = &pixels[(y * width + x) * 3];
        px[0] = static_cast<char>(r);
        px[1] = static_cast<char>(g);
        px[2] = static_cast<char>(bl);
      }
    }
  }
  write_text(path, "P6\n" + std::to_string(width) + " " + std::to_string(kHeight) + "\n255\n" +
                       pixels);
}

void write_histogram_csv(const fs::path& path, const Histogram& h) {
  std::string out = "bin,lo,hi,normal,anomalous\n";
  const std::size_t bins = h.normal.size();
  const double w = (h.hi - h.lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out += std::to_string(b) + "," + format_double(h.lo + w * static_cast<double>(b)) + "," +
           format_double(h.lo + w * static_cast<double>(b + 1)) + "," +
           std::to_string(h.normal[b]) + "," + std::to_string(h.anomalous[b]) + "\n";
  }
  write_text(path, out);
}

void emit_report(const MetricsReport& report, const fs::path& dir, EmitFormats formats) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  if (formats.json) write_text(dir / "report.json", report_to_json(report));
  if (formats.csv) write_scores_csv(dir / "scores.csv", report.records);
  if (formats.histogram) {
    const ScoreVariant variant = score_variant_from_string(report.score_variant);
    std::vector<int> normality;
    std::vector<double> enc, dec, fused;
    for (const ScoreRecord& r : report.records) {
      normality.push_back(r.label);
      enc.push_back(encoder_score(r, variant));
      dec.push_back(r.L_SD);
      fused.push_back(r.score);
    }
    const std::vector<int> labels = to_metric_labels(normality);
    const std::pair<const char*, const std::vector<double>*> series[] = {
        {"encoder", &enc}, {"decoder", &dec}, {"fused", &fused}};
    for (const auto& [name, values] : series) {
      const Histogram h = make_histogram(*values, labels);
      write_histogram_ppm(dir / (std::string("hist_") + name + ".ppm"), h);
      write_histogram_csv(dir / (std::string("hist_") + name + ".csv"), h);
    }
  }
}

}  // namespace dualkd::harness
