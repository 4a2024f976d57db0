#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dualkd/harness/evaluate.hpp"

namespace dualkd::harness {

std::string report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& text);
MetricsReport read_report(const std::filesystem::path& path);

// Header: id,entry,split,label,L_SE,L_prime,L_doubleprime,L_SD,AC_noisy_or,AC_plain_sum,score
void write_scores_csv(const std::filesystem::path& path, std::span<const ScoreRecord> records);

// Two-class histogram over the observed score range.
struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> normal;
  std::vector<std::size_t> anomalous;

  std::size_t total() const;
};

inline constexpr std::size_t kHistogramBins = 50;

// metric_labels: 1 = anomalous.
Histogram make_histogram(std::span<const double> scores, std::span<const int> metric_labels,
                         std::size_t bins = kHistogramBins);
// Binary PPM, normal counts in blue, anomalous in red, overlap in magenta.
void write_histogram_ppm(const std::filesystem::path& path, const Histogram& h);
void write_histogram_csv(const std::filesystem::path& path, const Histogram& h);

struct EmitFormats {
  bool json = true;
  bool csv = true;
  bool histogram = true;
};

// Writes report.json, scores.csv and hist_{encoder,decoder,fused}.{ppm,csv}
// into `dir`.
void emit_report(const MetricsReport& report, const std::filesystem::path& dir,
                 EmitFormats formats = {});

}  // namespace dualkd::harness
