#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ssae/probe.hpp"

namespace ssae {

/// One method's per-block probe accuracies (block 1 first).
struct ReportRow {
  std::string method;
  std::vector<double> accuracies;

  double average() const;
  bool operator==(const ReportRow&) const = default;
};

/// Per-block table: columns method, conv1..convK, average.
struct BlockReport {
  std::vector<ReportRow> rows;
  /// 1-based block index of each accuracy column; empty means 1..k.
  std::vector<int> blocks;

  std::size_t block_count() const;
  int block_label(std::size_t column) const;
  bool operator==(const BlockReport&) const = default;
};

struct CurvePoint {
  std::string method;
  double fraction = 0.0;
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  double accuracy = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool operator==(const CurvePoint&) const = default;
};

CurvePoint curve_point(const std::string& method, const ProbeResult& r);

/// Ablation comparison: pretext accuracy and probe accuracy per variant,
/// with deltas against the first row.
struct AblationRow {
  std::string variant;
  double pretext_accuracy = 0.0;
  double probe_accuracy = 0.0;
  bool operator==(const AblationRow&) const = default;
};

std::string block_report_csv(const BlockReport& report);
std::string block_report_markdown(const BlockReport& report);
BlockReport parse_block_report_csv(const std::string& text);

std::string curve_csv(const std::vector<CurvePoint>& points);
std::string curve_markdown(const std::vector<CurvePoint>& points);
std::vector<CurvePoint> parse_curve_csv(const std::string& text);

std::string ablation_csv(const std::vector<AblationRow>& rows);
std::string ablation_markdown(const std::vector<AblationRow>& rows);

/// Writes <stem>.md and <stem>.csv next to each other.
void emit_report(const BlockReport& report, const std::filesystem::path& stem);
void emit_curve(const std::vector<CurvePoint>& points, const std::filesystem::path& stem);
void emit_ablation(const std::vector<AblationRow>& rows, const std::filesystem::path& stem);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace ssae
