#include "ssae/report.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ssae {

namespace {

// Shortest text that reads back to the same double.
std::string exact(double v) {
  char buf[64];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * v);
  return buf;
}

std::string signed_points(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.1f", 100.0 * v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::runtime_error("report CSV: not a number '" + s + "'");
  }
  if (used != s.size()) throw std::runtime_error("report CSV: not a number '" + s + "'");
  return v;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

void check_method_name(const std::string& name) {
  if (name.find_first_of(",\n|") != std::string::npos) {
    throw std::invalid_argument("report: method name may not contain ',', '|' or newlines");
  }
}

} // namespace

double ReportRow::average() const {
  if (accuracies.empty()) return 0.0;
  double s = 0.0;
  for (double a : accuracies) s += a;
  return s / static_cast<double>(accuracies.size());
}

std::size_t BlockReport::block_count() const {
  if (rows.empty()) return 0;
  const std::size_t k = rows.front().accuracies.size();
  for (const auto& r : rows) {
    if (r.accuracies.size() != k) throw std::invalid_argument("report: rows disagree on the number of blocks");
  }
  if (!blocks.empty() && blocks.size() != k) throw std::invalid_argument("report: block labels do not match the columns");
  return k;
}

int BlockReport::block_label(std::size_t column) const {
  return blocks.empty() ? static_cast<int>(column) + 1 : blocks.at(column);
}

CurvePoint curve_point(const std::string& method, const ProbeResult& r) {
  const auto [lo, hi] = wilson_interval(r.test_accuracy, r.test_count);
  return {method, r.label_fraction, r.train_count, r.test_count, r.test_accuracy, lo, hi};
}

std::string block_report_csv(const BlockReport& report) {
  const std::size_t k = report.block_count();
  std::string out = "method";
  for (std::size_t b = 0; b < k; ++b) out += ",conv" + std::to_string(report.block_label(b));
  out += ",average\n";
  for (const auto& r : report.rows) {
    check_method_name(r.method);
    out += r.method;
    for (double a : r.accuracies) out += "," + exact(a);
    out += "," + exact(r.average()) + "\n";
  }
  return out;
}

std::string block_report_markdown(const BlockReport& report) {
  const std::size_t k = report.block_count();
  std::string out = "| Method |";
  std::string rule = "|---|";
  for (std::size_t b = 0; b < k; ++b) {
    out += " conv" + std::to_string(report.block_label(b)) + " |";
    rule += "---:|";
  }
  out += " Average |\n" + rule + "---:|\n";
  for (const auto& r : report.rows) {
    check_method_name(r.method);
    out += "| " + r.method + " |";
    for (double a : r.accuracies) out += " " + percent(a) + " |";
    out += " " + percent(r.average()) + " |\n";
  }
  return out;
}

BlockReport parse_block_report_csv(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw std::runtime_error("report CSV: empty");
  const auto header = split_csv_line(lines[0]);
  if (header.size() < 2 || header.front() != "method" || header.back() != "average") {
    throw std::runtime_error("report CSV: unexpected header");
  }
  const std::size_t k = header.size() - 2;
  BlockReport rep;
  bool default_labels = true;
  for (std::size_t b = 1; b <= k; ++b) {
    const std::string& col = header[b];
    int index = 0;
    const auto [end, ec] = std::from_chars(col.data() + std::min<std::size_t>(4, col.size()), col.data() + col.size(), index);
    if (col.rfind("conv", 0) != 0 || ec != std::errc() || end != col.data() + col.size() || index < 1) {
      throw std::runtime_error("report CSV: unexpected column " + col);
    }
    rep.blocks.push_back(index);
    default_labels = default_labels && index == static_cast<int>(b);
  }
  if (default_labels) rep.blocks.clear();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split_csv_line(lines[i]);
    if (cells.size() != header.size()) throw std::runtime_error("report CSV: ragged row " + std::to_string(i));
    ReportRow row{cells[0], {}};
    for (std::size_t b = 1; b <= k; ++b) row.accuracies.push_back(parse_number(cells[b]));
    if (parse_number(cells.back()) != row.average()) {
      throw std::runtime_error("report CSV: average column disagrees with its row");
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

std::string curve_csv(const std::vector<CurvePoint>& points) {
  std::string out = "method,fraction,train_count,test_count,accuracy,ci_low,ci_high\n";
  for (const auto& p : points) {
    check_method_name(p.method);
    out += p.method + "," + exact(p.fraction) + "," + std::to_string(p.train_count) + "," +
           std::to_string(p.test_count) + "," + exact(p.accuracy) + "," + exact(p.ci_low) + "," + exact(p.ci_high) +
           "\n";
  }
  return out;
}

std::string curve_markdown(const std::vector<CurvePoint>& points) {
  std::string out = "| Method | Labels used | Train items | Accuracy | 95% interval |\n|---|---:|---:|---:|---|\n";
  for (const auto& p : points) {
    out += "| " + p.method + " | " + percent(p.fraction) + "% | " + std::to_string(p.train_count) + " | " +
           percent(p.accuracy) + " | " + percent(p.ci_low) + " to " + percent(p.ci_high) + " |\n";
  }
  return out;
}

std::vector<CurvePoint> parse_curve_csv(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0] != "method,fraction,train_count,test_count,accuracy,ci_low,ci_high") {
    throw std::runtime_error("curve CSV: unexpected header");
  }
  std::vector<CurvePoint> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto c = split_csv_line(lines[i]);
    if (c.size() != 7) throw std::runtime_error("curve CSV: ragged row " + std::to_string(i));
    out.push_back({c[0], parse_number(c[1]), static_cast<std::size_t>(parse_number(c[2])),
                   static_cast<std::size_t>(parse_number(c[3])), parse_number(c[4]), parse_number(c[5]),
                   parse_number(c[6])});
  }
  return out;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "variant,pretext_accuracy,probe_accuracy,pretext_delta,probe_delta\n";
  for (const auto& r : rows) {
    check_method_name(r.variant);
    out += r.variant + "," + exact(r.pretext_accuracy) + "," + exact(r.probe_accuracy) + "," +
           exact(r.pretext_accuracy - rows.front().pretext_accuracy) + "," +
           exact(r.probe_accuracy - rows.front().probe_accuracy) + "\n";
  }
  return out;
}

std::string ablation_markdown(const std::vector<AblationRow>& rows) {
  std::string out = "| Variant | Pretext acc. | Probe acc. | Delta probe |\n|---|---:|---:|---:|\n";
  for (const auto& r : rows) {
    out += "| " + r.variant + " | " + percent(r.pretext_accuracy) + " | " + percent(r.probe_accuracy) + " | " +
           signed_points(r.probe_accuracy - rows.front().probe_accuracy) + " |\n";
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("short write to " + path.string());
}

void emit_report(const BlockReport& report, const std::filesystem::path& stem) {
  write_text(std::filesystem::path(stem).replace_extension(".csv"), block_report_csv(report));
  write_text(std::filesystem::path(stem).replace_extension(".md"), block_report_markdown(report));
}

void emit_curve(const std::vector<CurvePoint>& points, const std::filesystem::path& stem) {
  write_text(std::filesystem::path(stem).replace_extension(".csv"), curve_csv(points));
  write_text(std::filesystem::path(stem).replace_extension(".md"), curve_markdown(points));
}

void emit_ablation(const std::vector<AblationRow>& rows, const std::filesystem::path& stem) {
  if (rows.empty()) throw std::invalid_argument("emit_ablation: no rows");
  write_text(std::filesystem::path(stem).replace_extension(".csv"), ablation_csv(rows));
  write_text(std::filesystem::path(stem).replace_extension(".md"), ablation_markdown(rows));
}

} // namespace ssae
