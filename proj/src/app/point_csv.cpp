#include "wst/app/point_csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace wst::app {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

bool parse_number(const std::string& text, double& value) {
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  return ec == std::errc() && ptr == end && std::isfinite(value);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

PointCloud read_point_csv(std::istream& in, const std::string& source) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  bool seen_content = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split(line);
    std::vector<double> row;
    row.reserve(fields.size());
    int numeric = 0;
    for (const auto& f : fields) {
      double v = 0.0;
      if (parse_number(f, v)) ++numeric;
      row.push_back(v);
    }
    if (!seen_content && numeric == 0) {
      seen_content = true;  // header
      continue;
    }
    seen_content = true;
    if (numeric != static_cast<int>(fields.size()))
      throw CsvError(line_no, source + ":" + std::to_string(line_no) + ": non-numeric field");
    if (!rows.empty() && row.size() != rows.front().size())
      throw CsvError(line_no, source + ":" + std::to_string(line_no) + ": expected " +
                                  std::to_string(rows.front().size()) + " fields, found " +
                                  std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw CsvError(line_no, source + ": no points");
  return PointCloud::from_rows(rows);
}

PointCloud read_point_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CsvError(0, "cannot open '" + path.string() + "'");
  return read_point_csv(in, path.string());
}

}  // namespace wst::app
