#pragma once

#include <filesystem>
#include <istream>
#include <stdexcept>
#include <string>

#include "wst/transport.hpp"

namespace wst::app {

/// Malformed point file; `line()` is 1-based.
class CsvError : public std::runtime_error {
 public:
  CsvError(int line, const std::string& what) : std::runtime_error(what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// One point per line, comma-separated coordinates. Blank lines and lines
/// starting with '#' are ignored; a first line with no numeric field is
/// taken as a header.
PointCloud read_point_csv(std::istream& in, const std::string& source = "<stream>");
PointCloud read_point_csv(const std::filesystem::path& path);

}  // namespace wst::app
