#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "wst/image.hpp"

namespace wst::app {

/// Reads a PNG/JPEG, center-crops it to a square (aspect preserved) and
/// resizes it to size×size. Throws LoadError if the file cannot be decoded.
Image load_image(const std::filesystem::path& path, int64_t size);

/// 8-bit RGB PNG; pixel values are rounded to the nearest level.
void save_png(const Image& image, const std::filesystem::path& path);

/// Lays `cells` out row by row with a label column on the left and a label
/// row on top, and writes the result as a PNG. All cells are scaled to the
/// size of the first one.
void write_grid_png(const std::vector<std::vector<Image>>& cells,
                    const std::vector<std::string>& row_labels,
                    const std::vector<std::string>& column_labels,
                    const std::filesystem::path& path);

}  // namespace wst::app
