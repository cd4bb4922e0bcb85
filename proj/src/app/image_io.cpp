#include "wst/app/image_io.hpp"

#include <algorithm>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "wst/errors.hpp"

namespace wst::app {

namespace {

constexpr int kLabelWidth = 96;
constexpr int kLabelHeight = 18;
constexpr int kGap = 2;

// 3×H×W float [0,1] -> H×W BGR uint8
cv::Mat to_mat(const Image& image) {
  auto hwc = (image.pixels() * 255.0).round().clamp(0, 255).to(torch::kUInt8).permute({1, 2, 0}).contiguous();
  cv::Mat rgb(static_cast<int>(image.height()), static_cast<int>(image.width()), CV_8UC3,
              hwc.data_ptr<uint8_t>());
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

Image from_mat(const cv::Mat& bgr) {
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  auto t = torch::from_blob(rgb.data, {rgb.rows, rgb.cols, 3}, torch::kUInt8).clone();
  return Image(t.permute({2, 0, 1}).to(torch::kFloat32) / 255.0);
}

void write_mat(const cv::Mat& mat, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), mat)) throw LoadError("cannot write image '" + path.string() + "'");
}

}  // namespace

Image load_image(const std::filesystem::path& path, int64_t size) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw LoadError("cannot decode image '" + path.string() + "'");
  const int side = std::min(bgr.rows, bgr.cols);
  cv::Rect crop((bgr.cols - side) / 2, (bgr.rows - side) / 2, side, side);
  cv::Mat square = bgr(crop).clone();
  if (side != size) {
    cv::Mat resized;
    const int interp = side > size ? cv::INTER_AREA : cv::INTER_CUBIC;
    cv::resize(square, resized, cv::Size(static_cast<int>(size), static_cast<int>(size)), 0, 0, interp);
    square = resized;
  }
  return from_mat(square);
}

void save_png(const Image& image, const std::filesystem::path& path) { write_mat(to_mat(image), path); }

void write_grid_png(const std::vector<std::vector<Image>>& cells,
                    const std::vector<std::string>& row_labels,
                    const std::vector<std::string>& column_labels,
                    const std::filesystem::path& path) {
  if (cells.empty() || cells.front().empty()) throw std::invalid_argument("grid needs at least one cell");
  const int rows = static_cast<int>(cells.size());
  int cols = 0;
  for (const auto& row : cells) cols = std::max(cols, static_cast<int>(row.size()));
  const int cell_h = static_cast<int>(cells.front().front().height());
  const int cell_w = static_cast<int>(cells.front().front().width());

  const int width = kLabelWidth + cols * (cell_w + kGap) + kGap;
  const int height = kLabelHeight + rows * (cell_h + kGap) + kGap;
  cv::Mat canvas(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  const auto font = cv::FONT_HERSHEY_SIMPLEX;
  const double scale = 0.4;

  for (int c = 0; c < cols && c < static_cast<int>(column_labels.size()); ++c) {
    const int x = kLabelWidth + kGap + c * (cell_w + kGap);
    cv::putText(canvas, column_labels[c], cv::Point(x, kLabelHeight - 5), font, scale,
                cv::Scalar(0, 0, 0), 1, cv::LINE_8);
  }
  for (int r = 0; r < rows; ++r) {
    const int y = kLabelHeight + kGap + r * (cell_h + kGap);
    if (r < static_cast<int>(row_labels.size()))
      cv::putText(canvas, row_labels[r], cv::Point(4, y + cell_h / 2 + 4), font, scale,
                  cv::Scalar(0, 0, 0), 1, cv::LINE_8);
    for (int c = 0; c < static_cast<int>(cells[r].size()); ++c) {
      cv::Mat tile = to_mat(cells[r][c]);
      if (tile.rows != cell_h || tile.cols != cell_w) {
        cv::Mat resized;
        cv::resize(tile, resized, cv::Size(cell_w, cell_h), 0, 0, cv::INTER_NEAREST);
        tile = resized;
      }
      const int x = kLabelWidth + kGap + c * (cell_w + kGap);
      tile.copyTo(canvas(cv::Rect(x, y, cell_w, cell_h)));
    }
  }
  write_mat(canvas, path);
}

}  // namespace wst::app
