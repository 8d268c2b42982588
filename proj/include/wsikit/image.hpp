#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace wsikit {

/// H x W x 3 8-bit image, row-major interleaved RGB. The unit of all processing.
struct RgbPatch {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
  std::optional<double> mpp;

  RgbPatch() = default;
  RgbPatch(int w, int h, std::optional<double> mpp_ = std::nullopt);
  RgbPatch(int w, int h, std::vector<std::uint8_t> px, std::optional<double> mpp_ = std::nullopt);

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::uint8_t* at(int x, int y) { return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  const std::uint8_t* at(int x, int y) const {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  bool operator==(const RgbPatch& o) const {
    return width == o.width && height == o.height && pixels == o.pixels;
  }
};

/// Real-valued H x W x C image (row-major interleaved); used for augmented views.
struct FloatImage {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<double> data;

  FloatImage() = default;
  FloatImage(int w, int h, int c = 3)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, 0.0) {}
  double& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  double at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

}  // namespace wsikit
