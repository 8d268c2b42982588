#include <algorithm>
#include <cmath>
#include <vector>

#include "wsikit/errors.hpp"
#include "wsikit/image.hpp"
#include "wsikit/slide_pipeline.hpp"

namespace wsikit {

RgbPatch::RgbPatch(int w, int h, std::optional<double> mpp_)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0), mpp(mpp_) {
  if (w < 1 || h < 1) throw PreconditionError("image dimensions must be >= 1");
}

RgbPatch::RgbPatch(int w, int h, std::vector<std::uint8_t> px, std::optional<double> mpp_)
    : width(w), height(h), pixels(std::move(px)), mpp(mpp_) {
  if (w < 1 || h < 1) throw PreconditionError("image dimensions must be >= 1");
  if (pixels.size() != static_cast<std::size_t>(w) * h * 3)
    throw PreconditionError("pixel buffer does not match width x height x 3");
}

namespace slide {

namespace {

struct Tap {
  int i0;
  int i1;
  double f;
};

std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int i0 = static_cast<int>(std::floor(src));
    const int i1 = std::min(i0 + 1, in - 1);
    taps[static_cast<std::size_t>(o)] = {i0, i1, src - i0};
  }
  return taps;
}

template <class Get>
double bilinear(const Tap& tx, const Tap& ty, Get&& get) {
  const double top = (1.0 - tx.f) * get(tx.i0, ty.i0) + tx.f * get(tx.i1, ty.i0);
  const double bottom = (1.0 - tx.f) * get(tx.i0, ty.i1) + tx.f * get(tx.i1, ty.i1);
  return (1.0 - ty.f) * top + ty.f * bottom;
}

}  // namespace

RgbPatch resize_bilinear(const RgbPatch& patch, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw PreconditionError("resize: output dimensions must be >= 1");
  const auto tx = bilinear_taps(patch.width, out_w);
  const auto ty = bilinear_taps(patch.height, out_h);
  std::optional<double> mpp;
  if (patch.mpp) mpp = *patch.mpp * (static_cast<double>(patch.width) / out_w);
  RgbPatch out(out_w, out_h, mpp);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = bilinear(tx[static_cast<std::size_t>(x)], ty[static_cast<std::size_t>(y)],
                                  [&](int sx, int sy) { return static_cast<double>(patch.at(sx, sy)[c]); });
        out.at(x, y)[c] = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
      }
    }
  }
  return out;
}

FloatImage resize_bilinear(const FloatImage& image, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw PreconditionError("resize: output dimensions must be >= 1");
  const auto tx = bilinear_taps(image.width, out_w);
  const auto ty = bilinear_taps(image.height, out_h);
  FloatImage out(out_w, out_h, image.channels);
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x)
      for (int c = 0; c < image.channels; ++c)
        out.at(x, y, c) = bilinear(tx[static_cast<std::size_t>(x)], ty[static_cast<std::size_t>(y)],
                                   [&](int sx, int sy) { return image.at(sx, sy, c); });
  return out;
}

RgbPatch crop(const RgbPatch& image, int x, int y, int width, int height) {
  if (x < 0 || y < 0 || width < 1 || height < 1 || x + width > image.width || y + height > image.height)
    throw CropTooLarge("crop window exceeds the image");
  RgbPatch out(width, height, image.mpp);
  const std::size_t row_bytes = static_cast<std::size_t>(width) * 3;
  for (int r = 0; r < height; ++r) std::copy_n(image.at(x, y + r), row_bytes, out.at(0, r));
  return out;
}

RgbPatch center_crop(const RgbPatch& patch, int out_w, int out_h) {
  if (out_w > patch.width || out_h > patch.height)
    throw CropTooLarge("center crop " + std::to_string(out_w) + "x" + std::to_string(out_h) + " exceeds " +
                       std::to_string(patch.width) + "x" + std::to_string(patch.height));
  return crop(patch, (patch.width - out_w) / 2, (patch.height - out_h) / 2, out_w, out_h);
}

}  // namespace slide
}  // namespace wsikit
