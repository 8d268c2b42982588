#pragma once

// Tissue masking, MPP-aware tiling, patch extraction and resampling.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wsikit/image.hpp"

namespace wsikit::slide {

/// Canonical resolution patches are planned against.
inline constexpr double kDefaultTargetMpp = 0.5;
inline constexpr int kDefaultTargetSize = 256;
inline constexpr double kDefaultMinTissueFraction = 0.5;
inline constexpr int kDefaultMaskDownsample = 16;
inline constexpr int kDefaultMedianRadius = 2;
/// In mask pixels.
inline constexpr int kDefaultMinRegionArea = 16;

struct SlideRaster {
  RgbPatch image;
  double mpp = 0.0;
  std::string name;

  int width() const { return image.width; }
  int height() const { return image.height; }
};

struct TissueMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // 0 or 1
  int downsample = 1;

  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  std::size_t count() const;
};

struct GridCoord {
  int x = 0;
  int y = 0;
  bool operator==(const GridCoord&) const = default;
};

struct PatchGrid {
  int extraction_size = 0;
  std::vector<GridCoord> coords;
  double target_mpp = kDefaultTargetMpp;
  int target_size = kDefaultTargetSize;
  double min_tissue_fraction = kDefaultMinTissueFraction;
  /// Grid cells considered before tissue filtering.
  std::size_t candidate_cells = 0;
};

struct TissueConfig {
  int downsample = kDefaultMaskDownsample;
  int median_radius = kDefaultMedianRadius;
  int min_region_area = kDefaultMinRegionArea;
};

/// Otsu threshold over a 256-bin histogram. Candidates span the occupied
/// value range; class 0 is `value <= t`; ties go to the smallest threshold.
int otsu_threshold(std::span<const std::uint64_t, 256> histogram);

/// Between-class variance objective shared by `otsu_threshold`, computed from
/// exact integer class statistics so any evaluation order yields the same bits.
double otsu_objective(std::uint64_t n0, std::uint64_t sum0, std::uint64_t n_total, std::uint64_t sum_total);

/// HSV saturation in [0, 255].
std::uint8_t saturation(double r, double g, double b);

TissueMask compute_tissue_mask(const SlideRaster& slide, int median_radius = kDefaultMedianRadius,
                               int min_region_area = kDefaultMinRegionArea, int downsample = kDefaultMaskDownsample);

/// Fraction of the slide pixels in [x, x+size)^2 whose mask pixel is tissue.
double tissue_fraction(const TissueMask& mask, int slide_width, int slide_height, int x, int y, int size);

/// round(target_size * target_mpp / slide_mpp), halves away from zero.
int extraction_size_for(double slide_mpp, double target_mpp, int target_size);

PatchGrid plan_patch_grid(const SlideRaster& slide, double target_mpp, int target_size, const TissueMask& mask,
                          double min_tissue_fraction = kDefaultMinTissueFraction);

/// Pixel-exact crop; the result keeps the source mpp.
RgbPatch crop(const RgbPatch& image, int x, int y, int width, int height);

std::vector<RgbPatch> extract_patches(const SlideRaster& slide, const PatchGrid& grid);

/// Bilinear resampling with half-pixel-centred sampling.
RgbPatch resize_bilinear(const RgbPatch& patch, int out_w, int out_h);
FloatImage resize_bilinear(const FloatImage& image, int out_w, int out_h);

/// Crops around the centre with offset floor((in - out) / 2). Throws CropTooLarge.
RgbPatch center_crop(const RgbPatch& patch, int out_w, int out_h);

struct SlideSummary {
  double mpp = 0.0;
  std::size_t patch_count = 0;
};

struct MppBin {
  double low = 0.0;
  double high = 0.0;
  std::size_t patch_count = 0;
};

/// Patch counts per MPP bin of width `bin_width`; only occupied bins, ascending.
std::vector<MppBin> mpp_histogram(std::span<const SlideSummary> slides, double bin_width);

}  // namespace wsikit::slide
