#pragma once

// Macenko stain deconvolution and normalization.

#include <array>
#include <string>
#include <vector>

#include "wsikit/image.hpp"

namespace wsikit::stain {

inline constexpr double kDefaultIo = 255.0;
/// Intensities are clamped to this floor before taking the log.
inline constexpr double kClampFloor = 1.0;
inline constexpr double kDefaultAlpha = 1.0;
inline constexpr double kDefaultBeta = 0.15;
/// Percentile used for the per-stain robust maximum concentration.
inline constexpr double kMaxConcentrationPercentile = 99.0;
inline constexpr int kMinTissuePixels = 20;
inline constexpr double kDegenerateEigenRatio = 1e-8;
inline constexpr double kMinStainAngleDeg = 1.0;

/// Optical density per pixel and channel, row-major interleaved.
struct OdImage {
  int width = 0;
  int height = 0;
  std::vector<double> od;
  double io = kDefaultIo;

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

using Vec3 = std::array<double, 3>;

struct StainBasis {
  Vec3 h_vector{};
  Vec3 e_vector{};
  std::array<double, 2> max_concentrations{};
};

/// Per-pixel (hematoxylin, eosin) concentrations, row-major pairs.
struct ConcentrationMap {
  int width = 0;
  int height = 0;
  std::vector<double> conc;
};

struct NormalizationTarget {
  StainBasis basis;
  double io = kDefaultIo;
};

struct MacenkoParams {
  double alpha = kDefaultAlpha;
  double beta = kDefaultBeta;
};

OdImage rgb_to_od(const RgbPatch& patch, double io = kDefaultIo);
RgbPatch od_to_rgb(const OdImage& od);

/// Throws DegenerateStains / PreconditionError when the basis breaks its invariants.
void validate_basis(const StainBasis& basis);

/// Estimates the two stain directions from the extreme angles of the tissue
/// OD cloud projected onto its dominant plane. Throws InsufficientTissue or
/// DegenerateStains.
StainBasis estimate_stain_basis(const OdImage& od, double alpha = kDefaultAlpha, double beta = kDefaultBeta);

/// Least-squares unmixing through the basis pseudo-inverse, without clamping.
std::vector<double> unmix(const OdImage& od, const StainBasis& basis);
/// `unmix` followed by clamping negative concentrations to zero.
ConcentrationMap solve_concentrations(const OdImage& od, const StainBasis& basis);

RgbPatch normalize_patch(const RgbPatch& patch, const NormalizationTarget& target, double alpha = kDefaultAlpha,
                         double beta = kDefaultBeta);

NormalizationTarget fit_target(const RgbPatch& reference, double alpha = kDefaultAlpha, double beta = kDefaultBeta,
                               double io = kDefaultIo);

/// {"io", "h", "e", "max_c", "version": 1} with 17 significant digits.
std::string target_to_json(const NormalizationTarget& target);
/// `source` names the origin in error messages.
NormalizationTarget target_from_json(const std::string& text, const std::string& source = "<target>");
NormalizationTarget load_target(const std::string& path);
void save_target(const NormalizationTarget& target, const std::string& path);

/// Angle in degrees between two 3-vectors.
double angle_deg(const Vec3& a, const Vec3& b);

}  // namespace wsikit::stain
