#pragma once

// Virtual WSI cohorts: shared procedural tissue content, per-slide stain.

#include <array>
#include <cstdint>
#include <vector>

#include "wsikit/embed_diag.hpp"
#include "wsikit/image.hpp"
#include "wsikit/rng.hpp"
#include "wsikit/slide_pipeline.hpp"
#include "wsikit/stain_norm.hpp"

namespace wsikit::synth {

/// Canonical hematoxylin / eosin OD directions the per-slide bases are perturbed from.
stain::Vec3 canonical_h();
stain::Vec3 canonical_e();

struct CohortSpec {
  int n_wsis = 10;
  int patches_per_wsi = 1000;
  int patch_size = 32;
  int n_content_classes = 4;
  /// Maximum rotation (degrees) applied to each slide's stain basis.
  double stain_perturbation_deg = 15.0;
  /// Per-slide, per-stain concentration scale ~ U(lo, hi).
  double intensity_jitter_lo = 0.8;
  double intensity_jitter_hi = 1.2;
  /// Gaussian OD noise per pixel and channel.
  double noise_sigma = 0.02;
  double mpp = 0.5;
  std::uint64_t seed = 0;
  /// Adds a per-slide nucleus size bias on top of the chromatic confound.
  bool morphology_confound = false;

  void validate() const;  // throws InvalidSpec
};

struct WsiStain {
  stain::Vec3 h_vector{};
  stain::Vec3 e_vector{};
  std::array<double, 2> scale{1.0, 1.0};
  double rotation_deg = 0.0;
};

struct VirtualCohort {
  CohortSpec spec;
  std::vector<RgbPatch> patches;
  std::vector<std::uint32_t> wsi_ids;
  std::vector<int> content_classes;
  std::vector<WsiStain> stains;  // per WSI

  std::size_t size() const { return patches.size(); }
  /// Indices of one slide's patches, in generation order.
  std::vector<std::size_t> patches_of(std::uint32_t wsi) const;
  /// Grid layout used when a slide is stored as one raster.
  int mosaic_columns() const;
  slide::SlideRaster mosaic(std::uint32_t wsi) const;
};

/// Rotates a unit vector by `angle_deg` about `axis` (Rodrigues), clamps
/// negative components to zero and renormalises.
stain::Vec3 perturb(const stain::Vec3& v, const stain::Vec3& axis, double angle_deg);

VirtualCohort generate_cohort(const CohortSpec& spec);

/// Concentration fields (h, e per pixel) of one procedural patch before staining.
std::vector<double> content_concentrations(int content_class, int patch_size, bool enlarge_nuclei, double nucleus_bias,
                                           Rng& rng);

/// Canonical-stain reference: a tiles x tiles mosaic cycling through the
/// content classes. The shipped default normalization target is fit on it.
RgbPatch reference_image(int tiles_per_side = 4, int patch_size = 32, std::uint64_t seed = 0);

/// Raw-pixel descriptor: each patch resized to size x size, scaled to [0, 1].
diag::FeatureSet pixel_features(const std::vector<RgbPatch>& patches, const std::vector<std::uint32_t>& wsi_ids,
                                int size = 8);

}  // namespace wsikit::synth
