#pragma once

// Synthetic inputs shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "wsikit/embed_diag.hpp"
#include "wsikit/image.hpp"
#include "wsikit/rng.hpp"
#include "wsikit/stain_norm.hpp"

namespace fixtures {

using wsikit::stain::Vec3;

inline Vec3 unit(Vec3 v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / n, v[1] / n, v[2] / n};
}

inline double angle_deg(const Vec3& a, const Vec3& b) {
  const double c = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]);
  return std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / 3.14159265358979323846;
}

/// od = c1 * v1 + c2 * v2 + N(0, sigma), concentrations ~ U(cmin, cmax).
inline wsikit::stain::OdImage two_stain_od(int width, int height, const Vec3& v1, const Vec3& v2, double cmin,
                                           double cmax, double sigma, std::uint64_t seed) {
  wsikit::Rng rng(seed);
  wsikit::stain::OdImage od;
  od.width = width;
  od.height = height;
  od.od.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t p = 0; p < od.pixel_count(); ++p) {
    const double c1 = rng.uniform(cmin, cmax), c2 = rng.uniform(cmin, cmax);
    for (std::size_t k = 0; k < 3; ++k) od.od[3 * p + k] = std::max(0.0, c1 * v1[k] + c2 * v2[k] + sigma * rng.normal());
  }
  return od;
}

/// 8-bit two-stain patch rendered from random concentrations.
inline wsikit::RgbPatch two_stain_patch(int size, const Vec3& h, const Vec3& e, double cmax, std::uint64_t seed) {
  return wsikit::stain::od_to_rgb(two_stain_od(size, size, h, e, 0.0, cmax, 0.0, seed));
}

inline wsikit::RgbPatch random_patch(int w, int h, std::uint64_t seed) {
  wsikit::Rng rng(seed);
  wsikit::RgbPatch p(w, h);
  for (auto& v : p.pixels) v = static_cast<std::uint8_t>(rng.below(256));
  return p;
}

/// Points around `n_clusters` well-separated centres; cluster c gets wsi id c.
inline wsikit::diag::FeatureSet clusters(std::size_t n_clusters, std::size_t per_cluster, std::size_t d,
                                         double spread, double separation, std::uint64_t seed) {
  wsikit::Rng rng(seed);
  wsikit::diag::FeatureSet fs;
  fs.d = d;
  for (std::size_t c = 0; c < n_clusters; ++c) {
    std::vector<double> centre(d);
    for (double& v : centre) v = separation * rng.normal();
    for (std::size_t i = 0; i < per_cluster; ++i) {
      std::vector<double> x(d);
      for (std::size_t k = 0; k < d; ++k) x[k] = centre[k] + spread * rng.normal();
      fs.push_back(x, static_cast<std::uint32_t>(c));
    }
  }
  return fs;
}

/// Fresh directory under the system temp dir.
inline std::string temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("wsikit_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace fixtures
