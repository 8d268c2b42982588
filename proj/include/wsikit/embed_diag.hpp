#pragma once

// WSI-specific feature-collapse diagnostics.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace wsikit::diag {

inline constexpr std::size_t kDefaultPerWsi = 1000;
inline constexpr std::size_t kDefaultNumWsis = 10;
inline constexpr std::size_t kDefaultK = 10;

/// N feature vectors of dimension D tagged with their source WSI.
struct FeatureSet {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> vectors;  // n x d row-major
  std::vector<std::uint32_t> wsi_ids;
  std::map<std::uint32_t, std::string> manifest;

  const double* row(std::size_t i) const { return vectors.data() + i * d; }
  /// Throws PreconditionError when an invariant is broken.
  void validate() const;
  /// Appends one vector; registers a default manifest name for unseen ids.
  void push_back(const std::vector<double>& v, std::uint32_t wsi_id);
};

/// Per-WSI sampling: picks `n_wsis` WSIs and `per_wsi` features from each,
/// uniformly without replacement. Output is grouped by ascending WSI id.
FeatureSet sample_protocol(const FeatureSet& all, std::size_t per_wsi = kDefaultPerWsi,
                           std::size_t n_wsis = kDefaultNumWsis, std::uint64_t seed = 0);

/// Mean fraction of each point's k Euclidean nearest neighbours (self
/// excluded, ties to the lower index) that share its WSI.
double knn_wsi_purity(const FeatureSet& fs, std::size_t k = kDefaultK);

/// Mean silhouette coefficient using the WSI id as cluster label.
double silhouette_wsi(const FeatureSet& fs);

struct PcaResult {
  std::size_t out_dim = 0;
  std::vector<double> coords;      // n x out_dim
  std::vector<double> components;  // out_dim x d, unit rows
  std::vector<double> variances;   // per component, descending
};

/// Projection of the centred data onto the top principal axes. Each axis is
/// signed so its largest-magnitude loading is positive.
PcaResult pca_embed(const FeatureSet& fs, std::size_t out_dim);

}  // namespace wsikit::diag
