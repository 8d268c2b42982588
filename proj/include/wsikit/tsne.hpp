#pragma once

// Exact (O(n^2)) t-SNE.

#include <cstdint>
#include <vector>

#include "wsikit/embed_diag.hpp"

namespace wsikit::diag {

inline constexpr std::size_t kMaxTsnePoints = 20000;

struct TsneParams {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  std::uint64_t seed = 0;
  int exaggeration_iterations = 250;
  double exaggeration = 12.0;
  int momentum_switch_iteration = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  /// Per-coordinate delta-bar-delta step gains.
  bool adaptive_gains = true;
  double init_std = 1e-4;
  double entropy_tolerance = 1e-5;
  int max_bisection_steps = 50;
};

struct Embedding2D {
  std::vector<double> coords;       // n x 2
  std::vector<double> kl_history;   // [0] at initialisation, then one per iteration
  std::size_t size() const { return coords.size() / 2; }
};

struct Affinities {
  std::size_t n = 0;
  std::vector<double> p;          // symmetric, sums to 1
  std::vector<double> betas;      // Gaussian precision per point
  std::vector<double> entropies;  // achieved conditional entropy (nats) per point
};

/// Bandwidth search plus symmetrisation. Throws PerplexityTooLarge.
Affinities compute_affinities(const FeatureSet& fs, const TsneParams& params);

Embedding2D tsne_embed(const FeatureSet& fs, const TsneParams& params);

/// The KL cost and its analytic gradient for a given embedding (used by tests).
double tsne_cost(const Affinities& aff, const std::vector<double>& coords);
std::vector<double> tsne_cost_gradient(const Affinities& aff, const std::vector<double>& coords);

}  // namespace wsikit::diag
