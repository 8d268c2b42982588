#include "wsikit/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wsikit/errors.hpp"
#include "wsikit/kernels.hpp"
#include "wsikit/rng.hpp"

namespace wsikit::diag {

namespace {

struct RowEntropy {
  double entropy;
  double sum;
};

// Conditional distribution of one row at precision beta; fills `prob` (unnormalised).
RowEntropy row_entropy(const double* dist, std::size_t n, std::size_t i, double beta, double dmin,
                       std::vector<double>& prob) {
  double sum = 0.0, weighted = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) {
      prob[j] = 0.0;
      continue;
    }
    const double shifted = dist[j] - dmin;
    prob[j] = std::exp(-beta * shifted);
    sum += prob[j];
    weighted += shifted * prob[j];
  }
  return {std::log(sum) + beta * weighted / sum, sum};
}

}  // namespace

Affinities compute_affinities(const FeatureSet& fs, const TsneParams& params) {
  fs.validate();
  const std::size_t n = fs.n;
  if (n < 10) throw PreconditionError("t-SNE needs at least 10 points");
  if (n > kMaxTsnePoints) throw TooManyPoints("exact t-SNE is capped at " + std::to_string(kMaxTsnePoints) + " points");
  if (!(params.perplexity > 0.0) || !(params.perplexity < static_cast<double>(n - 1) / 3.0))
    throw PerplexityTooLarge("perplexity must be in (0, (n-1)/3)");

  const auto dist = kernels::omp::sq_dist_matrix(fs.vectors, n, fs.d);
  const double target = std::log(params.perplexity);

  Affinities aff;
  aff.n = n;
  aff.betas.assign(n, 0.0);
  aff.entropies.assign(n, 0.0);
  std::vector<double> cond(n * n, 0.0);

  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel
  {
    std::vector<double> prob(n);
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t si = 0; si < sn; ++si) {
      const auto i = static_cast<std::size_t>(si);
      const double* row = dist.data() + i * n;
      double dmin = std::numeric_limits<double>::infinity(), dsum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        dmin = std::min(dmin, row[j]);
        dsum += row[j];
      }
      const double spread = dsum / static_cast<double>(n - 1) - dmin;
      double beta = spread > 0.0 ? 1.0 / spread : 1.0;
      double lo = 0.0, hi = std::numeric_limits<double>::infinity();
      RowEntropy re = row_entropy(row, n, i, beta, dmin, prob);
      for (int step = 0; step < params.max_bisection_steps; ++step) {
        const double diff = re.entropy - target;
        if (std::fabs(diff) < params.entropy_tolerance) break;
        if (diff > 0) {
          lo = beta;
          beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
        } else {
          hi = beta;
          beta = 0.5 * (beta + lo);
        }
        re = row_entropy(row, n, i, beta, dmin, prob);
      }
      aff.betas[i] = beta;
      aff.entropies[i] = re.entropy;
      for (std::size_t j = 0; j < n; ++j) cond[i * n + j] = prob[j] / re.sum;
    }
  }

  aff.p.assign(n * n, 0.0);
  const double denom = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = (cond[i * n + j] + cond[j * n + i]) / denom;
      aff.p[i * n + j] = v;
      aff.p[j * n + i] = v;
    }
  return aff;
}

double tsne_cost(const Affinities& aff, const std::vector<double>& coords) {
  return kernels::omp::tsne_kl(aff.p, coords, aff.n);
}

std::vector<double> tsne_cost_gradient(const Affinities& aff, const std::vector<double>& coords) {
  std::vector<double> grad(coords.size());
  kernels::omp::tsne_gradient(aff.p, coords, aff.n, 1.0, grad);
  return grad;
}

Embedding2D tsne_embed(const FeatureSet& fs, const TsneParams& params) {
  if (params.iterations < 0) throw PreconditionError("iterations must be >= 0");
  const Affinities aff = compute_affinities(fs, params);
  const std::size_t n = aff.n;

  Embedding2D out;
  out.coords.assign(2 * n, 0.0);
  const std::size_t pca_dim = std::min<std::size_t>(2, fs.d);
  const PcaResult pca = pca_embed(fs, pca_dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < pca_dim; ++c) out.coords[2 * i + c] = pca.coords[i * pca_dim + c];
  // Rescale to the requested standard deviation; fall back to seeded noise if PCA is flat.
  double var = 0.0;
  for (double v : out.coords) var += v * v;
  var /= static_cast<double>(out.coords.size());
  if (var > 0.0) {
    const double s = params.init_std / std::sqrt(var);
    for (double& v : out.coords) v *= s;
  } else {
    Rng rng(params.seed);
    for (double& v : out.coords) v = rng.normal(0.0, params.init_std);
  }

  std::vector<double> grad(2 * n), update(2 * n, 0.0), gains(2 * n, 1.0);
  out.kl_history.reserve(static_cast<std::size_t>(params.iterations) + 1);
  out.kl_history.push_back(kernels::omp::tsne_kl(aff.p, out.coords, n));
  for (int it = 0; it < params.iterations; ++it) {
    const double ex = it < params.exaggeration_iterations ? params.exaggeration : 1.0;
    const double momentum = it < params.momentum_switch_iteration ? params.initial_momentum : params.final_momentum;
    kernels::omp::tsne_gradient(aff.p, out.coords, n, ex, grad);
    for (std::size_t k = 0; k < 2 * n; ++k) {
      if (params.adaptive_gains) {
        const bool same_sign = (grad[k] > 0) == (update[k] > 0);
        gains[k] = same_sign ? gains[k] * 0.8 : gains[k] + 0.2;
        gains[k] = std::max(gains[k], 0.01);
      }
      update[k] = momentum * update[k] - params.learning_rate * gains[k] * grad[k];
      out.coords[k] += update[k];
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += out.coords[2 * i];
      my += out.coords[2 * i + 1];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.coords[2 * i] -= mx;
      out.coords[2 * i + 1] -= my;
    }
    out.kl_history.push_back(kernels::omp::tsne_kl(aff.p, out.coords, n));
  }
  return out;
}

}  // namespace wsikit::diag
