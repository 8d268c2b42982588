#pragma once

// Data-parallel inner loops. Every kernel exists twice: a plain serial
// reference and an OpenMP version. Both call the same per-row routine, so
// results are bitwise identical for any thread count; reductions across rows
// are always done serially in row order.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace wsikit::kernels {

#define WSIKIT_KERNEL_DECLS                                                                        \
  /* Row-major n x n squared Euclidean distances between the rows of x (n x d). */                  \
  std::vector<double> sq_dist_matrix(std::span<const double> x, std::size_t n, std::size_t d);     \
  /* k nearest rows of every row, self excluded, distance ties broken by lower index. n x k. */     \
  std::vector<std::uint32_t> knn_indices(std::span<const double> x, std::size_t n, std::size_t d,  \
                                         std::size_t k);                                           \
  /* Per-point silhouette values; labels are dense in [0, n_labels). */                             \
  std::vector<double> silhouette_values(std::span<const double> x, std::size_t n, std::size_t d,   \
                                        std::span<const int> labels, int n_labels);                \
  /* Sum over i != j of 1 / (1 + |y_i - y_j|^2) for a 2-D embedding. */                             \
  double tsne_normalizer(std::span<const double> y, std::size_t n);                                \
  /* Exact KL gradient w.r.t. the 2-D embedding with P scaled by `exaggeration`. */                 \
  void tsne_gradient(std::span<const double> p, std::span<const double> y, std::size_t n,          \
                     double exaggeration, std::span<double> grad);                                 \
  /* KL(P || Q) for the current embedding. */                                                       \
  double tsne_kl(std::span<const double> p, std::span<const double> y, std::size_t n);

namespace serial {
WSIKIT_KERNEL_DECLS
}  // namespace serial

namespace omp {
WSIKIT_KERNEL_DECLS
}  // namespace omp

#undef WSIKIT_KERNEL_DECLS

/// Thread count used by the OpenMP kernels (0 = runtime default).
void set_num_threads(int threads);

}  // namespace wsikit::kernels
