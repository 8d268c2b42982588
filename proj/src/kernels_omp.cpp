#include <omp.h>

#include "kernel_rows.hpp"
#include "wsikit/errors.hpp"
#include "wsikit/kernels.hpp"

namespace wsikit::kernels {

void set_num_threads(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

namespace omp {

namespace {
// Row-parallel map followed by a serial, row-ordered sum.
template <class RowFn>
double ordered_row_sum(std::size_t n, RowFn&& fn) {
  std::vector<double> partial(n);
  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < sn; ++i) partial[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
  double s = 0.0;
  for (double v : partial) s += v;
  return s;
}
}  // namespace

std::vector<double> sq_dist_matrix(std::span<const double> x, std::size_t n, std::size_t d) {
  std::vector<double> out(n * n);
  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < sn; ++i) {
    const auto row = static_cast<std::size_t>(i);
    rows::sq_dist_row(x, n, d, row, out.data() + row * n);
  }
  return out;
}

std::vector<std::uint32_t> knn_indices(std::span<const double> x, std::size_t n, std::size_t d, std::size_t k) {
  if (k >= n) throw PreconditionError("knn_indices: k must be < n");
  std::vector<std::uint32_t> out(n * k);
  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel
  {
    std::vector<std::pair<double, std::uint32_t>> scratch;
    scratch.reserve(n);
#pragma omp for schedule(dynamic, 64)
    for (std::ptrdiff_t i = 0; i < sn; ++i) {
      const auto row = static_cast<std::size_t>(i);
      rows::knn_row(x, n, d, k, row, scratch, out.data() + row * k);
    }
  }
  return out;
}

std::vector<double> silhouette_values(std::span<const double> x, std::size_t n, std::size_t d,
                                      std::span<const int> labels, int n_labels) {
  const auto counts = rows::label_counts(labels, n_labels);
  std::vector<double> out(n);
  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel
  {
    std::vector<double> sums(static_cast<std::size_t>(n_labels));
#pragma omp for schedule(dynamic, 64)
    for (std::ptrdiff_t i = 0; i < sn; ++i) {
      const auto row = static_cast<std::size_t>(i);
      out[row] = rows::silhouette_row(x, n, d, labels, counts, row, sums);
    }
  }
  return out;
}

double tsne_normalizer(std::span<const double> y, std::size_t n) {
  return ordered_row_sum(n, [&](std::size_t i) { return rows::tsne_z_row(y, n, i); });
}

void tsne_gradient(std::span<const double> p, std::span<const double> y, std::size_t n, double exaggeration,
                   std::span<double> grad) {
  const double inv_z = 1.0 / tsne_normalizer(y, n);
  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < sn; ++i) {
    const auto row = static_cast<std::size_t>(i);
    rows::tsne_grad_row(p, y, n, exaggeration, inv_z, row, grad.data() + 2 * row);
  }
}

double tsne_kl(std::span<const double> p, std::span<const double> y, std::size_t n) {
  const double inv_z = 1.0 / tsne_normalizer(y, n);
  return ordered_row_sum(n, [&](std::size_t i) { return rows::tsne_kl_row(p, y, n, inv_z, i); });
}

}  // namespace omp
}  // namespace wsikit::kernels
