#include "kernel_rows.hpp"
#include "wsikit/errors.hpp"
#include "wsikit/kernels.hpp"

namespace wsikit::kernels::serial {

std::vector<double> sq_dist_matrix(std::span<const double> x, std::size_t n, std::size_t d) {
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i) rows::sq_dist_row(x, n, d, i, out.data() + i * n);
  return out;
}

std::vector<std::uint32_t> knn_indices(std::span<const double> x, std::size_t n, std::size_t d, std::size_t k) {
  if (k >= n) throw PreconditionError("knn_indices: k must be < n");
  std::vector<std::uint32_t> out(n * k);
  std::vector<std::pair<double, std::uint32_t>> scratch;
  scratch.reserve(n);
  for (std::size_t i = 0; i < n; ++i) rows::knn_row(x, n, d, k, i, scratch, out.data() + i * k);
  return out;
}

std::vector<double> silhouette_values(std::span<const double> x, std::size_t n, std::size_t d,
                                      std::span<const int> labels, int n_labels) {
  const auto counts = rows::label_counts(labels, n_labels);
  std::vector<double> out(n);
  std::vector<double> sums(static_cast<std::size_t>(n_labels));
  for (std::size_t i = 0; i < n; ++i) out[i] = rows::silhouette_row(x, n, d, labels, counts, i, sums);
  return out;
}

double tsne_normalizer(std::span<const double> y, std::size_t n) {
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) z += rows::tsne_z_row(y, n, i);
  return z;
}

void tsne_gradient(std::span<const double> p, std::span<const double> y, std::size_t n, double exaggeration,
                   std::span<double> grad) {
  const double inv_z = 1.0 / tsne_normalizer(y, n);
  for (std::size_t i = 0; i < n; ++i) rows::tsne_grad_row(p, y, n, exaggeration, inv_z, i, grad.data() + 2 * i);
}

double tsne_kl(std::span<const double> p, std::span<const double> y, std::size_t n) {
  const double inv_z = 1.0 / tsne_normalizer(y, n);
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) kl += rows::tsne_kl_row(p, y, n, inv_z, i);
  return kl;
}

}  // namespace wsikit::kernels::serial
