#pragma once

// Per-row bodies shared by the serial and OpenMP kernels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace wsikit::kernels::rows {

inline double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

inline void sq_dist_row(std::span<const double> x, std::size_t n, std::size_t d, std::size_t i, double* out) {
  const double* xi = x.data() + i * d;
  for (std::size_t j = 0; j < n; ++j) out[j] = (i == j) ? 0.0 : sq_dist(xi, x.data() + j * d, d);
}

inline void knn_row(std::span<const double> x, std::size_t n, std::size_t d, std::size_t k, std::size_t i,
                    std::vector<std::pair<double, std::uint32_t>>& scratch, std::uint32_t* out) {
  scratch.clear();
  const double* xi = x.data() + i * d;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) continue;
    scratch.emplace_back(sq_dist(xi, x.data() + j * d, d), static_cast<std::uint32_t>(j));
  }
  std::partial_sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k), scratch.end());
  for (std::size_t r = 0; r < k; ++r) out[r] = scratch[r].second;
}

inline double silhouette_row(std::span<const double> x, std::size_t n, std::size_t d, std::span<const int> labels,
                             std::span<const std::size_t> counts, std::size_t i, std::vector<double>& sums) {
  std::fill(sums.begin(), sums.end(), 0.0);
  const double* xi = x.data() + i * d;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) continue;
    sums[static_cast<std::size_t>(labels[j])] += std::sqrt(sq_dist(xi, x.data() + j * d, d));
  }
  const auto own = static_cast<std::size_t>(labels[i]);
  if (counts[own] < 2) return 0.0;
  const double a = sums[own] / static_cast<double>(counts[own] - 1);
  double b = INFINITY;
  for (std::size_t c = 0; c < sums.size(); ++c) {
    if (c == own || counts[c] == 0) continue;
    b = std::min(b, sums[c] / static_cast<double>(counts[c]));
  }
  const double m = std::max(a, b);
  return m > 0.0 ? (b - a) / m : 0.0;
}

inline double tsne_q(const double* y, std::size_t i, std::size_t j) {
  const double dx = y[2 * i] - y[2 * j];
  const double dy = y[2 * i + 1] - y[2 * j + 1];
  return 1.0 / (1.0 + dx * dx + dy * dy);
}

inline double tsne_z_row(std::span<const double> y, std::size_t n, std::size_t i) {
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    if (j != i) s += tsne_q(y.data(), i, j);
  return s;
}

inline void tsne_grad_row(std::span<const double> p, std::span<const double> y, std::size_t n, double exaggeration,
                          double inv_z, std::size_t i, double* g) {
  double gx = 0.0, gy = 0.0;
  const double* prow = p.data() + i * n;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) continue;
    const double q = tsne_q(y.data(), i, j);
    const double mult = (exaggeration * prow[j] - q * inv_z) * q;
    gx += mult * (y[2 * i] - y[2 * j]);
    gy += mult * (y[2 * i + 1] - y[2 * j + 1]);
  }
  g[0] = 4.0 * gx;
  g[1] = 4.0 * gy;
}

inline double tsne_kl_row(std::span<const double> p, std::span<const double> y, std::size_t n, double inv_z,
                          std::size_t i) {
  double s = 0.0;
  const double* prow = p.data() + i * n;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i || prow[j] <= 0.0) continue;
    const double q = std::max(tsne_q(y.data(), i, j) * inv_z, 1e-300);
    s += prow[j] * std::log(prow[j] / q);
  }
  return s;
}

inline std::vector<std::size_t> label_counts(std::span<const int> labels, int n_labels) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(n_labels), 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  return counts;
}

}  // namespace wsikit::kernels::rows
