#include "wsikit/embed_diag.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wsikit/errors.hpp"
#include "wsikit/kernels.hpp"
#include "wsikit/linalg.hpp"
#include "wsikit/rng.hpp"

namespace wsikit::diag {

void FeatureSet::validate() const {
  if (n < 1) throw PreconditionError("feature set is empty");
  if (vectors.size() != n * d) throw PreconditionError("feature buffer does not match n x d");
  if (wsi_ids.size() != n) throw PreconditionError("wsi id count does not match n");
  for (double v : vectors)
    if (!std::isfinite(v)) throw PreconditionError("feature set contains a non-finite value");
  for (std::uint32_t id : wsi_ids)
    if (!manifest.contains(id)) throw PreconditionError("wsi id " + std::to_string(id) + " missing from manifest");
}

void FeatureSet::push_back(const std::vector<double>& v, std::uint32_t wsi_id) {
  if (n == 0 && d == 0) d = v.size();
  if (v.size() != d) throw DimensionMismatch("feature vector has the wrong dimension");
  vectors.insert(vectors.end(), v.begin(), v.end());
  wsi_ids.push_back(wsi_id);
  manifest.try_emplace(wsi_id, "wsi_" + std::to_string(wsi_id));
  ++n;
}

FeatureSet sample_protocol(const FeatureSet& all, std::size_t per_wsi, std::size_t n_wsis, std::uint64_t seed) {
  if (per_wsi == 0) throw PreconditionError("per_wsi must be >= 1");
  if (n_wsis == 0) throw PreconditionError("n_wsis must be >= 1");
  std::map<std::uint32_t, std::vector<std::size_t>> by_wsi;
  for (std::size_t i = 0; i < all.n; ++i) by_wsi[all.wsi_ids[i]].push_back(i);

  std::vector<std::uint32_t> eligible;
  for (const auto& [id, idx] : by_wsi)
    if (idx.size() >= per_wsi) eligible.push_back(id);
  if (eligible.size() < n_wsis)
    throw InsufficientFeatures("only " + std::to_string(eligible.size()) + " WSIs have >= " +
                               std::to_string(per_wsi) + " features; need " + std::to_string(n_wsis));

  Rng rng(seed);
  for (std::size_t i = 0; i < n_wsis; ++i) std::swap(eligible[i], eligible[i + rng.below(eligible.size() - i)]);
  eligible.resize(n_wsis);
  std::sort(eligible.begin(), eligible.end());

  FeatureSet out;
  out.d = all.d;
  for (std::uint32_t id : eligible) {
    std::vector<std::size_t> idx = by_wsi[id];
    for (std::size_t i = 0; i < per_wsi; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    idx.resize(per_wsi);
    std::sort(idx.begin(), idx.end());
    for (std::size_t i : idx) {
      out.vectors.insert(out.vectors.end(), all.row(i), all.row(i) + all.d);
      out.wsi_ids.push_back(id);
    }
    auto it = all.manifest.find(id);
    out.manifest[id] = it != all.manifest.end() ? it->second : "wsi_" + std::to_string(id);
  }
  out.n = out.wsi_ids.size();
  return out;
}

double knn_wsi_purity(const FeatureSet& fs, std::size_t k) {
  if (k < 1 || k >= fs.n) throw PreconditionError("knn purity needs 1 <= k < n");
  const auto nn = kernels::omp::knn_indices(fs.vectors, fs.n, fs.d, k);
  double total = 0.0;
  for (std::size_t i = 0; i < fs.n; ++i) {
    std::size_t same = 0;
    for (std::size_t r = 0; r < k; ++r) same += fs.wsi_ids[nn[i * k + r]] == fs.wsi_ids[i];
    total += static_cast<double>(same) / static_cast<double>(k);
  }
  return total / static_cast<double>(fs.n);
}

double silhouette_wsi(const FeatureSet& fs) {
  std::map<std::uint32_t, int> dense;
  for (std::uint32_t id : fs.wsi_ids) dense.try_emplace(id, static_cast<int>(dense.size()));
  if (dense.size() < 2) throw SingleCluster("silhouette needs at least two distinct WSIs");
  std::vector<int> labels(fs.n);
  std::vector<std::size_t> counts(dense.size(), 0);
  for (std::size_t i = 0; i < fs.n; ++i) {
    labels[i] = dense[fs.wsi_ids[i]];
    ++counts[static_cast<std::size_t>(labels[i])];
  }
  for (std::size_t c : counts)
    if (c < 2) throw PreconditionError("silhouette needs >= 2 members per WSI");
  const auto s = kernels::omp::silhouette_values(fs.vectors, fs.n, fs.d, labels, static_cast<int>(dense.size()));
  double total = 0.0;
  for (double v : s) total += v;
  return total / static_cast<double>(fs.n);
}

PcaResult pca_embed(const FeatureSet& fs, std::size_t out_dim) {
  if (out_dim < 1 || out_dim > fs.d) throw PreconditionError("pca out_dim must be in [1, d]");
  const std::size_t n = fs.n, d = fs.d;
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += fs.vectors[i * d + j];
  for (double& m : mean) m /= static_cast<double>(n);

  std::vector<double> centred(fs.vectors);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centred[i * d + j] -= mean[j];

  std::vector<double> cov(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = centred.data() + i * d;
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) cov[a * d + b] += r[a] * r[b];
  }
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      cov[a * d + b] /= denom;
      cov[b * d + a] = cov[a * d + b];
    }

  const auto eig = linalg::symmetric_eigen(cov, d);
  PcaResult out;
  out.out_dim = out_dim;
  out.coords.assign(n * out_dim, 0.0);
  for (std::size_t c = 0; c < out_dim; ++c) {
    std::vector<double> axis = eig.vectors[c];
    std::size_t big = 0;
    for (std::size_t j = 1; j < d; ++j)
      if (std::fabs(axis[j]) > std::fabs(axis[big]) + 1e-12) big = j;
    if (axis[big] < 0)
      for (double& v : axis) v = -v;
    out.components.insert(out.components.end(), axis.begin(), axis.end());
    out.variances.push_back(std::max(eig.values[c], 0.0));
    for (std::size_t i = 0; i < n; ++i)
      out.coords[i * out_dim + c] = linalg::dot({centred.data() + i * d, d}, axis);
  }
  return out;
}

}  // namespace wsikit::diag
