#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <set>

#include "fixtures.hpp"
#include "wsikit/embed_diag.hpp"
#include "wsikit/errors.hpp"

namespace dg = wsikit::diag;

namespace {

dg::FeatureSet iid_gaussian(std::size_t n_wsis, std::size_t per, std::size_t d, std::uint64_t seed) {
  wsikit::Rng r(seed);
  dg::FeatureSet fs;
  fs.d = d;
  std::vector<std::uint32_t> ids;
  for (std::size_t w = 0; w < n_wsis; ++w)
    for (std::size_t i = 0; i < per; ++i) ids.push_back(static_cast<std::uint32_t>(w));
  // Random permutation of labels over iid points.
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[r.below(i)]);
  for (std::uint32_t id : ids) {
    std::vector<double> x(d);
    for (double& v : x) v = r.normal();
    fs.push_back(x, id);
  }
  return fs;
}

// Direct silhouette formula.
double silhouette_oracle(const dg::FeatureSet& fs) {
  std::set<std::uint32_t> labels(fs.wsi_ids.begin(), fs.wsi_ids.end());
  double total = 0;
  for (std::size_t i = 0; i < fs.n; ++i) {
    std::map<std::uint32_t, std::pair<double, int>> acc;
    for (std::size_t j = 0; j < fs.n; ++j) {
      if (i == j) continue;
      double s = 0;
      for (std::size_t k = 0; k < fs.d; ++k) s += std::pow(fs.row(i)[k] - fs.row(j)[k], 2);
      acc[fs.wsi_ids[j]].first += std::sqrt(s);
      acc[fs.wsi_ids[j]].second += 1;
    }
    const double a = acc[fs.wsi_ids[i]].first / acc[fs.wsi_ids[i]].second;
    double b = 1e300;
    for (auto& [l, v] : acc)
      if (l != fs.wsi_ids[i]) b = std::min(b, v.first / v.second);
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(fs.n);
}

}  // namespace

TEST_CASE("sample_protocol counts and determinism") {
  const auto all = iid_gaussian(10, 1000, 2, 1);
  const auto s = dg::sample_protocol(all, 1000, 10, 5);
  CHECK(s.n == 10000);

  const auto big = iid_gaussian(12, 50, 3, 2);
  const auto a = dg::sample_protocol(big, 20, 4, 9), b = dg::sample_protocol(big, 20, 4, 9);
  CHECK(a.vectors == b.vectors);
  CHECK(a.wsi_ids == b.wsi_ids);
  CHECK(a.n == 80);
  CHECK(std::is_sorted(a.wsi_ids.begin(), a.wsi_ids.end()));
  std::set<std::uint32_t> ids(a.wsi_ids.begin(), a.wsi_ids.end());
  CHECK(ids.size() == 4);
  // No row drawn twice.
  std::set<std::vector<double>> rows;
  for (std::size_t i = 0; i < a.n; ++i) rows.insert(std::vector<double>(a.row(i), a.row(i) + a.d));
  CHECK(rows.size() == a.n);
  CHECK(dg::sample_protocol(big, 20, 4, 10).vectors != a.vectors);

  CHECK_THROWS_AS(dg::sample_protocol(big, 0, 4, 1), wsikit::PreconditionError);
  CHECK_THROWS_AS(dg::sample_protocol(big, 51, 4, 1), wsikit::InsufficientFeatures);
  CHECK_THROWS_AS(dg::sample_protocol(big, 10, 13, 1), wsikit::InsufficientFeatures);
}

TEST_CASE("knn purity: separated clusters and counting identity") {
  const auto fs = fixtures::clusters(3, 10, 4, 0.01, 100.0, 3);
  CHECK(dg::knn_wsi_purity(fs, 5) == 1.0);
  // k = n - 1 counts every other point.
  const auto bal = iid_gaussian(4, 6, 3, 4);
  CHECK(dg::knn_wsi_purity(bal, bal.n - 1) == doctest::Approx(5.0 / 23.0).epsilon(1e-12));
  CHECK_THROWS(dg::knn_wsi_purity(bal, bal.n));
}

TEST_CASE("knn purity invariances") {
  auto fs = fixtures::clusters(4, 25, 3, 1.0, 1.5, 6);
  const double base = dg::knn_wsi_purity(fs, 7);
  // Rotation about the z axis, translation and positive scaling.
  auto t = fs;
  const double c = std::cos(0.7), s = std::sin(0.7);
  for (std::size_t i = 0; i < t.n; ++i) {
    double* r = t.vectors.data() + i * 3;
    const double x = r[0], y = r[1];
    r[0] = 3.0 * (c * x - s * y) + 5.0;
    r[1] = 3.0 * (s * x + c * y) - 2.0;
    r[2] = 3.0 * r[2] + 1.0;
  }
  CHECK(dg::knn_wsi_purity(t, 7) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("knn purity grows with per-WSI shift") {
  double prev = -1;
  for (double shift : {0.0, 1.0, 3.0}) {
    wsikit::Rng r(12);
    dg::FeatureSet fs;
    fs.d = 4;
    for (std::uint32_t w = 0; w < 5; ++w) {
      std::vector<double> offset(4);
      for (double& v : offset) v = shift * r.normal();
      for (int i = 0; i < 60; ++i) {
        std::vector<double> x(4);
        for (std::size_t k = 0; k < 4; ++k) x[k] = offset[k] + r.normal();
        fs.push_back(x, w);
      }
    }
    const double p = dg::knn_wsi_purity(fs, 10);
    CHECK(p > prev);
    prev = p;
  }
}

TEST_CASE("silhouette matches the direct formula and its invariances") {
  const auto far = fixtures::clusters(2, 15, 3, 0.05, 50.0, 8);
  CHECK(dg::silhouette_wsi(far) >= 0.95);
  CHECK(dg::silhouette_wsi(far) == doctest::Approx(silhouette_oracle(far)).epsilon(1e-12));

  const auto mixed = iid_gaussian(3, 12, 4, 9);
  CHECK(dg::silhouette_wsi(mixed) == doctest::Approx(silhouette_oracle(mixed)).epsilon(1e-12));

  auto relabeled = mixed;
  relabeled.manifest.clear();
  for (auto& id : relabeled.wsi_ids) id = 100 - id;
  for (auto id : relabeled.wsi_ids) relabeled.manifest[id] = "x";
  CHECK(dg::silhouette_wsi(relabeled) == doctest::Approx(dg::silhouette_wsi(mixed)).epsilon(1e-12));

  // Duplicated points: the textbook definition counts each copy, so the
  // score moves; it must still equal the direct formula on the doubled set.
  auto doubled = mixed;
  for (std::size_t i = 0; i < mixed.n; ++i)
    doubled.push_back(std::vector<double>(mixed.row(i), mixed.row(i) + mixed.d), mixed.wsi_ids[i]);
  CHECK(dg::silhouette_wsi(doubled) == doctest::Approx(silhouette_oracle(doubled)).epsilon(1e-12));

  auto single = fixtures::clusters(1, 10, 2, 1.0, 1.0, 1);
  CHECK_THROWS_AS(dg::silhouette_wsi(single), wsikit::SingleCluster);
}

TEST_CASE("pca matches a covariance eigendecomposition oracle") {
  wsikit::Rng r(13);
  dg::FeatureSet fs;
  for (int i = 0; i < 20; ++i) {
    std::vector<double> x(5);
    for (std::size_t k = 0; k < 5; ++k) x[k] = r.normal() * (1.0 + static_cast<double>(k));
    fs.push_back(x, 0);
  }
  const auto p = dg::pca_embed(fs, 3);
  Eigen::MatrixXd m(20, 5);
  for (int i = 0; i < 20; ++i)
    for (int k = 0; k < 5; ++k) m(i, k) = fs.vectors[static_cast<std::size_t>(i * 5 + k)];
  const Eigen::MatrixXd c = m.rowwise() - m.colwise().mean();
  const Eigen::MatrixXd cov = c.transpose() * c / 19.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  for (int comp = 0; comp < 3; ++comp) {
    const Eigen::VectorXd axis = es.eigenvectors().col(4 - comp);
    CHECK(p.variances[static_cast<std::size_t>(comp)] == doctest::Approx(es.eigenvalues()(4 - comp)).epsilon(1e-10));
    const Eigen::VectorXd proj = c * axis;
    const double sign = (proj(0) * p.coords[static_cast<std::size_t>(comp)] >= 0) ? 1.0 : -1.0;
    for (int i = 0; i < 20; ++i)
      CHECK(std::abs(p.coords[static_cast<std::size_t>(i * 3 + comp)] - sign * proj(i)) <= 1e-8);
    // Largest-magnitude loading is positive.
    std::size_t big = 0;
    for (std::size_t k = 1; k < 5; ++k)
      if (std::abs(p.components[comp * 5 + k]) > std::abs(p.components[comp * 5 + big])) big = k;
    CHECK(p.components[comp * 5 + big] > 0);
  }
  CHECK(p.variances[0] >= p.variances[1]);
}

TEST_CASE("pca reconstructs points on a line") {
  dg::FeatureSet fs;
  for (int i = 0; i < 12; ++i) {
    const double t = 0.3 * i - 1.0;
    fs.push_back({1 + 2 * t, -3 + t, 0.5 - 4 * t}, 0);
  }
  const auto p = dg::pca_embed(fs, 1);
  std::vector<double> mean(3, 0);
  for (std::size_t i = 0; i < fs.n; ++i)
    for (std::size_t k = 0; k < 3; ++k) mean[k] += fs.row(i)[k] / 12.0;
  for (std::size_t i = 0; i < fs.n; ++i)
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(std::abs(mean[k] + p.coords[i] * p.components[k] - fs.row(i)[k]) <= 1e-9);
}

TEST_CASE("feature set validation") {
  dg::FeatureSet fs;
  CHECK_THROWS(fs.validate());
  fs.push_back({1, 2}, 3);
  CHECK_NOTHROW(fs.validate());
  CHECK_THROWS_AS(fs.push_back({1, 2, 3}, 3), wsikit::DimensionMismatch);
  fs.vectors[0] = NAN;
  CHECK_THROWS(fs.validate());
}
