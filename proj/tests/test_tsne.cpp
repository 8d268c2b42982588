#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "wsikit/errors.hpp"
#include "wsikit/tsne.hpp"

namespace dg = wsikit::diag;

TEST_CASE("affinities hit the target entropy and form a joint distribution") {
  const auto fs = fixtures::clusters(3, 40, 5, 1.0, 3.0, 2);
  dg::TsneParams params;
  params.perplexity = 20;
  const auto aff = dg::compute_affinities(fs, params);
  for (double h : aff.entropies) CHECK(std::abs(h - std::log(20.0)) <= 1e-5);

  double total = 0;
  for (std::size_t i = 0; i < aff.n; ++i) {
    CHECK(aff.p[i * aff.n + i] == 0.0);
    for (std::size_t j = 0; j < aff.n; ++j) {
      CHECK(aff.p[i * aff.n + j] >= 0.0);
      CHECK(aff.p[i * aff.n + j] == aff.p[j * aff.n + i]);
      total += aff.p[i * aff.n + j];
    }
  }
  CHECK(std::abs(total - 1.0) <= 1e-9);

  // Recompute each point's entropy from its recorded precision.
  std::size_t i = 17;
  std::vector<double> w(aff.n);
  double sum = 0;
  for (std::size_t j = 0; j < aff.n; ++j) {
    if (j == i) continue;
    double d2 = 0;
    for (std::size_t k = 0; k < fs.d; ++k) d2 += std::pow(fs.row(i)[k] - fs.row(j)[k], 2);
    w[j] = std::exp(-aff.betas[i] * d2);
    sum += w[j];
  }
  double h = 0;
  for (std::size_t j = 0; j < aff.n; ++j)
    if (j != i && w[j] > 0) h -= (w[j] / sum) * std::log(w[j] / sum);
  CHECK(std::abs(h - std::log(20.0)) <= 1e-5);
}

TEST_CASE("perplexity and size preconditions") {
  const auto fs = fixtures::clusters(1, 31, 2, 1.0, 1.0, 3);
  dg::TsneParams p;
  p.perplexity = 10;  // (31 - 1) / 3 = 10 is not allowed
  CHECK_THROWS_AS(dg::compute_affinities(fs, p), wsikit::PerplexityTooLarge);
  p.perplexity = 9.9;
  CHECK_NOTHROW(dg::compute_affinities(fs, p));
  const auto tiny = fixtures::clusters(1, 9, 2, 1.0, 1.0, 3);
  p.perplexity = 2;
  CHECK_THROWS(dg::compute_affinities(tiny, p));
}

TEST_CASE("analytic KL gradient matches central differences") {
  const auto fs = fixtures::clusters(3, 4, 3, 1.0, 2.0, 5);
  dg::TsneParams params;
  params.perplexity = 3;
  const auto aff = dg::compute_affinities(fs, params);
  wsikit::Rng r(6);
  std::vector<double> y(fs.n * 2);
  for (double& v : y) v = r.normal();
  const auto g = dg::tsne_cost_gradient(aff, y);
  const double h = 1e-5;
  for (std::size_t k = 0; k < y.size(); ++k) {
    auto yp = y, ym = y;
    yp[k] += h;
    ym[k] -= h;
    const double fd = (dg::tsne_cost(aff, yp) - dg::tsne_cost(aff, ym)) / (2 * h);
    CHECK(std::abs(fd - g[k]) <= 1e-4 * std::max(std::abs(fd), 1e-8));
  }
}

TEST_CASE("tsne places duplicate points together and reduces KL") {
  auto fs = fixtures::clusters(3, 4, 4, 1.0, 1.0, 7);
  // Make points 2 and 3 identical; 12 points total.
  std::copy(fs.row(2), fs.row(2) + fs.d, fs.vectors.begin() + 3 * static_cast<std::ptrdiff_t>(fs.d));
  dg::TsneParams p;
  p.perplexity = 3;
  p.iterations = 500;
  const auto e = dg::tsne_embed(fs, p);
  REQUIRE(e.kl_history.size() == 501);
  std::vector<double> d;
  for (std::size_t i = 0; i < e.size(); ++i)
    for (std::size_t j = i + 1; j < e.size(); ++j)
      d.push_back(std::hypot(e.coords[2 * i] - e.coords[2 * j], e.coords[2 * i + 1] - e.coords[2 * j + 1]));
  const double dup = std::hypot(e.coords[4] - e.coords[6], e.coords[5] - e.coords[7]);
  std::sort(d.begin(), d.end());
  CHECK(dup <= d[d.size() / 10]);
  for (double v : e.coords) CHECK(std::isfinite(v));
}

TEST_CASE("tsne is deterministic") {
  const auto fs = fixtures::clusters(2, 15, 3, 1.0, 3.0, 8);
  dg::TsneParams p;
  p.perplexity = 5;
  p.iterations = 120;
  const auto a = dg::tsne_embed(fs, p), b = dg::tsne_embed(fs, p);
  CHECK(a.coords == b.coords);
  CHECK(a.kl_history == b.kl_history);
}
