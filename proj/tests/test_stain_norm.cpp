#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "wsikit/errors.hpp"
#include "wsikit/linalg.hpp"
#include "wsikit/stain_norm.hpp"
#include "wsikit/synth_slides.hpp"

namespace st = wsikit::stain;
using fixtures::Vec3;

namespace {

const Vec3 kH = fixtures::unit({0.65, 0.70, 0.29});
const Vec3 kE = fixtures::unit({0.07, 0.99, 0.11});

// Share of channel values that differ by at most `tol` levels.
double share_within(const wsikit::RgbPatch& a, const wsikit::RgbPatch& b, int tol) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) ok += std::abs(int(a.pixels[i]) - int(b.pixels[i])) <= tol;
  return static_cast<double>(ok) / static_cast<double>(a.pixels.size());
}

// Pixel-level share (all three channels within tol).
double pixel_share_within(const wsikit::RgbPatch& a, const wsikit::RgbPatch& b, int tol) {
  std::size_t ok = 0;
  for (std::size_t p = 0; p < a.pixel_count(); ++p) {
    bool all = true;
    for (int k = 0; k < 3; ++k) all = all && std::abs(int(a.pixels[3 * p + k]) - int(b.pixels[3 * p + k])) <= tol;
    ok += all;
  }
  return static_cast<double>(ok) / static_cast<double>(a.pixel_count());
}

st::OdImage constant_od(int w, int h, Vec3 v) {
  st::OdImage od;
  od.width = w;
  od.height = h;
  for (int i = 0; i < w * h; ++i) od.od.insert(od.od.end(), v.begin(), v.end());
  return od;
}

}  // namespace

TEST_CASE("rgb_to_od and od_to_rgb reference values") {
  wsikit::RgbPatch white(1, 1, {255, 255, 255});
  auto od = st::rgb_to_od(white);
  for (double v : od.od) CHECK(v == 0.0);

  wsikit::RgbPatch black(1, 1, {0, 0, 0});
  od = st::rgb_to_od(black);
  for (double v : od.od) CHECK(v == doctest::Approx(std::log10(255.0)).epsilon(1e-12));
  CHECK(od.od[0] == doctest::Approx(2.40654).epsilon(1e-5));

  auto one = constant_od(1, 1, {1, 1, 1});
  CHECK(st::od_to_rgb(one).pixels == std::vector<std::uint8_t>{26, 26, 26});
  CHECK(st::od_to_rgb(constant_od(1, 1, {0, 0, 0})).pixels == std::vector<std::uint8_t>{255, 255, 255});
}

TEST_CASE("od round trip is within one intensity level") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = fixtures::random_patch(37, 23, seed);
    const auto back = st::od_to_rgb(st::rgb_to_od(p));
    CHECK(share_within(p, back, 1) == 1.0);
  }
}

TEST_CASE("estimate_stain_basis recovers generator vectors") {
  const Vec3 v1 = kH;
  // About 30 degrees from v1 inside the positive octant.
  const Vec3 v2 = fixtures::unit({0.25, 0.75, 0.61});
  REQUIRE(fixtures::angle_deg(v1, v2) > 25);
  const auto od = fixtures::two_stain_od(200, 100, v1, v2, 0.05, 1.5, 0.01, 17);
  const st::StainBasis b = st::estimate_stain_basis(od);
  CHECK(fixtures::angle_deg(b.h_vector, v1) < 2.0);
  CHECK(fixtures::angle_deg(b.e_vector, v2) < 2.0);
  for (const Vec3* v : {&b.h_vector, &b.e_vector}) {
    CHECK(std::abs(std::hypot((*v)[0], (*v)[1], (*v)[2]) - 1.0) < 1e-9);
    for (double c : *v) CHECK(c >= 0.0);
  }
  CHECK(b.h_vector[0] >= b.e_vector[0]);
  CHECK(b.max_concentrations[0] > 0);
  CHECK(b.max_concentrations[1] > 0);
}

TEST_CASE("estimate_stain_basis is invariant to pixel order") {
  auto od = fixtures::two_stain_od(64, 64, kH, kE, 0.05, 1.2, 0.01, 3);
  const auto a = st::estimate_stain_basis(od);
  // Reverse pixel order.
  st::OdImage rev = od;
  const std::size_t n = od.pixel_count();
  for (std::size_t i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) rev.od[3 * i + k] = od.od[3 * (n - 1 - i) + k];
  const auto b = st::estimate_stain_basis(rev);
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(a.h_vector[k] - b.h_vector[k]) < 1e-9);
    CHECK(std::abs(a.e_vector[k] - b.e_vector[k]) < 1e-9);
  }
  CHECK(std::abs(a.max_concentrations[0] - b.max_concentrations[0]) < 1e-9);
}

TEST_CASE("estimate_stain_basis errors") {
  CHECK_THROWS_AS(st::estimate_stain_basis(constant_od(20, 20, {0, 0, 0})), wsikit::InsufficientTissue);
  // Single stain: every pixel lies on one ray.
  const auto single = fixtures::two_stain_od(30, 30, kH, kE, 0.0, 0.0, 0.0, 1);
  wsikit::Rng r(2);
  st::OdImage one = single;
  for (std::size_t p = 0; p < one.pixel_count(); ++p) {
    const double c = r.uniform(0.3, 1.5);
    for (int k = 0; k < 3; ++k) one.od[3 * p + k] = c * kH[k];
  }
  CHECK_THROWS_AS(st::estimate_stain_basis(one), wsikit::DegenerateStains);
  // Fewer than 20 pixels above beta.
  auto few = constant_od(10, 10, {0, 0, 0});
  for (int p = 0; p < 19; ++p)
    for (int k = 0; k < 3; ++k) few.od[3 * p + k] = 0.5 * kH[k] + (p % 7) * 0.05 * kE[k];
  CHECK_THROWS_AS(st::estimate_stain_basis(few), wsikit::InsufficientTissue);
}

TEST_CASE("solve_concentrations on consistent and random systems") {
  st::StainBasis b{kH, kE, {1, 1}};
  Vec3 mix;
  for (int k = 0; k < 3; ++k) mix[k] = 0.7 * kH[k] + 0.3 * kE[k];
  const auto c = st::solve_concentrations(constant_od(1, 1, mix), b);
  CHECK(std::abs(c.conc[0] - 0.7) < 1e-9);
  CHECK(std::abs(c.conc[1] - 0.3) < 1e-9);
  const auto z = st::solve_concentrations(constant_od(1, 1, {0, 0, 0}), b);
  CHECK(z.conc == std::vector<double>{0, 0});

  // Normal-equations oracle: (B^T B) c = B^T od.
  const auto od = fixtures::two_stain_od(50, 20, {0.3, 0.5, 0.8}, {0.9, 0.1, 0.4}, -1, 2, 0.3, 5);
  const auto raw = st::unmix(od, b);
  const double hh = wsikit::linalg::dot(kH, kH), he = wsikit::linalg::dot(kH, kE), ee = wsikit::linalg::dot(kE, kE);
  const double det = hh * ee - he * he;
  const auto clamped = st::solve_concentrations(od, b);
  for (std::size_t p = 0; p < od.pixel_count(); ++p) {
    const Vec3 v = {od.od[3 * p], od.od[3 * p + 1], od.od[3 * p + 2]};
    const double bh = wsikit::linalg::dot(kH, v), be = wsikit::linalg::dot(kE, v);
    const double ch = (ee * bh - he * be) / det, ce = (hh * be - he * bh) / det;
    CHECK(std::abs(raw[2 * p] - ch) <= 1e-8);
    CHECK(std::abs(raw[2 * p + 1] - ce) <= 1e-8);
    CHECK(clamped.conc[2 * p] == std::max(raw[2 * p], 0.0));
  }
}

TEST_CASE("solve_concentrations rejects dependent columns") {
  st::StainBasis b{kH, kH, {1, 1}};
  CHECK_THROWS_AS(st::solve_concentrations(constant_od(1, 1, {0.1, 0.1, 0.1}), b), wsikit::DegenerateStains);
}

TEST_CASE("concentrations are invariant to scaling io and intensities together") {
  // Even pixel values >= 2 so halving stays above the clamp floor.
  auto p = fixtures::random_patch(16, 16, 4);
  for (auto& v : p.pixels) v = static_cast<std::uint8_t>(std::max(2, v & ~1));
  wsikit::RgbPatch half = p;
  st::OdImage od_half;
  const auto od = st::rgb_to_od(p, 255.0);
  // Build the halved OD image by hand: v/2 against io/2.
  od_half = st::rgb_to_od(p, 255.0);
  for (std::size_t i = 0; i < p.pixels.size(); ++i)
    od_half.od[i] = -std::log10((p.pixels[i] / 2.0) / 127.5);
  st::StainBasis b{kH, kE, {1, 1}};
  const auto c1 = st::unmix(od, b), c2 = st::unmix(od_half, b);
  for (std::size_t i = 0; i < c1.size(); ++i) CHECK(std::abs(c1[i] - c2[i]) < 1e-6);
}

TEST_CASE("normalize_patch is near identity on its own reference") {
  // Pixels beyond the 1st / 99th percentile angles fall outside the fitted
  // cone and are clamped, so up to about 2% may move by more than a level.
  const auto ref = fixtures::two_stain_patch(64, wsikit::synth::canonical_h(), wsikit::synth::canonical_e(), 1.2, 9);
  const st::NormalizationTarget t = st::fit_target(ref);
  const auto out = st::normalize_patch(ref, t);
  CHECK(out.width == ref.width);
  CHECK(out.height == ref.height);
  CHECK(pixel_share_within(ref, out, 1) >= 0.97);
}

TEST_CASE("normalize_patch keeps white background white and is idempotent") {
  auto src = fixtures::two_stain_patch(48, fixtures::unit({0.55, 0.75, 0.36}), fixtures::unit({0.15, 0.9, 0.4}),
                                       1.0, 12);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 48; ++x) std::fill_n(src.at(x, y), 3, std::uint8_t{255});
  const auto t = st::fit_target(fixtures::two_stain_patch(64, kH, kE, 1.2, 9));
  const auto once = st::normalize_patch(src, t);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 48; ++x)
      for (int k = 0; k < 3; ++k) CHECK(once.at(x, y)[k] == 255);
  const auto twice = st::normalize_patch(once, t);
  CHECK(pixel_share_within(once, twice, 1) >= 0.99);
}

TEST_CASE("fit_target and target serialization") {
  CHECK_THROWS_AS(st::fit_target(wsikit::RgbPatch(16, 16, std::vector<std::uint8_t>(16 * 16 * 3, 255))),
                  wsikit::InsufficientTissue);
  const auto t = st::fit_target(fixtures::two_stain_patch(64, kH, kE, 1.2, 21));
  const std::string json = st::target_to_json(t);
  CHECK(json.find("\"version\": 1") != std::string::npos);
  const auto back = st::target_from_json(json);
  CHECK(back.basis.h_vector == t.basis.h_vector);
  CHECK(back.basis.e_vector == t.basis.e_vector);
  CHECK(back.basis.max_concentrations == t.basis.max_concentrations);
  CHECK(back.io == t.io);
  const auto patch = fixtures::two_stain_patch(40, fixtures::unit({0.6, 0.7, 0.35}), kE, 0.9, 22);
  CHECK(st::normalize_patch(patch, t) == st::normalize_patch(patch, back));

  try {
    st::target_from_json("{\"io\": 255, \"h\": [1, 2", "t.json");
    FAIL("expected DataError");
  } catch (const wsikit::DataError& e) {
    CHECK(e.file() == "t.json");
    CHECK(e.offset() >= 0);
  }
  CHECK_THROWS_AS(st::target_from_json("{\"io\":255,\"h\":[1,0,0],\"e\":[0,1,0],\"max_c\":[1,1],\"version\":2}"),
                  wsikit::DataError);
}

TEST_CASE("validate_basis enforces the basis invariants") {
  CHECK_NOTHROW(st::validate_basis({kH, kE, {1, 1}}));
  CHECK_THROWS(st::validate_basis({{0.6, 0.8, 0.1}, kE, {1, 1}}));   // not unit
  CHECK_THROWS(st::validate_basis({{-0.6, 0.8, 0.0}, kE, {1, 1}}));  // negative
  CHECK_THROWS(st::validate_basis({kH, kH, {1, 1}}));                // dependent
}
