#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "wsikit/embed_diag.hpp"
#include "wsikit/errors.hpp"
#include "wsikit/synth_slides.hpp"

namespace sy = wsikit::synth;

namespace {

sy::CohortSpec small_spec() {
  sy::CohortSpec s;
  s.n_wsis = 4;
  s.patches_per_wsi = 40;
  s.patch_size = 16;
  s.seed = 11;
  return s;
}

}  // namespace

TEST_CASE("canonical stain vectors are unit and non-negative") {
  for (const auto& v : {sy::canonical_h(), sy::canonical_e()}) {
    CHECK(v[0] * v[0] + v[1] * v[1] + v[2] * v[2] == doctest::Approx(1.0));
    for (double c : v) CHECK(c >= 0.0);
  }
  CHECK(sy::canonical_h()[0] > sy::canonical_e()[0]);
}

TEST_CASE("perturb rotates by the requested angle") {
  const fixtures::Vec3 axis = fixtures::unit({0.0, 0.0, 1.0});
  const fixtures::Vec3 v = fixtures::unit({1.0, 1.0, 0.0});
  CHECK(fixtures::angle_deg(sy::perturb(v, axis, 10.0), v) == doctest::Approx(10.0));
  CHECK(fixtures::angle_deg(sy::perturb(v, axis, 0.0), v) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("cohort shape and labels") {
  const auto c = sy::generate_cohort(small_spec());
  CHECK(c.size() == 160);
  CHECK(c.stains.size() == 4);
  for (std::uint32_t w = 0; w < 4; ++w) CHECK(c.patches_of(w).size() == 40);
  std::vector<int> counts(4, 0);
  for (std::size_t i = 0; i < 40; ++i) ++counts[static_cast<std::size_t>(c.content_classes[i])];
  for (int n : counts) CHECK(n == 10);
  for (const auto& p : c.patches) {
    CHECK(p.width == 16);
    REQUIRE(p.mpp.has_value());
    CHECK(*p.mpp == 0.5);
  }
  for (const auto& st : c.stains) {
    CHECK(std::abs(st.rotation_deg) <= 15.0);
    CHECK(st.scale[0] >= 0.8);
    CHECK(st.scale[1] <= 1.2);
  }
}

TEST_CASE("cohort generation is deterministic in the seed") {
  const auto a = sy::generate_cohort(small_spec()), b = sy::generate_cohort(small_spec());
  CHECK(a.patches == b.patches);
  auto s = small_spec();
  s.seed = 12;
  CHECK_FALSE(sy::generate_cohort(s).patches == a.patches);
}

TEST_CASE("stain confound separates slides only with perturbation") {
  auto s = small_spec();
  s.n_content_classes = 1;
  s.stain_perturbation_deg = 20.0;
  const auto confounded = sy::generate_cohort(s);
  s.stain_perturbation_deg = 0.0;
  s.intensity_jitter_lo = s.intensity_jitter_hi = 1.0;
  const auto clean = sy::generate_cohort(s);
  const auto pc = wsikit::diag::knn_wsi_purity(sy::pixel_features(confounded.patches, confounded.wsi_ids), 5);
  const auto pn = wsikit::diag::knn_wsi_purity(sy::pixel_features(clean.patches, clean.wsi_ids), 5);
  CHECK(pc > pn);
}

TEST_CASE("fitted basis of a slide is close to its true basis") {
  // A stain with a near-zero channel loses its pure pixels to the
  // all-channels OD threshold and its extreme angle is then biased, so only
  // slides whose vectors keep every channel >= 0.15 are scored.
  auto s = small_spec();
  s.n_wsis = 6;
  s.patches_per_wsi = 64;
  s.patch_size = 32;
  const auto c = sy::generate_cohort(s);
  int scored = 0;
  for (std::uint32_t w = 0; w < 6; ++w) {
    const auto& tr = c.stains[w];
    if (std::min({tr.h_vector[0], tr.h_vector[1], tr.h_vector[2], tr.e_vector[0], tr.e_vector[1], tr.e_vector[2]}) <
        0.15)
      continue;
    ++scored;
    const auto basis = wsikit::stain::estimate_stain_basis(wsikit::stain::rgb_to_od(c.mosaic(w).image));
    CHECK(fixtures::angle_deg(basis.h_vector, tr.h_vector) < 4.0);
    CHECK(fixtures::angle_deg(basis.e_vector, tr.e_vector) < 4.0);
  }
  CHECK(scored >= 3);
}

TEST_CASE("mosaic lays patches out row-major") {
  const auto c = sy::generate_cohort(small_spec());
  CHECK(c.mosaic_columns() == 7);
  const auto m = c.mosaic(2);
  CHECK(m.image.width == 7 * 16);
  CHECK(m.image.height == 6 * 16);
  const auto idx = c.patches_of(2);
  const auto& p = c.patches[idx[8]];  // column 1, row 1
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      for (int k = 0; k < 3; ++k) CHECK(m.image.at(16 + x, 16 + y)[k] == p.at(x, y)[k]);
  CHECK(m.image.at(m.image.width - 1, m.image.height - 1)[0] == 255);
}

TEST_CASE("invalid cohort specs are rejected") {
  auto s = small_spec();
  s.n_wsis = 1;
  CHECK_THROWS_AS(sy::generate_cohort(s), wsikit::InvalidSpec);
  s = small_spec();
  s.intensity_jitter_lo = 1.5;
  CHECK_THROWS_AS(sy::generate_cohort(s), wsikit::InvalidSpec);
  s = small_spec();
  s.patch_size = 4;
  CHECK_THROWS_AS(sy::generate_cohort(s), wsikit::InvalidSpec);
}

TEST_CASE("reference image is deterministic and stainable") {
  const auto a = sy::reference_image(), b = sy::reference_image();
  CHECK(a == b);
  CHECK(a.width == 128);
  const auto t = wsikit::stain::fit_target(a);
  CHECK(fixtures::angle_deg(t.basis.h_vector, sy::canonical_h()) < 5.0);
}
