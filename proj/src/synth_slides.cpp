#include "wsikit/synth_slides.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wsikit/errors.hpp"
#include "wsikit/rng.hpp"

namespace wsikit::synth {

namespace {

stain::Vec3 unit(stain::Vec3 v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / n, v[1] / n, v[2] / n};
}

struct ClassTexture {
  double nuclei_per_1024px;
  double nucleus_radius;
  double stroma_level;
  double stroma_cycles;
  bool lumen;
};

// Procedural parameters cycle through this table for content classes beyond it.
constexpr ClassTexture kTextures[] = {
    {3.0, 2.4, 1.00, 1.0, false},  // sparse nuclei, smooth stroma
    {9.0, 1.8, 1.20, 3.0, false},  // dense small nuclei, banded stroma
    {5.0, 2.8, 0.90, 2.0, true},   // glandular lumen
    {14.0, 2.2, 1.35, 5.0, false}, // crowded nuclei, fine stroma
};

RgbPatch render(const std::vector<double>& conc, int size, const WsiStain& st, double noise_sigma, Rng& rng) {
  stain::OdImage od;
  od.width = od.height = size;
  od.od.resize(conc.size() / 2 * 3);
  for (std::size_t p = 0; p < conc.size() / 2; ++p) {
    const double ch = conc[2 * p] * st.scale[0];
    const double ce = conc[2 * p + 1] * st.scale[1];
    for (std::size_t k = 0; k < 3; ++k) {
      double v = ch * st.h_vector[k] + ce * st.e_vector[k];
      if (noise_sigma > 0) v += rng.normal(0.0, noise_sigma);
      od.od[3 * p + k] = std::max(v, 0.0);
    }
  }
  return stain::od_to_rgb(od);
}

}  // namespace

stain::Vec3 canonical_h() { return unit({0.65, 0.70, 0.29}); }
stain::Vec3 canonical_e() { return unit({0.20, 0.80, 0.56}); }

void CohortSpec::validate() const {
  auto req = [](bool ok, const char* what) {
    if (!ok) throw InvalidSpec(std::string("cohort spec: ") + what);
  };
  req(n_wsis >= 2, "n_wsis must be >= 2");
  req(patches_per_wsi >= 1, "patches_per_wsi must be >= 1");
  req(patch_size >= 8, "patch_size must be >= 8");
  req(n_content_classes >= 1, "n_content_classes must be >= 1");
  req(stain_perturbation_deg >= 0, "stain_perturbation_deg must be >= 0");
  req(intensity_jitter_lo > 0 && intensity_jitter_lo <= intensity_jitter_hi, "bad intensity jitter range");
  req(noise_sigma >= 0, "noise_sigma must be >= 0");
  req(mpp > 0, "mpp must be positive");
}

stain::Vec3 perturb(const stain::Vec3& v, const stain::Vec3& axis_in, double angle_deg) {
  const stain::Vec3 k = unit(axis_in);
  const double a = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(a), s = std::sin(a);
  const double kv = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
  const stain::Vec3 cross = {k[1] * v[2] - k[2] * v[1], k[2] * v[0] - k[0] * v[2], k[0] * v[1] - k[1] * v[0]};
  stain::Vec3 r{};
  for (std::size_t i = 0; i < 3; ++i) r[i] = std::max(v[i] * c + cross[i] * s + k[i] * kv * (1 - c), 0.0);
  return unit(r);
}

std::vector<double> content_concentrations(int content_class, int patch_size, bool enlarge_nuclei,
                                           double nucleus_bias, Rng& rng) {
  const ClassTexture& tex = kTextures[static_cast<std::size_t>(content_class) % std::size(kTextures)];
  const int n = patch_size;
  const double area_scale = static_cast<double>(n) * n / 1024.0;
  std::vector<double> conc(static_cast<std::size_t>(n) * n * 2, 0.0);

  // Stroma: oriented sinusoidal eosin band pattern.
  const double theta = rng.uniform(0.0, std::numbers::pi);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double freq = 2.0 * std::numbers::pi * tex.stroma_cycles / n;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double t = x * std::cos(theta) + y * std::sin(theta);
      conc[2 * (static_cast<std::size_t>(y) * n + x) + 1] = tex.stroma_level * (1.0 + 0.3 * std::sin(freq * t + phase));
    }

  // Nuclei: hematoxylin blobs that displace eosin.
  const double expected = tex.nuclei_per_1024px * area_scale;
  const int count = std::max(1, static_cast<int>(std::floor(expected + rng.uniform())));
  for (int b = 0; b < count; ++b) {
    const double cx = rng.uniform(0.0, n), cy = rng.uniform(0.0, n);
    double r = tex.nucleus_radius * rng.uniform(0.8, 1.2);
    if (enlarge_nuclei) r *= nucleus_bias;
    const double peak = rng.uniform(0.9, 1.4);
    const int x0 = std::max(0, static_cast<int>(cx - 3 * r)), x1 = std::min(n - 1, static_cast<int>(cx + 3 * r));
    const int y0 = std::max(0, static_cast<int>(cy - 3 * r)), y1 = std::min(n - 1, static_cast<int>(cy + 3 * r));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double d2 = (x + 0.5 - cx) * (x + 0.5 - cx) + (y + 0.5 - cy) * (y + 0.5 - cy);
        const double w = std::exp(-d2 / (2.0 * r * r));
        const std::size_t idx = 2 * (static_cast<std::size_t>(y) * n + x);
        conc[idx] = std::max(conc[idx], peak * w);
        conc[idx + 1] *= std::max(0.0, 1.0 - 1.5 * w);
      }
  }

  if (tex.lumen) {
    const double lr = 0.2 * n;
    const double cx = rng.uniform(lr, n - lr), cy = rng.uniform(lr, n - lr);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const double d2 = (x + 0.5 - cx) * (x + 0.5 - cx) + (y + 0.5 - cy) * (y + 0.5 - cy);
        if (d2 < lr * lr) {
          const std::size_t idx = 2 * (static_cast<std::size_t>(y) * n + x);
          conc[idx] = conc[idx + 1] = 0.0;
        }
      }
  }
  return conc;
}

VirtualCohort generate_cohort(const CohortSpec& spec) {
  spec.validate();
  VirtualCohort cohort;
  cohort.spec = spec;
  const auto n_wsis = static_cast<std::size_t>(spec.n_wsis);
  const auto ppw = static_cast<std::size_t>(spec.patches_per_wsi);

  std::vector<double> nucleus_bias(n_wsis, 1.0);
  for (std::size_t w = 0; w < n_wsis; ++w) {
    Rng rng = Rng::derive(spec.seed, {0, w});
    const stain::Vec3 axis = {rng.normal(), rng.normal(), rng.normal()};
    WsiStain st;
    st.rotation_deg = rng.uniform(-spec.stain_perturbation_deg, spec.stain_perturbation_deg);
    st.h_vector = perturb(canonical_h(), axis, st.rotation_deg);
    st.e_vector = perturb(canonical_e(), axis, st.rotation_deg);
    st.scale = {rng.uniform(spec.intensity_jitter_lo, spec.intensity_jitter_hi),
                rng.uniform(spec.intensity_jitter_lo, spec.intensity_jitter_hi)};
    nucleus_bias[w] = rng.uniform(0.8, 1.2);
    cohort.stains.push_back(st);
  }

  const std::size_t total = n_wsis * ppw;
  cohort.patches.resize(total);
  cohort.wsi_ids.resize(total);
  cohort.content_classes.resize(total);
  for (std::size_t w = 0; w < n_wsis; ++w) {
    // Balanced class assignment, shuffled per slide.
    std::vector<int> classes(ppw);
    for (std::size_t j = 0; j < ppw; ++j) classes[j] = static_cast<int>(j % static_cast<std::size_t>(spec.n_content_classes));
    Rng rng = Rng::derive(spec.seed, {1, w});
    for (std::size_t j = ppw; j > 1; --j) std::swap(classes[j - 1], classes[rng.below(j)]);
    for (std::size_t j = 0; j < ppw; ++j) {
      cohort.wsi_ids[w * ppw + j] = static_cast<std::uint32_t>(w);
      cohort.content_classes[w * ppw + j] = classes[j];
    }
  }

  const auto sn = static_cast<std::ptrdiff_t>(total);
#pragma omp parallel for schedule(dynamic, 32)
  for (std::ptrdiff_t si = 0; si < sn; ++si) {
    const auto i = static_cast<std::size_t>(si);
    const std::size_t w = i / ppw;
    const WsiStain& st = cohort.stains[w];
    Rng rng = Rng::derive(spec.seed, {2, w, i % ppw});
    const auto conc = content_concentrations(cohort.content_classes[i], spec.patch_size, spec.morphology_confound,
                                             nucleus_bias[w], rng);
    RgbPatch patch = render(conc, spec.patch_size, st, spec.noise_sigma, rng);
    patch.mpp = spec.mpp;
    cohort.patches[i] = std::move(patch);
  }
  return cohort;
}

std::vector<std::size_t> VirtualCohort::patches_of(std::uint32_t wsi) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < wsi_ids.size(); ++i)
    if (wsi_ids[i] == wsi) out.push_back(i);
  return out;
}

int VirtualCohort::mosaic_columns() const {
  return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(spec.patches_per_wsi))));
}

slide::SlideRaster VirtualCohort::mosaic(std::uint32_t wsi) const {
  const auto idx = patches_of(wsi);
  const int cols = mosaic_columns();
  const int rows = (static_cast<int>(idx.size()) + cols - 1) / cols;
  const int ps = spec.patch_size;
  slide::SlideRaster s;
  s.mpp = spec.mpp;
  s.name = "wsi_" + std::to_string(wsi);
  s.image = RgbPatch(cols * ps, rows * ps, spec.mpp);
  std::fill(s.image.pixels.begin(), s.image.pixels.end(), std::uint8_t{255});
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const RgbPatch& p = patches[idx[j]];
    const int ox = static_cast<int>(j % static_cast<std::size_t>(cols)) * ps;
    const int oy = static_cast<int>(j / static_cast<std::size_t>(cols)) * ps;
    for (int y = 0; y < ps; ++y) std::copy_n(p.at(0, y), static_cast<std::size_t>(ps) * 3, s.image.at(ox, oy + y));
  }
  return s;
}

RgbPatch reference_image(int tiles_per_side, int patch_size, std::uint64_t seed) {
  if (tiles_per_side < 1 || patch_size < 8) throw PreconditionError("reference_image: bad size");
  WsiStain st;
  st.h_vector = canonical_h();
  st.e_vector = canonical_e();
  const int side = tiles_per_side * patch_size;
  RgbPatch out(side, side, std::optional<double>{});
  for (int t = 0; t < tiles_per_side * tiles_per_side; ++t) {
    Rng rng = Rng::derive(seed, {3, static_cast<std::uint64_t>(t)});
    const auto conc = content_concentrations(t, patch_size, false, 1.0, rng);
    const RgbPatch tile = render(conc, patch_size, st, 0.01, rng);
    const int ox = (t % tiles_per_side) * patch_size, oy = (t / tiles_per_side) * patch_size;
    for (int y = 0; y < patch_size; ++y)
      std::copy_n(tile.at(0, y), static_cast<std::size_t>(patch_size) * 3, out.at(ox, oy + y));
  }
  return out;
}

diag::FeatureSet pixel_features(const std::vector<RgbPatch>& patches, const std::vector<std::uint32_t>& wsi_ids,
                                int size) {
  diag::FeatureSet fs;
  fs.d = static_cast<std::size_t>(size) * size * 3;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const RgbPatch small = slide::resize_bilinear(patches[i], size, size);
    std::vector<double> v(small.pixels.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = small.pixels[k] / 255.0;
    fs.push_back(v, wsi_ids[i]);
  }
  return fs;
}

}  // namespace wsikit::synth
