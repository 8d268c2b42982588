#include "wsikit/slide_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>

#include "wsikit/errors.hpp"

namespace wsikit::slide {

std::size_t TissueMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

double otsu_objective(std::uint64_t n0, std::uint64_t sum0, std::uint64_t n_total, std::uint64_t sum_total) {
  const std::uint64_t n1 = n_total - n0;
  if (n0 == 0 || n1 == 0) return 0.0;
  // N^2 * w0 * w1 * (mu0 - mu1)^2 == (S0 * N - n0 * S)^2 / (n0 * n1)
  const double diff = static_cast<double>(sum0) * static_cast<double>(n_total) -
                      static_cast<double>(n0) * static_cast<double>(sum_total);
  return diff * diff / (static_cast<double>(n0) * static_cast<double>(n1));
}

int otsu_threshold(std::span<const std::uint64_t, 256> histogram) {
  std::uint64_t total = 0, sum = 0;
  int lo = -1, hi = -1;
  for (int v = 0; v < 256; ++v) {
    const std::uint64_t c = histogram[static_cast<std::size_t>(v)];
    if (c == 0) continue;
    if (lo < 0) lo = v;
    hi = v;
    total += c;
    sum += c * static_cast<std::uint64_t>(v);
  }
  if (total == 0) throw PreconditionError("otsu_threshold: empty histogram");

  int best = lo;
  double best_var = -1.0;
  std::uint64_t n0 = 0, s0 = 0;
  for (int t = lo; t <= hi; ++t) {
    const std::uint64_t c = histogram[static_cast<std::size_t>(t)];
    n0 += c;
    s0 += c * static_cast<std::uint64_t>(t);
    const double var = otsu_objective(n0, s0, total, sum);
    if (var > best_var) {
      best_var = var;
      best = t;
    }
  }
  return best;
}

std::uint8_t saturation(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  if (mx <= 0.0) return 0;
  return static_cast<std::uint8_t>(std::clamp(std::round(255.0 * (mx - mn) / mx), 0.0, 255.0));
}

namespace {

std::vector<std::uint8_t> median_filter(const std::vector<std::uint8_t>& img, int w, int h, int radius) {
  if (radius <= 0) return img;
  std::vector<std::uint8_t> out(img.size());
  std::vector<std::uint8_t> window;
  window.reserve(static_cast<std::size_t>((2 * radius + 1) * (2 * radius + 1)));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      window.clear();
      for (int dy = -radius; dy <= radius; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        for (int dx = -radius; dx <= radius; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= w) continue;
          window.push_back(img[static_cast<std::size_t>(yy) * w + xx]);
        }
      }
      const auto mid = window.begin() + static_cast<std::ptrdiff_t>((window.size() - 1) / 2);
      std::nth_element(window.begin(), mid, window.end());
      out[static_cast<std::size_t>(y) * w + x] = *mid;
    }
  }
  return out;
}

void remove_small_regions(std::vector<std::uint8_t>& bits, int w, int h, int min_area) {
  if (min_area <= 1) return;
  std::vector<int> label(bits.size(), -1);
  std::vector<std::size_t> members;
  std::deque<std::size_t> queue;
  for (std::size_t start = 0; start < bits.size(); ++start) {
    if (!bits[start] || label[start] >= 0) continue;
    members.clear();
    queue.push_back(start);
    label[start] = 1;
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      members.push_back(p);
      const int px = static_cast<int>(p % static_cast<std::size_t>(w));
      const int py = static_cast<int>(p / static_cast<std::size_t>(w));
      const int nx[4] = {px - 1, px + 1, px, px};
      const int ny[4] = {py, py, py - 1, py + 1};
      for (int k = 0; k < 4; ++k) {
        if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
        const std::size_t q = static_cast<std::size_t>(ny[k]) * w + nx[k];
        if (bits[q] && label[q] < 0) {
          label[q] = 1;
          queue.push_back(q);
        }
      }
    }
    if (members.size() < static_cast<std::size_t>(min_area))
      for (std::size_t p : members) bits[p] = 0;
  }
}

}  // namespace

TissueMask compute_tissue_mask(const SlideRaster& slide, int median_radius, int min_region_area, int downsample) {
  if (downsample < 1) throw PreconditionError("mask downsample must be >= 1");
  const RgbPatch& img = slide.image;
  TissueMask mask;
  mask.downsample = downsample;
  mask.width = (img.width + downsample - 1) / downsample;
  mask.height = (img.height + downsample - 1) / downsample;

  std::vector<std::uint8_t> sat(static_cast<std::size_t>(mask.width) * mask.height);
  for (int my = 0; my < mask.height; ++my) {
    for (int mx = 0; mx < mask.width; ++mx) {
      const int x1 = std::min((mx + 1) * downsample, img.width);
      const int y1 = std::min((my + 1) * downsample, img.height);
      double acc[3] = {0, 0, 0};
      for (int y = my * downsample; y < y1; ++y)
        for (int x = mx * downsample; x < x1; ++x)
          for (int c = 0; c < 3; ++c) acc[c] += img.at(x, y)[c];
      const double cnt = static_cast<double>((x1 - mx * downsample) * (y1 - my * downsample));
      sat[static_cast<std::size_t>(my) * mask.width + mx] = saturation(acc[0] / cnt, acc[1] / cnt, acc[2] / cnt);
    }
  }
  sat = median_filter(sat, mask.width, mask.height, median_radius);

  std::array<std::uint64_t, 256> hist{};
  for (std::uint8_t s : sat) ++hist[s];
  const auto [mn, mx] = std::minmax_element(sat.begin(), sat.end());
  // A single occupied saturation level has no second class; it is tissue iff saturated at all.
  const int threshold = (*mn == *mx) ? 0 : otsu_threshold(hist);

  mask.bits.resize(sat.size());
  for (std::size_t i = 0; i < sat.size(); ++i) mask.bits[i] = sat[i] > threshold ? 1 : 0;
  remove_small_regions(mask.bits, mask.width, mask.height, min_region_area);
  return mask;
}

double tissue_fraction(const TissueMask& mask, int slide_width, int slide_height, int x, int y, int size) {
  const int ds = mask.downsample;
  const int x_end = std::min(x + size, slide_width);
  const int y_end = std::min(y + size, slide_height);
  std::uint64_t tissue = 0;
  for (int my = y / ds; my < mask.height && my * ds < y_end; ++my) {
    const int oy = std::min((my + 1) * ds, y_end) - std::max(my * ds, y);
    if (oy <= 0) continue;
    for (int mx = x / ds; mx < mask.width && mx * ds < x_end; ++mx) {
      if (!mask.at(mx, my)) continue;
      const int ox = std::min((mx + 1) * ds, x_end) - std::max(mx * ds, x);
      if (ox > 0) tissue += static_cast<std::uint64_t>(ox) * static_cast<std::uint64_t>(oy);
    }
  }
  return static_cast<double>(tissue) / (static_cast<double>(size) * static_cast<double>(size));
}

int extraction_size_for(double slide_mpp, double target_mpp, int target_size) {
  if (!(slide_mpp > 0.0)) throw PreconditionError("slide mpp must be positive");
  if (!(target_mpp > 0.0)) throw PreconditionError("target mpp must be positive");
  if (target_size < 1) throw PreconditionError("target size must be >= 1");
  return static_cast<int>(std::round(target_size * target_mpp / slide_mpp));
}

PatchGrid plan_patch_grid(const SlideRaster& slide, double target_mpp, int target_size, const TissueMask& mask,
                          double min_tissue_fraction) {
  PatchGrid grid;
  grid.target_mpp = target_mpp;
  grid.target_size = target_size;
  grid.min_tissue_fraction = min_tissue_fraction;
  grid.extraction_size = extraction_size_for(slide.mpp, target_mpp, target_size);
  const int s = grid.extraction_size;
  if (s < 1) throw ExtractionTooLarge("extraction size rounds to zero");
  if (s > slide.width() || s > slide.height())
    throw ExtractionTooLarge("extraction size " + std::to_string(s) + " exceeds slide " +
                             std::to_string(slide.width()) + "x" + std::to_string(slide.height()));
  for (int y = 0; y + s <= slide.height(); y += s) {
    for (int x = 0; x + s <= slide.width(); x += s) {
      ++grid.candidate_cells;
      if (tissue_fraction(mask, slide.width(), slide.height(), x, y, s) >= min_tissue_fraction)
        grid.coords.push_back({x, y});
    }
  }
  return grid;
}

std::vector<RgbPatch> extract_patches(const SlideRaster& slide, const PatchGrid& grid) {
  std::vector<RgbPatch> out(grid.coords.size());
  const auto n = static_cast<std::ptrdiff_t>(grid.coords.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const GridCoord c = grid.coords[static_cast<std::size_t>(i)];
    RgbPatch p = crop(slide.image, c.x, c.y, grid.extraction_size, grid.extraction_size);
    p.mpp = slide.mpp;
    out[static_cast<std::size_t>(i)] = std::move(p);
  }
  return out;
}

std::vector<MppBin> mpp_histogram(std::span<const SlideSummary> slides, double bin_width) {
  if (!(bin_width > 0.0)) throw PreconditionError("bin width must be positive");
  std::map<long long, std::size_t> bins;
  for (const SlideSummary& s : slides) {
    const auto idx = static_cast<long long>(std::floor(s.mpp / bin_width + 1e-9));
    bins[idx] += s.patch_count;
  }
  std::vector<MppBin> out;
  for (const auto& [idx, count] : bins)
    out.push_back({static_cast<double>(idx) * bin_width, static_cast<double>(idx + 1) * bin_width, count});
  return out;
}

}  // namespace wsikit::slide
