#include "wsikit/stain_norm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "wsikit/errors.hpp"
#include "wsikit/linalg.hpp"

namespace wsikit::stain {

namespace {

std::array<double, 256> od_table(double io) {
  std::array<double, 256> table{};
  for (int v = 0; v < 256; ++v) {
    const double od = -std::log10(std::max(static_cast<double>(v), kClampFloor) / io);
    table[static_cast<std::size_t>(v)] = std::max(od, 0.0);
  }
  return table;
}

Vec3 normalized(Vec3 v) {
  const double len = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  if (!(len > 0.0)) throw DegenerateStains("stain vector has zero length");
  for (double& x : v) x /= len;
  return v;
}

// 2 x 3 pseudo-inverse rows of [h e].
struct PseudoInverse {
  Vec3 row_h;
  Vec3 row_e;
};

PseudoInverse pseudo_inverse(const StainBasis& basis) {
  const Vec3& h = basis.h_vector;
  const Vec3& e = basis.e_vector;
  const double hh = h[0] * h[0] + h[1] * h[1] + h[2] * h[2];
  const double ee = e[0] * e[0] + e[1] * e[1] + e[2] * e[2];
  const double he = h[0] * e[0] + h[1] * e[1] + h[2] * e[2];
  const double det = hh * ee - he * he;
  // sin^2 of 1 degree ~ 3e-4; anything below is numerically dependent.
  if (!(det > 1e-6 * hh * ee)) throw DegenerateStains("stain basis columns are numerically dependent");
  PseudoInverse p{};
  for (int k = 0; k < 3; ++k) {
    p.row_h[static_cast<std::size_t>(k)] = (ee * h[static_cast<std::size_t>(k)] - he * e[static_cast<std::size_t>(k)]) / det;
    p.row_e[static_cast<std::size_t>(k)] = (hh * e[static_cast<std::size_t>(k)] - he * h[static_cast<std::size_t>(k)]) / det;
  }
  return p;
}

struct Estimate {
  StainBasis basis;
  std::vector<double> conc;  // clamped
};

Estimate estimate_with_concentrations(const OdImage& od, double alpha, double beta) {
  if (!(alpha > 0.0 && alpha < 50.0)) throw PreconditionError("alpha must be in (0, 50)");
  const std::size_t n = od.pixel_count();

  std::vector<std::size_t> tissue;
  tissue.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = od.od.data() + 3 * i;
    if (p[0] > beta && p[1] > beta && p[2] > beta) tissue.push_back(i);
  }
  if (tissue.size() < static_cast<std::size_t>(kMinTissuePixels))
    throw InsufficientTissue("only " + std::to_string(tissue.size()) + " pixels exceed the OD threshold");

  Vec3 mean{};
  for (std::size_t i : tissue)
    for (int c = 0; c < 3; ++c) mean[static_cast<std::size_t>(c)] += od.od[3 * i + static_cast<std::size_t>(c)];
  for (double& m : mean) m /= static_cast<double>(tissue.size());
  std::array<double, 9> cov{};
  for (std::size_t i : tissue) {
    const double d0 = od.od[3 * i] - mean[0];
    const double d1 = od.od[3 * i + 1] - mean[1];
    const double d2 = od.od[3 * i + 2] - mean[2];
    cov[0] += d0 * d0;
    cov[1] += d0 * d1;
    cov[2] += d0 * d2;
    cov[4] += d1 * d1;
    cov[5] += d1 * d2;
    cov[8] += d2 * d2;
  }
  cov[3] = cov[1];
  cov[6] = cov[2];
  cov[7] = cov[5];
  for (double& c : cov) c /= static_cast<double>(tissue.size() - 1);

  const auto eig = linalg::symmetric_eigen(cov, 3);
  if (!(eig.values[0] > 0.0) || eig.values[1] < kDegenerateEigenRatio * eig.values[0])
    throw DegenerateStains("OD cloud is effectively one-dimensional");
  const auto& e1 = eig.vectors[0];
  const auto& e2 = eig.vectors[1];

  std::vector<double> angles;
  angles.reserve(tissue.size());
  for (std::size_t i : tissue) {
    const double* p = od.od.data() + 3 * i;
    const double t1 = p[0] * e1[0] + p[1] * e1[1] + p[2] * e1[2];
    const double t2 = p[0] * e2[0] + p[1] * e2[1] + p[2] * e2[2];
    angles.push_back(std::atan2(t2, t1));
  }
  const double phi_lo = linalg::percentile(angles, alpha);
  const double phi_hi = linalg::percentile(std::move(angles), 100.0 - alpha);

  auto direction = [&](double phi) {
    Vec3 v{};
    for (int k = 0; k < 3; ++k)
      v[static_cast<std::size_t>(k)] = std::cos(phi) * e1[static_cast<std::size_t>(k)] + std::sin(phi) * e2[static_cast<std::size_t>(k)];
    if (v[0] + v[1] + v[2] < 0)
      for (double& x : v) x = -x;
    for (double& x : v) x = std::max(x, 0.0);
    return normalized(v);
  };
  Vec3 a = direction(phi_lo);
  Vec3 b = direction(phi_hi);
  if (b[0] > a[0]) std::swap(a, b);

  Estimate est;
  est.basis.h_vector = a;
  est.basis.e_vector = b;
  if (angle_deg(a, b) < kMinStainAngleDeg) throw DegenerateStains("estimated stain vectors are nearly parallel");

  std::vector<double> raw = unmix(od, est.basis);
  std::vector<double> ch(n), ce(n);
  for (std::size_t i = 0; i < n; ++i) {
    raw[2 * i] = std::max(raw[2 * i], 0.0);
    raw[2 * i + 1] = std::max(raw[2 * i + 1], 0.0);
    ch[i] = raw[2 * i];
    ce[i] = raw[2 * i + 1];
  }
  est.basis.max_concentrations = {linalg::percentile(std::move(ch), kMaxConcentrationPercentile),
                                  linalg::percentile(std::move(ce), kMaxConcentrationPercentile)};
  if (!(est.basis.max_concentrations[0] > 0.0 && est.basis.max_concentrations[1] > 0.0))
    throw InsufficientTissue("robust maximum concentration is zero (too little stained area)");
  est.conc = std::move(raw);
  return est;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double angle_deg(const Vec3& a, const Vec3& b) {
  const double na = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
  const double nb = std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
  double c = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / (na * nb);
  c = std::clamp(c, -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

OdImage rgb_to_od(const RgbPatch& patch, double io) {
  if (!(io > 0.0)) throw PreconditionError("io must be positive");
  const auto table = od_table(io);
  OdImage out;
  out.width = patch.width;
  out.height = patch.height;
  out.io = io;
  out.od.resize(patch.pixels.size());
  for (std::size_t i = 0; i < patch.pixels.size(); ++i) out.od[i] = table[patch.pixels[i]];
  return out;
}

RgbPatch od_to_rgb(const OdImage& od) {
  RgbPatch out(od.width, od.height);
  for (std::size_t i = 0; i < od.od.size(); ++i) {
    const double v = std::round(od.io * std::pow(10.0, -od.od[i]));
    out.pixels[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
  }
  return out;
}

void validate_basis(const StainBasis& basis) {
  for (const Vec3* v : {&basis.h_vector, &basis.e_vector}) {
    const double len = std::sqrt((*v)[0] * (*v)[0] + (*v)[1] * (*v)[1] + (*v)[2] * (*v)[2]);
    if (std::fabs(len - 1.0) > 1e-9) throw PreconditionError("stain vector is not unit length");
    for (double x : *v)
      if (!(x >= 0.0)) throw PreconditionError("stain vector has a negative component");
  }
  for (double m : basis.max_concentrations)
    if (!(m > 0.0) || !std::isfinite(m)) throw PreconditionError("max concentrations must be positive");
  if (angle_deg(basis.h_vector, basis.e_vector) < kMinStainAngleDeg)
    throw DegenerateStains("stain vectors are nearly parallel");
}

StainBasis estimate_stain_basis(const OdImage& od, double alpha, double beta) {
  return estimate_with_concentrations(od, alpha, beta).basis;
}

std::vector<double> unmix(const OdImage& od, const StainBasis& basis) {
  const PseudoInverse pinv = pseudo_inverse(basis);
  const std::size_t n = od.pixel_count();
  std::vector<double> conc(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = od.od.data() + 3 * i;
    conc[2 * i] = pinv.row_h[0] * p[0] + pinv.row_h[1] * p[1] + pinv.row_h[2] * p[2];
    conc[2 * i + 1] = pinv.row_e[0] * p[0] + pinv.row_e[1] * p[1] + pinv.row_e[2] * p[2];
  }
  return conc;
}

ConcentrationMap solve_concentrations(const OdImage& od, const StainBasis& basis) {
  ConcentrationMap out;
  out.width = od.width;
  out.height = od.height;
  out.conc = unmix(od, basis);
  for (double& c : out.conc) c = std::max(c, 0.0);
  return out;
}

RgbPatch normalize_patch(const RgbPatch& patch, const NormalizationTarget& target, double alpha, double beta) {
  const OdImage od = rgb_to_od(patch, target.io);
  const Estimate src = estimate_with_concentrations(od, alpha, beta);
  const StainBasis& tb = target.basis;
  const double scale_h = tb.max_concentrations[0] / src.basis.max_concentrations[0];
  const double scale_e = tb.max_concentrations[1] / src.basis.max_concentrations[1];

  OdImage out;
  out.width = od.width;
  out.height = od.height;
  out.io = target.io;
  out.od.resize(od.od.size());
  const std::size_t n = od.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    const double ch = src.conc[2 * i] * scale_h;
    const double ce = src.conc[2 * i + 1] * scale_e;
    for (std::size_t k = 0; k < 3; ++k) out.od[3 * i + k] = ch * tb.h_vector[k] + ce * tb.e_vector[k];
  }
  RgbPatch rgb = od_to_rgb(out);
  rgb.mpp = patch.mpp;
  return rgb;
}

NormalizationTarget fit_target(const RgbPatch& reference, double alpha, double beta, double io) {
  NormalizationTarget t;
  t.io = io;
  t.basis = estimate_stain_basis(rgb_to_od(reference, io), alpha, beta);
  return t;
}

std::string target_to_json(const NormalizationTarget& t) {
  const auto& b = t.basis;
  std::ostringstream os;
  os << "{\"io\": " << fmt17(t.io) << ", \"h\": [" << fmt17(b.h_vector[0]) << ", " << fmt17(b.h_vector[1]) << ", "
     << fmt17(b.h_vector[2]) << "], \"e\": [" << fmt17(b.e_vector[0]) << ", " << fmt17(b.e_vector[1]) << ", "
     << fmt17(b.e_vector[2]) << "], \"max_c\": [" << fmt17(b.max_concentrations[0]) << ", "
     << fmt17(b.max_concentrations[1]) << "], \"version\": 1}";
  return os.str();
}

NormalizationTarget target_from_json(const std::string& text, const std::string& source) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(source, static_cast<long long>(e.byte), "invalid JSON");
  }
  auto fail = [&](const std::string& what) { throw DataError(source, -1, what); };
  if (!j.is_object()) fail("target must be a JSON object");
  if (!j.contains("version") || j["version"] != 1) fail("unsupported or missing target version");
  auto read_array = [&](const char* key, std::size_t len) {
    if (!j.contains(key) || !j[key].is_array() || j[key].size() != len)
      fail(std::string("field '") + key + "' must be an array of " + std::to_string(len) + " numbers");
    std::vector<double> out;
    for (const auto& v : j[key]) {
      if (!v.is_number()) fail(std::string("field '") + key + "' has a non-numeric entry");
      out.push_back(v.get<double>());
    }
    return out;
  };
  NormalizationTarget t;
  if (!j.contains("io") || !j["io"].is_number()) fail("field 'io' must be a number");
  t.io = j["io"].get<double>();
  if (!(t.io > 0)) fail("field 'io' must be positive");
  const auto h = read_array("h", 3);
  const auto e = read_array("e", 3);
  const auto m = read_array("max_c", 2);
  std::copy(h.begin(), h.end(), t.basis.h_vector.begin());
  std::copy(e.begin(), e.end(), t.basis.e_vector.begin());
  std::copy(m.begin(), m.end(), t.basis.max_concentrations.begin());
  try {
    validate_basis(t.basis);
  } catch (const Error& err) {
    fail(err.what());
  }
  return t;
}

NormalizationTarget load_target(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path, -1, "cannot open target file");
  std::stringstream ss;
  ss << in.rdbuf();
  return target_from_json(ss.str(), path);
}

void save_target(const NormalizationTarget& target, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path, -1, "cannot write target file");
  out << target_to_json(target) << "\n";
}

}  // namespace wsikit::stain
