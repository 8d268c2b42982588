#include "wsikit/io.hpp"

#include <png.h>

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "wsikit/errors.hpp"

namespace fs = std::filesystem;

namespace wsikit::io {

std::string fmt_double(double v) {
  // Shortest representation that parses back to the same double.
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path, -1, "cannot open file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::vector<std::uint8_t>& bytes, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path, -1, "cannot write file");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_text(const std::string& text, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path, -1, "cannot write file");
  out << text;
}

namespace {

std::string read_text(const std::string& path) {
  const auto b = read_bytes(path);
  return {b.begin(), b.end()};
}

nlohmann::json parse_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path, static_cast<long long>(e.byte), "invalid JSON");
  }
}

std::string lower_ext(const std::string& path) {
  std::string ext = fs::path(path).extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

// Little-endian writer / bounds-checked reader.
class ByteWriter {
 public:
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void raw(const char* s, std::size_t n) { bytes.insert(bytes.end(), s, s + n); }
  std::vector<std::uint8_t> bytes;

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
};

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& b, std::string source) : b_(b), source_(std::move(source)) {}
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  void expect_magic(const char* magic) {
    need(4, "magic");
    if (std::memcmp(b_.data() + pos_, magic, 4) != 0) fail(std::string("bad magic, expected ") + magic);
    pos_ += 4;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return b_.size() - pos_; }
  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(source_, static_cast<long long>(pos_), what);
  }
  void need(std::size_t n, const char* what) const {
    if (b_.size() - pos_ < n) fail(std::string("truncated while reading ") + what);
  }

 private:
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n), "integer");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  const std::vector<std::uint8_t>& b_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

// ---- images ----

RgbPatch read_image(const std::string& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".ppm") return read_ppm(path);
  if (ext != ".png") throw DataError(path, -1, "unsupported image format (expected .png or .ppm)");
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) throw DataError(path, -1, std::string("PNG: ") + img.message);
  img.format = PNG_FORMAT_RGB;
  if (img.width < 1 || img.height < 1) throw DataError(path, -1, "PNG has zero size");
  std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, px.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw DataError(path, -1, "PNG: " + msg);
  }
  return RgbPatch(static_cast<int>(img.width), static_cast<int>(img.height), std::move(px));
}

namespace {
void write_png_format(int w, int h, const std::uint8_t* data, png_uint_32 format, const std::string& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = format;
  if (!png_image_write_to_file(&img, path.c_str(), 0, data, 0, nullptr))
    throw DataError(path, -1, std::string("PNG write failed: ") + img.message);
}
}  // namespace

void write_png(const RgbPatch& image, const std::string& path) {
  write_png_format(image.width, image.height, image.pixels.data(), PNG_FORMAT_RGB, path);
}

void write_gray_png(int width, int height, const std::vector<std::uint8_t>& gray, const std::string& path) {
  write_png_format(width, height, gray.data(), PNG_FORMAT_GRAY, path);
}

RgbPatch read_ppm(const std::string& path) {
  const auto bytes = read_bytes(path);
  std::size_t pos = 0;
  auto token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  if (token() != "P6") throw DataError(path, 0, "not a binary PPM (P6)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw DataError(path, static_cast<long long>(pos), "malformed PPM header");
  }
  if (w < 1 || h < 1 || maxval != 255) throw DataError(path, static_cast<long long>(pos), "unsupported PPM header");
  ++pos;  // single whitespace before the raster
  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() < pos + need) throw DataError(path, static_cast<long long>(bytes.size()), "truncated PPM raster");
  return RgbPatch(w, h, std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                                  bytes.begin() + static_cast<std::ptrdiff_t>(pos + need)));
}

void write_ppm(const RgbPatch& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path, -1, "cannot write file");
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
}

// ---- slide sidecar ----

SlideMeta read_slide_meta(const std::string& path) {
  const auto j = parse_json(path);
  SlideMeta m;
  try {
    m.mpp = j.at("mpp").get<double>();
    m.width = j.at("width").get<int>();
    m.height = j.at("height").get<int>();
    m.name = j.at("name").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path, -1, std::string("slide metadata: ") + e.what());
  }
  if (!(m.mpp > 0)) throw DataError(path, -1, "slide metadata: mpp must be positive");
  return m;
}

void write_slide_meta(const SlideMeta& meta, const std::string& path) {
  nlohmann::ordered_json j;
  j["mpp"] = meta.mpp;
  j["width"] = meta.width;
  j["height"] = meta.height;
  j["name"] = meta.name;
  write_text(j.dump() + "\n", path);
}

std::string default_meta_path(const std::string& image_path) {
  return fs::path(image_path).replace_extension(".json").string();
}

slide::SlideRaster load_slide(const std::string& image_path, const std::string& meta_path) {
  const SlideMeta meta = read_slide_meta(meta_path);
  slide::SlideRaster s;
  s.image = read_image(image_path);
  if (s.image.width != meta.width || s.image.height != meta.height)
    throw DataError(meta_path, -1, "sidecar dimensions do not match the raster");
  s.mpp = meta.mpp;
  s.image.mpp = meta.mpp;
  s.name = meta.name;
  return s;
}

// ---- FeatureFile ----

std::vector<std::uint8_t> encode_features(const diag::FeatureSet& fs) {
  ByteWriter w;
  w.raw("FVEC", 4);
  w.u16(kFeatureFileVersion);
  w.u32(static_cast<std::uint32_t>(fs.n));
  w.u32(static_cast<std::uint32_t>(fs.d));
  for (std::size_t i = 0; i < fs.n; ++i) {
    w.u32(fs.wsi_ids[i]);
    for (std::size_t k = 0; k < fs.d; ++k) w.f32(fs.vectors[i * fs.d + k]);
  }
  return std::move(w.bytes);
}

diag::FeatureSet decode_features(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  ByteReader r(bytes, source);
  r.expect_magic("FVEC");
  const std::uint16_t version = r.u16();
  if (version != kFeatureFileVersion) r.fail("unsupported FeatureFile version " + std::to_string(version));
  diag::FeatureSet fs;
  fs.n = r.u32();
  fs.d = r.u32();
  const std::size_t record = 4 + 4 * fs.d;
  if (r.remaining() != fs.n * record) r.fail("record section size does not match n and d");
  fs.vectors.reserve(fs.n * fs.d);
  for (std::size_t i = 0; i < fs.n; ++i) {
    const std::uint32_t id = r.u32();
    fs.wsi_ids.push_back(id);
    fs.manifest.try_emplace(id, "wsi_" + std::to_string(id));
    for (std::size_t k = 0; k < fs.d; ++k) {
      const double v = r.f32();
      if (!std::isfinite(v)) r.fail("non-finite feature value");
      fs.vectors.push_back(v);
    }
  }
  return fs;
}

std::string manifest_path(const std::string& feature_path) { return feature_path + ".manifest.json"; }

void write_features(const diag::FeatureSet& fs, const std::string& path) {
  write_bytes(encode_features(fs), path);
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [id, name] : fs.manifest) j[std::to_string(id)] = name;
  write_text(j.dump() + "\n", manifest_path(path));
}

diag::FeatureSet read_features(const std::string& path) {
  diag::FeatureSet fs = decode_features(read_bytes(path), path);
  const std::string mpath = manifest_path(path);
  if (fs::exists(mpath)) {
    const auto j = parse_json(mpath);
    if (!j.is_object()) throw DataError(mpath, -1, "manifest must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      try {
        fs.manifest[static_cast<std::uint32_t>(std::stoul(key))] = value.get<std::string>();
      } catch (const std::exception&) {
        throw DataError(mpath, -1, "manifest entry '" + key + "' is not id -> name");
      }
    }
  }
  return fs;
}

// ---- checkpoint ----

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.raw("MDCK", 4);
  w.u16(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(ckpt.params.layers.size()));
  for (const dino::Layer& l : ckpt.params.layers) {
    w.u32(static_cast<std::uint32_t>(l.rows));
    w.u32(static_cast<std::uint32_t>(l.cols));
    for (double v : l.weights) w.f32(v);
    for (double v : l.bias) w.f32(v);
  }
  for (double v : ckpt.center) w.f32(v);
  w.u64(ckpt.step);
  return std::move(w.bytes);
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  ByteReader r(bytes, source);
  r.expect_magic("MDCK");
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion) r.fail("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  const std::uint32_t n_layers = r.u32();
  if (n_layers == 0) r.fail("checkpoint has no layers");
  for (std::uint32_t li = 0; li < n_layers; ++li) {
    dino::Layer l;
    l.rows = r.u32();
    l.cols = r.u32();
    if (!c.params.layers.empty() && c.params.layers.back().rows != l.cols)
      r.fail("layer " + std::to_string(li) + " input width does not match the previous layer");
    r.need(4 * (l.rows * l.cols + l.rows), "layer parameters");
    l.weights.resize(l.rows * l.cols);
    l.bias.resize(l.rows);
    for (double& v : l.weights) v = r.f32();
    for (double& v : l.bias) v = r.f32();
    c.params.layers.push_back(std::move(l));
  }
  c.center.resize(c.params.output_dim());
  for (double& v : c.center) v = r.f32();
  c.step = r.u64();
  if (r.remaining() != 0) r.fail("trailing bytes after checkpoint");
  return c;
}

void write_checkpoint(const Checkpoint& ckpt, const std::string& path) { write_bytes(encode_checkpoint(ckpt), path); }

Checkpoint read_checkpoint(const std::string& path) { return decode_checkpoint(read_bytes(path), path); }

// ---- patch directories ----

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = '_';
  return s;
}

}  // namespace

PatchSet read_patch_dir(const std::string& dir) {
  const std::string index = (fs::path(dir) / "index.csv").string();
  std::ifstream in(index, std::ios::binary);
  if (!in) throw DataError(index, -1, "cannot open patch index");
  PatchSet set;
  std::string line;
  long long offset = 0;
  bool header = true;
  while (std::getline(in, line)) {
    const long long line_start = offset;
    offset += static_cast<long long>(line.size()) + 1;
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.rfind("file,wsi_id,wsi_name,mpp,label", 0) != 0)
        throw DataError(index, 0, "header must be file,wsi_id,wsi_name,mpp,label");
      continue;
    }
    const auto cols = split_csv_line(line);
    if (cols.size() != 5) throw DataError(index, line_start, "expected 5 columns");
    PatchRecord rec;
    try {
      rec.file = cols[0];
      rec.wsi_id = static_cast<std::uint32_t>(std::stoul(cols[1]));
      rec.wsi_name = cols[2];
      rec.mpp = std::stod(cols[3]);
      rec.label = std::stoi(cols[4]);
    } catch (const std::exception&) {
      throw DataError(index, line_start, "malformed row");
    }
    RgbPatch p = read_image((fs::path(dir) / rec.file).string());
    if (rec.mpp > 0) p.mpp = rec.mpp;
    set.patches.push_back(std::move(p));
    set.records.push_back(std::move(rec));
  }
  return set;
}

void write_patch_dir(const std::string& dir, const PatchSet& set) {
  fs::create_directories(dir);
  std::ostringstream idx;
  idx << "file,wsi_id,wsi_name,mpp,label\n";
  for (std::size_t i = 0; i < set.patches.size(); ++i) {
    const PatchRecord& r = set.records[i];
    write_png(set.patches[i], (fs::path(dir) / r.file).string());
    idx << sanitize(r.file) << "," << r.wsi_id << "," << sanitize(r.wsi_name) << "," << fmt_double(r.mpp) << ","
        << r.label << "\n";
  }
  write_text(idx.str(), (fs::path(dir) / "index.csv").string());
}

// ---- cohorts ----

void write_cohort(const std::string& dir, const synth::VirtualCohort& cohort) {
  fs::create_directories(fs::path(dir) / "slides");
  const auto& spec = cohort.spec;
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["patch_size"] = spec.patch_size;
  j["patches_per_wsi"] = spec.patches_per_wsi;
  j["mosaic_columns"] = cohort.mosaic_columns();
  j["ground_truth"] = "ground_truth.csv";
  j["slides"] = nlohmann::ordered_json::array();
  std::size_t first = 0;
  for (int w = 0; w < spec.n_wsis; ++w) {
    const slide::SlideRaster s = cohort.mosaic(static_cast<std::uint32_t>(w));
    const std::string file = "slides/" + s.name + ".png";
    const std::string meta = "slides/" + s.name + ".json";
    write_png(s.image, (fs::path(dir) / file).string());
    write_slide_meta({s.mpp, s.width(), s.height(), s.name}, (fs::path(dir) / meta).string());
    nlohmann::ordered_json e;
    e["name"] = s.name;
    e["file"] = file;
    e["meta"] = meta;
    e["mpp"] = s.mpp;
    e["wsi_id"] = w;
    e["first_patch"] = first;
    e["n_patches"] = spec.patches_per_wsi;
    first += static_cast<std::size_t>(spec.patches_per_wsi);
    j["slides"].push_back(e);
  }
  nlohmann::ordered_json sj;
  sj["n_wsis"] = spec.n_wsis;
  sj["patches_per_wsi"] = spec.patches_per_wsi;
  sj["patch_size"] = spec.patch_size;
  sj["n_content_classes"] = spec.n_content_classes;
  sj["stain_perturbation_deg"] = spec.stain_perturbation_deg;
  sj["intensity_jitter"] = {spec.intensity_jitter_lo, spec.intensity_jitter_hi};
  sj["noise_sigma"] = spec.noise_sigma;
  sj["mpp"] = spec.mpp;
  sj["seed"] = spec.seed;
  sj["morphology_confound"] = spec.morphology_confound;
  j["spec"] = sj;
  write_text(j.dump(2) + "\n", (fs::path(dir) / "cohort.json").string());

  std::ostringstream gt;
  gt << "patch_idx,wsi_id,content_class\n";
  for (std::size_t i = 0; i < cohort.size(); ++i)
    gt << i << "," << cohort.wsi_ids[i] << "," << cohort.content_classes[i] << "\n";
  write_text(gt.str(), (fs::path(dir) / "ground_truth.csv").string());
}

std::vector<CohortSlideEntry> read_cohort_manifest(const std::string& manifest_path) {
  const auto j = parse_json(manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  std::vector<CohortSlideEntry> out;
  try {
    for (const auto& e : j.at("slides")) {
      CohortSlideEntry s;
      s.name = e.at("name").get<std::string>();
      s.image_path = (base / e.at("file").get<std::string>()).string();
      s.meta_path = e.contains("meta") ? (base / e.at("meta").get<std::string>()).string()
                                       : default_meta_path(s.image_path);
      s.mpp = e.at("mpp").get<double>();
      out.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest_path, -1, std::string("cohort manifest: ") + e.what());
  }
  return out;
}

PatchSet read_cohort_patches(const std::string& dir) {
  const std::string manifest = (fs::path(dir) / "cohort.json").string();
  const auto j = parse_json(manifest);
  PatchSet set;
  try {
    const int ps = j.at("patch_size").get<int>();
    const int cols = j.at("mosaic_columns").get<int>();
    const std::string gt_path = (fs::path(dir) / j.at("ground_truth").get<std::string>()).string();

    std::vector<int> content;
    {
      std::ifstream in(gt_path, std::ios::binary);
      if (!in) throw DataError(gt_path, -1, "cannot open ground truth");
      std::string line;
      std::getline(in, line);
      long long offset = static_cast<long long>(line.size()) + 1;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c = split_csv_line(line);
        if (c.size() != 3) throw DataError(gt_path, offset, "expected patch_idx,wsi_id,content_class");
        content.push_back(std::stoi(c[2]));
        offset += static_cast<long long>(line.size()) + 1;
      }
    }

    for (const auto& e : j.at("slides")) {
      const std::string file = (fs::path(dir) / e.at("file").get<std::string>()).string();
      const std::string meta = (fs::path(dir) / e.at("meta").get<std::string>()).string();
      const slide::SlideRaster s = load_slide(file, meta);
      const auto first = e.at("first_patch").get<std::size_t>();
      const auto count = e.at("n_patches").get<std::size_t>();
      const auto wsi = e.at("wsi_id").get<std::uint32_t>();
      for (std::size_t k = 0; k < count; ++k) {
        const int x = static_cast<int>(k % static_cast<std::size_t>(cols)) * ps;
        const int y = static_cast<int>(k / static_cast<std::size_t>(cols)) * ps;
        RgbPatch p = slide::crop(s.image, x, y, ps, ps);
        p.mpp = s.mpp;
        PatchRecord rec;
        rec.file = e.at("file").get<std::string>() + "#" + std::to_string(k);
        rec.wsi_id = wsi;
        rec.wsi_name = s.name;
        rec.mpp = s.mpp;
        const std::size_t gidx = first + k;
        if (gidx >= content.size()) throw DataError(gt_path, -1, "ground truth has fewer rows than patches");
        rec.label = content[gidx];
        set.patches.push_back(std::move(p));
        set.records.push_back(std::move(rec));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest, -1, std::string("cohort manifest: ") + e.what());
  }
  return set;
}

PatchSet read_patch_source(const std::string& path) {
  if (fs::exists(fs::path(path) / "cohort.json")) return read_cohort_patches(path);
  if (fs::exists(fs::path(path) / "index.csv")) return read_patch_dir(path);
  throw DataError(path, -1, "neither a cohort directory (cohort.json) nor a patch directory (index.csv)");
}

}  // namespace wsikit::io
