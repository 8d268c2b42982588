#pragma once

// File formats: images, slide sidecars, FeatureFile, checkpoints, patch
// directories and cohort directories.

#include <cstdint>
#include <string>
#include <vector>

#include "wsikit/embed_diag.hpp"
#include "wsikit/encoder.hpp"
#include "wsikit/image.hpp"
#include "wsikit/slide_pipeline.hpp"
#include "wsikit/synth_slides.hpp"

namespace wsikit::io {

// ---- images ----
/// Reads .png or binary .ppm (P6), by extension.
RgbPatch read_image(const std::string& path);
void write_png(const RgbPatch& image, const std::string& path);
void write_gray_png(int width, int height, const std::vector<std::uint8_t>& gray, const std::string& path);
RgbPatch read_ppm(const std::string& path);
void write_ppm(const RgbPatch& image, const std::string& path);

// ---- slide sidecar: {"mpp", "width", "height", "name"} ----
struct SlideMeta {
  double mpp = 0.0;
  int width = 0;
  int height = 0;
  std::string name;
};
SlideMeta read_slide_meta(const std::string& path);
void write_slide_meta(const SlideMeta& meta, const std::string& path);
/// Image plus sidecar; the sidecar dimensions must match the raster.
slide::SlideRaster load_slide(const std::string& image_path, const std::string& meta_path);
/// `<image path without extension>.json`
std::string default_meta_path(const std::string& image_path);

// ---- FeatureFile: "FVEC", u16 version, u32 n, u32 d, n x (u32 wsi_id, d x f32), little-endian ----
inline constexpr std::uint16_t kFeatureFileVersion = 1;
std::vector<std::uint8_t> encode_features(const diag::FeatureSet& fs);
/// Manifest names are not part of the binary; ids get default names.
diag::FeatureSet decode_features(const std::vector<std::uint8_t>& bytes, const std::string& source = "<features>");
std::string manifest_path(const std::string& feature_path);
/// Writes the binary and its `.manifest.json` sidecar.
void write_features(const diag::FeatureSet& fs, const std::string& path);
diag::FeatureSet read_features(const std::string& path);

// ---- checkpoint: "MDCK", u16 version, u32 layers, per layer u32 rows/cols + f32 weights + f32 biases,
//      K f32 center, u64 step ----
inline constexpr std::uint16_t kCheckpointVersion = 1;
struct Checkpoint {
  dino::EncoderParams params;
  std::vector<double> center;
  std::uint64_t step = 0;
};
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& source = "<checkpoint>");
void write_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint read_checkpoint(const std::string& path);

std::vector<std::uint8_t> read_bytes(const std::string& path);
void write_bytes(const std::vector<std::uint8_t>& bytes, const std::string& path);
void write_text(const std::string& text, const std::string& path);

// ---- patch sets ----
struct PatchRecord {
  std::string file;
  std::uint32_t wsi_id = 0;
  std::string wsi_name;
  double mpp = 0.0;
  /// Content class when known, -1 otherwise.
  int label = -1;
};

struct PatchSet {
  std::vector<RgbPatch> patches;
  std::vector<PatchRecord> records;
};

/// Directory with `index.csv` (file,wsi_id,wsi_name,mpp,label) and one PNG per patch.
PatchSet read_patch_dir(const std::string& dir);
void write_patch_dir(const std::string& dir, const PatchSet& set);

/// Cohort directory: cohort.json, ground_truth.csv, slides/<name>.png + sidecar.
void write_cohort(const std::string& dir, const synth::VirtualCohort& cohort);
PatchSet read_cohort_patches(const std::string& dir);

struct CohortSlideEntry {
  std::string name;
  std::string image_path;  // resolved
  std::string meta_path;   // resolved
  double mpp = 0.0;
};
/// Slides listed in a cohort manifest file.
std::vector<CohortSlideEntry> read_cohort_manifest(const std::string& manifest_path);

/// Cohort directory when it holds cohort.json, otherwise a patch directory.
PatchSet read_patch_source(const std::string& path);

std::string fmt_double(double v);

}  // namespace wsikit::io
