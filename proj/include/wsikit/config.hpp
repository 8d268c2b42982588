#pragma once

// Flat key=value run configuration covering every module default.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wsikit/linear_probe.hpp"
#include "wsikit/mini_dino.hpp"
#include "wsikit/slide_pipeline.hpp"
#include "wsikit/stain_norm.hpp"
#include "wsikit/synth_slides.hpp"
#include "wsikit/tsne.hpp"

namespace wsikit {

struct RunConfig {
  std::uint64_t seed = 0;
  /// 0 keeps the OpenMP default.
  int threads = 0;

  // tiling
  double target_mpp = slide::kDefaultTargetMpp;
  int target_size = slide::kDefaultTargetSize;
  double min_tissue_fraction = slide::kDefaultMinTissueFraction;
  slide::TissueConfig tissue;
  double mpp_bin_width = 0.05;

  // stain normalization
  stain::MacenkoParams macenko;
  double io = stain::kDefaultIo;
  /// Empty selects the shipped default target.
  std::string target_path;

  // diagnostics
  std::size_t knn_k = diag::kDefaultK;
  bool sample = false;
  std::size_t sample_per_wsi = diag::kDefaultPerWsi;
  std::size_t sample_n_wsis = diag::kDefaultNumWsis;

  diag::TsneParams tsne;
  dino::DinoConfig dino;
  probe::ProbeConfig probe;
  int eval_resize = probe::kEvalResize;
  int eval_crop = probe::kEvalCrop;
  /// Embed through the evaluation transform (normalize, resize, centre crop).
  bool eval_preprocess = false;
  synth::CohortSpec synth;

  /// Every key in stable order with its current value.
  std::vector<std::pair<std::string, std::string>> entries() const;
  std::string to_text() const;
};

struct ConfigKey {
  std::string name;
  std::string section;
  std::string help;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

/// All recognised keys.
const std::vector<ConfigKey>& config_keys();

/// Sets one key. Throws UsageError naming the key when unknown or unparsable.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Applies `key = value` lines; '#' starts a comment. Unknown keys are
/// rejected with the key and line named.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source = "<config>");
void apply_config_file(RunConfig& cfg, const std::string& path);

/// Location of the shipped default normalization target.
std::string default_target_path();

}  // namespace wsikit
