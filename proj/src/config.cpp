#include "wsikit/config.hpp"

#include <fstream>
#include <sstream>

#include "wsikit/errors.hpp"
#include "wsikit/io.hpp"

#ifndef WSIKIT_DATA_DIR
#define WSIKIT_DATA_DIR "data"
#endif

namespace wsikit {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw UsageError("config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  bad_value(key, v, "a number");
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long d = std::stoll(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  bad_value(key, v, "an integer");
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] != '-') {
      const unsigned long long d = std::stoull(v, &used);
      if (used == v.size()) return d;
    }
  } catch (const std::exception&) {
  }
  bad_value(key, v, "an unsigned integer");
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::string show(double v) { return io::fmt_double(v); }
std::string show(bool v) { return v ? "true" : "false"; }
template <class T>
std::string show(T v) requires std::is_integral_v<T> {
  return std::to_string(v);
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const long long n = parse_int(key, trim(item));
    if (n < 1) bad_value(key, v, "a comma-separated list of positive integers");
    out.push_back(static_cast<std::size_t>(n));
  }
  return out;
}

std::string show_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<ConfigKey> build_keys() {
  std::vector<ConfigKey> keys;
  auto add = [&](std::string name, std::string section, std::string help, auto member) {
    ConfigKey k;
    k.name = name;
    k.section = std::move(section);
    k.help = std::move(help);
    k.get = [member](const RunConfig& c) { return show(member(const_cast<RunConfig&>(c))); };
    k.set = [member, name](RunConfig& c, const std::string& v) {
      auto& ref = member(c);
      using T = std::remove_reference_t<decltype(ref)>;
      if constexpr (std::is_same_v<T, double>) {
        ref = parse_double(name, v);
      } else if constexpr (std::is_same_v<T, bool>) {
        ref = parse_bool(name, v);
      } else if constexpr (std::is_same_v<T, std::uint64_t> || std::is_same_v<T, std::size_t>) {
        ref = static_cast<T>(parse_u64(name, v));
      } else {
        ref = static_cast<T>(parse_int(name, v));
      }
    };
    keys.push_back(std::move(k));
  };
#define WK_KEY(name, section, help, expr) add(name, section, help, [](RunConfig& c) -> auto& { return expr; })

  WK_KEY("seed", "run", "master seed", c.seed);
  WK_KEY("threads", "run", "OpenMP threads (0 = default)", c.threads);

  WK_KEY("tile.target_mpp", "tile", "target microns per pixel", c.target_mpp);
  WK_KEY("tile.target_size", "tile", "patch side at the target mpp", c.target_size);
  WK_KEY("tile.min_tissue_fraction", "tile", "minimum tissue fraction per patch", c.min_tissue_fraction);
  WK_KEY("tile.mask_downsample", "tile", "tissue mask downsample factor", c.tissue.downsample);
  WK_KEY("tile.median_radius", "tile", "median filter radius on the mask", c.tissue.median_radius);
  WK_KEY("tile.min_region_area", "tile", "minimum tissue region area in mask pixels", c.tissue.min_region_area);
  WK_KEY("stats.bin_width", "stats", "MPP histogram bin width", c.mpp_bin_width);

  WK_KEY("stain.alpha", "stain", "angle percentile", c.macenko.alpha);
  WK_KEY("stain.beta", "stain", "OD threshold for tissue pixels", c.macenko.beta);
  WK_KEY("stain.io", "stain", "transmitted light intensity", c.io);

  WK_KEY("diag.k", "diag", "neighbours for kNN purity", c.knn_k);
  WK_KEY("diag.sample", "diag", "apply the per-WSI sampling protocol", c.sample);
  WK_KEY("diag.per_wsi", "diag", "patches sampled per WSI", c.sample_per_wsi);
  WK_KEY("diag.n_wsis", "diag", "WSIs sampled", c.sample_n_wsis);

  WK_KEY("tsne.perplexity", "tsne", "perplexity", c.tsne.perplexity);
  WK_KEY("tsne.iterations", "tsne", "gradient iterations", c.tsne.iterations);
  WK_KEY("tsne.learning_rate", "tsne", "step size", c.tsne.learning_rate);
  WK_KEY("tsne.exaggeration", "tsne", "early exaggeration factor", c.tsne.exaggeration);
  WK_KEY("tsne.exaggeration_iterations", "tsne", "early exaggeration length", c.tsne.exaggeration_iterations);
  WK_KEY("tsne.initial_momentum", "tsne", "momentum before the switch", c.tsne.initial_momentum);
  WK_KEY("tsne.final_momentum", "tsne", "momentum after the switch", c.tsne.final_momentum);
  WK_KEY("tsne.momentum_switch_iteration", "tsne", "momentum switch iteration", c.tsne.momentum_switch_iteration);
  WK_KEY("tsne.adaptive_gains", "tsne", "per-coordinate step gains", c.tsne.adaptive_gains);
  WK_KEY("tsne.init_std", "tsne", "std of the initial layout", c.tsne.init_std);

  WK_KEY("dino.n_local_crops", "dino", "local crops per sample", c.dino.n_local_crops);
  WK_KEY("dino.global_view_size", "dino", "global view side", c.dino.global_view_size);
  WK_KEY("dino.local_view_size", "dino", "local view side", c.dino.local_view_size);
  WK_KEY("dino.encoder_input_size", "dino", "side views are resized to", c.dino.encoder_input_size);
  WK_KEY("dino.feature_dim", "dino", "penultimate width (embedding size)", c.dino.feature_dim);
  WK_KEY("dino.n_prototypes", "dino", "prototype logits K", c.dino.n_prototypes);
  WK_KEY("dino.student_temp", "dino", "student temperature", c.dino.student_temp);
  WK_KEY("dino.teacher_temp", "dino", "teacher temperature", c.dino.teacher_temp);
  WK_KEY("dino.ema_momentum", "dino", "teacher EMA momentum", c.dino.ema_momentum);
  WK_KEY("dino.center_momentum", "dino", "center momentum", c.dino.center_momentum);
  WK_KEY("dino.centering", "dino", "subtract the running center", c.dino.centering);
  WK_KEY("dino.batch_size", "dino", "samples per step", c.dino.batch_size);
  WK_KEY("dino.total_iterations", "dino", "optimisation steps", c.dino.total_iterations);
  WK_KEY("dino.warmup_scale", "dino", "fraction of the 1,000-iteration warmup", c.dino.warmup_scale);
  WK_KEY("dino.base_lr", "dino", "peak learning rate", c.dino.base_lr);
  WK_KEY("dino.sgd_momentum", "dino", "SGD momentum", c.dino.sgd_momentum);
  WK_KEY("dino.global_scale_min", "dino", "global crop min area fraction", c.dino.global_scale_min);
  WK_KEY("dino.global_scale_max", "dino", "global crop max area fraction", c.dino.global_scale_max);
  WK_KEY("dino.local_scale_min", "dino", "local crop min area fraction", c.dino.local_scale_min);
  WK_KEY("dino.local_scale_max", "dino", "local crop max area fraction", c.dino.local_scale_max);
  WK_KEY("dino.flip_p", "dino", "horizontal flip probability", c.dino.flip_p);
  WK_KEY("dino.jitter_p", "dino", "colour jitter probability", c.dino.jitter_p);
  WK_KEY("dino.brightness", "dino", "brightness jitter", c.dino.brightness);
  WK_KEY("dino.contrast", "dino", "contrast jitter", c.dino.contrast);
  WK_KEY("dino.saturation", "dino", "saturation jitter", c.dino.saturation);
  WK_KEY("dino.hue", "dino", "hue jitter", c.dino.hue);
  WK_KEY("dino.grayscale_p", "dino", "grayscale probability", c.dino.grayscale_p);
  WK_KEY("dino.macenko", "dino", "Macenko-normalize before augmentation and embedding", c.dino.macenko_enabled);
  WK_KEY("dino.max_skip_fraction", "dino", "abort when a batch skips more than this", c.dino.max_skip_fraction);

  WK_KEY("probe.lr", "probe", "learning rate", c.probe.lr);
  WK_KEY("probe.momentum", "probe", "SGD momentum", c.probe.momentum);
  WK_KEY("probe.weight_decay", "probe", "weight decay (must be 0)", c.probe.weight_decay);
  WK_KEY("probe.batch_size", "probe", "minibatch size", c.probe.batch_size);
  WK_KEY("probe.iterations", "probe", "optimisation steps", c.probe.iterations);
  WK_KEY("embed.eval_preprocess", "embed", "normalize, resize and center-crop before embedding", c.eval_preprocess);
  WK_KEY("embed.eval_resize", "embed", "eval resize side", c.eval_resize);
  WK_KEY("embed.eval_crop", "embed", "eval center-crop side", c.eval_crop);

  WK_KEY("synth.n_wsis", "synth", "slides", c.synth.n_wsis);
  WK_KEY("synth.patches_per_wsi", "synth", "patches per slide", c.synth.patches_per_wsi);
  WK_KEY("synth.patch_size", "synth", "patch side", c.synth.patch_size);
  WK_KEY("synth.n_content_classes", "synth", "content classes", c.synth.n_content_classes);
  WK_KEY("synth.stain_perturbation_deg", "synth", "max stain basis rotation", c.synth.stain_perturbation_deg);
  WK_KEY("synth.intensity_jitter_lo", "synth", "per-stain intensity scale low", c.synth.intensity_jitter_lo);
  WK_KEY("synth.intensity_jitter_hi", "synth", "per-stain intensity scale high", c.synth.intensity_jitter_hi);
  WK_KEY("synth.noise_sigma", "synth", "OD noise std", c.synth.noise_sigma);
  WK_KEY("synth.mpp", "synth", "slide mpp", c.synth.mpp);
  WK_KEY("synth.morphology_confound", "synth", "per-slide nucleus size bias", c.synth.morphology_confound);
#undef WK_KEY

  // Keys that are not plain numbers.
  keys.push_back({"dino.hidden_sizes", "dino", "hidden layer widths, comma-separated",
                  [](const RunConfig& c) { return show_sizes(c.dino.hidden_sizes); },
                  [](RunConfig& c, const std::string& v) { c.dino.hidden_sizes = parse_sizes("dino.hidden_sizes", v); }});
  keys.push_back({"stain.target", "stain", "normalization target JSON (empty = shipped default)",
                  [](const RunConfig& c) { return c.target_path; },
                  [](RunConfig& c, const std::string& v) { c.target_path = v; }});
  return keys;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const ConfigKey& k : config_keys()) {
    if (k.name == key) {
      k.set(cfg, value);
      return;
    }
  }
  throw UsageError("unknown config key '" + key + "'");
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(source + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    try {
      set_config_value(cfg, key, trim(line.substr(eq + 1)));
    } catch (const UsageError& e) {
      throw UsageError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("--config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str(), path);
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const ConfigKey& k : config_keys()) out.emplace_back(k.name, k.get(*this));
  return out;
}

std::string RunConfig::to_text() const {
  std::string s;
  for (const auto& [k, v] : entries()) s += k + " = " + v + "\n";
  return s;
}

std::string default_target_path() { return std::string(WSIKIT_DATA_DIR) + "/default_target.json"; }

}  // namespace wsikit
