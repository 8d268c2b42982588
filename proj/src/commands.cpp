#include "wsikit/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "wsikit/errors.hpp"
#include "wsikit/io.hpp"
#include "wsikit/kernels.hpp"

namespace fs = std::filesystem;

namespace wsikit::cli {

namespace {

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::string patch_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "patch_%06zu.png", i);
  return buf;
}

dino::DinoConfig dino_config(const RunConfig& cfg) {
  dino::DinoConfig d = cfg.dino;
  d.macenko_alpha = cfg.macenko.alpha;
  d.macenko_beta = cfg.macenko.beta;
  if (d.macenko_enabled) d.macenko_target = resolve_target(cfg);
  return d;
}

diag::FeatureSet load_for_diagnostics(const std::string& path, const RunConfig& cfg) {
  diag::FeatureSet fs = io::read_features(path);
  if (cfg.sample) fs = diag::sample_protocol(fs, cfg.sample_per_wsi, cfg.sample_n_wsis, cfg.seed);
  return fs;
}

// `split,index,label` rows grouped by split.
std::map<std::string, std::map<std::size_t, int>> read_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path, -1, "cannot open labels");
  std::map<std::string, std::map<std::size_t, int>> out;
  std::string line;
  long long offset = 0;
  bool header = true;
  while (std::getline(in, line)) {
    const long long start = offset;
    offset += static_cast<long long>(line.size()) + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line != "split,index,label") throw DataError(path, 0, "header must be split,index,label");
      continue;
    }
    std::stringstream ss(line);
    std::string split, idx, label;
    if (!std::getline(ss, split, ',') || !std::getline(ss, idx, ',') || !std::getline(ss, label))
      throw DataError(path, start, "expected split,index,label");
    try {
      const int l = std::stoi(label);
      if (l < 0) throw DataError(path, start, "labels must be non-negative");
      out[split][std::stoul(idx)] = l;
    } catch (const std::invalid_argument&) {
      throw DataError(path, start, "malformed row");
    } catch (const std::out_of_range&) {
      throw DataError(path, start, "malformed row");
    }
  }
  return out;
}

probe::LabeledFeatureSet attach_labels(diag::FeatureSet fs, const std::map<std::size_t, int>& labels,
                                       const std::string& split, const std::string& labels_path) {
  probe::LabeledFeatureSet out;
  out.labels.resize(fs.n);
  for (std::size_t i = 0; i < fs.n; ++i) {
    const auto it = labels.find(i);
    if (it == labels.end())
      throw DataError(labels_path, -1, "no label for " + split + " row " + std::to_string(i));
    out.labels[i] = it->second;
  }
  out.features = std::move(fs);
  return out;
}

}  // namespace

stain::NormalizationTarget resolve_target(const RunConfig& cfg) {
  if (!cfg.target_path.empty()) return stain::load_target(cfg.target_path);
  const std::string shipped = default_target_path();
  if (fs::exists(shipped)) return stain::load_target(shipped);
  return stain::fit_target(synth::reference_image(), cfg.macenko.alpha, cfg.macenko.beta, cfg.io);
}

Summary cmd_tile(const std::string& slide_path, const std::string& meta_path, const RunConfig& cfg,
                 const std::string& out) {
  const slide::SlideRaster s =
      io::load_slide(slide_path, meta_path.empty() ? io::default_meta_path(slide_path) : meta_path);
  const slide::TissueMask mask =
      slide::compute_tissue_mask(s, cfg.tissue.median_radius, cfg.tissue.min_region_area, cfg.tissue.downsample);
  const slide::PatchGrid grid = slide::plan_patch_grid(s, cfg.target_mpp, cfg.target_size, mask,
                                                       cfg.min_tissue_fraction);
  const std::vector<RgbPatch> patches = slide::extract_patches(s, grid);

  io::PatchSet set;
  set.patches = patches;
  for (std::size_t i = 0; i < patches.size(); ++i) set.records.push_back({patch_name(i), 0, s.name, s.mpp, -1});
  io::write_patch_dir(join(out, "patches"), set);

  std::ostringstream csv;
  csv << "x,y,size\n";
  for (const auto& c : grid.coords) csv << c.x << "," << c.y << "," << grid.extraction_size << "\n";
  io::write_text(csv.str(), join(out, "grid.csv"));

  std::vector<std::uint8_t> gray(mask.bits.size());
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = mask.bits[i] ? 255 : 0;
  io::write_gray_png(mask.width, mask.height, gray, join(out, "mask.png"));

  Summary j;
  j["slide"] = s.name;
  j["mpp"] = s.mpp;
  j["extraction_size"] = grid.extraction_size;
  j["candidate_cells"] = grid.candidate_cells;
  j["patches"] = grid.coords.size();
  j["tissue_mask_pixels"] = mask.count();
  return j;
}

Summary cmd_fit_target(const std::string& reference_path, const RunConfig& cfg, const std::string& out) {
  const RgbPatch ref = io::read_image(reference_path);
  const stain::NormalizationTarget t = stain::fit_target(ref, cfg.macenko.alpha, cfg.macenko.beta, cfg.io);
  stain::save_target(t, join(out, "target.json"));
  Summary j;
  j["reference"] = reference_path;
  j["h"] = t.basis.h_vector;
  j["e"] = t.basis.e_vector;
  j["max_c"] = t.basis.max_concentrations;
  j["target"] = join(out, "target.json");
  return j;
}

Summary cmd_normalize(const std::string& patch_dir, const std::string& target_path, const RunConfig& cfg,
                      const std::string& out) {
  const io::PatchSet in = io::read_patch_source(patch_dir);
  const stain::NormalizationTarget target = stain::load_target(target_path);
  const std::size_t n = in.patches.size();
  std::vector<RgbPatch> result(n);
  std::vector<std::string> reason(n);
  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t si = 0; si < sn; ++si) {
    const auto i = static_cast<std::size_t>(si);
    try {
      result[i] = stain::normalize_patch(in.patches[i], target, cfg.macenko.alpha, cfg.macenko.beta);
    } catch (const InsufficientTissue&) {
      reason[i] = "insufficient_tissue";
    } catch (const DegenerateStains&) {
      reason[i] = "degenerate_stains";
    }
  }
  io::PatchSet set;
  std::ostringstream skipped;
  skipped << "file,reason\n";
  for (std::size_t i = 0; i < n; ++i) {
    if (!reason[i].empty()) {
      skipped << in.records[i].file << "," << reason[i] << "\n";
      continue;
    }
    io::PatchRecord rec = in.records[i];
    rec.file = patch_name(i);
    set.patches.push_back(std::move(result[i]));
    set.records.push_back(std::move(rec));
  }
  io::write_patch_dir(out, set);
  io::write_text(skipped.str(), join(out, "skipped.csv"));
  Summary j;
  j["input"] = patch_dir;
  j["normalized"] = set.patches.size();
  j["skipped"] = n - set.patches.size();
  return j;
}

Summary cmd_stats_mpp(const std::string& cohort_manifest, const RunConfig& cfg, const std::string& out) {
  const auto slides = io::read_cohort_manifest(cohort_manifest);
  std::vector<slide::SlideSummary> summaries;
  for (const auto& e : slides) {
    const slide::SlideRaster s = io::load_slide(e.image_path, e.meta_path);
    const slide::TissueMask mask =
        slide::compute_tissue_mask(s, cfg.tissue.median_radius, cfg.tissue.min_region_area, cfg.tissue.downsample);
    std::size_t count = 0;
    try {
      count = slide::plan_patch_grid(s, cfg.target_mpp, cfg.target_size, mask, cfg.min_tissue_fraction).coords.size();
    } catch (const ExtractionTooLarge&) {
      count = 0;  // slide smaller than one patch
    }
    summaries.push_back({s.mpp, count});
  }
  const auto bins = slide::mpp_histogram(summaries, cfg.mpp_bin_width);
  std::ostringstream csv;
  csv << "bin_low,bin_high,patch_count\n";
  std::size_t total = 0;
  for (const auto& b : bins) {
    csv << io::fmt_double(b.low) << "," << io::fmt_double(b.high) << "," << b.patch_count << "\n";
    total += b.patch_count;
  }
  io::write_text(csv.str(), join(out, "mpp_histogram.csv"));
  Summary j;
  j["slides"] = slides.size();
  j["bins"] = bins.size();
  j["patches"] = total;
  return j;
}

Summary cmd_synth(const RunConfig& cfg, const std::string& out) {
  synth::CohortSpec spec = cfg.synth;
  spec.seed = cfg.seed;
  const synth::VirtualCohort cohort = synth::generate_cohort(spec);
  io::write_cohort(out, cohort);
  Summary j;
  j["n_wsis"] = spec.n_wsis;
  j["patches"] = cohort.size();
  j["stain_perturbation_deg"] = spec.stain_perturbation_deg;
  j["manifest"] = join(out, "cohort.json");
  return j;
}

Summary cmd_train(const std::string& cohort_dir, const RunConfig& cfg, const std::string& out) {
  const io::PatchSet data = io::read_patch_source(cohort_dir);
  const dino::DinoConfig dcfg = dino_config(cfg);
  const dino::TrainResult r = dino::train_run(data.patches, dcfg, cfg.seed);
  io::write_checkpoint({r.state.teacher, r.state.center, r.state.step}, join(out, "checkpoint.mdck"));
  std::ostringstream csv;
  csv << "step,lr,loss\n";
  for (const auto& h : r.history) csv << h.step << "," << io::fmt_double(h.lr) << "," << io::fmt_double(h.loss) << "\n";
  io::write_text(csv.str(), join(out, "loss.csv"));
  Summary j;
  j["patches"] = data.patches.size();
  j["steps"] = r.state.step;
  j["macenko"] = dcfg.macenko_enabled;
  j["first_loss"] = r.history.empty() ? 0.0 : r.history.front().loss;
  j["final_loss"] = r.history.empty() ? 0.0 : r.history.back().loss;
  j["skipped"] = r.skipped;
  j["checkpoint"] = join(out, "checkpoint.mdck");
  return j;
}

Summary cmd_embed(const std::string& checkpoint, const std::string& patch_dir, const std::string& split,
                  const RunConfig& cfg, const std::string& out) {
  const io::Checkpoint ckpt = io::read_checkpoint(checkpoint);
  const io::PatchSet data = io::read_patch_source(patch_dir);
  dino::DinoConfig dcfg = dino_config(cfg);

  std::vector<RgbPatch> patches;
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> origin;
  std::size_t pre_skipped = 0;
  if (cfg.eval_preprocess) {
    // The evaluation transform already normalizes.
    const stain::NormalizationTarget target = resolve_target(cfg);
    dcfg.macenko_enabled = false;
    for (std::size_t i = 0; i < data.patches.size(); ++i) {
      try {
        patches.push_back(probe::preprocess_eval(data.patches[i], target, cfg.eval_resize, cfg.eval_crop));
        ids.push_back(data.records[i].wsi_id);
        origin.push_back(i);
      } catch (const InsufficientTissue&) {
        ++pre_skipped;
      } catch (const DegenerateStains&) {
        ++pre_skipped;
      }
    }
  } else {
    patches = data.patches;
    for (std::size_t i = 0; i < data.patches.size(); ++i) {
      ids.push_back(data.records[i].wsi_id);
      origin.push_back(i);
    }
  }

  dino::EmbedResult r = dino::embed_patches(ckpt.params, patches, ids, dcfg);
  if (r.features.n == 0) throw DataError(patch_dir, -1, "no patch could be embedded");
  for (const auto& rec : data.records) r.features.manifest[rec.wsi_id] = rec.wsi_name;
  io::write_features(r.features, join(out, "features.fvec"));

  std::ostringstream labels;
  labels << "split,index,label\n";
  std::set<std::size_t> kept;
  for (std::size_t row = 0; row < r.source_index.size(); ++row) {
    const std::size_t src = origin[r.source_index[row]];
    kept.insert(src);
    labels << split << "," << row << "," << data.records[src].label << "\n";
  }
  io::write_text(labels.str(), join(out, "labels.csv"));

  std::ostringstream skipped;
  skipped << "source_index,file\n";
  for (std::size_t i = 0; i < data.records.size(); ++i)
    if (!kept.count(i)) skipped << i << "," << data.records[i].file << "\n";
  io::write_text(skipped.str(), join(out, "skipped.csv"));

  Summary j;
  j["n"] = r.features.n;
  j["d"] = r.features.d;
  j["skipped"] = r.skipped + pre_skipped;
  j["macenko"] = cfg.dino.macenko_enabled || cfg.eval_preprocess;
  j["features"] = join(out, "features.fvec");
  return j;
}

Summary cmd_diagnose(const std::string& feature_file, const RunConfig& cfg, const std::string& out) {
  const diag::FeatureSet fs = load_for_diagnostics(feature_file, cfg);
  Summary m;
  m["knn_purity"] = diag::knn_wsi_purity(fs, cfg.knn_k);
  m["silhouette"] = diag::silhouette_wsi(fs);
  m["n"] = fs.n;
  m["d"] = fs.d;
  io::write_text(m.dump() + "\n", join(out, "metrics.json"));
  return m;
}

Summary cmd_tsne(const std::string& feature_file, const RunConfig& cfg, const std::string& out) {
  const diag::FeatureSet fs = load_for_diagnostics(feature_file, cfg);
  diag::TsneParams params = cfg.tsne;
  params.seed = cfg.seed;
  const diag::Embedding2D e = diag::tsne_embed(fs, params);
  std::ostringstream pts;
  pts << "x,y,wsi_id,wsi_name\n";
  for (std::size_t i = 0; i < e.size(); ++i)
    pts << io::fmt_double(e.coords[2 * i]) << "," << io::fmt_double(e.coords[2 * i + 1]) << "," << fs.wsi_ids[i]
        << "," << fs.manifest.at(fs.wsi_ids[i]) << "\n";
  io::write_text(pts.str(), join(out, "embedding.csv"));
  std::ostringstream kl;
  kl << "iter,kl\n";
  for (std::size_t i = 0; i < e.kl_history.size(); ++i) kl << i << "," << io::fmt_double(e.kl_history[i]) << "\n";
  io::write_text(kl.str(), join(out, "kl.csv"));
  Summary j;
  j["n"] = e.size();
  j["initial_kl"] = e.kl_history.front();
  j["final_kl"] = e.kl_history.back();
  return j;
}

Summary cmd_probe(const std::string& train, const std::string& val, const std::string& test,
                  const std::string& labels, const std::string& dataset, const RunConfig& cfg,
                  const std::string& out) {
  const auto all_labels = read_labels(labels);
  auto labels_for = [&](const std::string& split) -> const std::map<std::size_t, int>& {
    const auto it = all_labels.find(split);
    if (it == all_labels.end()) throw DataError(labels, -1, "no rows for split '" + split + "'");
    return it->second;
  };
  int n_classes = 0;
  for (const auto& [split, rows] : all_labels)
    for (const auto& [idx, l] : rows) n_classes = std::max(n_classes, l + 1);

  probe::LabeledFeatureSet tr = attach_labels(io::read_features(train), labels_for("train"), "train", labels);
  probe::LabeledFeatureSet va;
  if (val.empty()) {
    auto [a, b] = probe::split_80_20(tr, cfg.seed);
    tr = std::move(a);
    va = std::move(b);
  } else {
    va = attach_labels(io::read_features(val), labels_for("val"), "val", labels);
  }
  tr.n_classes = va.n_classes = n_classes;

  probe::ProbeConfig pcfg = cfg.probe;
  pcfg.seed = cfg.seed;
  const probe::ProbeResult r = probe::train_probe(tr, va, pcfg);

  std::ostringstream csv;
  csv << "dataset,split,accuracy,iterations,seed\n";
  csv << dataset << ",val," << io::fmt_double(r.best_val_accuracy) << "," << r.iterations_run << "," << cfg.seed
      << "\n";
  Summary j;
  j["dataset"] = dataset;
  j["train_n"] = tr.size();
  j["val_accuracy"] = r.best_val_accuracy;
  j["best_iteration"] = r.best_iteration;
  if (!test.empty()) {
    probe::LabeledFeatureSet te = attach_labels(io::read_features(test), labels_for("test"), "test", labels);
    te.n_classes = n_classes;
    const double acc = probe::evaluate_accuracy(r.model, te);
    csv << dataset << ",test," << io::fmt_double(acc) << "," << r.iterations_run << "," << cfg.seed << "\n";
    j["test_accuracy"] = acc;
  }
  io::write_text(csv.str(), join(out, "results.csv"));

  // The classifier is stored as a single-layer network in checkpoint format.
  io::Checkpoint ck;
  dino::Layer layer;
  layer.rows = r.model.n_classes;
  layer.cols = r.model.dim;
  layer.weights = r.model.weights;
  layer.bias = r.model.bias;
  ck.params.layers.push_back(std::move(layer));
  ck.center.assign(r.model.n_classes, 0.0);
  ck.step = static_cast<std::uint64_t>(r.iterations_run);
  io::write_checkpoint(ck, join(out, "probe.mdck"));
  j["iterations"] = r.iterations_run;
  return j;
}

Summary cmd_config(const RunConfig& cfg, const std::string& out) {
  io::write_text(cfg.to_text(), join(out, "config.txt"));
  Summary j;
  for (const auto& [k, v] : cfg.entries()) j[k] = v;
  return j;
}

Summary cmd_reference(const RunConfig& cfg, const std::string& out) {
  const RgbPatch ref = synth::reference_image(4, 32, cfg.seed);
  io::write_png(ref, join(out, "reference.png"));
  // Fit on the decoded file so the target matches what fit-target would produce.
  const stain::NormalizationTarget t =
      stain::fit_target(io::read_image(join(out, "reference.png")), cfg.macenko.alpha, cfg.macenko.beta, cfg.io);
  stain::save_target(t, join(out, "default_target.json"));
  Summary j;
  j["reference"] = join(out, "reference.png");
  j["target"] = join(out, "default_target.json");
  return j;
}

// ---- command line ----

namespace {

struct Invocation {
  std::string config_path;
  std::string out;
  std::map<std::string, std::string> overrides;
};

void add_common(CLI::App* sub, Invocation& inv, const std::set<std::string>& sections) {
  sub->add_option("--config", inv.config_path, "key=value configuration file");
  sub->add_option("--out", inv.out, "output directory")->required();
  for (const ConfigKey& k : config_keys()) {
    if (k.section != "run" && !sections.count(k.section) && !sections.count("*")) continue;
    std::string names = "--" + k.name;
    if (k.name == "diag.k") names += ",--k";
    if (k.name == "tsne.perplexity") names += ",--perplexity";
    if (k.name == "tsne.iterations") names += ",--iters";
    const std::string key = k.name;
    sub->add_option_function<std::string>(
        names, [&inv, key](const std::string& v) { inv.overrides[key] = v; }, k.help);
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Whole-slide preprocessing, stain normalization and feature-collapse diagnostics", "wsikit"};
  app.require_subcommand(1);
  Invocation inv;
  std::string a1, a2, a3, a4, a5;
  std::string split = "train", dataset = "features";

  auto* tile = app.add_subcommand("tile", "tile a slide into tissue patches");
  tile->add_option("slide", a1, "slide image (.png/.ppm)")->required();
  tile->add_option("--meta", a2, "slide sidecar JSON (default: <slide>.json)");
  add_common(tile, inv, {"tile"});

  auto* fit = app.add_subcommand("fit-target", "fit a normalization target to a reference image");
  fit->add_option("reference", a1, "reference image")->required();
  add_common(fit, inv, {"stain"});

  auto* norm = app.add_subcommand("normalize", "Macenko-normalize a patch directory");
  norm->add_option("patches", a1, "patch or cohort directory")->required();
  norm->add_option("target", a2, "target JSON")->required();
  add_common(norm, inv, {"stain"});

  auto* stats = app.add_subcommand("stats-mpp", "histogram of patch counts per MPP");
  stats->add_option("manifest", a1, "cohort manifest JSON")->required();
  add_common(stats, inv, {"tile", "stats"});

  auto* syn = app.add_subcommand("synth", "generate a synthetic cohort");
  add_common(syn, inv, {"synth"});

  auto* train = app.add_subcommand("train", "self-distillation pretraining");
  train->add_option("cohort", a1, "patch or cohort directory")->required();
  add_common(train, inv, {"dino", "stain"});

  auto* embed = app.add_subcommand("embed", "extract teacher features");
  embed->add_option("checkpoint", a1, "checkpoint file")->required();
  embed->add_option("patches", a2, "patch or cohort directory")->required();
  embed->add_option("--split", split, "split name written to labels.csv");
  add_common(embed, inv, {"dino", "stain", "embed"});

  auto* diagnose = app.add_subcommand("diagnose", "kNN WSI-purity and silhouette");
  diagnose->add_option("features", a1, "FeatureFile")->required();
  add_common(diagnose, inv, {"diag"});

  auto* ts = app.add_subcommand("tsne", "2-D t-SNE embedding");
  ts->add_option("features", a1, "FeatureFile")->required();
  add_common(ts, inv, {"tsne", "diag"});

  auto* pr = app.add_subcommand("probe", "linear probe on frozen features");
  pr->add_option("train", a1, "training FeatureFile")->required();
  pr->add_option("--val", a2, "validation FeatureFile (default: 80:20 split of train)");
  pr->add_option("--test", a3, "test FeatureFile");
  pr->add_option("--labels", a4, "labels CSV split,index,label")->required();
  pr->add_option("--dataset", dataset, "dataset name for results.csv");
  add_common(pr, inv, {"probe"});

  auto* conf = app.add_subcommand("config", "write the effective configuration");
  add_common(conf, inv, {"*"});

  auto* ref = app.add_subcommand("reference", "write the canonical reference image and its target");
  add_common(ref, inv, {"stain"});

  std::string command = "wsikit";
  auto fail = [&](int code, const std::string& msg) {
    err << "error: " << msg << "\n";
    Summary j;
    j["command"] = command;
    j["status"] = "error";
    j["exit_code"] = code;
    j["error"] = msg;
    out << j.dump() << "\n";
    return code;
  };

  try {
    std::vector<const char*> argv{"wsikit"};
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return fail(kExitUsage, e.what());
  }

  CLI::App* sub = app.get_subcommands().front();
  command = sub->get_name();
  try {
    RunConfig cfg;
    if (!inv.config_path.empty()) apply_config_file(cfg, inv.config_path);
    for (const auto& [k, v] : inv.overrides) set_config_value(cfg, k, v);
    if (cfg.threads < 0) throw UsageError("--threads must be >= 0");
    // Reject bad values before touching any input.
    cfg.probe.validate();
    cfg.synth.validate();
    kernels::set_num_threads(cfg.threads);
    fs::create_directories(inv.out);

    Summary body;
    if (sub == tile) body = cmd_tile(a1, a2, cfg, inv.out);
    else if (sub == fit) body = cmd_fit_target(a1, cfg, inv.out);
    else if (sub == norm) body = cmd_normalize(a1, a2, cfg, inv.out);
    else if (sub == stats) body = cmd_stats_mpp(a1, cfg, inv.out);
    else if (sub == syn) body = cmd_synth(cfg, inv.out);
    else if (sub == train) body = cmd_train(a1, cfg, inv.out);
    else if (sub == embed) body = cmd_embed(a1, a2, split, cfg, inv.out);
    else if (sub == diagnose) body = cmd_diagnose(a1, cfg, inv.out);
    else if (sub == ts) body = cmd_tsne(a1, cfg, inv.out);
    else if (sub == pr) body = cmd_probe(a1, a2, a3, a4, dataset, cfg, inv.out);
    else if (sub == conf) body = cmd_config(cfg, inv.out);
    else body = cmd_reference(cfg, inv.out);

    Summary j;
    j["command"] = command;
    j["status"] = "ok";
    j["seed"] = cfg.seed;
    for (auto& [k, v] : body.items()) j[k] = v;
    out << j.dump() << "\n";
    return kExitOk;
  } catch (const UsageError& e) {
    return fail(kExitUsage, e.what());
  } catch (const PreconditionError& e) {
    return fail(kExitUsage, e.what());
  } catch (const InvalidSpec& e) {
    return fail(kExitUsage, e.what());
  } catch (const std::exception& e) {
    return fail(kExitData, e.what());
  }
}

}  // namespace wsikit::cli
