#pragma once

// Subcommands of the `wsikit` binary. Each writes its artifacts under `out`
// and returns the one-line JSON summary printed on stdout.

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsikit/config.hpp"

namespace wsikit::cli {

using Summary = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

Summary cmd_tile(const std::string& slide_path, const std::string& meta_path, const RunConfig& cfg,
                 const std::string& out);
Summary cmd_fit_target(const std::string& reference_path, const RunConfig& cfg, const std::string& out);
Summary cmd_normalize(const std::string& patch_dir, const std::string& target_path, const RunConfig& cfg,
                      const std::string& out);
Summary cmd_stats_mpp(const std::string& cohort_manifest, const RunConfig& cfg, const std::string& out);
Summary cmd_synth(const RunConfig& cfg, const std::string& out);
Summary cmd_train(const std::string& cohort_dir, const RunConfig& cfg, const std::string& out);
Summary cmd_embed(const std::string& checkpoint, const std::string& patch_dir, const std::string& split,
                  const RunConfig& cfg, const std::string& out);
Summary cmd_diagnose(const std::string& feature_file, const RunConfig& cfg, const std::string& out);
Summary cmd_tsne(const std::string& feature_file, const RunConfig& cfg, const std::string& out);
/// `val` and `test` may be empty; without `val` the training set is split 80:20.
Summary cmd_probe(const std::string& train, const std::string& val, const std::string& test,
                  const std::string& labels, const std::string& dataset, const RunConfig& cfg,
                  const std::string& out);
/// Writes the effective configuration.
Summary cmd_config(const RunConfig& cfg, const std::string& out);
/// Writes the canonical reference image and its fitted target.
Summary cmd_reference(const RunConfig& cfg, const std::string& out);

/// Target named by the config, or the shipped default.
stain::NormalizationTarget resolve_target(const RunConfig& cfg);

/// Full command line entry point; returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wsikit::cli
