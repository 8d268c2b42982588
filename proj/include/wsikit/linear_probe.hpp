#pragma once

// Frozen-feature linear classification.

#include <cstdint>
#include <utility>
#include <vector>

#include "wsikit/embed_diag.hpp"
#include "wsikit/image.hpp"
#include "wsikit/stain_norm.hpp"

namespace wsikit::probe {

inline constexpr int kEvalResize = 256;
inline constexpr int kEvalCrop = 224;

struct ProbeConfig {
  double lr = 0.1;
  double momentum = 0.9;
  /// Held at zero; any other value is rejected.
  double weight_decay = 0.0;
  std::size_t batch_size = 128;
  long long iterations = 12500;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LabeledFeatureSet {
  diag::FeatureSet features;
  std::vector<int> labels;
  int n_classes = 0;

  std::size_t size() const { return labels.size(); }
  void validate() const;
};

struct LinearModel {
  std::size_t n_classes = 0;
  std::size_t dim = 0;
  std::vector<double> weights;  // n_classes x dim
  std::vector<double> bias;

  std::vector<double> logits(const double* x) const;
  int predict(const double* x) const;
};

struct ProbeResult {
  LinearModel model;
  double best_val_accuracy = 0.0;
  long long best_iteration = 0;
  long long iterations_run = 0;
  /// Mean training cross-entropy after each epoch.
  std::vector<double> epoch_losses;
};

/// Macenko-normalize, resize to resize^2, centre-crop to crop^2.
RgbPatch preprocess_eval(const RgbPatch& patch, const stain::NormalizationTarget& target, int resize = kEvalResize,
                         int crop = kEvalCrop);

/// Softmax cross-entropy with SGD + momentum from zero weights; returns the
/// best-on-validation checkpoint (evaluated at every epoch boundary).
ProbeResult train_probe(const LabeledFeatureSet& train, const LabeledFeatureSet& val, const ProbeConfig& cfg);

/// Top-1 accuracy, argmax ties to the lower class index.
double evaluate_accuracy(const LinearModel& model, const LabeledFeatureSet& data);

struct ProbeLoss {
  double loss = 0.0;
  LinearModel grad;
};
/// Mean cross-entropy and its gradient over `rows` (all rows when empty).
ProbeLoss probe_loss(const LinearModel& model, const LabeledFeatureSet& data, const std::vector<std::size_t>& rows = {});

/// Seeded shuffle, first 80% train, remaining 20% validation.
std::pair<LabeledFeatureSet, LabeledFeatureSet> split_80_20(const LabeledFeatureSet& data, std::uint64_t seed);

LabeledFeatureSet subset(const LabeledFeatureSet& data, const std::vector<std::size_t>& rows);

}  // namespace wsikit::probe
