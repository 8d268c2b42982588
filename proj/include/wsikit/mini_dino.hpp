#pragma once

// Desk-scale self-distillation: multi-crop views, student/teacher encoders,
// centred and sharpened teacher targets, EMA teacher, warmup + cosine LR.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wsikit/embed_diag.hpp"
#include "wsikit/encoder.hpp"
#include "wsikit/image.hpp"
#include "wsikit/rng.hpp"
#include "wsikit/stain_norm.hpp"

namespace wsikit::dino {

/// Reference values of the full-scale pretraining run. The desk defaults in
/// DinoConfig are scaled down from these.
namespace full_scale {
inline constexpr std::size_t kBatchSize = 5120;
inline constexpr double kBaseLr = 0.005;
inline constexpr int kEpochs = 10;
inline constexpr int kWarmupIterations = 1000;
inline constexpr int kLocalCrops = 8;
inline constexpr int kGlobalViewSize = 256;
inline constexpr int kLocalViewSize = 96;
}  // namespace full_scale

/// Fixed per-channel standardisation applied to every view.
inline constexpr double kChannelMean[3] = {0.485, 0.456, 0.406};
inline constexpr double kChannelStd[3] = {0.229, 0.224, 0.225};

struct DinoConfig {
  int n_local_crops = full_scale::kLocalCrops;
  int global_view_size = 32;
  int local_view_size = 12;
  /// Every view is resized to encoder_input_size^2 before flattening.
  int encoder_input_size = 16;
  std::vector<std::size_t> hidden_sizes = {128};
  std::size_t feature_dim = 64;
  std::size_t n_prototypes = 64;

  double student_temp = 0.1;
  double teacher_temp = 0.04;
  double ema_momentum = 0.996;
  double center_momentum = 0.9;
  bool centering = true;

  std::size_t batch_size = 32;
  int total_iterations = 300;
  /// Scale applied to the 1,000-iteration warmup of the full-scale run.
  double warmup_scale = 0.05;
  double base_lr = 0.01;
  double sgd_momentum = 0.9;

  double global_scale_min = 0.4;
  double global_scale_max = 1.0;
  double local_scale_min = 0.05;
  double local_scale_max = 0.4;
  double flip_p = 0.5;
  double jitter_p = 0.8;
  double brightness = 0.4;
  double contrast = 0.4;
  double saturation = 0.4;
  double hue = 0.1;
  double grayscale_p = 0.2;

  bool macenko_enabled = false;
  std::optional<stain::NormalizationTarget> macenko_target;
  double macenko_alpha = stain::kDefaultAlpha;
  double macenko_beta = stain::kDefaultBeta;
  /// Training aborts when more than this fraction of a batch fails normalization.
  double max_skip_fraction = 0.1;

  int warmup_iterations() const;
  /// Widths from input to output: input, hidden..., feature_dim, n_prototypes.
  std::vector<std::size_t> encoder_widths() const;
  /// Throws PreconditionError on any broken invariant.
  void validate() const;
};

/// Two global views followed by n_local local views, standardised.
struct ViewBatch {
  std::vector<FloatImage> views;
  std::size_t n_global() const { return 2; }
};

struct TeacherStudentState {
  EncoderParams student;
  EncoderParams teacher;
  std::vector<double> center;
  std::uint64_t step = 0;
};

/// Applies Macenko normalization once (when enabled), then draws the views.
ViewBatch augment(const RgbPatch& patch, const DinoConfig& cfg, Rng& rng);

/// Converts to [0,1] floats, resizes to size x size and standardises per channel.
std::vector<double> encoder_input(const FloatImage& view, int size);
/// Standardised float image of an 8-bit patch (no resampling).
FloatImage to_standardized(const RgbPatch& patch);

struct DinoLoss {
  double loss = 0.0;
  /// d(loss)/d(student logits), one row per student view.
  std::vector<std::vector<double>> student_grads;
};

/// Softmax of (teacher - center) / teacher_temp.
std::vector<double> teacher_targets(const std::vector<double>& teacher_logits, const std::vector<double>& center,
                                    double teacher_temp);

/// Mean cross-entropy over all (teacher global view g, student view v != g)
/// pairs; teacher targets are constants. Student views 0 and 1 are the globals.
DinoLoss dino_loss(const std::vector<std::vector<double>>& student_logits,
                   const std::vector<std::vector<double>>& teacher_logits, double student_temp, double teacher_temp,
                   const std::vector<double>& center);

/// teacher <- m * teacher + (1 - m) * student, elementwise.
void ema_update(TeacherStudentState& state, double momentum);

/// center <- m * center + (1 - m) * mean(rows).
void center_update(std::vector<double>& center, const std::vector<std::vector<double>>& batch_teacher_logits,
                   double momentum);

/// Linear warmup to base_lr, then cosine decay to zero at total_iterations.
double lr_schedule(long long step, const DinoConfig& cfg);

TeacherStudentState init_state(const DinoConfig& cfg, std::uint64_t seed);

struct LossRecord {
  long long step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  TeacherStudentState state;
  std::vector<LossRecord> history;
  std::size_t skipped = 0;
};

/// SGD with momentum on the student, EMA teacher and centre updates every step.
TrainResult train_run(const std::vector<RgbPatch>& dataset, const DinoConfig& cfg, std::uint64_t seed);

/// One optimisation step on an explicit batch; exposed for tests.
double train_step(TeacherStudentState& state, EncoderParams& velocity, const std::vector<ViewBatch>& batch,
                  const DinoConfig& cfg, double lr);

/// Loss of one sample's views for given student/teacher parameters (no update).
double sample_loss(const EncoderParams& student, const EncoderParams& teacher, const std::vector<double>& center,
                   const ViewBatch& views, const DinoConfig& cfg);

struct EmbedResult {
  diag::FeatureSet features;
  /// Index into the input patch list of every embedded row.
  std::vector<std::size_t> source_index;
  std::size_t skipped = 0;
};

/// Penultimate teacher activations of whole patches (optionally Macenko-normalized first).
EmbedResult embed_patches(const EncoderParams& teacher, const std::vector<RgbPatch>& patches,
                          const std::vector<std::uint32_t>& wsi_ids, const DinoConfig& cfg);

}  // namespace wsikit::dino
