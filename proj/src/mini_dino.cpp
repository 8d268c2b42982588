#include "wsikit/mini_dino.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "wsikit/errors.hpp"
#include "wsikit/slide_pipeline.hpp"

namespace wsikit::dino {

int DinoConfig::warmup_iterations() const {
  return static_cast<int>(std::lround(full_scale::kWarmupIterations * warmup_scale));
}

std::vector<std::size_t> DinoConfig::encoder_widths() const {
  std::vector<std::size_t> w;
  w.push_back(static_cast<std::size_t>(encoder_input_size) * encoder_input_size * 3);
  w.insert(w.end(), hidden_sizes.begin(), hidden_sizes.end());
  w.push_back(feature_dim);
  w.push_back(n_prototypes);
  return w;
}

void DinoConfig::validate() const {
  auto req = [](bool ok, const char* what) {
    if (!ok) throw PreconditionError(std::string("dino config: ") + what);
  };
  req(n_local_crops >= 0, "n_local_crops must be >= 0");
  req(global_view_size >= 1 && local_view_size >= 1 && encoder_input_size >= 1, "view sizes must be >= 1");
  req(student_temp > 0 && teacher_temp > 0, "temperatures must be > 0");
  req(ema_momentum >= 0 && ema_momentum < 1, "ema_momentum must be in [0, 1)");
  req(center_momentum >= 0 && center_momentum < 1, "center_momentum must be in [0, 1)");
  req(batch_size >= 1, "batch_size must be >= 1");
  req(total_iterations >= 0, "total_iterations must be >= 0");
  req(warmup_scale >= 0, "warmup_scale must be >= 0");
  req(base_lr >= 0, "base_lr must be >= 0");
  req(feature_dim >= 1 && n_prototypes >= 1, "feature_dim and n_prototypes must be >= 1");
  req(global_scale_min > 0 && global_scale_min <= global_scale_max && global_scale_max <= 1, "bad global scale");
  req(local_scale_min > 0 && local_scale_min <= local_scale_max && local_scale_max <= 1, "bad local scale");
  req(!macenko_enabled || macenko_target.has_value(), "macenko_enabled requires a macenko target");
}

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double gray(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0 ? d / mx : 0.0;
  if (d <= 0) {
    h = 0.0;
    return;
  }
  if (mx == r)
    h = std::fmod((g - b) / d, 6.0);
  else if (mx == g)
    h = (b - r) / d + 2.0;
  else
    h = (r - g) / d + 4.0;
  h /= 6.0;
  if (h < 0) h += 1.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double hh = h * 6.0;
  const int sector = static_cast<int>(std::floor(hh)) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
}

FloatImage to_unit(const RgbPatch& patch) {
  FloatImage f(patch.width, patch.height);
  for (std::size_t i = 0; i < patch.pixels.size(); ++i) f.data[i] = patch.pixels[i] / 255.0;
  return f;
}

FloatImage crop_float(const FloatImage& img, int x, int y, int w, int h) {
  FloatImage out(w, h, img.channels);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int k = 0; k < img.channels; ++k) out.at(c, r, k) = img.at(x + c, y + r, k);
  return out;
}

struct Box {
  int x, y, w, h;
};

// Random-resized-crop box: area fraction in [smin, smax], aspect ratio log-uniform in [3/4, 4/3].
Box random_resized_box(int width, int height, double smin, double smax, Rng& rng) {
  const double area = static_cast<double>(width) * height;
  const double log_lo = std::log(3.0 / 4.0), log_hi = std::log(4.0 / 3.0);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * rng.uniform(smin, smax);
    const double ratio = std::exp(rng.uniform(log_lo, log_hi));
    const int w = static_cast<int>(std::lround(std::sqrt(target * ratio)));
    const int h = static_cast<int>(std::lround(std::sqrt(target / ratio)));
    if (w > 0 && h > 0 && w <= width && h <= height) {
      const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(width - w + 1)));
      const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(height - h + 1)));
      return {x, y, w, h};
    }
  }
  return {0, 0, width, height};
}

void color_jitter(FloatImage& img, const DinoConfig& cfg, Rng& rng) {
  const double fb = rng.uniform(1 - cfg.brightness, 1 + cfg.brightness);
  const double fc = rng.uniform(1 - cfg.contrast, 1 + cfg.contrast);
  const double fs = rng.uniform(1 - cfg.saturation, 1 + cfg.saturation);
  const double fh = rng.uniform(-cfg.hue, cfg.hue);
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  double* d = img.data.data();
  for (double& v : img.data) v = clamp01(v * fb);
  double mean_gray = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean_gray += gray(d[3 * i], d[3 * i + 1], d[3 * i + 2]);
  mean_gray /= static_cast<double>(n);
  for (double& v : img.data) v = clamp01(mean_gray + fc * (v - mean_gray));
  for (std::size_t i = 0; i < n; ++i) {
    const double g = gray(d[3 * i], d[3 * i + 1], d[3 * i + 2]);
    for (int k = 0; k < 3; ++k) d[3 * i + k] = clamp01(g + fs * (d[3 * i + k] - g));
  }
  for (std::size_t i = 0; i < n; ++i) {
    double h, s, v;
    rgb_to_hsv(d[3 * i], d[3 * i + 1], d[3 * i + 2], h, s, v);
    h = std::fmod(h + fh + 1.0, 1.0);
    hsv_to_rgb(h, s, v, d[3 * i], d[3 * i + 1], d[3 * i + 2]);
  }
}

void standardize(FloatImage& img) {
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  for (std::size_t i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) img.data[3 * i + k] = (img.data[3 * i + k] - kChannelMean[k]) / kChannelStd[k];
}

FloatImage make_view(const FloatImage& src, int size, double smin, double smax, const DinoConfig& cfg, Rng& rng) {
  const Box box = random_resized_box(src.width, src.height, smin, smax, rng);
  FloatImage view = slide::resize_bilinear(crop_float(src, box.x, box.y, box.w, box.h), size, size);
  if (rng.bernoulli(cfg.flip_p)) {
    for (int y = 0; y < view.height; ++y)
      for (int x = 0; x < view.width / 2; ++x)
        for (int k = 0; k < 3; ++k) std::swap(view.at(x, y, k), view.at(view.width - 1 - x, y, k));
  }
  if (rng.bernoulli(cfg.jitter_p)) color_jitter(view, cfg, rng);
  if (rng.bernoulli(cfg.grayscale_p)) {
    const std::size_t n = static_cast<std::size_t>(view.width) * view.height;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = gray(view.data[3 * i], view.data[3 * i + 1], view.data[3 * i + 2]);
      view.data[3 * i] = view.data[3 * i + 1] = view.data[3 * i + 2] = g;
    }
  }
  standardize(view);
  return view;
}

std::vector<double> softmax(const std::vector<double>& logits, double temp) {
  std::vector<double> out(logits.size());
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp((logits[k] - mx) / temp);
    sum += out[k];
  }
  for (double& v : out) v /= sum;
  return out;
}

struct SampleResult {
  double loss = 0.0;
  EncoderParams grad;
  std::vector<std::vector<double>> teacher_logits;
};

SampleResult run_sample(const EncoderParams& student, const EncoderParams& teacher, const std::vector<double>& center,
                        const ViewBatch& vb, const DinoConfig& cfg, bool want_grad) {
  std::vector<ForwardCache> s_cache;
  std::vector<std::vector<double>> s_logits, t_logits;
  s_cache.reserve(vb.views.size());
  for (const FloatImage& v : vb.views) {
    s_cache.push_back(encoder_forward(student, encoder_input(v, cfg.encoder_input_size)));
    s_logits.push_back(s_cache.back().logits());
  }
  for (std::size_t g = 0; g < vb.n_global(); ++g)
    t_logits.push_back(encoder_forward(teacher, encoder_input(vb.views[g], cfg.encoder_input_size)).logits());
  const std::vector<double> c = cfg.centering ? center : std::vector<double>(center.size(), 0.0);
  DinoLoss dl = dino_loss(s_logits, t_logits, cfg.student_temp, cfg.teacher_temp, c);
  SampleResult r;
  r.loss = dl.loss;
  r.teacher_logits = std::move(t_logits);
  if (want_grad) {
    r.grad = zeros_like(student);
    for (std::size_t v = 0; v < s_cache.size(); ++v) encoder_backward(student, s_cache[v], dl.student_grads[v], r.grad);
  }
  return r;
}

}  // namespace

FloatImage to_standardized(const RgbPatch& patch) {
  FloatImage f = to_unit(patch);
  standardize(f);
  return f;
}

std::vector<double> encoder_input(const FloatImage& view, int size) {
  if (view.width == size && view.height == size) return view.data;
  return slide::resize_bilinear(view, size, size).data;
}

ViewBatch augment(const RgbPatch& patch, const DinoConfig& cfg, Rng& rng) {
  if (patch.width <= cfg.local_view_size || patch.height <= cfg.local_view_size)
    throw PreconditionError("patch must be larger than the local view size");
  FloatImage src;
  if (cfg.macenko_enabled) {
    if (!cfg.macenko_target) throw PreconditionError("macenko enabled without a target");
    src = to_unit(stain::normalize_patch(patch, *cfg.macenko_target, cfg.macenko_alpha, cfg.macenko_beta));
  } else {
    src = to_unit(patch);
  }
  ViewBatch vb;
  vb.views.reserve(static_cast<std::size_t>(2 + cfg.n_local_crops));
  for (int g = 0; g < 2; ++g)
    vb.views.push_back(make_view(src, cfg.global_view_size, cfg.global_scale_min, cfg.global_scale_max, cfg, rng));
  for (int l = 0; l < cfg.n_local_crops; ++l)
    vb.views.push_back(make_view(src, cfg.local_view_size, cfg.local_scale_min, cfg.local_scale_max, cfg, rng));
  return vb;
}

std::vector<double> teacher_targets(const std::vector<double>& teacher_logits, const std::vector<double>& center,
                                    double teacher_temp) {
  std::vector<double> shifted(teacher_logits.size());
  for (std::size_t k = 0; k < shifted.size(); ++k) shifted[k] = teacher_logits[k] - center[k];
  return softmax(shifted, teacher_temp);
}

DinoLoss dino_loss(const std::vector<std::vector<double>>& student_logits,
                   const std::vector<std::vector<double>>& teacher_logits, double student_temp, double teacher_temp,
                   const std::vector<double>& center) {
  if (!(student_temp > 0) || !(teacher_temp > 0)) throw PreconditionError("temperatures must be > 0");
  if (student_logits.empty() || teacher_logits.empty()) throw PreconditionError("dino_loss needs views");
  const std::size_t k = center.size();
  for (const auto& s : student_logits)
    if (s.size() != k) throw ShapeMismatch("student logits do not match the center size");
  for (const auto& t : teacher_logits)
    if (t.size() != k) throw ShapeMismatch("teacher logits do not match the center size");

  std::vector<std::vector<double>> targets;
  for (const auto& t : teacher_logits) targets.push_back(teacher_targets(t, center, teacher_temp));

  DinoLoss out;
  out.student_grads.assign(student_logits.size(), std::vector<double>(k, 0.0));
  std::size_t pairs = 0;
  for (std::size_t v = 0; v < student_logits.size(); ++v) {
    const auto& s = student_logits[v];
    const double mx = *std::max_element(s.begin(), s.end());
    double sum = 0.0;
    for (double x : s) sum += std::exp((x - mx) / student_temp);
    const double lse = std::log(sum);
    std::vector<double> logp(k), prob(k);
    for (std::size_t j = 0; j < k; ++j) {
      logp[j] = (s[j] - mx) / student_temp - lse;
      prob[j] = std::exp(logp[j]);
    }
    for (std::size_t g = 0; g < targets.size(); ++g) {
      if (g == v) continue;
      double ce = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        ce -= targets[g][j] * logp[j];
        out.student_grads[v][j] += (prob[j] - targets[g][j]) / student_temp;
      }
      out.loss += ce;
      ++pairs;
    }
  }
  if (pairs == 0) throw PreconditionError("dino_loss has no (teacher, student) pairs");
  out.loss /= static_cast<double>(pairs);
  for (auto& g : out.student_grads)
    for (double& x : g) x /= static_cast<double>(pairs);
  return out;
}

void ema_update(TeacherStudentState& state, double m) {
  if (!(m >= 0.0 && m < 1.0)) throw PreconditionError("ema momentum must be in [0, 1)");
  if (!state.teacher.same_shape(state.student)) throw ShapeMismatch("teacher and student shapes differ");
  for (std::size_t li = 0; li < state.teacher.layers.size(); ++li) {
    Layer& t = state.teacher.layers[li];
    const Layer& s = state.student.layers[li];
    for (std::size_t i = 0; i < t.weights.size(); ++i) t.weights[i] = m * t.weights[i] + (1.0 - m) * s.weights[i];
    for (std::size_t i = 0; i < t.bias.size(); ++i) t.bias[i] = m * t.bias[i] + (1.0 - m) * s.bias[i];
  }
}

void center_update(std::vector<double>& center, const std::vector<std::vector<double>>& batch_teacher_logits,
                   double m) {
  if (!(m >= 0.0 && m < 1.0)) throw PreconditionError("center momentum must be in [0, 1)");
  if (batch_teacher_logits.empty()) return;
  std::vector<double> mean(center.size(), 0.0);
  for (const auto& row : batch_teacher_logits) {
    if (row.size() != center.size()) throw ShapeMismatch("teacher logits do not match the center size");
    for (std::size_t k = 0; k < row.size(); ++k) mean[k] += row[k];
  }
  for (std::size_t k = 0; k < center.size(); ++k)
    center[k] = m * center[k] + (1.0 - m) * (mean[k] / static_cast<double>(batch_teacher_logits.size()));
}

double lr_schedule(long long step, const DinoConfig& cfg) {
  if (step < 0) throw PreconditionError("step must be >= 0");
  const long long warmup = cfg.warmup_iterations();
  const long long total = cfg.total_iterations;
  if (step < warmup) return cfg.base_lr * static_cast<double>(step) / static_cast<double>(warmup);
  if (step >= total) return 0.0;
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
  return cfg.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

TeacherStudentState init_state(const DinoConfig& cfg, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, {0});
  TeacherStudentState s;
  const auto widths = cfg.encoder_widths();
  s.student = init_encoder(widths, rng);
  s.teacher = s.student;
  s.center.assign(cfg.n_prototypes, 0.0);
  return s;
}

double sample_loss(const EncoderParams& student, const EncoderParams& teacher, const std::vector<double>& center,
                   const ViewBatch& views, const DinoConfig& cfg) {
  return run_sample(student, teacher, center, views, cfg, false).loss;
}

namespace {
// Checked before entering parallel regions, where a throw would terminate.
void check_encoder_shape(const EncoderParams& p, const DinoConfig& cfg) {
  const auto in = static_cast<std::size_t>(cfg.encoder_input_size) * static_cast<std::size_t>(cfg.encoder_input_size) * 3;
  if (p.input_dim() != in)
    throw ShapeMismatch("encoder expects " + std::to_string(p.input_dim()) + " inputs, views flatten to " +
                        std::to_string(in));
}
}  // namespace

double train_step(TeacherStudentState& state, EncoderParams& velocity, const std::vector<ViewBatch>& batch,
                  const DinoConfig& cfg, double lr) {
  if (batch.empty()) throw PreconditionError("train_step needs a non-empty batch");
  check_encoder_shape(state.student, cfg);
  if (!state.student.same_shape(state.teacher) || !state.student.same_shape(velocity) ||
      state.center.size() != state.student.output_dim())
    throw ShapeMismatch("student, teacher, velocity and center shapes disagree");
  std::vector<SampleResult> results(batch.size());
  const auto nb = static_cast<std::ptrdiff_t>(batch.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t b = 0; b < nb; ++b)
    results[static_cast<std::size_t>(b)] =
        run_sample(state.student, state.teacher, state.center, batch[static_cast<std::size_t>(b)], cfg, true);

  // Fixed summation order over samples.
  EncoderParams grad = zeros_like(state.student);
  double loss = 0.0;
  std::vector<std::vector<double>> teacher_logits;
  for (SampleResult& r : results) {
    accumulate(grad, r.grad);
    loss += r.loss;
    for (auto& t : r.teacher_logits) teacher_logits.push_back(std::move(t));
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  loss *= inv_b;

  for (std::size_t li = 0; li < state.student.layers.size(); ++li) {
    Layer& w = state.student.layers[li];
    Layer& v = velocity.layers[li];
    const Layer& g = grad.layers[li];
    for (std::size_t i = 0; i < w.weights.size(); ++i) {
      v.weights[i] = cfg.sgd_momentum * v.weights[i] + g.weights[i] * inv_b;
      w.weights[i] -= lr * v.weights[i];
    }
    for (std::size_t i = 0; i < w.bias.size(); ++i) {
      v.bias[i] = cfg.sgd_momentum * v.bias[i] + g.bias[i] * inv_b;
      w.bias[i] -= lr * v.bias[i];
    }
  }
  ema_update(state, cfg.ema_momentum);
  if (cfg.centering) center_update(state.center, teacher_logits, cfg.center_momentum);
  ++state.step;
  return loss;
}

TrainResult train_run(const std::vector<RgbPatch>& dataset, const DinoConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (dataset.empty()) throw PreconditionError("training dataset is empty");
  for (const RgbPatch& p : dataset)
    if (p.width <= cfg.local_view_size || p.height <= cfg.local_view_size)
      throw PreconditionError("every patch must be larger than the local view size");
  TrainResult result;
  result.state = init_state(cfg, seed);
  EncoderParams velocity = zeros_like(result.state.student);

  const std::size_t n = dataset.size();
  const std::size_t b = std::min(cfg.batch_size, n);
  std::vector<std::size_t> order(n);
  for (int step = 0; step < cfg.total_iterations; ++step) {
    std::iota(order.begin(), order.end(), 0);
    Rng pick = Rng::derive(seed, {1, static_cast<std::uint64_t>(step)});
    for (std::size_t i = 0; i < b; ++i) std::swap(order[i], order[i + pick.below(n - i)]);

    std::vector<ViewBatch> views(b);
    std::vector<char> ok(b, 0);
    const auto sb = static_cast<std::ptrdiff_t>(b);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < sb; ++i) {
      const std::size_t idx = order[static_cast<std::size_t>(i)];
      Rng rng = Rng::derive(seed, {2, static_cast<std::uint64_t>(step), idx});
      try {
        views[static_cast<std::size_t>(i)] = augment(dataset[idx], cfg, rng);
        ok[static_cast<std::size_t>(i)] = 1;
      } catch (const InsufficientTissue&) {
      } catch (const DegenerateStains&) {
      }
    }
    std::vector<ViewBatch> valid;
    for (std::size_t i = 0; i < b; ++i)
      if (ok[i]) valid.push_back(std::move(views[i]));
    const std::size_t dropped = b - valid.size();
    result.skipped += dropped;
    if (static_cast<double>(dropped) > cfg.max_skip_fraction * static_cast<double>(b) || valid.empty())
      throw TooManySkipped("step " + std::to_string(step) + ": " + std::to_string(dropped) + " of " +
                           std::to_string(b) + " samples failed normalization");

    const double lr = lr_schedule(step, cfg);
    const double loss = train_step(result.state, velocity, valid, cfg, lr);
    result.history.push_back({step, lr, loss});
  }
  return result;
}

EmbedResult embed_patches(const EncoderParams& teacher, const std::vector<RgbPatch>& patches,
                          const std::vector<std::uint32_t>& wsi_ids, const DinoConfig& cfg) {
  if (wsi_ids.size() != patches.size()) throw PreconditionError("one wsi id per patch is required");
  if (cfg.macenko_enabled && !cfg.macenko_target) throw PreconditionError("macenko enabled without a target");
  check_encoder_shape(teacher, cfg);
  const std::size_t n = patches.size();
  std::vector<std::vector<double>> feats(n);
  std::vector<char> ok(n, 0);
  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t si = 0; si < sn; ++si) {
    const auto i = static_cast<std::size_t>(si);
    try {
      const RgbPatch src = cfg.macenko_enabled ? stain::normalize_patch(patches[i], *cfg.macenko_target,
                                                                        cfg.macenko_alpha, cfg.macenko_beta)
                                               : patches[i];
      feats[i] = encoder_forward(teacher, encoder_input(to_standardized(src), cfg.encoder_input_size)).features();
      ok[i] = 1;
    } catch (const InsufficientTissue&) {
    } catch (const DegenerateStains&) {
    }
  }
  EmbedResult out;
  out.features.d = teacher.feature_dim();
  for (std::size_t i = 0; i < n; ++i) {
    if (!ok[i]) {
      ++out.skipped;
      continue;
    }
    out.features.push_back(feats[i], wsi_ids[i]);
    out.source_index.push_back(i);
  }
  return out;
}

}  // namespace wsikit::dino
