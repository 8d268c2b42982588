#include "wsikit/linear_probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wsikit/errors.hpp"
#include "wsikit/rng.hpp"
#include "wsikit/slide_pipeline.hpp"

namespace wsikit::probe {

void ProbeConfig::validate() const {
  if (!(lr >= 0.0)) throw PreconditionError("probe lr must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw PreconditionError("probe momentum must be in [0, 1)");
  if (weight_decay != 0.0) throw PreconditionError("probe weight decay is fixed at 0");
  if (batch_size < 1) throw PreconditionError("probe batch size must be >= 1");
  if (iterations < 0) throw PreconditionError("probe iterations must be >= 0");
}

void LabeledFeatureSet::validate() const {
  features.validate();
  if (labels.size() != features.n) throw DimensionMismatch("label count does not match feature count");
  if (n_classes < 1) throw PreconditionError("n_classes must be >= 1");
  for (int l : labels)
    if (l < 0 || l >= n_classes) throw PreconditionError("label out of range");
}

std::vector<double> LinearModel::logits(const double* x) const {
  std::vector<double> z(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    const double* w = weights.data() + c * dim;
    double s = bias[c];
    for (std::size_t j = 0; j < dim; ++j) s += w[j] * x[j];
    z[c] = s;
  }
  return z;
}

int LinearModel::predict(const double* x) const {
  const auto z = logits(x);
  // max_element returns the first maximum, i.e. the lower class index on ties.
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

RgbPatch preprocess_eval(const RgbPatch& patch, const stain::NormalizationTarget& target, int resize, int crop) {
  if (crop > resize) throw CropTooLarge("crop size exceeds resize size");
  const RgbPatch normalized = stain::normalize_patch(patch, target);
  return slide::center_crop(slide::resize_bilinear(normalized, resize, resize), crop, crop);
}

double evaluate_accuracy(const LinearModel& model, const LabeledFeatureSet& data) {
  if (data.features.d != model.dim) throw DimensionMismatch("feature dimension does not match the model");
  if (data.size() == 0) throw PreconditionError("accuracy of an empty set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) correct += model.predict(data.features.row(i)) == data.labels[i];
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

ProbeLoss probe_loss(const LinearModel& model, const LabeledFeatureSet& data, const std::vector<std::size_t>& rows) {
  std::vector<std::size_t> all;
  const std::vector<std::size_t>* use = &rows;
  if (rows.empty()) {
    all.resize(data.size());
    std::iota(all.begin(), all.end(), 0);
    use = &all;
  }
  ProbeLoss out;
  out.grad = model;
  std::fill(out.grad.weights.begin(), out.grad.weights.end(), 0.0);
  std::fill(out.grad.bias.begin(), out.grad.bias.end(), 0.0);
  const std::size_t c_count = model.n_classes, d = model.dim;
  for (std::size_t i : *use) {
    const double* x = data.features.row(i);
    auto z = model.logits(x);
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
      v = std::exp(v - mx);
      sum += v;
    }
    const auto y = static_cast<std::size_t>(data.labels[i]);
    out.loss -= std::log(z[y] / sum);
    for (std::size_t c = 0; c < c_count; ++c) {
      const double g = z[c] / sum - (c == y ? 1.0 : 0.0);
      out.grad.bias[c] += g;
      double* gw = out.grad.weights.data() + c * d;
      for (std::size_t j = 0; j < d; ++j) gw[j] += g * x[j];
    }
  }
  const double inv = 1.0 / static_cast<double>(use->size());
  out.loss *= inv;
  for (double& v : out.grad.weights) v *= inv;
  for (double& v : out.grad.bias) v *= inv;
  return out;
}

ProbeResult train_probe(const LabeledFeatureSet& train, const LabeledFeatureSet& val, const ProbeConfig& cfg) {
  cfg.validate();
  train.validate();
  val.validate();
  if (train.features.d != val.features.d) throw DimensionMismatch("train and validation dimensions differ");
  if (train.n_classes != val.n_classes) throw DimensionMismatch("train and validation class counts differ");
  if (train.n_classes < 2) throw PreconditionError("probe needs at least two classes");
  std::vector<std::size_t> per_class(static_cast<std::size_t>(train.n_classes), 0);
  for (int l : train.labels) ++per_class[static_cast<std::size_t>(l)];
  for (std::size_t c : per_class)
    if (c == 0) throw PreconditionError("every class must appear in the training split");

  ProbeResult res;
  LinearModel& m = res.model;
  m.n_classes = static_cast<std::size_t>(train.n_classes);
  m.dim = train.features.d;
  m.weights.assign(m.n_classes * m.dim, 0.0);
  m.bias.assign(m.n_classes, 0.0);
  LinearModel velocity = m;
  LinearModel best = m;
  res.best_val_accuracy = evaluate_accuracy(m, val);

  const std::size_t n = train.size();
  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  std::vector<std::size_t> order(n);
  std::vector<std::size_t> batch;
  long long it = 0;
  for (std::uint64_t epoch = 0; it < cfg.iterations; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::derive(cfg.seed, {epoch});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t s = 0; s < steps_per_epoch && it < cfg.iterations; ++s, ++it) {
      const std::size_t lo = s * cfg.batch_size;
      const std::size_t hi = std::min(n, lo + cfg.batch_size);
      batch.assign(order.begin() + static_cast<std::ptrdiff_t>(lo), order.begin() + static_cast<std::ptrdiff_t>(hi));
      const ProbeLoss pl = probe_loss(m, train, batch);
      for (std::size_t i = 0; i < m.weights.size(); ++i) {
        velocity.weights[i] = cfg.momentum * velocity.weights[i] + pl.grad.weights[i];
        m.weights[i] -= cfg.lr * velocity.weights[i];
      }
      for (std::size_t i = 0; i < m.bias.size(); ++i) {
        velocity.bias[i] = cfg.momentum * velocity.bias[i] + pl.grad.bias[i];
        m.bias[i] -= cfg.lr * velocity.bias[i];
      }
    }
    res.epoch_losses.push_back(probe_loss(m, train).loss);
    const double acc = evaluate_accuracy(m, val);
    if (acc > res.best_val_accuracy) {
      res.best_val_accuracy = acc;
      res.best_iteration = it;
      best = m;
    }
  }
  res.iterations_run = it;
  res.model = best;
  return res;
}

LabeledFeatureSet subset(const LabeledFeatureSet& data, const std::vector<std::size_t>& rows) {
  LabeledFeatureSet out;
  out.n_classes = data.n_classes;
  out.features.d = data.features.d;
  out.features.manifest = data.features.manifest;
  for (std::size_t i : rows) {
    const double* r = data.features.row(i);
    out.features.vectors.insert(out.features.vectors.end(), r, r + data.features.d);
    out.features.wsi_ids.push_back(data.features.wsi_ids[i]);
    out.labels.push_back(data.labels[i]);
  }
  out.features.n = rows.size();
  return out;
}

std::pair<LabeledFeatureSet, LabeledFeatureSet> split_80_20(const LabeledFeatureSet& data, std::uint64_t seed) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const std::size_t n_train = (order.size() * 8) / 10;
  std::vector<std::size_t> tr(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> va(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(tr.begin(), tr.end());
  std::sort(va.begin(), va.end());
  return {subset(data, tr), subset(data, va)};
}

}  // namespace wsikit::probe
