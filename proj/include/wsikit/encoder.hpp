#pragma once

// Small multilayer perceptron standing in for the backbone + projection head.
// Hidden layers use tanh; the last layer emits K prototype logits.

#include <cstddef>
#include <span>
#include <vector>

#include "wsikit/rng.hpp"

namespace wsikit::dino {

struct Layer {
  std::size_t rows = 0;  // outputs
  std::size_t cols = 0;  // inputs
  std::vector<double> weights;  // rows x cols, row-major
  std::vector<double> bias;     // rows
};

struct EncoderParams {
  std::vector<Layer> layers;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().cols; }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().rows; }
  /// Width of the penultimate (pre-prototype) representation.
  std::size_t feature_dim() const;
  bool same_shape(const EncoderParams& other) const;
  std::size_t parameter_count() const;
  /// Visits every scalar parameter in a fixed order (weights then bias, layer by layer).
  template <class Fn>
  void for_each(Fn&& fn) {
    for (Layer& l : layers) {
      for (double& w : l.weights) fn(w);
      for (double& b : l.bias) fn(b);
    }
  }
};

/// Layer widths from input to output, e.g. {768, 128, 64, 64}.
EncoderParams make_encoder(std::span<const std::size_t> widths);
/// Uniform in +-sqrt(6 / (fan_in + fan_out)), zero biases.
EncoderParams init_encoder(std::span<const std::size_t> widths, Rng& rng);
EncoderParams zeros_like(const EncoderParams& params);

struct ForwardCache {
  /// activations[0] is the input; activations[l + 1] the output of layer l.
  std::vector<std::vector<double>> activations;
  const std::vector<double>& logits() const { return activations.back(); }
  /// Penultimate activations; equals the input for a single-layer encoder.
  const std::vector<double>& features() const { return activations[activations.size() - 2]; }
};

/// Throws ShapeMismatch when the input length differs from the first layer.
ForwardCache encoder_forward(const EncoderParams& params, std::span<const double> input);
/// Same as encoder_forward over a batch of inputs.
std::vector<ForwardCache> encoder_forward_batch(const EncoderParams& params,
                                                const std::vector<std::vector<double>>& inputs);

/// Adds d(loss)/d(params) for one forward pass into `grad`, given d(loss)/d(logits).
void encoder_backward(const EncoderParams& params, const ForwardCache& cache, std::span<const double> dlogits,
                      EncoderParams& grad);

/// grad += other, parameter by parameter.
void accumulate(EncoderParams& grad, const EncoderParams& other, double scale = 1.0);

}  // namespace wsikit::dino
