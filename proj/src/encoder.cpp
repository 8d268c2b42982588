#include "wsikit/encoder.hpp"

#include <cmath>

#include "wsikit/errors.hpp"

namespace wsikit::dino {

std::size_t EncoderParams::feature_dim() const {
  if (layers.empty()) return 0;
  return layers.size() == 1 ? layers.front().cols : layers[layers.size() - 2].rows;
}

bool EncoderParams::same_shape(const EncoderParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].rows != other.layers[i].rows || layers[i].cols != other.layers[i].cols) return false;
  return true;
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

EncoderParams make_encoder(std::span<const std::size_t> widths) {
  if (widths.size() < 2) throw PreconditionError("encoder needs at least an input and an output width");
  EncoderParams p;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    if (widths[i] == 0 || widths[i + 1] == 0) throw PreconditionError("encoder widths must be positive");
    Layer l;
    l.cols = widths[i];
    l.rows = widths[i + 1];
    l.weights.assign(l.rows * l.cols, 0.0);
    l.bias.assign(l.rows, 0.0);
    p.layers.push_back(std::move(l));
  }
  return p;
}

EncoderParams init_encoder(std::span<const std::size_t> widths, Rng& rng) {
  EncoderParams p = make_encoder(widths);
  for (Layer& l : p.layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>(l.rows + l.cols));
    for (double& w : l.weights) w = rng.uniform(-limit, limit);
  }
  return p;
}

EncoderParams zeros_like(const EncoderParams& params) {
  EncoderParams z = params;
  z.for_each([](double& v) { v = 0.0; });
  return z;
}

ForwardCache encoder_forward(const EncoderParams& params, std::span<const double> input) {
  if (params.layers.empty()) throw ShapeMismatch("encoder has no layers");
  if (input.size() != params.input_dim())
    throw ShapeMismatch("encoder input has " + std::to_string(input.size()) + " values, expected " +
                        std::to_string(params.input_dim()));
  ForwardCache cache;
  cache.activations.reserve(params.layers.size() + 1);
  cache.activations.emplace_back(input.begin(), input.end());
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    const Layer& l = params.layers[li];
    const std::vector<double>& x = cache.activations.back();
    std::vector<double> y(l.rows);
    for (std::size_t r = 0; r < l.rows; ++r) {
      const double* w = l.weights.data() + r * l.cols;
      double s = l.bias[r];
      for (std::size_t c = 0; c < l.cols; ++c) s += w[c] * x[c];
      y[r] = s;
    }
    if (li + 1 < params.layers.size())
      for (double& v : y) v = std::tanh(v);
    cache.activations.push_back(std::move(y));
  }
  return cache;
}

std::vector<ForwardCache> encoder_forward_batch(const EncoderParams& params,
                                                const std::vector<std::vector<double>>& inputs) {
  std::vector<ForwardCache> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) out.push_back(encoder_forward(params, in));
  return out;
}

void encoder_backward(const EncoderParams& params, const ForwardCache& cache, std::span<const double> dlogits,
                      EncoderParams& grad) {
  if (dlogits.size() != params.output_dim()) throw ShapeMismatch("dlogits has the wrong length");
  std::vector<double> delta(dlogits.begin(), dlogits.end());
  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const Layer& l = params.layers[li];
    Layer& g = grad.layers[li];
    const std::vector<double>& x = cache.activations[li];
    for (std::size_t r = 0; r < l.rows; ++r) {
      const double d = delta[r];
      g.bias[r] += d;
      double* gw = g.weights.data() + r * l.cols;
      for (std::size_t c = 0; c < l.cols; ++c) gw[c] += d * x[c];
    }
    if (li == 0) break;
    // Propagate through the weights and the tanh that produced x.
    std::vector<double> prev(l.cols, 0.0);
    for (std::size_t r = 0; r < l.rows; ++r) {
      const double d = delta[r];
      const double* w = l.weights.data() + r * l.cols;
      for (std::size_t c = 0; c < l.cols; ++c) prev[c] += w[c] * d;
    }
    for (std::size_t c = 0; c < l.cols; ++c) prev[c] *= 1.0 - x[c] * x[c];
    delta = std::move(prev);
  }
}

void accumulate(EncoderParams& grad, const EncoderParams& other, double scale) {
  for (std::size_t li = 0; li < grad.layers.size(); ++li) {
    Layer& g = grad.layers[li];
    const Layer& o = other.layers[li];
    for (std::size_t i = 0; i < g.weights.size(); ++i) g.weights[i] += scale * o.weights[i];
    for (std::size_t i = 0; i < g.bias.size(); ++i) g.bias[i] += scale * o.bias[i];
  }
}

}  // namespace wsikit::dino
