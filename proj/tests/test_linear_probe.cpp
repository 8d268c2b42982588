#include <doctest.h>

#include <cmath>
#include <set>

#include "fixtures.hpp"
#include "wsikit/errors.hpp"
#include "wsikit/linear_probe.hpp"
#include "wsikit/synth_slides.hpp"

namespace pr = wsikit::probe;

namespace {

// Gaussian blobs, one per class, label = cluster id.
pr::LabeledFeatureSet blobs(std::size_t classes, std::size_t per, std::size_t d, double spread, std::uint64_t seed) {
  pr::LabeledFeatureSet s;
  s.features = fixtures::clusters(classes, per, d, spread, 3.0, seed);
  for (std::uint32_t id : s.features.wsi_ids) s.labels.push_back(static_cast<int>(id));
  s.n_classes = static_cast<int>(classes);
  return s;
}

}  // namespace

TEST_CASE("probe defaults") {
  const pr::ProbeConfig c;
  CHECK(c.lr == 0.1);
  CHECK(c.momentum == 0.9);
  CHECK(c.batch_size == 128);
  CHECK(c.iterations == 12500);
  CHECK(c.weight_decay == 0.0);
  CHECK(pr::kEvalResize == 256);
  CHECK(pr::kEvalCrop == 224);
}

TEST_CASE("nonzero weight decay is rejected") {
  pr::ProbeConfig c;
  c.weight_decay = 1e-4;
  CHECK_THROWS_AS(c.validate(), wsikit::PreconditionError);
}

TEST_CASE("cross-entropy gradient matches central differences") {
  auto data = blobs(3, 10, 4, 1.0, 1);
  pr::LinearModel m;
  m.n_classes = 3;
  m.dim = 4;
  wsikit::Rng r(2);
  for (int i = 0; i < 12; ++i) m.weights.push_back(0.3 * r.normal());
  for (int i = 0; i < 3; ++i) m.bias.push_back(0.1 * r.normal());
  const auto pl = pr::probe_loss(m, data);
  const double h = 1e-6;
  for (std::size_t i = 0; i < m.weights.size(); ++i) {
    auto up = m, down = m;
    up.weights[i] += h;
    down.weights[i] -= h;
    const double fd = (pr::probe_loss(up, data).loss - pr::probe_loss(down, data).loss) / (2 * h);
    CHECK(pl.grad.weights[i] == doctest::Approx(fd).epsilon(1e-6));
  }
  for (std::size_t i = 0; i < m.bias.size(); ++i) {
    auto up = m, down = m;
    up.bias[i] += h;
    down.bias[i] -= h;
    const double fd = (pr::probe_loss(up, data).loss - pr::probe_loss(down, data).loss) / (2 * h);
    CHECK(pl.grad.bias[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("zero model has loss log C and predicts class 0") {
  auto data = blobs(4, 5, 3, 1.0, 3);
  pr::LinearModel m;
  m.n_classes = 4;
  m.dim = 3;
  m.weights.assign(12, 0.0);
  m.bias.assign(4, 0.0);
  CHECK(pr::probe_loss(m, data).loss == doctest::Approx(std::log(4.0)));
  CHECK(pr::evaluate_accuracy(m, data) == doctest::Approx(0.25));
}

TEST_CASE("separable data reaches full validation accuracy") {
  auto data = blobs(3, 200, 8, 0.3, 4);
  auto [train, val] = pr::split_80_20(data, 5);
  CHECK(train.size() == 480);
  CHECK(val.size() == 120);
  pr::ProbeConfig c;
  c.iterations = 400;
  const auto res = pr::train_probe(train, val, c);
  CHECK(res.best_val_accuracy >= 0.99);
  CHECK(res.iterations_run == 400);
  CHECK(pr::evaluate_accuracy(res.model, val) == res.best_val_accuracy);
  REQUIRE(res.epoch_losses.size() >= 2);
  CHECK(res.epoch_losses.back() < res.epoch_losses.front());
}

TEST_CASE("probe training is deterministic") {
  auto data = blobs(2, 50, 3, 1.5, 6);
  auto [train, val] = pr::split_80_20(data, 1);
  pr::ProbeConfig c;
  c.iterations = 50;
  c.batch_size = 16;
  const auto a = pr::train_probe(train, val, c), b = pr::train_probe(train, val, c);
  CHECK(a.model.weights == b.model.weights);
  CHECK(a.best_iteration == b.best_iteration);
}

TEST_CASE("split covers every row exactly once") {
  auto data = blobs(2, 13, 2, 1.0, 7);
  auto [tr, va] = pr::split_80_20(data, 9);
  CHECK(tr.size() + va.size() == 26);
  CHECK(tr.size() == 20);
  std::multiset<double> all, got;
  for (std::size_t i = 0; i < data.size(); ++i) all.insert(data.features.row(i)[0]);
  for (std::size_t i = 0; i < tr.size(); ++i) got.insert(tr.features.row(i)[0]);
  for (std::size_t i = 0; i < va.size(); ++i) got.insert(va.features.row(i)[0]);
  CHECK(all == got);
}

TEST_CASE("probe input validation") {
  auto data = blobs(2, 10, 3, 1.0, 8);
  auto bad = data;
  bad.labels[0] = 5;
  CHECK_THROWS_AS(pr::train_probe(bad, data, pr::ProbeConfig{}), wsikit::PreconditionError);
  auto other = blobs(2, 10, 4, 1.0, 8);
  CHECK_THROWS_AS(pr::train_probe(data, other, pr::ProbeConfig{}), wsikit::DimensionMismatch);
  auto one_class = data;
  for (int& l : one_class.labels) l = 0;
  CHECK_THROWS_AS(pr::train_probe(one_class, data, pr::ProbeConfig{}), wsikit::PreconditionError);
}

TEST_CASE("evaluation preprocessing resizes then centre-crops") {
  const auto target = wsikit::stain::fit_target(wsikit::synth::reference_image());
  const auto patch = wsikit::synth::reference_image(2, 32, 4);
  const auto out = pr::preprocess_eval(patch, target);
  CHECK(out.width == 224);
  CHECK(out.height == 224);
  const auto small = pr::preprocess_eval(patch, target, 40, 32);
  CHECK(small.width == 32);
  CHECK_THROWS_AS(pr::preprocess_eval(patch, target, 32, 40), wsikit::CropTooLarge);
}
