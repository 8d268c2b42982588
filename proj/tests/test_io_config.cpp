#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "wsikit/config.hpp"
#include "wsikit/errors.hpp"
#include "wsikit/io.hpp"

namespace io = wsikit::io;
namespace fs = std::filesystem;

TEST_CASE("png round trip") {
  const auto dir = fixtures::temp_dir("png");
  const auto img = fixtures::random_patch(13, 7, 1);
  io::write_png(img, dir + "/a.png");
  CHECK(io::read_image(dir + "/a.png") == img);
  io::write_ppm(img, dir + "/a.ppm");
  CHECK(io::read_image(dir + "/a.ppm") == img);
  CHECK_THROWS_AS(io::read_image(dir + "/missing.png"), wsikit::DataError);
}

TEST_CASE("slide sidecar must match the raster") {
  const auto dir = fixtures::temp_dir("sidecar");
  const auto img = fixtures::random_patch(20, 10, 2);
  io::write_png(img, dir + "/s.png");
  CHECK(io::default_meta_path(dir + "/s.png") == dir + "/s.json");
  io::write_slide_meta({0.25, 20, 10, "s"}, dir + "/s.json");
  const auto raster = io::load_slide(dir + "/s.png", dir + "/s.json");
  CHECK(raster.mpp == 0.25);
  CHECK(raster.name == "s");
  io::write_slide_meta({0.25, 21, 10, "s"}, dir + "/bad.json");
  CHECK_THROWS_AS(io::load_slide(dir + "/s.png", dir + "/bad.json"), wsikit::DataError);
}

TEST_CASE("feature file round trip and corruption") {
  auto set = fixtures::clusters(3, 4, 5, 1.0, 5.0, 3);
  for (double& v : set.vectors) v = static_cast<float>(v);  // stored as f32
  set.manifest[1] = "slide_b";
  const auto bytes = io::encode_features(set);
  CHECK(bytes.size() == 4 + 2 + 4 + 4 + 12 * (4 + 5 * 4));
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "FVEC");
  const auto back = io::decode_features(bytes);
  CHECK(back.vectors == set.vectors);
  CHECK(back.wsi_ids == set.wsi_ids);

  const auto dir = fixtures::temp_dir("fvec");
  io::write_features(set, dir + "/f.fvec");
  CHECK(fs::exists(dir + "/f.fvec.manifest.json"));
  CHECK(io::read_features(dir + "/f.fvec").manifest.at(1) == "slide_b");
  CHECK(io::encode_features(io::read_features(dir + "/f.fvec")) == bytes);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_THROWS_AS(io::decode_features(truncated), wsikit::DataError);
  auto magic = bytes;
  magic[0] = 'X';
  try {
    io::decode_features(magic, "m.fvec");
    FAIL("expected DataError");
  } catch (const wsikit::DataError& e) {
    CHECK(e.offset() == 0);
    CHECK(e.file() == "m.fvec");
  }
  auto version = bytes;
  version[4] = 9;
  CHECK_THROWS_AS(io::decode_features(version), wsikit::DataError);
}

TEST_CASE("checkpoint round trip") {
  wsikit::Rng r(4);
  io::Checkpoint c;
  c.params = wsikit::dino::init_encoder(std::vector<std::size_t>{6, 4, 3}, r);
  c.params.for_each([](double& v) { v = static_cast<float>(v); });
  c.center = {0.5, -0.25, 0.125};
  c.step = 77;
  const auto bytes = io::encode_checkpoint(c);
  const auto back = io::decode_checkpoint(bytes);
  CHECK(io::encode_checkpoint(back) == bytes);
  CHECK(back.step == 77);
  CHECK(back.center == c.center);
  CHECK(back.params.layers[1].weights == c.params.layers[1].weights);
  auto extra = bytes;
  extra.push_back(0);
  CHECK_THROWS_AS(io::decode_checkpoint(extra), wsikit::DataError);
}

TEST_CASE("patch directory round trip") {
  const auto dir = fixtures::temp_dir("patchdir");
  io::PatchSet set;
  for (int i = 0; i < 3; ++i) {
    set.patches.push_back(fixtures::random_patch(8, 8, 10 + i));
    set.patches.back().mpp = 0.5;
    set.records.push_back({"p" + std::to_string(i) + ".png", static_cast<std::uint32_t>(i % 2),
                           "wsi_" + std::to_string(i % 2), 0.5, i});
  }
  io::write_patch_dir(dir, set);
  const auto back = io::read_patch_dir(dir);
  REQUIRE(back.patches.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(back.patches[i] == set.patches[i]);
    CHECK(back.records[i].wsi_id == set.records[i].wsi_id);
    CHECK(back.records[i].label == i);
  }
}

TEST_CASE("cohort directory round trip") {
  wsikit::synth::CohortSpec spec;
  spec.n_wsis = 2;
  spec.patches_per_wsi = 5;
  spec.patch_size = 16;
  const auto cohort = wsikit::synth::generate_cohort(spec);
  const auto dir = fixtures::temp_dir("cohort");
  io::write_cohort(dir, cohort);
  CHECK(fs::exists(dir + "/cohort.json"));
  CHECK(fs::exists(dir + "/ground_truth.csv"));
  CHECK(fs::exists(dir + "/slides/wsi_1.png"));
  const auto back = io::read_patch_source(dir);
  REQUIRE(back.patches.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(back.patches[i] == cohort.patches[i]);
    CHECK(back.records[i].wsi_id == cohort.wsi_ids[i]);
    CHECK(back.records[i].label == cohort.content_classes[i]);
  }
  const auto slides = io::read_cohort_manifest(dir + "/cohort.json");
  REQUIRE(slides.size() == 2);
  CHECK(slides[0].mpp == 0.5);
  CHECK_THROWS_AS(io::read_patch_source(dir + "/slides"), wsikit::DataError);
}

TEST_CASE("config keys cover the defaults and round trip") {
  wsikit::RunConfig cfg;
  const auto entries = cfg.entries();
  CHECK(entries.size() == wsikit::config_keys().size());
  wsikit::RunConfig other;
  other.seed = 99;
  other.probe.lr = 0.5;
  wsikit::apply_config_text(other, cfg.to_text());
  CHECK(other.entries() == entries);

  wsikit::set_config_value(cfg, "probe.lr", "0.25");
  CHECK(cfg.probe.lr == 0.25);
  wsikit::set_config_value(cfg, "dino.hidden_sizes", "32,16");
  CHECK(cfg.dino.hidden_sizes == std::vector<std::size_t>{32, 16});
  wsikit::set_config_value(cfg, "dino.macenko", "true");
  CHECK(cfg.dino.macenko_enabled);
}

TEST_CASE("config errors name the key and line") {
  wsikit::RunConfig cfg;
  try {
    wsikit::apply_config_text(cfg, "seed = 3\n# comment\nbogus.key = 1\n", "run.cfg");
    FAIL("expected UsageError");
  } catch (const wsikit::UsageError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("run.cfg:3") != std::string::npos);
    CHECK(msg.find("bogus.key") != std::string::npos);
  }
  CHECK(cfg.seed == 3);
  CHECK_THROWS_AS(wsikit::set_config_value(cfg, "probe.lr", "fast"), wsikit::UsageError);
  CHECK_THROWS_AS(wsikit::apply_config_text(cfg, "no equals sign\n"), wsikit::UsageError);
}

TEST_CASE("shipped target matches a refit of the shipped reference") {
  const std::string target = wsikit::default_target_path();
  REQUIRE(fs::exists(target));
  const auto shipped = wsikit::stain::load_target(target);
  const auto ref = io::read_image(fs::path(target).parent_path().string() + "/reference.png");
  const auto refit = wsikit::stain::fit_target(ref);
  for (int k = 0; k < 3; ++k) {
    CHECK(shipped.basis.h_vector[k] == refit.basis.h_vector[k]);
    CHECK(shipped.basis.e_vector[k] == refit.basis.e_vector[k]);
  }
  CHECK(shipped.basis.max_concentrations[0] == refit.basis.max_concentrations[0]);
  CHECK(shipped.basis.max_concentrations[1] == refit.basis.max_concentrations[1]);
}
