#include <fstream>
#include <iterator>
#include <set>

#include "doctest.h"
#include "support.hpp"
#include "synthmatch/dataset.hpp"
#include "synthmatch/error.hpp"
#include "synthmatch/io.hpp"
#include "tiny.hpp"

using namespace synthmatch;

namespace {

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("random presets respect the space") {
  const auto space = make_space("toy2");
  DatasetRng rng(1);
  std::set<std::vector<int>> seen;
  for (int k = 0; k < 1000; ++k) {
    const Preset p = sample_random_preset(space, rng);
    for (std::size_t i = 0; i < space->size(); ++i) {
      const auto& d = space->descriptor(i);
      if (d.is_free())
        CHECK((p.at(i) >= 0 && p.at(i) < d.class_count));
      else
        CHECK(p.at(i) == *d.fixed_value);
    }
    if (k < 100) seen.insert(p.classes());
  }
  CHECK(seen.size() == 100);
}

TEST_CASE("augmentation re-samples only the named parameters") {
  const auto space = make_space("toy2");
  DatasetRng rng(2);
  const Preset src = sample_theme_preset(space, theme_catalog()[3], rng);
  REQUIRE(src.theme());

  CHECK(augment_preset(src, {}, rng) == src);

  const std::size_t atk = space->require_index("op2.attack");
  bool moved = false;
  for (int k = 0; k < 20; ++k) {
    const Preset a = augment_preset(src, {"op2.attack"}, rng);
    for (std::size_t i = 0; i < space->size(); ++i)
      if (i != atk) CHECK(a.at(i) == src.at(i));
    moved = moved || a.at(atk) != src.at(atk);
  }
  CHECK(moved);

  const auto names = group_parameter_names(*space, 1);
  CHECK(names.size() == 6);
  for (int k = 0; k < 100; ++k) CHECK(augment_preset(src, names, rng).theme() == src.theme());
  CHECK_THROWS_AS(augment_preset(src, {"op1.detune"}, rng), UserError);
  CHECK_THROWS_AS(augment_preset(src, {"nope"}, rng), UserError);
}

TEST_CASE("seed-only dataset") {
  const auto dir = testing::scratch_dir("dataset-seeds");
  DatasetConfig cfg;
  cfg.seeds = 16;
  cfg.augmented = 0;
  cfg.random = 0;
  cfg.weights = false;
  const auto m = build_dataset(cfg, testing::short_note(), 16000, 3, dir, "h");
  CHECK(m.records.size() == 16);
  for (const auto& r : m.records) CHECK(r.source == Source::seed);
  CHECK(verify_dataset(dir).ok());
}

TEST_CASE("a space that is always silent hits the retry cap") {
  const auto silent = std::make_shared<ParameterSpace>(
      make_space("toy2")->with_fixed("silent", {{"op1.output_level", 0}}));
  DatasetConfig cfg;
  cfg.seeds = 0;
  cfg.augmented = 0;
  cfg.random = 1;
  cfg.retry_cap = 5;
  cfg.weights = false;
  const auto dir = testing::scratch_dir("dataset-silent");
  CHECK_THROWS_WITH_AS(build_dataset(silent, cfg, testing::short_note(), 16000, 1, dir, "h"),
                       doctest::Contains("after 5 attempts"), UserError);
}

TEST_CASE("mixed dataset counts, splits and reproducibility") {
  DatasetConfig cfg;
  cfg.seeds = 64;
  cfg.augmented = 192;
  cfg.random = 64;
  cfg.weights = false;
  const auto a = testing::scratch_dir("dataset-a");
  const auto b = testing::scratch_dir("dataset-b");
  const auto m = build_dataset(cfg, testing::short_note(), 16000, 11, a, "h");
  CHECK(m.records.size() == 320);
  CHECK(m.count(Split::train) + m.count(Split::val) + m.count(Split::test) == 320);
  const auto rep = verify_dataset(a);
  for (const auto& issue : rep.issues) MESSAGE(issue);
  CHECK(rep.ok());
  CHECK(rep.records == 320);
  for (const auto& r : m.records) {
    if (r.source == Source::random) CHECK(r.split != Split::test);
    const AudioBuffer audio = read_wav(a / r.audio_path);
    CHECK(is_audible(audio, cfg.audibility_threshold));
  }

  build_dataset(cfg, testing::short_note(), 16000, 11, b, "h");
  CHECK(file_bytes(a / "manifest.jsonl") == file_bytes(b / "manifest.jsonl"));
  CHECK(file_bytes(a / "audio/aug-00100.wav") == file_bytes(b / "audio/aug-00100.wav"));

  // Breaking a file is reported.
  std::filesystem::remove(a / "audio/rand-00000.wav");
  CHECK_FALSE(verify_dataset(a).ok());
}

TEST_CASE("weights are written for train and val only") {
  DatasetConfig cfg;
  cfg.themes = 4;
  cfg.seeds = 8;
  cfg.augmented = 8;
  cfg.random = 4;
  cfg.test_themes = 1;
  cfg.val_themes = 1;
  const auto dir = testing::scratch_dir("dataset-weights");
  const auto m = build_dataset(cfg, testing::short_note(), 16000, 5, dir, "h");
  const auto space = make_space("toy2");
  std::size_t with = 0;
  for (const auto& r : m.records) {
    CHECK(r.weights_path.has_value() == (r.split != Split::test));
    if (!r.weights_path) continue;
    const auto w = read_weights(dir / *r.weights_path, *space);
    CHECK(w.size() == space->free_indices().size());
    ++with;
  }
  CHECK(with == m.count(Split::train) + m.count(Split::val));
  CHECK(verify_dataset(dir).ok());
}

TEST_CASE("dataset config validation") {
  DatasetConfig cfg;
  cfg.themes = 0;
  CHECK_THROWS_AS(cfg.validate(), UserError);
  cfg = {};
  cfg.test_themes = 8;
  cfg.val_themes = 8;
  CHECK_THROWS_AS(cfg.validate(), UserError);
  cfg = {};
  cfg.seeds = 0;
  CHECK_THROWS_AS(cfg.validate(), UserError);
  CHECK_THROWS_AS(read_manifest(testing::scratch_dir("dataset-empty")), UserError);
}
