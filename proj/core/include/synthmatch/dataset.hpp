#pragma once

// Three-source dataset generation: theme seed presets, augmentations that
// re-sample one operator group of a seed, and uniformly random presets.
// Themes are split before augmentation so no theme crosses splits.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "synthmatch/synth.hpp"

namespace synthmatch {

using DatasetRng = std::mt19937_64;

/// Closed interval on the unit range.
struct UnitRange {
  double lo = 0.0;
  double hi = 1.0;
};

/// Ranges for one operator role. coarse is a class interval of ratio_coarse.
struct RoleTemplate {
  std::pair<int, int> coarse{1, 1};
  UnitRange fine{0.0, 0.0};
  UnitRange detune{0.5, 0.5};
  UnitRange level{0.8, 1.0};
  UnitRange attack{0.0, 0.1};
  UnitRange decay{0.2, 0.5};
  UnitRange sustain{0.5, 0.9};
  UnitRange release{0.1, 0.4};
};

struct Theme {
  std::string name;
  RoleTemplate carrier;
  RoleTemplate modulator;
  UnitRange feedback{0.0, 0.0};
};

/// The hand-designed theme catalog (16 entries).
const std::vector<Theme>& theme_catalog();

/// A seed preset: every free parameter drawn inside the theme's range for
/// the operator's role (carrier or modulator under the space's algorithm).
Preset sample_theme_preset(const SpacePtr& space, const Theme& theme, DatasetRng& rng);

/// Uniform class per free descriptor; fixed descriptors at their value.
Preset sample_random_preset(const SpacePtr& space, DatasetRng& rng);

/// Re-samples the named free parameters uniformly; keeps everything else,
/// including the theme. Throws UserError for unknown or fixed names.
Preset augment_preset(const Preset& source, const std::vector<std::string>& free_names, DatasetRng& rng);

/// Names of the free descriptors owned by `group`.
std::vector<std::string> group_parameter_names(const ParameterSpace& space, int group);

struct DatasetConfig {
  std::string space = "toy2";
  std::size_t themes = 16;
  std::size_t seeds = 128;
  std::size_t augmented = 896;
  std::size_t random = 256;
  std::size_t test_themes = 2;
  std::size_t val_themes = 2;
  double random_val_fraction = 0.0;
  double audibility_threshold = 0.01;
  std::size_t retry_cap = 100;
  bool weights = true;

  void validate() const;
};

enum class Split { train, val, test };
enum class Source { seed, augmented, random };
std::string split_name(Split s);
std::string source_name(Source s);
Split parse_split(const std::string& s);
Source parse_source(const std::string& s);

struct ManifestRecord {
  std::string id;
  std::string preset_path;  // relative to the dataset directory
  std::string audio_path;
  std::optional<std::string> theme;
  Split split = Split::train;
  Source source = Source::seed;
  std::optional<std::string> weights_path;
};

struct DatasetManifest {
  DatasetConfig config;
  MidiNote note;
  int sample_rate = 16000;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<ManifestRecord> records;

  std::size_t count(Split s) const;
};

using ProgressCallback = std::function<void(const std::string& stage, std::size_t done, std::size_t total)>;

/// Generates presets, renders and filters them, optionally computes
/// gradient weights (train and val only), and writes manifest.jsonl,
/// dataset.json, presets/, audio/ and weights/ under `out`.
DatasetManifest build_dataset(const DatasetConfig& cfg, const MidiNote& note, int sample_rate, std::uint64_t seed,
                              const std::filesystem::path& out, const std::string& config_hash,
                              const ProgressCallback& progress = {});
/// Same, over an explicit space (for spaces outside the named catalog).
DatasetManifest build_dataset(const SpacePtr& space, const DatasetConfig& cfg, const MidiNote& note, int sample_rate,
                              std::uint64_t seed, const std::filesystem::path& out, const std::string& config_hash,
                              const ProgressCallback& progress = {});

DatasetManifest read_manifest(const std::filesystem::path& dir);
std::vector<double> read_weights(const std::filesystem::path& path, const ParameterSpace& space);

struct VerifyReport {
  std::vector<std::string> issues;
  std::size_t records = 0;
  std::size_t train = 0, val = 0, test = 0;
  bool ok() const { return issues.empty(); }
};

/// Unique ids, referenced files exist, theme-disjoint splits, random
/// presets never in test, every audio audible at the recorded threshold.
VerifyReport verify_dataset(const std::filesystem::path& dir);

}  // namespace synthmatch
