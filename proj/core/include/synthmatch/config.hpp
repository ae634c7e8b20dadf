#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "synthmatch/dataset.hpp"
#include "synthmatch/estimator.hpp"
#include "synthmatch/features.hpp"
#include "synthmatch/search.hpp"
#include "synthmatch/synth.hpp"

namespace synthmatch {

/// Everything a command needs. Loaded from JSON; every section and key is
/// optional, unknown keys are rejected.
struct GlobalConfig {
  std::string space = "toy2";
  MidiNote note{};
  FeatureConfig features{};
  ModelConfig model{};
  TrainConfig train{};
  DatasetConfig dataset{};
  HillClimbConfig hill_climb{};
  GaConfig ga{};
  std::uint64_t seed = 0;

  void validate() const;
};

GlobalConfig parse_config(const std::string& json_text);
GlobalConfig load_config(const std::filesystem::path& path);
/// Canonical JSON (sorted keys, every field present).
std::string config_to_json(const GlobalConfig& cfg);
/// FNV-1a of the canonical JSON.
std::string config_hash(const GlobalConfig& cfg);

}  // namespace synthmatch
