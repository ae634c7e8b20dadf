#pragma once

// JSON mapping for the configuration structs. Readers reject unknown keys
// and leave absent keys at their defaults.

#include <initializer_list>
#include <string>

#include "json.hpp"
#include "synthmatch/config.hpp"
#include "synthmatch/error.hpp"

namespace synthmatch::jsonio {

using json = nlohmann::json;

void require_object(const json& j, const std::string& where);
void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed);

template <class V>
void read_opt(const json& j, const char* key, V& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception& e) {
    throw UserError(where + "." + key + ": " + e.what());
  }
}

json to_json(const MidiNote& n);
MidiNote note_from_json(const json& j, const std::string& where);
json to_json(const dsp::MelConfig& c);
dsp::MelConfig mel_from_json(const json& j, const std::string& where);
json to_json(const dsp::CqtConfig& c);
dsp::CqtConfig cqt_from_json(const json& j, const std::string& where);
json to_json(const dsp::MfccConfig& c);
dsp::MfccConfig mfcc_from_json(const json& j, const std::string& where);
json to_json(const FeatureConfig& c);
FeatureConfig features_from_json(const json& j, const std::string& where);
json to_json(const ModelConfig& c);
ModelConfig model_from_json(const json& j, const std::string& where);
json to_json(const TrainConfig& c);
TrainConfig train_from_json(const json& j, const std::string& where);
json to_json(const DatasetConfig& c);
DatasetConfig dataset_from_json(const json& j, const std::string& where);
json to_json(const HillClimbConfig& c);
HillClimbConfig hill_climb_from_json(const json& j, const std::string& where);
json to_json(const GaConfig& c);
GaConfig ga_from_json(const json& j, const std::string& where);
json to_json(const InputShapes& s);
InputShapes shapes_from_json(const json& j, const std::string& where);
json to_json(const TrainHistory& h);
TrainHistory history_from_json(const json& j, const std::string& where);
json to_json(const GlobalConfig& c);
GlobalConfig global_from_json(const json& j);

json parse(const std::string& text, const std::string& where);

}  // namespace synthmatch::jsonio
