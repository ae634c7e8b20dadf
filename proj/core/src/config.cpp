#include "synthmatch/config.hpp"

#include "json_io.hpp"
#include "synthmatch/io.hpp"

namespace synthmatch {

void GlobalConfig::validate() const {
  make_space(space);
  note.validate();
  features.validate();
  model.validate();
  dataset.validate();
  ga.validate();
}

GlobalConfig parse_config(const std::string& json_text) {
  return jsonio::global_from_json(jsonio::parse(json_text, "config"));
}

GlobalConfig load_config(const std::filesystem::path& path) {
  try {
    return parse_config(read_text_file(path));
  } catch (const UserError& e) {
    throw UserError(path.string() + ": " + e.what());
  }
}

std::string config_to_json(const GlobalConfig& cfg) { return jsonio::to_json(cfg).dump(); }

std::string config_hash(const GlobalConfig& cfg) { return fnv1a_hex(config_to_json(cfg)); }

}  // namespace synthmatch
