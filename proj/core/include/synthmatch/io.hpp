#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "synthmatch/synth.hpp"

namespace synthmatch {

// Preset JSON:
//   {"format_version":1,"space":"<id>","algorithm":<int>,"theme":"<str>"|null,
//    "classes":{"<name>":<int>,...}}
// Unknown keys are rejected. Fixed descriptors may be omitted on read.
std::string preset_to_json(const Preset& preset);
Preset preset_from_json(const std::string& text);
void write_preset(const std::filesystem::path& path, const Preset& preset);
Preset read_preset(const std::filesystem::path& path);

/// Mono RIFF/WAVE, IEEE float 32-bit little-endian.
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio);
/// Reads mono float32 or PCM16 WAV files.
AudioBuffer read_wav(const std::filesystem::path& path);
/// Rounds every sample to float32, which is what a WAV round trip keeps.
AudioBuffer quantize_f32(AudioBuffer audio);

/// Binary container of named arrays with shape headers.
///
/// Layout (little-endian):
///   magic "SMAR", u32 version (1), u32 array count, then per array
///   u32 name length, name bytes, u8 dtype (0 = f32, 1 = f64), u32 rank,
///   u64 dims[rank], raw element data.
struct NamedArray {
  std::vector<std::uint64_t> shape;
  std::variant<std::vector<float>, std::vector<double>> data;

  std::size_t element_count() const;
  std::vector<double> as_double() const;
};

class ArrayArchive {
 public:
  void put(const std::string& name, std::vector<std::uint64_t> shape, std::vector<float> data);
  void put(const std::string& name, std::vector<std::uint64_t> shape, std::vector<double> data);
  bool contains(const std::string& name) const { return arrays_.count(name) != 0; }
  const NamedArray& get(const std::string& name) const;
  const std::map<std::string, NamedArray>& arrays() const { return arrays_; }

  void save(const std::filesystem::path& path) const;
  static ArrayArchive load(const std::filesystem::path& path);

 private:
  std::map<std::string, NamedArray> arrays_;
};

/// 64-bit FNV-1a as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& bytes);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace synthmatch
