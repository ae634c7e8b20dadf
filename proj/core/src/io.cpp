#include "synthmatch/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

#include "synthmatch/error.hpp"

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace synthmatch {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Presets

std::string preset_to_json(const Preset& preset) {
  const auto& space = preset.space();
  json classes = json::object();
  for (std::size_t i = 0; i < space.size(); ++i) classes[space.descriptor(i).name] = preset.at(i);
  json j = json::object();
  j["format_version"] = 1;
  j["space"] = space.id();
  j["algorithm"] = space.algorithm_id();
  j["theme"] = preset.theme() ? json(*preset.theme()) : json(nullptr);
  j["classes"] = std::move(classes);
  return j.dump(2) + "\n";
}

Preset preset_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UserError(std::string("preset JSON parse error: ") + e.what());
  }
  if (!j.is_object()) throw UserError("preset JSON must be an object");
  static const char* allowed[] = {"format_version", "space", "algorithm", "theme", "classes"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(allowed), std::end(allowed), key) == std::end(allowed))
      throw UserError("preset JSON has unknown key '" + key + "'");
  }
  for (const char* key : {"format_version", "space", "algorithm", "classes"})
    if (!j.contains(key)) throw UserError(std::string("preset JSON is missing '") + key + "'");
  if (!j["format_version"].is_number_integer() || j["format_version"].get<int>() != 1)
    throw UserError("preset JSON format_version must be 1");
  if (!j["space"].is_string()) throw UserError("preset JSON 'space' must be a string");
  SpacePtr space = make_space(j["space"].get<std::string>());
  if (!j["algorithm"].is_number_integer() || j["algorithm"].get<int>() != space->algorithm_id())
    throw UserError("preset JSON 'algorithm' does not match space " + space->id());
  std::optional<std::string> theme;
  if (j.contains("theme") && !j["theme"].is_null()) {
    if (!j["theme"].is_string()) throw UserError("preset JSON 'theme' must be a string or null");
    theme = j["theme"].get<std::string>();
  }
  const json& cj = j["classes"];
  if (!cj.is_object()) throw UserError("preset JSON 'classes' must be an object");
  Preset p = Preset::defaults(space);
  std::vector<bool> seen(space->size(), false);
  for (const auto& [name, value] : cj.items()) {
    auto idx = space->index_of(name);
    if (!idx) throw UserError("preset JSON names unknown parameter '" + name + "'");
    if (!value.is_number_integer()) throw UserError("preset JSON class for '" + name + "' must be an integer");
    p.set(*idx, value.get<int>());
    seen[*idx] = true;
  }
  for (std::size_t i = 0; i < space->size(); ++i)
    if (!seen[i] && space->descriptor(i).is_free())
      throw UserError("preset JSON is missing parameter '" + space->descriptor(i).name + "'");
  p.set_theme(std::move(theme));
  return p;
}

void write_preset(const std::filesystem::path& path, const Preset& preset) {
  write_text_file(path, preset_to_json(preset));
}

Preset read_preset(const std::filesystem::path& path) { return preset_from_json(read_text_file(path)); }

// ---------------------------------------------------------------------------
// WAV

namespace {

template <class T>
void put_le(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get_le(const std::vector<char>& buf, std::size_t pos) {
  if (pos + sizeof(T) > buf.size()) throw UserError("truncated WAV file");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  return v;
}

std::vector<char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UserError("cannot write " + path.string());
  return out;
}

}  // namespace

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio) {
  auto out = open_out(path);
  const auto n = static_cast<std::uint32_t>(audio.samples.size());
  const std::uint32_t data_bytes = n * 4;
  out.write("RIFF", 4);
  put_le<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_le<std::uint32_t>(out, 16);
  put_le<std::uint16_t>(out, 3);  // IEEE float
  put_le<std::uint16_t>(out, 1);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(audio.sample_rate));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(audio.sample_rate) * 4);
  put_le<std::uint16_t>(out, 4);
  put_le<std::uint16_t>(out, 32);
  out.write("data", 4);
  put_le<std::uint32_t>(out, data_bytes);
  for (double s : audio.samples) put_le<float>(out, static_cast<float>(s));
  if (!out) throw UserError("failed writing " + path.string());
}

AudioBuffer quantize_f32(AudioBuffer audio) {
  for (auto& s : audio.samples) s = static_cast<double>(static_cast<float>(s));
  return audio;
}

AudioBuffer read_wav(const std::filesystem::path& path) {
  const auto buf = read_bytes(path);
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 || std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw UserError(path.string() + " is not a RIFF/WAVE file");
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const std::string id(buf.data() + pos, 4);
    const auto size = get_le<std::uint32_t>(buf, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      format = get_le<std::uint16_t>(buf, body);
      channels = get_le<std::uint16_t>(buf, body + 2);
      rate = get_le<std::uint32_t>(buf, body + 4);
      bits = get_le<std::uint16_t>(buf, body + 14);
      if (format == 0xFFFE && size >= 26) format = get_le<std::uint16_t>(buf, body + 24);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw UserError(path.string() + ": data chunk before fmt chunk");
      if (channels != 1) throw UserError(path.string() + ": only mono WAV is supported");
      if (body + size > buf.size()) throw UserError(path.string() + ": truncated data chunk");
      AudioBuffer audio;
      audio.sample_rate = static_cast<int>(rate);
      if (format == 3 && bits == 32) {
        audio.samples.resize(size / 4);
        for (std::size_t i = 0; i < audio.samples.size(); ++i)
          audio.samples[i] = get_le<float>(buf, body + 4 * i);
      } else if (format == 1 && bits == 16) {
        audio.samples.resize(size / 2);
        for (std::size_t i = 0; i < audio.samples.size(); ++i)
          audio.samples[i] = get_le<std::int16_t>(buf, body + 2 * i) / 32768.0;
      } else {
        throw UserError(path.string() + ": unsupported WAV encoding (need float32 or PCM16)");
      }
      for (double s : audio.samples)
        if (!std::isfinite(s)) throw UserError(path.string() + ": non-finite sample");
      return audio;
    }
    pos = body + size + (size & 1u);
  }
  throw UserError(path.string() + ": no data chunk");
}

// ---------------------------------------------------------------------------
// Array archive

std::size_t NamedArray::element_count() const {
  return std::visit([](const auto& v) { return v.size(); }, data);
}

std::vector<double> NamedArray::as_double() const {
  return std::visit([](const auto& v) { return std::vector<double>(v.begin(), v.end()); }, data);
}

namespace {

void check_shape(const std::string& name, const std::vector<std::uint64_t>& shape, std::size_t count) {
  std::uint64_t expected = 1;
  for (auto d : shape) expected *= d;
  if (expected != count) throw ShapeError("array " + name + " shape does not match its element count");
}

}  // namespace

void ArrayArchive::put(const std::string& name, std::vector<std::uint64_t> shape, std::vector<float> data) {
  check_shape(name, shape, data.size());
  arrays_[name] = NamedArray{std::move(shape), std::move(data)};
}

void ArrayArchive::put(const std::string& name, std::vector<std::uint64_t> shape, std::vector<double> data) {
  check_shape(name, shape, data.size());
  arrays_[name] = NamedArray{std::move(shape), std::move(data)};
}

const NamedArray& ArrayArchive::get(const std::string& name) const {
  auto it = arrays_.find(name);
  if (it == arrays_.end()) throw UserError("archive has no array named " + name);
  return it->second;
}

void ArrayArchive::save(const std::filesystem::path& path) const {
  auto out = open_out(path);
  out.write("SMAR", 4);
  put_le<std::uint32_t>(out, 1);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(arrays_.size()));
  for (const auto& [name, arr] : arrays_) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const bool is_f64 = std::holds_alternative<std::vector<double>>(arr.data);
    put_le<std::uint8_t>(out, is_f64 ? 1 : 0);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(arr.shape.size()));
    for (auto d : arr.shape) put_le<std::uint64_t>(out, d);
    std::visit(
        [&](const auto& v) {
          out.write(reinterpret_cast<const char*>(v.data()),
                    static_cast<std::streamsize>(v.size() * sizeof(typename std::decay_t<decltype(v)>::value_type)));
        },
        arr.data);
  }
  if (!out) throw UserError("failed writing " + path.string());
}

ArrayArchive ArrayArchive::load(const std::filesystem::path& path) {
  const auto buf = read_bytes(path);
  if (buf.size() < 12 || std::memcmp(buf.data(), "SMAR", 4) != 0)
    throw UserError(path.string() + " is not an array archive");
  if (get_le<std::uint32_t>(buf, 4) != 1) throw UserError(path.string() + ": unsupported archive version");
  const auto count = get_le<std::uint32_t>(buf, 8);
  std::size_t pos = 12;
  ArrayArchive archive;
  for (std::uint32_t a = 0; a < count; ++a) {
    const auto name_len = get_le<std::uint32_t>(buf, pos);
    pos += 4;
    if (pos + name_len > buf.size()) throw UserError(path.string() + ": truncated archive");
    std::string name(buf.data() + pos, name_len);
    pos += name_len;
    const auto dtype = get_le<std::uint8_t>(buf, pos);
    const auto rank = get_le<std::uint32_t>(buf, pos + 1);
    pos += 5;
    std::vector<std::uint64_t> shape(rank);
    std::uint64_t n = 1;
    for (auto& d : shape) {
      d = get_le<std::uint64_t>(buf, pos);
      pos += 8;
      n *= d;
    }
    const std::size_t width = dtype == 1 ? 8 : 4;
    if (dtype > 1) throw UserError(path.string() + ": unknown dtype in archive");
    if (pos + n * width > buf.size()) throw UserError(path.string() + ": truncated archive");
    if (dtype == 1) {
      std::vector<double> v(n);
      std::memcpy(v.data(), buf.data() + pos, n * width);
      archive.put(name, std::move(shape), std::move(v));
    } else {
      std::vector<float> v(n);
      std::memcpy(v.data(), buf.data() + pos, n * width);
      archive.put(name, std::move(shape), std::move(v));
    }
    pos += n * width;
  }
  return archive;
}

// ---------------------------------------------------------------------------

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw UserError("failed writing " + path.string());
}

}  // namespace synthmatch
