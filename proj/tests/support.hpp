#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "synthmatch/synth.hpp"

namespace testing {

inline constexpr double kPi = 3.14159265358979323846;

inline synthmatch::AudioBuffer sine(double hz, std::size_t n, int sr = 16000, double amp = 1.0) {
  synthmatch::AudioBuffer a;
  a.sample_rate = sr;
  a.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) a.samples[i] = amp * std::sin(2.0 * kPi * hz * static_cast<double>(i) / sr);
  return a;
}

inline synthmatch::AudioBuffer noise(std::size_t n, std::uint64_t seed, int sr = 16000, double amp = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  synthmatch::AudioBuffer a;
  a.sample_rate = sr;
  a.samples.resize(n);
  for (auto& s : a.samples) s = u(rng);
  return a;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("synthmatch-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Central difference of f with respect to x, which f reads by reference.
inline double central_difference(const std::function<double()>& f, double& x, double h = 1e-5) {
  const double keep = x;
  x = keep + h;
  const double up = f();
  x = keep - h;
  const double down = f();
  x = keep;
  return (up - down) / (2.0 * h);
}

/// |a - b| / max(|a|, |b|, floor).
inline double rel_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace testing
