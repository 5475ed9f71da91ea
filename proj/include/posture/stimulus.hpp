#pragma once

// Pseudo-random ternary sequence (PRTS) support-surface tilt stimulus.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "posture/error.hpp"

namespace posture {

inline constexpr double deg_to_rad(double deg) noexcept { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad_to_deg(double rad) noexcept { return rad * 180.0 / std::numbers::pi; }

struct PrtsConfig {
  int register_length = 5;
  double stage_duration = 0.25;            // s
  double peak_to_peak = deg_to_rad(2.0);   // rad
  int repetitions = 2;
  /// Initial register contents, base-3 digits (least significant = first
  /// emitted symbol). Must be nonzero modulo 3^register_length.
  std::uint64_t initial_state = 1;

  [[nodiscard]] std::size_t period() const;
  [[nodiscard]] double duration() const { return static_cast<double>(repetitions) * period() * stage_duration; }
};

/// Uniformly sampled tilt angle profile.
struct TiltTrace {
  double dt = 0.01;
  std::vector<double> samples;

  [[nodiscard]] std::size_t size() const { return samples.size(); }
  [[nodiscard]] double duration() const { return dt * static_cast<double>(samples.size()); }
};

namespace detail {

// Feedback coefficients c_0..c_{m-1} of primitive polynomials
// x^m + c_{m-1} x^{m-1} + ... + c_0 over GF(3), verified by exhaustive
// period enumeration (period 3^m - 1).
inline const std::vector<int>* primitive_taps(int m) {
  static const std::array<std::vector<int>, 8> table = {{
      {2, 1},
      {1, 2, 0},
      {2, 1, 0, 0},
      {1, 2, 0, 0, 0},
      {2, 1, 0, 0, 0, 0},
      {1, 0, 2, 0, 0, 0, 0},
      {2, 0, 0, 1, 0, 0, 0, 0},
      {1, 0, 0, 0, 2, 0, 0, 0, 0},
  }};
  if (m < 2 || m > 9) return nullptr;
  return &table[static_cast<std::size_t>(m - 2)];
}

inline std::uint64_t ipow3(int m) {
  std::uint64_t p = 1;
  for (int i = 0; i < m; ++i) p *= 3;
  return p;
}

inline std::size_t steps_per(double duration, double dt, const char* what) {
  const double ratio = duration / dt;
  const double rounded = std::round(ratio);
  if (dt <= 0.0 || rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
    throw ConfigError(std::string(what) + " must be a positive integer multiple of the sample step");
  return static_cast<std::size_t>(rounded);
}

} // namespace detail

inline std::size_t PrtsConfig::period() const {
  if (!detail::primitive_taps(register_length))
    throw ConfigError("prts.register_length " + std::to_string(register_length) +
                      " has no stored primitive polynomial (supported: 2..9)");
  return static_cast<std::size_t>(detail::ipow3(register_length) - 1);
}

/// One period of the maximal-length ternary sequence, symbols mapped
/// 0 -> 0, 1 -> +1, 2 -> -1.
inline std::vector<int> ternary_msequence(const PrtsConfig& config) {
  const auto* taps = detail::primitive_taps(config.register_length);
  if (!taps)
    throw ConfigError("prts.register_length " + std::to_string(config.register_length) +
                      " has no stored primitive polynomial (supported: 2..9)");
  const int m = config.register_length;
  const std::uint64_t states = detail::ipow3(m);
  std::uint64_t seed = config.initial_state % states;
  if (seed == 0) throw ConfigError("prts.initial_state must be a nonzero register state");

  std::vector<int> reg(static_cast<std::size_t>(m));
  for (auto& d : reg) {
    d = static_cast<int>(seed % 3);
    seed /= 3;
  }

  const std::size_t period = static_cast<std::size_t>(states - 1);
  std::vector<int> out;
  out.reserve(period);
  for (std::size_t n = 0; n < period; ++n) {
    const int digit = reg[0];
    out.push_back(digit == 2 ? -1 : digit);
    int acc = 0;
    for (int i = 0; i < m; ++i) acc += (*taps)[static_cast<std::size_t>(i)] * reg[static_cast<std::size_t>(i)];
    const int next = (3 - acc % 3) % 3;
    std::rotate(reg.begin(), reg.begin() + 1, reg.end());
    reg.back() = next;
  }
  return out;
}

/// Tilt profile sampled every `dt` seconds: each symbol sets a constant
/// velocity for one stage, the velocity is integrated to position, and the
/// position is rescaled so that max - min equals peak_to_peak. Starts at 0.
inline TiltTrace generate_prts(const PrtsConfig& config, double dt = 0.01) {
  const auto symbols = ternary_msequence(config);
  if (config.repetitions < 1) throw ConfigError("prts.repetitions must be >= 1");
  if (config.peak_to_peak < 0.0) throw ConfigError("prts.peak_to_peak must be >= 0");
  const std::size_t steps = detail::steps_per(config.stage_duration, dt, "prts.stage_duration");

  // Position in integer units of (symbol x step); exact, so repetitions are
  // bit-identical and rescaling is a single multiply.
  const std::size_t stages = symbols.size() * static_cast<std::size_t>(config.repetitions);
  std::vector<std::int64_t> position(stages * steps);
  std::int64_t p = 0, lo = 0, hi = 0;
  for (std::size_t s = 0, k = 0; s < stages; ++s) {
    const int v = symbols[s % symbols.size()];
    for (std::size_t i = 0; i < steps; ++i, ++k) {
      position[k] = p;
      p += v;
    }
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }

  TiltTrace trace;
  trace.dt = dt;
  trace.samples.resize(position.size());
  const double scale = hi > lo ? config.peak_to_peak / static_cast<double>(hi - lo) : 0.0;
  for (std::size_t k = 0; k < position.size(); ++k)
    trace.samples[k] = static_cast<double>(position[k]) * scale;
  return trace;
}

} // namespace posture
