#pragma once

// Two-channel spectrogram image: the sway trace is cut into 110
// non-overlapping windows of 110 samples; each window's 110-point DFT gives
// one image row (modulus in channel 0, phase in channel 1).

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "posture/error.hpp"
#include "posture/trace.hpp"

namespace posture {

inline constexpr std::size_t kWindow = 110;                    // samples per window == bins per row
inline constexpr std::size_t kWindows = 110;                   // rows (time axis)
inline constexpr std::size_t kTraceLength = kWindow * kWindows;  // 12100
inline constexpr std::size_t kChannels = 2;
inline constexpr std::size_t kPlane = kWindows * kWindow;

/// Channel-major image: data[c * kPlane + row * kWindow + bin].
struct SpectrogramImage {
  std::vector<double> data = std::vector<double>(kChannels * kPlane, 0.0);

  double& at(std::size_t channel, std::size_t row, std::size_t bin) { return data[channel * kPlane + row * kWindow + bin]; }
  [[nodiscard]] double at(std::size_t channel, std::size_t row, std::size_t bin) const {
    return data[channel * kPlane + row * kWindow + bin];
  }
  [[nodiscard]] std::span<const double> modulus() const { return {data.data(), kPlane}; }
  [[nodiscard]] std::span<const double> phase() const { return {data.data() + kPlane, kPlane}; }
};

enum class LengthPolicy { reject, pad_zeros };

namespace detail {

struct DftTable {
  std::array<double, kWindow> cos{}, sin{};
  DftTable() {
    for (std::size_t i = 0; i < kWindow; ++i) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(kWindow);
      cos[i] = std::cos(a);
      sin[i] = std::sin(a);
    }
  }
};

inline const DftTable& dft_table() {
  static const DftTable table;
  return table;
}

} // namespace detail

inline SpectrogramImage encode(std::span<const double> trace, LengthPolicy policy = LengthPolicy::reject) {
  if (trace.size() != kTraceLength && !(policy == LengthPolicy::pad_zeros && trace.size() < kTraceLength))
    throw FormatError("encode: trace has " + std::to_string(trace.size()) + " samples, expected " +
                      std::to_string(kTraceLength));
  const auto& tw = detail::dft_table();
  SpectrogramImage img;
  std::array<double, kWindow> x{};
  for (std::size_t row = 0; row < kWindows; ++row) {
    double scale = 0.0;
    for (std::size_t n = 0; n < kWindow; ++n) {
      const std::size_t idx = row * kWindow + n;
      x[n] = idx < trace.size() ? trace[idx] : 0.0;
      scale += std::abs(x[n]);
    }
    // Bins whose modulus is rounding noise relative to the window get phase 0.
    const double zero_tol = 1e-13 * scale;
    for (std::size_t k = 0; k < kWindow; ++k) {
      double re = 0.0, im = 0.0;
      for (std::size_t n = 0; n < kWindow; ++n) {
        const std::size_t i = (k * n) % kWindow;
        re += x[n] * tw.cos[i];
        im -= x[n] * tw.sin[i];
      }
      const double mod = std::hypot(re, im);
      double ph = mod > zero_tol ? std::atan2(im, re) : 0.0;
      if (ph <= -std::numbers::pi) ph = std::numbers::pi;
      img.at(0, row, k) = mod;
      img.at(1, row, k) = ph;
    }
  }
  return img;
}

inline SpectrogramImage encode(const SwayTrace& trace, LengthPolicy policy = LengthPolicy::reject) {
  return encode(std::span<const double>(trace.samples), policy);
}

/// Inverse of encode: per-row inverse DFT from (modulus, phase).
inline SwayTrace decode(const SpectrogramImage& img) {
  if (img.data.size() != kChannels * kPlane) throw FormatError("decode: image has wrong size");
  const auto& tw = detail::dft_table();
  SwayTrace out;
  out.samples.resize(kTraceLength);
  std::array<double, kWindow> re{}, im{};
  for (std::size_t row = 0; row < kWindows; ++row) {
    for (std::size_t k = 0; k < kWindow; ++k) {
      re[k] = img.at(0, row, k) * std::cos(img.at(1, row, k));
      im[k] = img.at(0, row, k) * std::sin(img.at(1, row, k));
    }
    for (std::size_t n = 0; n < kWindow; ++n) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) {
        const std::size_t i = (k * n) % kWindow;
        acc += re[k] * tw.cos[i] - im[k] * tw.sin[i];
      }
      out.samples[row * kWindow + n] = acc / static_cast<double>(kWindow);
    }
  }
  return out;
}

/// Channel-wise z-scoring statistics for network inputs. With
/// `log_modulus`, channel 0 is replaced by log(1 + modulus / modulus_scale)
/// before the statistics are taken and applied.
struct InputStats {
  std::array<double, kChannels> mean{0.0, 0.0};
  std::array<double, kChannels> std{1.0, 1.0};
  bool log_modulus = false;
  double modulus_scale = 1.0;
};

inline double transform_modulus(double m, const InputStats& s) {
  return s.log_modulus ? std::log1p(m / s.modulus_scale) : m;
}

/// Statistics over images stored contiguously (channel-major, kChannels *
/// kPlane values each), in any floating-point precision.
template <typename T>
InputStats compute_input_stats(std::span<const T> images, bool log_modulus = false, double modulus_scale = 1.0) {
  const std::size_t per = kChannels * kPlane;
  if (images.empty() || images.size() % per != 0) throw FormatError("compute_input_stats: bad image buffer");
  if (!(modulus_scale > 0.0)) throw ConfigError("modulus_scale must be positive");
  InputStats st;
  st.log_modulus = log_modulus;
  st.modulus_scale = modulus_scale;
  const std::size_t count = images.size() / per;
  for (std::size_t c = 0; c < kChannels; ++c) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      const T* plane = images.data() + i * per + c * kPlane;
      for (std::size_t j = 0; j < kPlane; ++j) {
        const double v = c == 0 ? transform_modulus(static_cast<double>(plane[j]), st) : static_cast<double>(plane[j]);
        sum += v;
        sq += v * v;
      }
    }
    const double n = static_cast<double>(count * kPlane);
    st.mean[c] = sum / n;
    const double var = std::max(0.0, sq / n - st.mean[c] * st.mean[c]);
    st.std[c] = std::sqrt(var);
    if (!(st.std[c] > 0.0)) throw ConfigError("compute_input_stats: channel " + std::to_string(c) + " has zero variance");
  }
  return st;
}

/// Applies `stats` in place to one image buffer of kChannels * kPlane values.
template <typename T>
void input_normalize_inplace(std::span<T> image, const InputStats& stats) {
  if (image.size() != kChannels * kPlane) throw FormatError("input_normalize: wrong image size");
  for (std::size_t c = 0; c < kChannels; ++c) {
    if (!(stats.std[c] > 0.0)) throw ConfigError("input_normalize: degenerate channel std");
    const double inv = 1.0 / stats.std[c];
    T* plane = image.data() + c * kPlane;
    for (std::size_t j = 0; j < kPlane; ++j) {
      const double v = c == 0 ? transform_modulus(static_cast<double>(plane[j]), stats) : static_cast<double>(plane[j]);
      plane[j] = static_cast<T>((v - stats.mean[c]) * inv);
    }
  }
}

inline SpectrogramImage input_normalize(SpectrogramImage image, const InputStats& stats) {
  input_normalize_inplace(std::span<double>(image.data), stats);
  return image;
}

} // namespace posture
