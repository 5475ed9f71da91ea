#pragma once

// Uniformly sampled angle traces and the amplitude/agreement metrics used
// across the toolkit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "posture/error.hpp"

namespace posture {

/// Body sway (COM angle) time series. `diverged` marks a run that was cut
/// short because the state became non-finite or the body fell.
struct SwayTrace {
  double dt = 0.01;
  std::vector<double> samples;
  bool diverged = false;

  [[nodiscard]] std::size_t size() const { return samples.size(); }
};

inline double peak_abs(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) {
    if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
    m = std::max(m, std::abs(v));
  }
  return m;
}

inline double peak_to_peak(std::span<const double> x) {
  if (x.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  return *hi - *lo;
}

inline double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

inline double rms_difference(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw FormatError("rms_difference: length mismatch");
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(a.size()));
}

/// RMS error normalized by the reference trace's peak-to-peak amplitude.
inline double nrmse(std::span<const double> reference, std::span<const double> candidate) {
  const double range = peak_to_peak(reference);
  const double err = rms_difference(reference, candidate);
  if (range == 0.0) return err == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return err / range;
}

/// Linear interpolation of a trace sampled at `in_dt` onto `count` samples at
/// `out_dt`, both grids starting at t = 0. Samples past the end of the input
/// hold its last value.
inline std::vector<double> resample_linear(std::span<const double> x, double in_dt, double out_dt,
                                           std::size_t count) {
  if (x.empty()) throw FormatError("resample_linear: empty input");
  if (!(in_dt > 0.0) || !(out_dt > 0.0)) throw ConfigError("resample_linear: sample steps must be positive");
  std::vector<double> out(count);
  const double last = static_cast<double>(x.size() - 1);
  for (std::size_t i = 0; i < count; ++i) {
    const double pos = std::min(static_cast<double>(i) * out_dt / in_dt, last);
    const auto j = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(j);
    out[i] = j + 1 < x.size() ? x[j] + frac * (x[j + 1] - x[j]) : x[j];
  }
  return out;
}

} // namespace posture
