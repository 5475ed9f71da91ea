#pragma once

// Plain-text trace files and binary float tensors.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "posture/error.hpp"
#include "posture/features.hpp"
#include "posture/trace.hpp"

namespace posture {

/// Shortest-safe text form of a double; identical input gives identical text.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct TraceFile {
  double dt = 0.0;
  std::vector<double> time;
  std::vector<double> values;
};

/// Two-column CSV with a header line, e.g. "time_s,angle_rad".
inline void write_trace_csv(const std::string& path, std::span<const double> values, double dt,
                            const std::string& value_column = "angle_rad") {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << "time_s," << value_column << '\n';
  for (std::size_t i = 0; i < values.size(); ++i)
    out << format_double(static_cast<double>(i) * dt) << ',' << format_double(values[i]) << '\n';
}

/// Reads a two-column trace CSV (header optional). The sample step is taken
/// from the first two time stamps and must be uniform.
inline TraceFile read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open trace file " + path);
  TraceFile tf;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError(path + ":" + std::to_string(lineno) + ": expected two columns");
    try {
      std::size_t used = 0;
      const double t = std::stod(line.substr(0, comma), &used);
      const double v = std::stod(line.substr(comma + 1));
      tf.time.push_back(t);
      tf.values.push_back(v);
    } catch (const std::invalid_argument&) {
      if (tf.time.empty() && lineno == 1) continue;  // header
      throw FormatError(path + ":" + std::to_string(lineno) + ": not a number");
    } catch (const std::out_of_range&) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": value out of range");
    }
  }
  if (tf.values.size() < 2) throw FormatError(path + ": needs at least two samples");
  tf.dt = tf.time[1] - tf.time[0];
  if (!(tf.dt > 0.0)) throw FormatError(path + ": time column must increase");
  for (std::size_t i = 1; i < tf.time.size(); ++i)
    if (std::abs((tf.time[i] - tf.time[i - 1]) - tf.dt) > 1e-6 * tf.dt + 1e-12)
      throw FormatError(path + ": non-uniform sampling at row " + std::to_string(i + 1));
  return tf;
}

inline void write_f32(const std::string& path, std::span<const float> data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
  if (!out) throw FormatError("short write to " + path);
}

inline std::vector<float> read_f32(const std::string& path, std::size_t expected_count) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw FormatError("cannot open " + path);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected_count * sizeof(float))
    throw FormatError(path + ": expected " + std::to_string(expected_count * sizeof(float)) + " bytes, found " +
                      std::to_string(bytes));
  std::vector<float> data(expected_count);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw FormatError("short read from " + path);
  return data;
}

/// One image channel as CSV: kWindows rows of kWindow values.
inline void write_image_channel_csv(const std::string& path, const SpectrogramImage& img, std::size_t channel) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  for (std::size_t r = 0; r < kWindows; ++r) {
    for (std::size_t k = 0; k < kWindow; ++k) out << (k ? "," : "") << format_double(img.at(channel, r, k));
    out << '\n';
  }
}

} // namespace posture
