#pragma once

// On-disk dataset: manifest.json (config snapshot, statistics, record
// index), images.f32 (row-major float32 tensor [N, 2, 110, 110]) and
// params.csv (raw and normalized parameters per record).

#include <filesystem>
#include <fstream>
#include <string>

#include "posture/config_io.hpp"
#include "posture/dataset.hpp"
#include "posture/io.hpp"

namespace posture {

inline constexpr const char* kDatasetFormat = "posture-dataset";
inline constexpr int kDatasetVersion = 1;

inline json dataset_manifest(const Dataset& ds) {
  json records = json::array();
  for (const auto& r : ds.records) {
    records.push_back({{"id", r.id},
                       {"seed", r.seed},
                       {"split", r.split},
                       {"enriched", r.enriched},
                       {"parent", r.parent},
                       {"peak_abs", r.peak_abs},
                       {"peak_to_peak", r.peak_to_peak}});
  }
  return {{"format", kDatasetFormat},
          {"version", kDatasetVersion},
          {"config", ds.config},
          {"train_count", ds.train_count},
          {"validation_count", ds.validation_count()},
          {"target_stats", ds.target_stats},
          {"input_stats", ds.input_stats},
          {"telemetry", ds.telemetry},
          {"images",
           {{"file", "images.f32"},
            {"dtype", "float32"},
            {"byte_order", "little"},
            {"layout", "row-major"},
            {"shape", {ds.records.size(), kChannels, kWindows, kWindow}},
            {"channels", {"dft_modulus", "dft_phase"}},
            {"axes", {"record", "channel", "time_window", "frequency_bin"}}}},
          {"params_csv", "params.csv"},
          {"records", records}};
}

inline void write_params_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << "id,split";
  for (auto n : DecParams::names) out << ',' << n;
  for (auto n : DecParams::names) out << ",z_" << n;
  out << '\n';
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    out << r.id << ',' << (r.split == Split::train ? "train" : "validation");
    for (std::size_t j = 0; j < DecParams::count; ++j) out << ',' << format_double(r.params[j]);
    const auto z = normalize_targets(r.params, ds.target_stats);
    for (double v : z) out << ',' << format_double(v);
    out << '\n';
  }
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_json_file((dir / "manifest.json").string(), dataset_manifest(ds));
  write_f32((dir / "images.f32").string(), ds.images);
  write_params_csv((dir / "params.csv").string(), ds);
}

/// Loads a dataset written by save_dataset. Raw parameters come from
/// params.csv (exact round-trip text), images from the tensor file.
inline Dataset load_dataset(const std::filesystem::path& dir) {
  const json m = read_json_file((dir / "manifest.json").string());
  if (m.value("format", "") != kDatasetFormat) throw FormatError(dir.string() + ": not a dataset manifest");
  Dataset ds;
  try {
    ds.config = m.at("config").get<DatasetConfig>();
    ds.train_count = m.at("train_count").get<std::size_t>();
    ds.target_stats = m.at("target_stats").get<TargetStats>();
    ds.input_stats = m.at("input_stats").get<InputStats>();
    ds.telemetry = m.value("telemetry", GenerationTelemetry{});
    for (const auto& jr : m.at("records")) {
      Record r;
      r.id = jr.at("id").get<std::size_t>();
      r.seed = jr.at("seed").get<std::uint64_t>();
      r.split = jr.at("split").get<Split>();
      r.enriched = jr.at("enriched").get<bool>();
      r.parent = jr.at("parent").get<std::int64_t>();
      r.peak_abs = jr.at("peak_abs").get<double>();
      r.peak_to_peak = jr.at("peak_to_peak").get<double>();
      ds.records.push_back(r);
    }
  } catch (const json::exception& e) {
    throw FormatError(dir.string() + "/manifest.json: " + e.what());
  }

  std::ifstream csv(dir / "params.csv");
  if (!csv) throw FormatError("cannot open " + (dir / "params.csv").string());
  std::string line;
  std::getline(csv, line);
  for (auto& r : ds.records) {
    if (!std::getline(csv, line)) throw FormatError("params.csv has fewer rows than the manifest");
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    if (std::stoull(cell) != r.id) throw FormatError("params.csv row order differs from the manifest");
    std::getline(ss, cell, ',');
    for (std::size_t j = 0; j < DecParams::count; ++j) {
      if (!std::getline(ss, cell, ',')) throw FormatError("params.csv row for id " + std::to_string(r.id) + " is short");
      r.params[j] = std::stod(cell);
    }
  }
  ds.images = read_f32((dir / "images.f32").string(), ds.records.size() * kImageSize);
  return ds;
}

} // namespace posture
