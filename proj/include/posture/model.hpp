#pragma once

// The trained regressor: network, the statistics needed to map traces to
// inputs and outputs back to parameters, and the training history.

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "posture/cnn/network.hpp"
#include "posture/cnn/train.hpp"
#include "posture/config_io.hpp"
#include "posture/dataset.hpp"
#include "posture/features.hpp"
#include "posture/io.hpp"

namespace posture {

struct TrainedModel {
  cnn::Network<float> net;
  InputStats input_stats;
  TargetStats target_stats;
  cnn::TrainConfig config;
  std::vector<cnn::EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_mse = 0.0;

  [[nodiscard]] const cnn::NetworkSpec& spec() const { return net.spec(); }
};

/// Copies a raw stored image into `dst` and applies input normalization.
inline void load_normalized(std::span<const float> raw, const InputStats& stats, std::span<float> dst) {
  std::copy(raw.begin(), raw.end(), dst.begin());
  input_normalize_inplace(dst, stats);
}

inline cnn::SampleSource<float> dataset_source(const Dataset& ds, const InputStats& stats, std::size_t first,
                                               std::size_t count) {
  cnn::SampleSource<float> src;
  src.count = count;
  src.target_size = DecParams::count;
  src.load = [&ds, stats, first](std::size_t i, std::span<float> dst) { load_normalized(ds.image(first + i), stats, dst); };
  src.target = [&ds, first](std::size_t i, std::span<double> dst) {
    const auto z = ds.target(first + i);
    std::copy(z.begin(), z.end(), dst.begin());
  };
  return src;
}

inline TrainedModel train(const Dataset& ds, const cnn::NetworkSpec& spec, const cnn::TrainConfig& cfg,
                          const std::function<void(const cnn::EpochRecord&)>& on_epoch = {}) {
  if (ds.train_count == 0 || ds.validation_count() == 0) throw ConfigError("train: dataset needs both halves");
  if (spec.input != cnn::Shape{kChannels, kWindows, kWindow})
    throw ConfigError("train: network input must be 2x110x110 to match spectrogram images");
  TrainedModel m;
  m.net = cnn::Network<float>(spec);
  if (m.net.output_size() != DecParams::count) throw ConfigError("train: network must have 7 outputs");
  m.net.init(derive_seed(cfg.seed, 0, streams::init));
  m.input_stats = ds.input_stats;
  m.target_stats = ds.target_stats;
  m.config = cfg;
  const auto tr = dataset_source(ds, m.input_stats, 0, ds.train_count);
  const auto va = dataset_source(ds, m.input_stats, ds.train_count, ds.validation_count());
  const auto fit = cnn::fit(m.net, tr, va, cfg, on_epoch);
  m.history = fit.history;
  m.best_epoch = fit.best_epoch;
  m.best_val_mse = fit.best_val_mse;
  return m;
}

/// Normalized 7-vector for one raw (un-normalized) spectrogram.
template <typename T>
TargetVector predict_normalized(const TrainedModel& m, std::span<const T> raw_image) {
  if (raw_image.size() != kImageSize) throw FormatError("predict: image has wrong size");
  std::vector<float> in(raw_image.begin(), raw_image.end());
  input_normalize_inplace(std::span<float>(in), m.input_stats);
  const auto out = m.net.predict(in);
  TargetVector z{};
  std::copy(out.begin(), out.end(), z.begin());
  return z;
}

inline TargetVector predict_normalized(const TrainedModel& m, const SpectrogramImage& img) {
  return predict_normalized<double>(m, std::span<const double>(img.data));
}

/// Mean per-record MSE over the validation half.
inline double validation_mse(const TrainedModel& m, const Dataset& ds) {
  return cnn::evaluate_mse(m.net, dataset_source(ds, m.input_stats, ds.train_count, ds.validation_count()));
}

/// MSE of the constant predictor "training mean" (zero in z-space) on the
/// validation half.
inline double mean_baseline_mse(const Dataset& ds) {
  double total = 0.0;
  for (std::size_t i = ds.train_count; i < ds.size(); ++i) {
    const auto z = ds.target(i);
    double s = 0.0;
    for (double v : z) s += v * v;
    total += s / static_cast<double>(z.size());
  }
  return ds.validation_count() ? total / static_cast<double>(ds.validation_count()) : 0.0;
}

inline constexpr const char* kModelFormat = "posture-model";

/// model.json (spec, statistics, training config and history) plus
/// weights.f32 (little-endian float32 in network parameter order).
inline void save_model(const TrainedModel& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json j{{"format", kModelFormat},
         {"version", 1},
         {"network", m.spec()},
         {"input_stats", m.input_stats},
         {"target_stats", m.target_stats},
         {"train_config", m.config},
         {"history", m.history},
         {"best_epoch", m.best_epoch},
         {"best_val_mse", m.best_val_mse},
         {"weights", {{"file", "weights.f32"}, {"dtype", "float32"}, {"count", m.net.param_count()}}}};
  write_json_file((dir / "model.json").string(), j);
  write_f32((dir / "weights.f32").string(), m.net.params());
}

inline TrainedModel load_model(const std::filesystem::path& dir) {
  const json j = read_json_file((dir / "model.json").string());
  if (j.value("format", "") != kModelFormat) throw FormatError(dir.string() + ": not a model directory");
  TrainedModel m;
  try {
    m.net = cnn::Network<float>(j.at("network").get<cnn::NetworkSpec>());
    m.input_stats = j.at("input_stats").get<InputStats>();
    m.target_stats = j.at("target_stats").get<TargetStats>();
    m.config = j.value("train_config", cnn::TrainConfig{});
    m.history = j.value("history", std::vector<cnn::EpochRecord>{});
    m.best_epoch = j.value("best_epoch", std::size_t{0});
    m.best_val_mse = j.value("best_val_mse", 0.0);
    if (j.at("weights").at("count").get<std::size_t>() != m.net.param_count())
      throw FormatError(dir.string() + ": weight count does not match the network spec");
  } catch (const json::exception& e) {
    throw FormatError(dir.string() + "/model.json: " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(dir.string() + "/model.json: " + e.what());
  }
  const auto w = read_f32((dir / "weights.f32").string(), m.net.param_count());
  std::copy(w.begin(), w.end(), m.net.params().begin());
  return m;
}

} // namespace posture
