#pragma once

// JSON mappings for every configuration and statistics type. Missing keys
// keep their defaults, so partial configuration objects are accepted.

#include <json.hpp>

#include <fstream>
#include <string>

#include "posture/cnn/network.hpp"
#include "posture/cnn/train.hpp"
#include "posture/dataset.hpp"
#include "posture/dynamics.hpp"
#include "posture/error.hpp"
#include "posture/features.hpp"
#include "posture/stimulus.hpp"

namespace posture {

using json = nlohmann::json;

NLOHMANN_JSON_SERIALIZE_ENUM(NoisePath, {{NoisePath::both, "both"}, {NoisePath::estimator_only, "estimator_only"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Split, {{Split::train, "train"}, {Split::validation, "validation"}})

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PrtsConfig, register_length, stage_duration, peak_to_peak, repetitions,
                                                initial_state)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SimConfig, dt, output_dt, duration, seed, gravity_gain, noise_path,
                                                noise_psd, abort_angle)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BodyParams, mass, com_height, inertia, gravity)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DecParams, kp, kd, kp_pass, kd_pass, nv, theta, delta)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ParamRanges, lo, hi)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DatasetConfig, target_count, ranges, body, prts, sim, master_seed,
                                                stability_bound, enrich_gate, enrich_half_width, enrich_repeats,
                                                max_attempts, log_modulus, modulus_scale)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TargetStats, mean, std)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(InputStats, mean, std, log_modulus, modulus_scale)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GenerationTelemetry, attempts, accepted, enriched, rejected)

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << j.dump(2) << '\n';
}

} // namespace posture

namespace posture::cnn {

inline void to_json(nlohmann::json& j, const LayerSpec& l) {
  j = nlohmann::json{{"kind", to_string(l.kind)}};
  if (l.kind == LayerKind::conv3x3 || l.kind == LayerKind::dense) j["units"] = l.units;
}
inline void from_json(const nlohmann::json& j, LayerSpec& l) {
  l.kind = layer_kind_from_string(j.at("kind").get<std::string>());
  l.units = j.value("units", std::size_t{0});
}

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Shape, c, h, w)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(NetworkSpec, input, layers)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, learning_rate, momentum, batch_size, max_epochs, seed,
                                                lr_decay, lr_decay_every, shuffle, grad_clip)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EpochRecord, epoch, train_mse, val_mse, learning_rate, seconds)

} // namespace posture::cnn
