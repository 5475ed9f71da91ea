#pragma once

// Labelled corpus synthesis: uniform parameter sampling, stability
// filtering, large-sway enrichment, deterministic split and target
// normalization.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "posture/dynamics.hpp"
#include "posture/error.hpp"
#include "posture/features.hpp"
#include "posture/parallel.hpp"
#include "posture/random.hpp"
#include "posture/stimulus.hpp"

namespace posture {

inline constexpr std::size_t kImageSize = kChannels * kPlane;
using TargetVector = std::array<double, DecParams::count>;

struct ParamRanges {
  DecParams lo{503.3943, 125.8486, 62.9243, 62.9243, 0.0, 0.0, 0.0};
  DecParams hi{1258.4857, 377.5457, 377.5457, 188.7729, 1.0, 0.0052, 0.24};

  [[nodiscard]] double width(std::size_t i) const { return hi[i] - lo[i]; }
  void validate() const {
    for (std::size_t i = 0; i < DecParams::count; ++i) {
      if (!(lo[i] <= hi[i]))
        throw ConfigError("range for " + std::string(DecParams::names[i]) + " has min > max");
      if (lo[i] < 0.0) throw ConfigError("range for " + std::string(DecParams::names[i]) + " must be >= 0");
    }
  }
  [[nodiscard]] DecParams clamp(DecParams p) const {
    for (std::size_t i = 0; i < DecParams::count; ++i) p[i] = std::clamp(p[i], lo[i], hi[i]);
    return p;
  }
  [[nodiscard]] bool contains(const DecParams& p) const {
    for (std::size_t i = 0; i < DecParams::count; ++i)
      if (p[i] < lo[i] || p[i] > hi[i]) return false;
    return true;
  }
};

inline DecParams sample_params(const ParamRanges& ranges, Rng& rng) {
  DecParams p;
  for (std::size_t i = 0; i < DecParams::count; ++i) {
    if (ranges.lo[i] == ranges.hi[i]) {
      p[i] = ranges.lo[i];
      continue;
    }
    std::uniform_real_distribution<double> u(ranges.lo[i], ranges.hi[i]);
    p[i] = u(rng);
  }
  return p;
}

inline constexpr double kDefaultStabilityBound = deg_to_rad(5.0);

/// Finite, not diverged, and max |sway| below the bound (5 degrees).
inline bool is_stable(const SwayTrace& trace, double bound = kDefaultStabilityBound) {
  if (trace.diverged) return false;
  return peak_abs(trace.samples) < bound;
}

/// Perturbed copy of an accepted large-sway sample: each parameter moves by
/// U(-half_width, +half_width) of its range width, clamped to the range.
/// Returns nothing when the peak sway does not exceed `gate`.
inline std::optional<DecParams> enrich(const DecParams& params, const SwayTrace& trace, const ParamRanges& ranges,
                                       Rng& rng, double gate = 0.05, double half_width = 0.05) {
  if (!(peak_abs(trace.samples) > gate)) return std::nullopt;
  std::uniform_real_distribution<double> u(-half_width, half_width);
  DecParams out = params;
  for (std::size_t i = 0; i < DecParams::count; ++i) out[i] += u(rng) * ranges.width(i);
  return ranges.clamp(out);
}

/// Per-dimension mean and (population) standard deviation of raw parameters.
struct TargetStats {
  TargetVector mean{};
  TargetVector std{};

  static TargetStats identity() {
    TargetStats s;
    s.std.fill(1.0);
    return s;
  }
};

inline TargetStats compute_target_stats(std::span<const DecParams> params) {
  if (params.empty()) throw ConfigError("compute_target_stats: no samples");
  TargetStats s;
  const double n = static_cast<double>(params.size());
  for (std::size_t j = 0; j < DecParams::count; ++j) {
    double sum = 0.0;
    for (const auto& p : params) sum += p[j];
    s.mean[j] = sum / n;
    double sq = 0.0;
    for (const auto& p : params) sq += (p[j] - s.mean[j]) * (p[j] - s.mean[j]);
    s.std[j] = std::sqrt(sq / n);
  }
  return s;
}

inline TargetVector normalize_targets(const DecParams& p, const TargetStats& stats) {
  TargetVector z{};
  for (std::size_t j = 0; j < DecParams::count; ++j) {
    if (!(stats.std[j] > 0.0))
      throw ConfigError("normalize_targets: zero std for " + std::string(DecParams::names[j]) + " (degenerate dataset)");
    z[j] = (p[j] - stats.mean[j]) / stats.std[j];
  }
  return z;
}

inline DecParams denormalize_targets(std::span<const double, DecParams::count> z, const TargetStats& stats) {
  DecParams p;
  for (std::size_t j = 0; j < DecParams::count; ++j) p[j] = z[j] * stats.std[j] + stats.mean[j];
  return p;
}

struct DatasetConfig {
  std::size_t target_count = 12766;
  ParamRanges ranges;
  BodyParams body;
  PrtsConfig prts;
  SimConfig sim;
  std::uint64_t master_seed = 1;
  double stability_bound = kDefaultStabilityBound;
  double enrich_gate = 0.05;        // rad, peak |sway|
  double enrich_half_width = 0.05;  // fraction of range width on each side
  int enrich_repeats = 10;          // perturbed copies per large-sway sample
  std::size_t max_attempts = 0;     // simulations; 0 means 20 * target_count
  bool log_modulus = true;          // compress the modulus channel as log(1 + m / modulus_scale)
  double modulus_scale = 1e-3;

  void validate() const {
    if (target_count < 2 || target_count % 2 != 0) throw ConfigError("dataset target_count must be even and >= 2");
    if (enrich_repeats < 0) throw ConfigError("dataset enrich_repeats must be >= 0");
    ranges.validate();
    body.validate();
    sim.validate();
    (void)prts.period();
  }
  [[nodiscard]] std::size_t attempt_budget() const { return max_attempts ? max_attempts : 20 * target_count; }
};

enum class Split { train, validation };

struct Record {
  std::size_t id = 0;          // generation order
  std::uint64_t seed = 0;      // noise seed of the accepted simulation
  DecParams params;
  double peak_abs = 0.0;       // rad
  double peak_to_peak = 0.0;   // rad
  bool enriched = false;
  std::int64_t parent = -1;    // id of the sample an enriched record was derived from
  Split split = Split::train;
};

struct GenerationTelemetry {
  std::size_t attempts = 0;       // simulations run
  std::size_t accepted = 0;       // stable originals
  std::size_t enriched = 0;       // stable enriched copies
  std::size_t rejected = 0;

  [[nodiscard]] double acceptance_rate() const {
    return attempts ? static_cast<double>(accepted + enriched) / static_cast<double>(attempts) : 0.0;
  }
};

struct Dataset {
  DatasetConfig config;
  std::vector<Record> records;  // shuffled; first train_count are training
  std::vector<float> images;    // raw spectrograms, records.size() * kImageSize
  std::size_t train_count = 0;
  TargetStats target_stats;
  InputStats input_stats;
  GenerationTelemetry telemetry;

  [[nodiscard]] std::size_t size() const { return records.size(); }
  [[nodiscard]] std::size_t validation_count() const { return records.size() - train_count; }
  [[nodiscard]] std::span<const float> image(std::size_t i) const {
    return {images.data() + i * kImageSize, kImageSize};
  }
  [[nodiscard]] TargetVector target(std::size_t i) const { return normalize_targets(records[i].params, target_stats); }
};

namespace detail {

struct Candidate {
  bool stable = false;
  Record record;
  std::vector<float> image;
};

inline Candidate run_candidate(const DecParams& p, std::uint64_t seed, const TiltTrace& tilt, const DatasetConfig& cfg,
                               SwayTrace* trace_out = nullptr) {
  SimConfig sim = cfg.sim;
  sim.seed = seed;
  Candidate c;
  SwayTrace trace = simulate(p, cfg.body, tilt, sim);
  c.record.params = p;
  c.record.seed = seed;
  c.stable = is_stable(trace, cfg.stability_bound) && trace.size() == kTraceLength;
  if (c.stable) {
    c.record.peak_abs = peak_abs(trace.samples);
    c.record.peak_to_peak = peak_to_peak(trace.samples);
    const auto img = encode(trace);
    c.image.assign(img.data.begin(), img.data.end());
  }
  if (trace_out) *trace_out = std::move(trace);
  return c;
}

// One sampled candidate plus its enrichment family, in emission order.
inline std::vector<Candidate> run_family(std::size_t index, const TiltTrace& tilt, const DatasetConfig& cfg) {
  std::vector<Candidate> out;
  Rng rng(derive_seed(cfg.master_seed, index, streams::params));
  const DecParams p = sample_params(cfg.ranges, rng);
  SwayTrace trace;
  out.push_back(run_candidate(p, derive_seed(cfg.master_seed, index, streams::noise), tilt, cfg, &trace));
  if (!out.front().stable) return out;

  const std::uint64_t family = derive_seed(cfg.master_seed, index, streams::enrich);
  for (int r = 0; r < cfg.enrich_repeats; ++r) {
    Rng erng(derive_seed(family, static_cast<std::uint64_t>(r), streams::params));
    auto q = enrich(p, trace, cfg.ranges, erng, cfg.enrich_gate, cfg.enrich_half_width);
    if (!q) break;
    auto c = run_candidate(*q, derive_seed(family, static_cast<std::uint64_t>(r), streams::noise), tilt, cfg);
    c.record.enriched = true;
    out.push_back(std::move(c));
  }
  return out;
}

} // namespace detail

/// Re-simulates a record with its stored seed.
inline SwayTrace resimulate(const Record& r, const DatasetConfig& cfg) {
  SimConfig sim = cfg.sim;
  sim.seed = r.seed;
  return simulate(r.params, cfg.body, generate_prts(cfg.prts, sim.dt), sim);
}

/// Generates exactly cfg.target_count stable records. Candidate i draws its
/// parameters and noise from seeds derived from (master_seed, i), so the
/// record set is independent of `workers`.
inline Dataset build_dataset(const DatasetConfig& cfg, unsigned workers = 0) {
  cfg.validate();
  const TiltTrace tilt = generate_prts(cfg.prts, cfg.sim.dt);
  if (tilt.size() < cfg.sim.steps())
    throw ConfigError("prts duration (" + std::to_string(cfg.prts.duration()) + " s) shorter than sim.duration");

  Dataset ds;
  ds.config = cfg;
  ds.images.reserve(cfg.target_count * kImageSize);
  const std::size_t budget = cfg.attempt_budget();
  const std::size_t chunk = std::max<std::size_t>(16, 4 * static_cast<std::size_t>(workers ? workers : default_workers()));
  // Chunk size affects only how far ahead we speculate, never the result.
  std::size_t next = 0;
  while (ds.records.size() < cfg.target_count) {
    if (ds.telemetry.attempts >= budget)
      throw GenerationError("dataset generation reached " + std::to_string(ds.records.size()) + "/" +
                            std::to_string(cfg.target_count) + " records after " +
                            std::to_string(ds.telemetry.attempts) + " simulations (acceptance rate " +
                            std::to_string(ds.telemetry.acceptance_rate()) + ")");
    std::vector<std::vector<detail::Candidate>> families(chunk);
    parallel_for(chunk, workers, [&](std::size_t i) { families[i] = detail::run_family(next + i, tilt, cfg); });
    next += chunk;

    for (auto& fam : families) {
      if (ds.records.size() >= cfg.target_count || ds.telemetry.attempts >= budget) break;
      std::int64_t parent = -1;
      for (auto& c : fam) {
        if (ds.records.size() >= cfg.target_count) break;
        ++ds.telemetry.attempts;
        if (!c.stable) {
          ++ds.telemetry.rejected;
          continue;
        }
        c.record.id = ds.records.size();
        if (c.record.enriched) {
          c.record.parent = parent;
          ++ds.telemetry.enriched;
        } else {
          parent = static_cast<std::int64_t>(c.record.id);
          ++ds.telemetry.accepted;
        }
        ds.records.push_back(c.record);
        ds.images.insert(ds.images.end(), c.image.begin(), c.image.end());
      }
    }
  }

  // Deterministic Fisher-Yates shuffle, then halve.
  const std::size_t n = ds.records.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(cfg.master_seed, 0, streams::shuffle));
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(order[i], order[j]);
  }
  std::vector<Record> records(n);
  std::vector<float> images(n * kImageSize);
  for (std::size_t i = 0; i < n; ++i) {
    records[i] = ds.records[order[i]];
    std::copy_n(ds.images.begin() + static_cast<std::ptrdiff_t>(order[i] * kImageSize), kImageSize,
                images.begin() + static_cast<std::ptrdiff_t>(i * kImageSize));
  }
  ds.records = std::move(records);
  ds.images = std::move(images);
  ds.train_count = n / 2;
  for (std::size_t i = 0; i < n; ++i) ds.records[i].split = i < ds.train_count ? Split::train : Split::validation;

  std::vector<DecParams> train_params;
  train_params.reserve(ds.train_count);
  for (std::size_t i = 0; i < ds.train_count; ++i) train_params.push_back(ds.records[i].params);
  ds.target_stats = compute_target_stats(train_params);
  ds.input_stats = compute_input_stats(std::span<const float>(ds.images.data(), ds.train_count * kImageSize),
                                       cfg.log_modulus, cfg.modulus_scale);
  return ds;
}

} // namespace posture
