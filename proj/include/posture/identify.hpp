#pragma once

// Parameter identification from a sway trace: the trained network, an
// iterative fitting oracle, and agreement checks by re-simulation.

#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "posture/config_io.hpp"
#include "posture/dataset.hpp"
#include "posture/dynamics.hpp"
#include "posture/features.hpp"
#include "posture/io.hpp"
#include "posture/model.hpp"
#include "posture/search.hpp"
#include "posture/stimulus.hpp"

namespace posture {

/// Squared error between two parameter sets on the z-scored scale.
struct ParamComparison {
  TargetVector se{};
  double total = 0.0;
};

inline ParamComparison compare(const DecParams& reference, const DecParams& identified, const TargetStats& stats) {
  ParamComparison c;
  for (std::size_t i = 0; i < DecParams::count; ++i) {
    if (!(stats.std[i] > 0.0)) throw ConfigError("compare: zero std for " + std::string(DecParams::names[i]));
    const double d = (reference[i] - identified[i]) / stats.std[i];
    c.se[i] = d * d;
    c.total += c.se[i];
  }
  return c;
}

struct TraceAgreement {
  double rms_error = 0.0;  // rad
  double nrmse = 0.0;      // rms_error / input peak-to-peak
  double input_peak_to_peak = 0.0;
  double resimulated_peak_to_peak = 0.0;
};

/// Metrics between an input trace and its re-simulation. A re-simulation
/// that stopped early (diverged) has infinite error.
inline TraceAgreement trace_agreement(std::span<const double> input, std::span<const double> resimulated) {
  TraceAgreement a;
  a.input_peak_to_peak = peak_to_peak(input);
  a.resimulated_peak_to_peak = peak_to_peak(resimulated);
  if (input.size() != resimulated.size()) {
    a.rms_error = a.nrmse = std::numeric_limits<double>::infinity();
    return a;
  }
  a.rms_error = rms_difference(input, resimulated);
  a.nrmse = nrmse(input, resimulated);
  return a;
}

/// Everything needed to re-simulate a candidate: parameter box, plant,
/// stimulus and simulation settings (sim.seed is the re-simulation seed).
struct IdentifyContext {
  ParamRanges ranges;
  BodyParams body;
  PrtsConfig prts;
  SimConfig sim;
};

struct IdentificationReport {
  std::string method;  // "cnn" or "iterative"
  DecParams identified;
  std::optional<TargetVector> normalized;  // network output, or the fitted parameters z-scored
  std::array<bool, DecParams::count> clamped{};
  std::optional<DecParams> reference;
  std::optional<ParamComparison> comparison;
  SwayTrace input;
  SwayTrace resimulated;
  std::uint64_t resimulation_seed = 0;
  TraceAgreement agreement;
  // Iterative fit only.
  std::size_t evaluations = 0;
  bool converged = true;
  double objective = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> objective_history;

  [[nodiscard]] bool any_clamped() const {
    for (bool c : clamped)
      if (c) return true;
    return false;
  }
  /// Attaches reference parameters and their normalized squared error.
  void set_reference(const DecParams& ref, const TargetStats& stats) {
    reference = ref;
    comparison = compare(ref, identified, stats);
  }
};

/// Re-simulates `params` under the context's stimulus with the given seed.
inline SwayTrace resimulate(const DecParams& params, const IdentifyContext& ctx, std::uint64_t seed) {
  SimConfig sim = ctx.sim;
  sim.seed = seed;
  return simulate(params, ctx.body, generate_prts(ctx.prts, sim.dt), sim);
}

namespace detail {

inline void finish_report(IdentificationReport& r, const IdentifyContext& ctx) {
  r.resimulation_seed = ctx.sim.seed;
  r.resimulated = resimulate(r.identified, ctx, r.resimulation_seed);
  r.agreement = trace_agreement(r.input.samples, r.resimulated.samples);
}

inline void require_canonical(const SwayTrace& trace) {
  if (trace.size() != kTraceLength)
    throw FormatError("trace has " + std::to_string(trace.size()) + " samples; identification needs " +
                      std::to_string(kTraceLength) + " (resample first)");
  for (double v : trace.samples)
    if (!std::isfinite(v)) throw FormatError("trace contains non-finite samples");
}

} // namespace detail

inline IdentificationReport identify_cnn(const TrainedModel& model, const SwayTrace& trace,
                                         const IdentifyContext& ctx = {}) {
  detail::require_canonical(trace);
  for (std::size_t c = 0; c < kChannels; ++c)
    if (!(model.input_stats.std[c] > 0.0)) throw FormatError("model has no usable input statistics");
  for (double s : model.target_stats.std)
    if (!(s > 0.0)) throw FormatError("model has no usable target statistics");

  IdentificationReport r;
  r.method = "cnn";
  r.input = trace;
  const TargetVector z = predict_normalized(model, encode(trace));
  r.normalized = z;
  const DecParams raw = denormalize_targets(z, model.target_stats);
  r.identified = ctx.ranges.clamp(raw);
  for (std::size_t i = 0; i < DecParams::count; ++i) r.clamped[i] = r.identified[i] != raw[i];
  detail::finish_report(r, ctx);
  return r;
}

struct FitConfig {
  std::size_t budget = 2000;     // objective evaluations
  std::size_t population = 0;    // 0 = search default
  std::uint64_t seed = 1;
  unsigned workers = 0;
  bool fit_noise = true;         // estimate nv from the residual after the noise-free fit
};

/// Noise-free fitting objective: RMS distance between the modulus channel of
/// the target and that of a re-simulation with nv = 0.
class IterativeObjective {
public:
  IterativeObjective(const SwayTrace& target, const IdentifyContext& ctx)
      : ctx_(ctx), tilt_(generate_prts(ctx.prts, ctx.sim.dt)) {
    detail::require_canonical(target);
    const auto img = encode(target);
    target_modulus_.assign(img.modulus().begin(), img.modulus().end());
  }

  [[nodiscard]] double operator()(DecParams p) const {
    p.nv = 0.0;
    const SwayTrace sim = simulate(p, ctx_.body, tilt_, ctx_.sim);
    // Diverged runs stop early; zero padding keeps the distance finite and graded.
    const auto img = encode(sim, LengthPolicy::pad_zeros);
    return rms_difference(target_modulus_, img.modulus());
  }

  [[nodiscard]] const TiltTrace& tilt() const { return tilt_; }

private:
  IdentifyContext ctx_;
  TiltTrace tilt_;
  std::vector<double> target_modulus_;
};

namespace detail {

// RMS of the residual after removing each spectrogram window's mean. Pink
// noise concentrates its variance in a handful of slow components, so the
// plain RMS of a single realization scatters widely; this does not.
inline double windowed_residual(std::span<const double> a, std::span<const double> b) {
  const std::size_t windows = a.size() / kWindow;
  double acc = 0.0;
  for (std::size_t w = 0; w < windows; ++w) {
    double mean = 0.0;
    for (std::size_t i = 0; i < kWindow; ++i) mean += a[w * kWindow + i] - b[w * kWindow + i];
    mean /= static_cast<double>(kWindow);
    for (std::size_t i = 0; i < kWindow; ++i) {
      const double d = a[w * kWindow + i] - b[w * kWindow + i] - mean;
      acc += d * d;
    }
  }
  return std::sqrt(acc / static_cast<double>(windows * kWindow));
}

} // namespace detail

/// Noise gain whose added sway matches the residual left by the noise-free
/// fit, clamped to the range.
inline double fit_noise_gain(const SwayTrace& target, const DecParams& fitted, const IdentifyContext& ctx,
                             const TiltTrace& tilt, std::uint64_t seed) {
  const double lo = ctx.ranges.lo.nv, hi = ctx.ranges.hi.nv;
  if (lo == hi) return lo;
  SimConfig sim = ctx.sim;
  sim.seed = seed;
  DecParams p = fitted;
  p.nv = 0.0;
  const SwayTrace clean = simulate(p, ctx.body, tilt, sim);
  if (clean.size() != target.size()) return lo;
  const double residual = detail::windowed_residual(target.samples, clean.samples);
  // The dead-band makes the response to noise nonlinear in nv, so match the
  // residual level by bisection rather than by a single ratio.
  auto level = [&](double nv) {
    p.nv = nv;
    const SwayTrace noisy = simulate(p, ctx.body, tilt, sim);
    return noisy.size() == clean.size() ? detail::windowed_residual(noisy.samples, clean.samples)
                                        : std::numeric_limits<double>::infinity();
  };
  double a = lo, b = hi;
  if (residual <= level(a)) return lo;
  if (residual >= level(b)) return hi;
  for (int it = 0; it < 16; ++it) {
    const double mid = 0.5 * (a + b);
    (level(mid) < residual ? a : b) = mid;
  }
  return 0.5 * (a + b);
}

/// Differential evolution plus simplex polish over the parameter box with
/// nv fixed at zero, then nv from residual power. Parameters whose range is
/// a single point are held there.
inline IdentificationReport identify_iterative(const SwayTrace& trace, const IdentifyContext& ctx,
                                               const FitConfig& fit = {},
                                               const std::optional<TargetStats>& stats = std::nullopt) {
  ctx.ranges.validate();
  if (fit.budget < 1) throw ConfigError("identify: budget must be >= 1 evaluation");
  const IterativeObjective objective(trace, ctx);

  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < DecParams::count; ++i)
    if (i != 4 && ctx.ranges.lo[i] < ctx.ranges.hi[i]) free.push_back(i);
  auto to_params = [&](std::span<const double> u) {
    DecParams p = ctx.ranges.lo;
    p.nv = 0.0;
    for (std::size_t k = 0; k < free.size(); ++k) p[free[k]] = ctx.ranges.lo[free[k]] + u[k] * ctx.ranges.width(free[k]);
    return p;
  };

  SearchConfig sc;
  sc.budget = fit.budget;
  sc.population = fit.population;
  sc.seed = derive_seed(fit.seed, 0, streams::search);
  sc.workers = fit.workers;
  const SearchResult best =
      minimize_box([&](std::span<const double> u) { return objective(to_params(u)); }, std::max<std::size_t>(free.size(), 1), sc);

  IdentificationReport r;
  r.method = "iterative";
  r.input = trace;
  r.identified = to_params(best.x);
  if (fit.fit_noise) r.identified.nv = fit_noise_gain(trace, r.identified, ctx, objective.tilt(), ctx.sim.seed);
  else r.identified.nv = ctx.ranges.lo.nv;
  r.evaluations = best.evaluations;
  r.converged = best.converged;
  r.objective = best.value;
  r.objective_history = best.best_history;
  if (stats) r.normalized = normalize_targets(r.identified, *stats);
  detail::finish_report(r, ctx);
  return r;
}

inline json report_json(const IdentificationReport& r) {
  auto params_json = [](const DecParams& p) {
    json j;
    for (std::size_t i = 0; i < DecParams::count; ++i) j[std::string(DecParams::names[i])] = p[i];
    return j;
  };
  json j{{"method", r.method},
         {"identified", params_json(r.identified)},
         {"clamped", r.clamped},
         {"resimulation_seed", r.resimulation_seed},
         {"resimulation_diverged", r.resimulated.diverged},
         {"agreement",
          {{"rms_error_rad", r.agreement.rms_error},
           {"nrmse", r.agreement.nrmse},
           {"input_peak_to_peak_rad", r.agreement.input_peak_to_peak},
           {"input_peak_to_peak_deg", rad_to_deg(r.agreement.input_peak_to_peak)},
           {"resimulated_peak_to_peak_rad", r.agreement.resimulated_peak_to_peak}}},
         {"traces", {{"input", "input.csv"}, {"resimulated", "resimulated.csv"}}}};
  if (r.normalized) j["normalized"] = *r.normalized;
  if (r.reference) j["reference"] = params_json(*r.reference);
  if (r.comparison) j["squared_error"] = {{"per_parameter", r.comparison->se}, {"total", r.comparison->total}};
  if (r.method == "iterative") {
    j["fit"] = {{"evaluations", r.evaluations},
                {"converged", r.converged},
                {"objective", r.objective},
                {"objective_history", "objective_history.csv"}};
  }
  return j;
}

/// report.json plus input.csv and resimulated.csv (and the objective trace
/// for iterative fits) in `dir`.
inline void save_report(const IdentificationReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_json_file((dir / "report.json").string(), report_json(r));
  write_trace_csv((dir / "input.csv").string(), r.input.samples, r.input.dt);
  write_trace_csv((dir / "resimulated.csv").string(), r.resimulated.samples, r.resimulated.dt);
  if (r.method == "iterative") {
    std::ofstream out(dir / "objective_history.csv");
    if (!out) throw FormatError("cannot write " + (dir / "objective_history.csv").string());
    out << "evaluation,best_objective\n";
    for (std::size_t i = 0; i < r.objective_history.size(); ++i)
      out << i + 1 << ',' << format_double(r.objective_history[i]) << '\n';
  }
}

} // namespace posture
