#pragma once

// Single inverted pendulum balanced by a disturbance-estimation-and-
// compensation (DEC) controller: PD servo on a reconstructed body-in-space
// angle, gravity estimator, dead-banded support-tilt estimator, lumped
// transport delay, pink vestibular noise and passive ankle impedance.

#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "posture/error.hpp"
#include "posture/fft.hpp"
#include "posture/random.hpp"
#include "posture/stimulus.hpp"
#include "posture/trace.hpp"

namespace posture {

/// The seven identifiable controller parameters.
struct DecParams {
  double kp = 0.0;       // active proportional gain, N m/rad
  double kd = 0.0;       // active derivative gain, N m s/rad
  double kp_pass = 0.0;  // passive stiffness, N m/rad
  double kd_pass = 0.0;  // passive damping, N m s/rad
  double nv = 0.0;       // vestibular noise gain
  double theta = 0.0;    // foot rotation velocity threshold, rad/s
  double delta = 0.0;    // lumped delay, s

  static constexpr std::size_t count = 7;
  static constexpr std::array<std::string_view, count> names = {"kp", "kd", "kp_pass", "kd_pass",
                                                                "nv", "theta", "delta"};

  /// Mean of the stable, enriched training population; a well-behaved
  /// operating point for examples and smoke tests.
  static constexpr DecParams typical() {
    return {811.2951, 284.5640, 312.2075, 174.3144, 0.4695, 0.0003, 0.1210};
  }

  [[nodiscard]] constexpr std::array<double, count> to_array() const {
    return {kp, kd, kp_pass, kd_pass, nv, theta, delta};
  }
  static constexpr DecParams from_array(std::span<const double, count> a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5], a[6]};
  }
  constexpr double& operator[](std::size_t i) {
    double* fields[count] = {&kp, &kd, &kp_pass, &kd_pass, &nv, &theta, &delta};
    return *fields[i];
  }
  constexpr double operator[](std::size_t i) const { return to_array()[i]; }

  bool operator==(const DecParams&) const = default;
};

/// Anthropometrics of the pendulum body.
struct BodyParams {
  double mass = 80.0;       // kg
  double com_height = 1.0;  // m, ankle to centre of mass
  double inertia = 80.0;    // kg m^2 about the ankle
  double gravity = 9.81;    // m/s^2

  [[nodiscard]] double mgh() const { return mass * gravity * com_height; }
  void validate() const {
    if (!(mass > 0 && com_height > 0 && inertia > 0 && gravity > 0))
      throw ConfigError("body parameters must all be positive");
  }
};

enum class NoisePath {
  both,           // noise corrupts the gravity estimate and the tilt estimator
  estimator_only  // noise only enters the dead-banded tilt estimator
};

/// One-sided noise PSD at 1 Hz for nv = 1, rad^2/Hz (noise RMS ~2e-4 rad
/// over the simulated band). Keeps the stimulus response dominant over the
/// noise while nv stays visible in the sway spectrum.
inline constexpr double default_noise_psd = 4.0e-9;

struct SimConfig {
  double dt = 0.001;         // integration step, s
  double output_dt = 0.01;   // sway sampling step, s
  double duration = 121.0;   // s
  std::uint64_t seed = 0;    // noise seed
  double gravity_gain = 1.0;
  NoisePath noise_path = NoisePath::both;
  double noise_psd = default_noise_psd;
  /// Runs whose |angle| exceeds this are stopped and marked diverged.
  double abort_angle = std::numbers::pi / 2;

  [[nodiscard]] std::size_t steps() const { return detail::steps_per(duration, dt, "sim.duration"); }
  [[nodiscard]] std::size_t decimation() const { return detail::steps_per(output_dt, dt, "sim.output_dt"); }
  [[nodiscard]] std::size_t output_samples() const { return steps() / decimation(); }
  void validate() const {
    if (!(dt > 0.0)) throw ConfigError("sim.dt must be positive");
    if (steps() % decimation() != 0) throw ConfigError("sim.duration must be a multiple of sim.output_dt");
    if (!(noise_psd >= 0.0)) throw ConfigError("sim.noise_psd must be >= 0");
  }
};

/// Dead-band threshold: zero inside [-theta, theta], shifted by theta outside.
inline constexpr double dead_band(double x, double theta) noexcept {
  if (x > theta) return x - theta;
  if (x < -theta) return x + theta;
  return 0.0;
}

/// Gravity disturbance as an angle equivalent.
inline constexpr double gravity_estimate(double alpha_vest, double g_gain) noexcept { return g_gain * alpha_vest; }

/// Fixed transport delay of `length` steps; outputs zero until filled.
class DelayLine {
public:
  DelayLine() = default;
  explicit DelayLine(std::size_t length) : buffer_(length, 0.0) {}

  double push(double x) {
    if (buffer_.empty()) return x;
    const double out = buffer_[head_];
    buffer_[head_] = x;
    head_ = (head_ + 1) % buffer_.size();
    return out;
  }
  [[nodiscard]] std::size_t length() const { return buffer_.size(); }

private:
  std::vector<double> buffer_;
  std::size_t head_ = 0;
};

inline std::size_t delay_steps(double delta, double dt) {
  if (!(delta >= 0.0)) throw ConfigError("delta must be >= 0");
  return static_cast<std::size_t>(std::llround(delta / dt));
}

struct PlantState {
  double angle = 0.0;     // alpha_BS, rad
  double velocity = 0.0;  // rad/s
};

struct ControllerState {
  double tilt_estimate = 0.0;  // integrated foot-in-space estimate, rad
  double prev_vest = 0.0;
  double prev_prop = 0.0;
  double prev_error = 0.0;
  bool primed = false;  // false until the first step has set the previous-sample values
  DelayLine delay;
};

struct SimState {
  PlantState body;
  ControllerState ctrl;

  static SimState initial(const DecParams& params, double dt) {
    SimState s;
    s.ctrl.delay = DelayLine(delay_steps(params.delta, dt));
    return s;
  }
};

/// Pink noise with one-sided PSD nv^2 * psd_at_1hz / f, built by shaping
/// seeded white Gaussian spectra by 1/sqrt(f) (DC and Nyquist bins zero) and
/// inverse transforming. Generated on the next power of two and truncated.
inline std::vector<double> pink_noise(double nv, std::size_t n, double dt, std::uint64_t seed,
                                      double psd_at_1hz = default_noise_psd) {
  if (n < 2 || !(dt > 0.0)) throw ConfigError("pink_noise: need n >= 2 and dt > 0");
  std::vector<double> out(n, 0.0);
  if (nv == 0.0 || psd_at_1hz == 0.0) return out;

  const std::size_t big = std::bit_ceil(n);
  std::vector<std::complex<double>> spec(big);
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, std::numbers::sqrt2 / 2.0);
  const double df = 1.0 / (static_cast<double>(big) * dt);
  // E|X_k|^2 = S(f_k) N / (2 dt) makes the periodogram 2 dt |X_k|^2 / N unbiased.
  const double base = psd_at_1hz * static_cast<double>(big) / (2.0 * dt);
  for (std::size_t k = 1; k < big / 2; ++k) {
    const double sigma = std::sqrt(base / (static_cast<double>(k) * df));
    const double re = gauss(rng), im = gauss(rng);
    spec[k] = {sigma * re, sigma * im};
    spec[big - k] = std::conj(spec[k]);
  }
  fft_inplace(spec, /*inverse=*/true);
  for (std::size_t i = 0; i < n; ++i) out[i] = nv * spec[i].real();
  return out;
}

/// One controller update. Mutates the estimator, derivative memory and delay
/// line; returns the total ankle torque (delayed active + passive).
inline double controller_step(SimState& state, const DecParams& p, double tilt, double noise, const SimConfig& cfg) {
  auto& c = state.ctrl;
  const double angle = state.body.angle;
  if (!std::isfinite(angle) || !std::isfinite(tilt) || !std::isfinite(noise))
    throw DivergenceError("controller_step: non-finite input (angle " + std::to_string(angle) + ")");

  const double vest = angle + noise;
  const double prop = tilt - angle;  // body-to-foot, positive when the foot leads
  const double vest_gravity = cfg.noise_path == NoisePath::both ? vest : angle;

  if (!c.primed) {
    c.prev_vest = vest;
    c.prev_prop = prop;
  }
  const double inv_dt = 1.0 / cfg.dt;
  const double foot_velocity = (vest - c.prev_vest) * inv_dt + (prop - c.prev_prop) * inv_dt;
  c.tilt_estimate += cfg.dt * dead_band(foot_velocity, p.theta);

  const double servo_angle = c.tilt_estimate - prop;
  const double error = gravity_estimate(vest_gravity, cfg.gravity_gain) + servo_angle;
  if (!c.primed) c.prev_error = error;

  const double command = -(p.kp * error + p.kd * (error - c.prev_error) * inv_dt);
  const double active = c.delay.push(command);
  // Passive impedance resists ankle rotation of the body relative to the foot.
  const double passive = p.kp_pass * prop + p.kd_pass * (prop - c.prev_prop) * inv_dt;

  c.prev_vest = vest;
  c.prev_prop = prop;
  c.prev_error = error;
  c.primed = true;
  return active + passive;
}

/// Explicit Euler step of J a'' = m g h sin(a) + torque. The tilt axis is the
/// ankle axis, so platform rotation exerts no inertial forcing.
inline PlantState plant_step(PlantState s, double torque, const BodyParams& body, double dt) {
  const double acc = (body.mgh() * std::sin(s.angle) + torque) / body.inertia;
  return {s.angle + dt * s.velocity, s.velocity + dt * acc};
}

/// Closed-loop run from rest. `tilt` must be sampled at cfg.dt and cover the
/// full duration; the returned sway is decimated to cfg.output_dt.
inline SwayTrace simulate(const DecParams& params, const BodyParams& body, const TiltTrace& tilt,
                          const SimConfig& cfg) {
  cfg.validate();
  body.validate();
  const std::size_t steps = cfg.steps();
  const std::size_t decim = cfg.decimation();
  if (std::abs(tilt.dt - cfg.dt) > 1e-12 * cfg.dt)
    throw ConfigError("simulate: tilt trace step differs from sim.dt");
  if (tilt.size() < steps) throw ConfigError("simulate: tilt trace shorter than sim.duration");

  const auto noise = pink_noise(params.nv, steps, cfg.dt, cfg.seed, cfg.noise_psd);
  SimState state = SimState::initial(params, cfg.dt);

  SwayTrace out;
  out.dt = cfg.output_dt;
  out.samples.reserve(steps / decim);
  for (std::size_t k = 0; k < steps; ++k) {
    if (!std::isfinite(state.body.angle) || std::abs(state.body.angle) > cfg.abort_angle) {
      out.diverged = true;
      break;
    }
    if (k % decim == 0) out.samples.push_back(state.body.angle);
    const double torque = controller_step(state, params, tilt.samples[k], noise[k], cfg);
    state.body = plant_step(state.body, torque, body, cfg.dt);
  }
  return out;
}

} // namespace posture
