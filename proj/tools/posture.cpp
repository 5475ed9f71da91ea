// posture: command-line front end for stimulus generation, simulation,
// dataset synthesis, training, identification, evaluation and plotting.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "posture/config_io.hpp"
#include "posture/dataset.hpp"
#include "posture/dataset_io.hpp"
#include "posture/dynamics.hpp"
#include "posture/identify.hpp"
#include "posture/io.hpp"
#include "posture/model.hpp"
#include "posture/plot.hpp"
#include "posture/stimulus.hpp"

namespace fs = std::filesystem;
using namespace posture;

namespace {

constexpr const char* kVersion = "1.0.0";

enum Exit : int {
  kOk = 0,
  kRuntime = 1,
  kConfig = 2,
  kInput = 3,
  kDivergence = 4,
  kNotConverged = 5,
};

struct Globals {
  std::uint64_t seed = 1;
  unsigned workers = 0;
  std::string out_dir;
  std::vector<std::string> argv;
};

struct Clock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

fs::path artifact_dir(const Globals& g, const std::string& sub) {
  fs::path p = fs::path(g.out_dir) / sub;
  fs::create_directories(p);
  return p;
}

// run.json: what was run, with what, and how long it took. Everything except
// the telemetry block is a pure function of the inputs.
void write_run_manifest(const fs::path& dir, const std::string& sub, const Globals& g, const json& config,
                        const json& inputs, const json& outputs, const json& telemetry) {
  json j{{"tool", "posture"},
         {"version", kVersion},
         {"subcommand", sub},
         {"argv", g.argv},
         {"seed", g.seed},
         {"workers", g.workers ? g.workers : default_workers()},
         {"config", config},
         {"inputs", inputs},
         {"outputs", outputs},
         {"telemetry", telemetry}};
  write_json_file((dir / "run.json").string(), j);
}

// Options shared by every command that runs the closed loop.
struct LoopOptions {
  PrtsConfig prts;
  SimConfig sim;
  BodyParams body;
  double prts_p2p_deg = rad_to_deg(PrtsConfig{}.peak_to_peak);
  std::string noise_path = "both";

  void add(CLI::App* app) {
    app->add_option("--prts-register", prts.register_length, "PRTS shift-register length")
        ->check(CLI::Range(2, 9))
        ->capture_default_str();
    app->add_option("--prts-stage", prts.stage_duration, "PRTS stage duration, s")->capture_default_str();
    app->add_option("--prts-p2p-deg", prts_p2p_deg, "PRTS peak-to-peak tilt, degrees")->capture_default_str();
    app->add_option("--prts-repetitions", prts.repetitions, "PRTS periods")->capture_default_str();
    app->add_option("--dt", sim.dt, "integration step, s")->capture_default_str();
    app->add_option("--duration", sim.duration, "simulated time, s")->capture_default_str();
    app->add_option("--noise-psd", sim.noise_psd, "vestibular noise PSD at 1 Hz for nv = 1, rad^2/Hz")
        ->capture_default_str();
    app->add_option("--noise-path", noise_path, "where vestibular noise enters")
        ->check(CLI::IsMember({"both", "estimator_only"}))
        ->capture_default_str();
    app->add_option("--gravity-gain", sim.gravity_gain, "gravity estimator gain")->capture_default_str();
    app->add_option("--mass", body.mass, "body mass, kg")->capture_default_str();
    app->add_option("--com-height", body.com_height, "ankle to centre-of-mass height, m")->capture_default_str();
    app->add_option("--inertia", body.inertia, "moment of inertia about the ankle, kg m^2")->capture_default_str();
  }
  void resolve() {
    prts.peak_to_peak = deg_to_rad(prts_p2p_deg);
    sim.noise_path = noise_path == "both" ? NoisePath::both : NoisePath::estimator_only;
  }
  [[nodiscard]] json to_json() const { return {{"prts", prts}, {"sim", sim}, {"body", body}}; }
};

struct ParamOptions {
  DecParams p = DecParams::typical();
  void add(CLI::App* app) {
    app->add_option("--kp", p.kp, "active stiffness, N m/rad")->capture_default_str();
    app->add_option("--kd", p.kd, "active damping, N m s/rad")->capture_default_str();
    app->add_option("--kp-pass", p.kp_pass, "passive stiffness, N m/rad")->capture_default_str();
    app->add_option("--kd-pass", p.kd_pass, "passive damping, N m s/rad")->capture_default_str();
    app->add_option("--nv", p.nv, "vestibular noise gain")->capture_default_str();
    app->add_option("--theta", p.theta, "foot-rotation velocity threshold, rad/s")->capture_default_str();
    app->add_option("--delta", p.delta, "lumped delay, s")->capture_default_str();
  }
};

void write_history_csv(const fs::path& path, const std::vector<cnn::EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "epoch,train_mse,val_mse,learning_rate,seconds\n";
  for (const auto& h : history)
    out << h.epoch << ',' << format_double(h.train_mse) << ',' << format_double(h.val_mse) << ','
        << format_double(h.learning_rate) << ',' << format_double(h.seconds) << '\n';
}

std::vector<double> time_axis(std::size_t n, double dt) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<double>(i) * dt;
  return t;
}

std::vector<double> to_degrees(std::vector<double> v) {
  for (auto& x : v) x = rad_to_deg(x);
  return v;
}

// ---------------------------------------------------------------- prts

struct PrtsCmd {
  LoopOptions loop;
  double sample_dt = 0.01;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("prts", "write the pseudo-random ternary tilt sequence as CSV");
    c->add_option("--prts-register", loop.prts.register_length, "shift-register length")
        ->check(CLI::Range(2, 9))
        ->capture_default_str();
    c->add_option("--prts-stage", loop.prts.stage_duration, "stage duration, s")->capture_default_str();
    c->add_option("--prts-p2p-deg", loop.prts_p2p_deg, "peak-to-peak tilt, degrees")->capture_default_str();
    c->add_option("--prts-repetitions", loop.prts.repetitions, "periods")->capture_default_str();
    c->add_option("--sample-dt", sample_dt, "output sample step, s")->capture_default_str();
    c->callback([this] { pending = true; });
  }
  bool pending = false;

  int run(const Globals& g) {
    loop.resolve();
    const Clock clock;
    const TiltTrace tilt = generate_prts(loop.prts, sample_dt);
    const auto dir = artifact_dir(g, "prts");
    write_trace_csv((dir / "tilt.csv").string(), tilt.samples, tilt.dt, "tilt_rad");
    write_run_manifest(dir, "prts", g, {{"prts", loop.prts}, {"sample_dt", sample_dt}}, json::object(),
                       {{"tilt", "tilt.csv"}}, {{"wall_seconds", clock.seconds()}});
    std::printf("prts: %zu samples (period %zu stages, %.2f s) -> %s\n", tilt.size(), loop.prts.period(),
                loop.prts.duration(), (dir / "tilt.csv").c_str());
    return kOk;
  }
};

// ---------------------------------------------------------------- simulate

struct SimulateCmd {
  LoopOptions loop;
  ParamOptions params;
  bool pending = false;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("simulate", "simulate one parameter set and write the sway CSV");
    loop.add(c);
    params.add(c);
    c->callback([this] { pending = true; });
  }

  int run(const Globals& g) {
    loop.resolve();
    loop.sim.seed = g.seed;
    const Clock clock;
    const SwayTrace sway = simulate(params.p, loop.body, generate_prts(loop.prts, loop.sim.dt), loop.sim);
    const auto dir = artifact_dir(g, "simulate");
    write_trace_csv((dir / "sway.csv").string(), sway.samples, sway.dt);
    json config = loop.to_json();
    config["params"] = params.p;
    write_run_manifest(dir, "simulate", g, config, json::object(), {{"sway", "sway.csv"}},
                       {{"wall_seconds", clock.seconds()}});
    if (sway.diverged) {
      std::fprintf(stderr, "simulate: sway left +/-%.3f rad after %.2f s; partial trace written to %s\n",
                   loop.sim.abort_angle, static_cast<double>(sway.size()) * sway.dt, (dir / "sway.csv").c_str());
      return kDivergence;
    }
    std::printf("simulate: %zu samples, peak-to-peak %.4f deg, peak %.4f deg -> %s\n", sway.size(),
                rad_to_deg(peak_to_peak(sway.samples)), rad_to_deg(peak_abs(sway.samples)),
                (dir / "sway.csv").c_str());
    return kOk;
  }
};

// ---------------------------------------------------------------- dataset

struct DatasetCmd {
  LoopOptions loop;
  DatasetConfig cfg;
  double bound_deg = rad_to_deg(kDefaultStabilityBound);
  bool raw_modulus = false;
  bool pending = false;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("dataset", "synthesize a labelled spectrogram dataset");
    loop.add(c);
    c->add_option("--target", cfg.target_count, "accepted samples (even)")->capture_default_str();
    c->add_option("--enrich-repeats", cfg.enrich_repeats, "perturbed copies per large-sway sample")
        ->capture_default_str();
    c->add_option("--enrich-gate", cfg.enrich_gate, "peak |sway| that triggers enrichment, rad")
        ->capture_default_str();
    c->add_option("--stability-deg", bound_deg, "acceptance bound on peak |sway|, degrees")->capture_default_str();
    c->add_option("--max-attempts", cfg.max_attempts, "simulation budget (0 = 20 x target)")->capture_default_str();
    c->add_option("--modulus-scale", cfg.modulus_scale, "scale of the log-compressed modulus channel")
        ->capture_default_str();
    c->add_flag("--raw-modulus", raw_modulus, "feed the modulus channel without log compression");
    c->callback([this] { pending = true; });
  }

  int run(const Globals& g) {
    loop.resolve();
    cfg.prts = loop.prts;
    cfg.sim = loop.sim;
    cfg.body = loop.body;
    cfg.master_seed = g.seed;
    cfg.stability_bound = deg_to_rad(bound_deg);
    cfg.log_modulus = !raw_modulus;
    const Clock clock;
    const Dataset ds = build_dataset(cfg, g.workers);
    const double secs = clock.seconds();
    const auto dir = artifact_dir(g, "dataset");
    save_dataset(ds, dir);
    write_run_manifest(dir, "dataset", g, cfg, json::object(),
                       {{"manifest", "manifest.json"}, {"images", "images.f32"}, {"params", "params.csv"}},
                       {{"wall_seconds", secs},
                        {"simulations", ds.telemetry.attempts},
                        {"simulations_per_second", static_cast<double>(ds.telemetry.attempts) / secs},
                        {"acceptance_rate", ds.telemetry.acceptance_rate()}});
    std::printf("dataset: %zu records (%zu train / %zu validation, %zu enriched) from %zu simulations in %.1f s -> %s\n",
                ds.size(), ds.train_count, ds.validation_count(), ds.telemetry.enriched, ds.telemetry.attempts, secs,
                dir.c_str());
    return kOk;
  }
};

// ---------------------------------------------------------------- train

struct TrainCmd {
  std::string dataset_dir;
  cnn::TrainConfig cfg;
  bool pending = false;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("train", "train the regression network on a dataset");
    c->add_option("--dataset", dataset_dir, "dataset directory (default <out-dir>/dataset)");
    c->add_option("--epochs", cfg.max_epochs, "epochs")->capture_default_str();
    c->add_option("--lr", cfg.learning_rate, "learning rate")->capture_default_str();
    c->add_option("--momentum", cfg.momentum, "momentum")->capture_default_str();
    c->add_option("--batch", cfg.batch_size, "mini-batch size")->capture_default_str();
    c->add_option("--lr-decay", cfg.lr_decay, "learning-rate factor per decay step")->capture_default_str();
    c->add_option("--lr-decay-every", cfg.lr_decay_every, "epochs per decay step (0 = constant)")
        ->capture_default_str();
    c->add_option("--grad-clip", cfg.grad_clip, "max gradient norm per batch (0 = off)")->capture_default_str();
    c->callback([this] { pending = true; });
  }

  int run(const Globals& g) {
    cfg.seed = g.seed;
    const fs::path src = dataset_dir.empty() ? fs::path(g.out_dir) / "dataset" : fs::path(dataset_dir);
    const Dataset ds = load_dataset(src);
    const Clock clock;
    const TrainedModel m = train(ds, cnn::NetworkSpec::standard(), cfg, [](const cnn::EpochRecord& r) {
      std::printf("epoch %3zu  train %.4f  val %.4f  lr %.3g  %.1f s\n", r.epoch, r.train_mse, r.val_mse,
                  r.learning_rate, r.seconds);
      std::fflush(stdout);
    });
    const double secs = clock.seconds();
    const auto dir = artifact_dir(g, "model");
    save_model(m, dir);
    write_history_csv(dir / "history.csv", m.history);
    write_run_manifest(dir, "train", g, cfg, {{"dataset", src.string()}},
                       {{"model", "model.json"}, {"weights", "weights.f32"}, {"history", "history.csv"}},
                       {{"wall_seconds", secs},
                        {"samples_per_second", static_cast<double>(ds.train_count * cfg.max_epochs) / secs}});
    std::printf("train: best validation MSE %.4f at epoch %zu (mean-predictor baseline %.4f) -> %s\n",
                m.best_val_mse, m.best_epoch, mean_baseline_mse(ds), dir.c_str());
    return kOk;
  }
};

// ---------------------------------------------------------------- identify

struct IdentifyCmd {
  LoopOptions loop;
  std::string trace_path, model_dir, dataset_dir, method = "cnn";
  bool resample = false;
  std::vector<double> reference;
  FitConfig fit;
  bool pending = false;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("identify", "identify controller parameters from a sway trace CSV");
    c->add_option("--trace", trace_path, "sway CSV (time_s, angle_rad)")->required()->check(CLI::ExistingFile);
    c->add_option("--method", method, "identification method")
        ->check(CLI::IsMember({"cnn", "iterative", "both"}))
        ->capture_default_str();
    c->add_option("--model", model_dir, "trained model directory (default <out-dir>/model)");
    c->add_option("--dataset", dataset_dir, "dataset whose statistics scale the squared error (iterative only)");
    c->add_flag("--resample", resample, "linearly resample the trace onto the 0.01 s, 12100-sample grid");
    c->add_option("--reference", reference, "true parameters kp,kd,kp_pass,kd_pass,nv,theta,delta")
        ->expected(DecParams::count)
        ->delimiter(',');
    c->add_option("--budget", fit.budget, "iterative fit: objective evaluations")->capture_default_str();
    c->add_option("--population", fit.population, "iterative fit: population size (0 = automatic)")
        ->capture_default_str();
    loop.add(c);
    c->callback([this] { pending = true; });
  }

  int run(const Globals& g) {
    loop.resolve();
    loop.sim.seed = g.seed;
    fit.seed = g.seed;
    fit.workers = g.workers;
    const TraceFile tf = read_trace_csv(trace_path);
    SwayTrace trace;
    trace.dt = loop.sim.output_dt;
    if (resample) {
      trace.samples = resample_linear(tf.values, tf.dt, trace.dt, kTraceLength);
    } else {
      if (std::abs(tf.dt - trace.dt) > 1e-9 || tf.values.size() != kTraceLength)
        throw FormatError(trace_path + ": expected " + std::to_string(kTraceLength) + " samples at " +
                          format_double(trace.dt) + " s, found " + std::to_string(tf.values.size()) + " at " +
                          format_double(tf.dt) + " s (pass --resample to interpolate)");
      trace.samples = tf.values;
    }

    IdentifyContext ctx;
    ctx.prts = loop.prts;
    ctx.sim = loop.sim;
    ctx.body = loop.body;

    std::optional<TrainedModel> model;
    std::optional<TargetStats> stats;
    const bool want_cnn = method != "iterative";
    const fs::path mdir = model_dir.empty() ? fs::path(g.out_dir) / "model" : fs::path(model_dir);
    if (want_cnn || fs::exists(mdir / "model.json")) {
      if (want_cnn || !model_dir.empty()) {
        model = load_model(mdir);
        stats = model->target_stats;
      }
    }
    if (!dataset_dir.empty())
      stats = read_json_file((fs::path(dataset_dir) / "manifest.json").string()).at("target_stats").get<TargetStats>();
    std::optional<DecParams> ref;
    if (!reference.empty()) {
      ref = DecParams::from_array(std::span<const double, DecParams::count>(reference.data(), DecParams::count));
      if (!stats) throw ConfigError("--reference needs normalization statistics: pass --model or --dataset");
    }

    const auto dir = artifact_dir(g, "identify");
    const Clock clock;
    json outputs = json::object();
    int code = kOk;
    auto finish = [&](IdentificationReport& r) {
      if (ref) r.set_reference(*ref, *stats);
      save_report(r, dir / r.method);
      outputs[r.method] = r.method + "/report.json";
      std::printf("%s:", r.method.c_str());
      for (std::size_t i = 0; i < DecParams::count; ++i)
        std::printf(" %s=%.6g%s", DecParams::names[i].data(), r.identified[i], r.clamped[i] ? "*" : "");
      std::printf("\n  re-simulation NRMSE %.4f, input p2p %.4f deg, re-simulated p2p %.4f deg", r.agreement.nrmse,
                  rad_to_deg(r.agreement.input_peak_to_peak), rad_to_deg(r.agreement.resimulated_peak_to_peak));
      if (r.comparison) std::printf(", normalized SE %.4f", r.comparison->total);
      if (r.method == "iterative")
        std::printf("\n  %zu evaluations, objective %.6g, %s", r.evaluations, r.objective,
                    r.converged ? "converged" : "NOT converged (budget exhausted)");
      std::printf("\n");
      if (r.any_clamped()) std::printf("  * clamped to the parameter range\n");
    };
    if (want_cnn) {
      auto r = identify_cnn(*model, trace, ctx);
      finish(r);
    }
    if (method != "cnn") {
      auto r = identify_iterative(trace, ctx, fit, stats);
      finish(r);
      if (!r.converged) code = kNotConverged;
    }
    json config = loop.to_json();
    config["method"] = method;
    config["fit"] = {{"budget", fit.budget}, {"population", fit.population}, {"seed", fit.seed}};
    config["resample"] = resample;
    write_run_manifest(dir, "identify", g, config,
                       {{"trace", trace_path}, {"model", model ? mdir.string() : ""}, {"dataset", dataset_dir}},
                       outputs, {{"wall_seconds", clock.seconds()}});
    return code;
  }
};

// ---------------------------------------------------------------- eval

struct EvalCmd {
  std::string model_dir, dataset_dir;
  bool pending = false;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("eval", "validation MSE of a model against the mean-predictor baseline");
    c->add_option("--model", model_dir, "model directory (default <out-dir>/model)");
    c->add_option("--dataset", dataset_dir, "dataset directory (default <out-dir>/dataset)");
    c->callback([this] { pending = true; });
  }

  int run(const Globals& g) {
    const fs::path mdir = model_dir.empty() ? fs::path(g.out_dir) / "model" : fs::path(model_dir);
    const fs::path ddir = dataset_dir.empty() ? fs::path(g.out_dir) / "dataset" : fs::path(dataset_dir);
    const TrainedModel m = load_model(mdir);
    const Dataset ds = load_dataset(ddir);
    const Clock clock;
    // Per-parameter squared error over the validation half.
    TargetVector per{};
    for (std::size_t i = ds.train_count; i < ds.size(); ++i) {
      const auto z = predict_normalized<float>(m, ds.image(i));
      const auto t = ds.target(i);
      for (std::size_t j = 0; j < DecParams::count; ++j) per[j] += (z[j] - t[j]) * (z[j] - t[j]);
    }
    double total = 0.0;
    for (auto& v : per) {
      v /= static_cast<double>(ds.validation_count());
      total += v;
    }
    const double mse = total / static_cast<double>(DecParams::count);
    const double baseline = mean_baseline_mse(ds);
    const auto dir = artifact_dir(g, "eval");
    json per_json;
    for (std::size_t j = 0; j < DecParams::count; ++j) per_json[std::string(DecParams::names[j])] = per[j];
    const json result{{"validation_mse", mse},
                      {"mean_baseline_mse", baseline},
                      {"relative_improvement", 1.0 - mse / baseline},
                      {"per_parameter_mse", per_json},
                      {"validation_records", ds.validation_count()}};
    write_json_file((dir / "eval.json").string(), result);
    write_run_manifest(dir, "eval", g, json::object(), {{"model", mdir.string()}, {"dataset", ddir.string()}},
                       {{"eval", "eval.json"}}, {{"wall_seconds", clock.seconds()}});
    std::printf("validation MSE %.4f (mean-predictor baseline %.4f, %.1f%% better)\n", mse, baseline,
                100.0 * (1.0 - mse / baseline));
    for (std::size_t j = 0; j < DecParams::count; ++j)
      std::printf("  %-8s %.4f\n", DecParams::names[j].data(), per[j]);
    return kOk;
  }
};

// ---------------------------------------------------------------- plot

struct PlotCmd {
  std::vector<std::string> traces;
  std::string history, report, dataset;
  bool pending = false;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("plot", "render traces, reports, training histories and datasets as SVG");
    c->add_option("--trace", traces, "trace CSV files to overlay")->check(CLI::ExistingFile);
    c->add_option("--history", history, "model directory with history.csv")->check(CLI::ExistingDirectory);
    c->add_option("--report", report, "identification report directory")->check(CLI::ExistingDirectory);
    c->add_option("--dataset", dataset, "dataset directory (sway amplitude histogram)")
        ->check(CLI::ExistingDirectory);
    c->callback([this] { pending = true; });
  }

  static std::vector<std::vector<double>> read_csv_columns(const fs::path& path, std::size_t ncols) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<std::vector<double>> cols(ncols);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::string cell;
      for (std::size_t k = 0; k < ncols; ++k) {
        if (!std::getline(ss, cell, ',')) throw FormatError(path.string() + ": short row");
        cols[k].push_back(std::stod(cell));
      }
    }
    return cols;
  }

  int run(const Globals& g) {
    const auto dir = artifact_dir(g, "plots");
    json outputs = json::array();
    if (!traces.empty()) {
      std::vector<plot::Series> series;
      for (const auto& t : traces) {
        const TraceFile tf = read_trace_csv(t);
        series.push_back({fs::path(t).filename().string(), tf.time, to_degrees(tf.values)});
      }
      plot::write_line_svg((dir / "traces.svg").string(), series, {"Sway", "time (s)", "angle (deg)"});
      outputs.push_back("traces.svg");
    }
    if (!history.empty()) {
      const auto cols = read_csv_columns(fs::path(history) / "history.csv", 3);
      plot::write_line_svg((dir / "history.svg").string(),
                           {{"training MSE", cols[0], cols[1]}, {"validation MSE", cols[0], cols[2]}},
                           {"Training history", "epoch", "MSE (z-scored targets)", true});
      outputs.push_back("history.svg");
    }
    if (!report.empty()) {
      const fs::path rp(report);
      const TraceFile in = read_trace_csv((rp / "input.csv").string());
      const TraceFile rs = read_trace_csv((rp / "resimulated.csv").string());
      const json rj = read_json_file((rp / "report.json").string());
      plot::write_line_svg((dir / "report.svg").string(),
                           {{"input", in.time, to_degrees(in.values)},
                            {"re-simulated (" + rj.value("method", std::string("?")) + ")", rs.time,
                             to_degrees(rs.values)}},
                           {"Identification re-simulation", "time (s)", "angle (deg)"});
      outputs.push_back("report.svg");
    }
    if (!dataset.empty()) {
      const json m = read_json_file((fs::path(dataset) / "manifest.json").string());
      std::vector<double> p2p;
      for (const auto& r : m.at("records")) p2p.push_back(r.at("peak_to_peak").get<double>());
      const auto h = plot::histogram(p2p, 40);
      plot::write_histogram_svg((dir / "sway_histogram.svg").string(), h,
                                {"Sway peak-to-peak amplitude", "peak-to-peak (rad)", "records"});
      std::ofstream csv(dir / "sway_histogram.csv");
      csv << "bin_low_rad,bin_high_rad,count\n";
      for (std::size_t b = 0; b < h.counts.size(); ++b)
        csv << format_double(h.lo + h.width * static_cast<double>(b)) << ','
            << format_double(h.lo + h.width * static_cast<double>(b + 1)) << ',' << h.counts[b] << '\n';
      outputs.push_back("sway_histogram.svg");
      outputs.push_back("sway_histogram.csv");
    }
    if (outputs.empty()) throw ConfigError("plot: pass at least one of --trace, --history, --report, --dataset");
    write_run_manifest(dir, "plot", g, json::object(),
                       {{"traces", traces}, {"history", history}, {"report", report}, {"dataset", dataset}}, outputs,
                       json::object());
    for (const auto& o : outputs) std::printf("plot: %s\n", (dir / o.get<std::string>()).c_str());
    return kOk;
  }
};

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Posture-control system identification: simulate, synthesize, train, identify."};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "INI/TOML file with option values (sections name subcommands)");
  app.require_subcommand(1, 1);
  app.fallthrough();

  Globals g;
  g.argv.assign(argv, argv + argc);
  const char* env_out = std::getenv("POSTURE_OUT_DIR");
  g.out_dir = env_out && *env_out ? env_out : "posture_out";
  app.add_option("--seed", g.seed, "master seed for sampling, noise, training and search")->capture_default_str();
  app.add_option("--workers", g.workers, "worker threads (0 = all cores); results do not depend on it")
      ->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "artifact root (default $POSTURE_OUT_DIR or ./posture_out)")
      ->capture_default_str();

  PrtsCmd prts;
  SimulateCmd sim;
  DatasetCmd dataset;
  TrainCmd trainc;
  IdentifyCmd identify;
  EvalCmd eval;
  PlotCmd plotc;
  prts.add(app);
  sim.add(app);
  dataset.add(app);
  trainc.add(app);
  identify.add(app);
  eval.add(app);
  plotc.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (prts.pending) return prts.run(g);
    if (sim.pending) return sim.run(g);
    if (dataset.pending) return dataset.run(g);
    if (trainc.pending) return trainc.run(g);
    if (identify.pending) return identify.run(g);
    if (eval.pending) return eval.run(g);
    if (plotc.pending) return plotc.run(g);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kConfig;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInput;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "numerical divergence: %s\n", e.what());
    return kDivergence;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return kRuntime;
}
