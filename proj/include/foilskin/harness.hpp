#pragma once

// Orchestration behind the foilctl subcommands: config loading, seed
// bookkeeping, and the file layout of every output directory.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "foilskin/control.hpp"
#include "foilskin/csv.hpp"
#include "foilskin/errors.hpp"
#include "foilskin/estimator.hpp"
#include "foilskin/ingestion.hpp"
#include "foilskin/metrics.hpp"
#include "foilskin/session.hpp"

namespace foilskin {

inline constexpr std::string_view kVersion = "0.1.0";

struct ControlSuite {
  PidGains gains{};
  double derivative_cutoff = 10.0;  // Hz
  std::vector<ProfileKind> waveforms{ProfileKind::sine, ProfileKind::triangle};
  std::vector<double> amplitudes{2.0, 5.0};  // peak to peak, percent
  std::vector<double> periods{20.0, 10.0, 5.0};
  double mean = 4.25;
  // Periodic runs last `cycles` periods; the first `warmup_cycles` are not
  // scored because the plant starts at rest.
  std::size_t cycles = 21;
  std::size_t warmup_cycles = 1;
  double step_duration = 20.0;
  double plateau_window = 1.0;  // s before each step boundary
  std::size_t phase_bins = 100;
  double baseline = 5.0;        // s of rest frames before each run
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string data_dir;    // empty: <out>/data
  std::string model_path;  // empty: <out>/model/model.json
  PlantParams plant{};
  SkinModelParams skin{};
  double session_baseline = 30.0;
  std::size_t session_cycles = 10;
  double session_cycle_period = 20.0;
  double skin_rate = 714.0;   // Hz
  double camera_rate = 30.0;  // Hz
  double align_tolerance = 0.002;
  SplitRatios split{};
  TrainConfig train{};
  std::string resume;  // optional model to continue training from
  ControlSuite control{};
  std::vector<double> bucket_edges{2.0, 4.0, 6.0, 8.0, 10.0};

  double dt() const { return 1.0 / skin_rate; }

  void validate() const {
    plant.validate();
    skin.validate();
    train.validate();
    if (!(skin_rate > 0.0) || !(camera_rate > 0.0)) throw ConfigError("session rates must be positive");
    if (!(session_baseline >= 0.0) || !(session_cycle_period > 0.0)) {
      throw ConfigError("session baseline must be >= 0 and cycle_period > 0");
    }
    if (!(align_tolerance > 0.0)) throw ConfigError("ingestion.tolerance must be positive");
    if (control.periods.empty() || control.amplitudes.empty() || control.waveforms.empty()) {
      throw ConfigError("control grid needs at least one waveform, amplitude and period");
    }
    for (double p : control.periods) {
      if (!(p > 0.0)) throw ConfigError("control periods must be positive");
    }
    for (double a : control.amplitudes) {
      if (!(a >= 0.0)) throw ConfigError("control amplitudes must be non-negative");
    }
    if (control.cycles < control.warmup_cycles + 2) {
      throw ConfigError("control.cycles must leave at least two scored cycles after warm-up");
    }
    if (!(control.step_duration > 0.0) || !(control.plateau_window > 0.0) || !(control.baseline > 0.0)) {
      throw ConfigError("control step_duration, plateau_window and baseline must be positive");
    }
    if (control.phase_bins < 8) throw ConfigError("control.phase_bins must be at least 8");
    if (bucket_edges.size() < 2) throw ConfigError("evaluate.bucket_edges needs at least two edges");
    for (std::size_t i = 1; i < bucket_edges.size(); ++i) {
      if (!(bucket_edges[i] > bucket_edges[i - 1])) throw ConfigError("evaluate.bucket_edges must increase");
    }
  }
};

namespace detail {

inline std::string format_number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_number(const std::string& key, std::string_view text) {
  text = trim(text);
  double v = 0.0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc{} || r.ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ConfigError(key + ": expected a number, got '" + std::string(text) + "'");
  }
  return v;
}

inline std::uint64_t parse_unsigned(const std::string& key, std::string_view text) {
  text = trim(text);
  std::uint64_t v = 0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc{} || r.ptr != text.data() + text.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + std::string(text) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split_list(std::string_view text) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = text.find(',');
    const auto item = trim(text.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

inline ProfileKind parse_waveform(const std::string& key, std::string_view name) {
  if (name == "sine") return ProfileKind::sine;
  if (name == "triangle") return ProfileKind::triangle;
  throw ConfigError(key + ": unknown waveform '" + std::string(name) + "'");
}

struct Field {
  std::string key;
  std::function<void(std::string_view)> set;
  std::function<std::string()> get;
};

inline Field number_field(std::string key, double& ref) {
  return {key, [key, &ref](std::string_view v) { ref = parse_number(key, v); },
          [&ref] { return format_number(ref); }};
}

template <typename Int>
Field count_field(std::string key, Int& ref) {
  return {key, [key, &ref](std::string_view v) { ref = static_cast<Int>(parse_unsigned(key, v)); },
          [&ref] { return std::to_string(ref); }};
}

inline Field text_field(std::string key, std::string& ref) {
  return {key, [&ref](std::string_view v) { ref = std::string(trim(v)); }, [&ref] { return ref; }};
}

template <typename Container>
Field list_field(std::string key, Container& ref, std::size_t exact = 0) {
  return {key,
          [key, &ref, exact](std::string_view v) {
            const auto items = split_list(v);
            if (exact && items.size() != exact) {
              throw ConfigError(key + ": expected " + std::to_string(exact) + " values");
            }
            std::vector<double> values;
            for (auto item : items) values.push_back(parse_number(key, item));
            if constexpr (requires { ref.resize(0); }) {
              ref.assign(values.begin(), values.end());
            } else {
              std::copy(values.begin(), values.end(), ref.begin());
            }
          },
          [&ref] {
            std::string out;
            for (double v : ref) out += (out.empty() ? "" : ", ") + format_number(v);
            return out;
          }};
}

inline Field waveform_field(std::string key, std::vector<ProfileKind>& ref) {
  return {key,
          [key, &ref](std::string_view v) {
            ref.clear();
            for (auto item : split_list(v)) ref.push_back(parse_waveform(key, item));
          },
          [&ref] {
            std::string out;
            for (auto k : ref) out += (out.empty() ? "" : ", ") + to_string(k);
            return out;
          }};
}

// Every recognised key, in canonical order.
inline std::vector<Field> config_fields(RunConfig& c) {
  auto& a = c.plant.actuator;
  auto& k = c.control;
  return {
      count_field("run.seed", c.seed),
      text_field("run.data_dir", c.data_dir),
      text_field("run.model", c.model_path),
      number_field("plant.camber_min", c.plant.camber_min),
      number_field("plant.camber_max", c.plant.camber_max),
      number_field("plant.pressure_blend", c.plant.pressure_blend),
      number_field("plant.tip_per_percent", c.plant.tip_per_percent),
      number_field("plant.max_rate", a.max_rate),
      number_field("plant.load_slowdown", a.load_slowdown),
      number_field("plant.velocity_gain", a.velocity_gain),
      number_field("plant.tau", a.tau),
      number_field("skin.noise_std", c.skin.noise_std),
      number_field("skin.curvature_sensitivity", c.skin.curvature_sensitivity),
      list_field("skin.gains", c.skin.gains, kChannelCount),
      list_field("skin.stations", c.skin.stations, kElectrodeCount),
      number_field("session.baseline", c.session_baseline),
      count_field("session.cycles", c.session_cycles),
      number_field("session.cycle_period", c.session_cycle_period),
      number_field("session.skin_rate", c.skin_rate),
      number_field("session.camera_rate", c.camera_rate),
      number_field("ingestion.tolerance", c.align_tolerance),
      number_field("ingestion.train", c.split.train),
      number_field("ingestion.validation", c.split.validation),
      number_field("ingestion.test", c.split.test),
      number_field("train.learning_rate", c.train.learning_rate),
      count_field("train.epochs", c.train.epochs),
      count_field("train.batch_size", c.train.batch_size),
      count_field("train.patience", c.train.patience),
      text_field("train.resume", c.resume),
      number_field("control.kp", k.gains.kp),
      number_field("control.ki", k.gains.ki),
      number_field("control.kd", k.gains.kd),
      number_field("control.derivative_cutoff", k.derivative_cutoff),
      waveform_field("control.waveforms", k.waveforms),
      list_field("control.amplitudes", k.amplitudes),
      list_field("control.periods", k.periods),
      number_field("control.mean", k.mean),
      count_field("control.cycles", k.cycles),
      count_field("control.warmup_cycles", k.warmup_cycles),
      number_field("control.step_duration", k.step_duration),
      number_field("control.plateau_window", k.plateau_window),
      count_field("control.phase_bins", k.phase_bins),
      number_field("control.baseline", k.baseline),
      list_field("evaluate.bucket_edges", c.bucket_edges),
  };
}

}  // namespace detail

/// Parses INI text over the defaults. Unknown keys are errors.
inline RunConfig parse_config(std::istream& in, const std::string& source = "config") {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig cfg;
  auto fields = detail::config_fields(cfg);
  std::map<std::string, detail::Field*> by_key;
  for (auto& f : fields) by_key[f.key] = &f;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError(source + ": key '" + section + "' must sit inside a [section]");
    for (const auto& [name, value] : body) {
      const std::string key = section + "." + name;
      const auto it = by_key.find(key);
      if (it == by_key.end()) throw ConfigError(source + ": unknown key '" + key + "'");
      it->second->set(value.data());
    }
  }
  cfg.validate();
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_config(in, path);
}

/// Resolved configuration as INI text; the hash covers exactly this text.
inline std::string canonical_config(const RunConfig& cfg) {
  RunConfig copy = cfg;
  std::string out, section;
  for (const auto& f : detail::config_fields(copy)) {
    const auto dot = f.key.find('.');
    const std::string s = f.key.substr(0, dot);
    if (s != section) {
      out += (out.empty() ? "[" : "\n[") + s + "]\n";
      section = s;
    }
    out += f.key.substr(dot + 1) + " = " + f.get() + "\n";
  }
  return out;
}

inline std::string config_hash(const RunConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_config(cfg))));
  return buf;
}

// ---------------------------------------------------------------------------
// Seeds

struct SeedPlan {
  std::uint64_t root = 0;
  std::uint64_t session_skin = 0, split = 0, init = 0, shuffle = 0;

  std::uint64_t control(std::string_view profile) const {
    return derive_seed(root, "control." + std::string(profile));
  }
};

inline SeedPlan seed_plan(std::uint64_t root) {
  return {root, derive_seed(root, "session.skin"), derive_seed(root, "dataset.split"),
          derive_seed(root, "estimator.init"), derive_seed(root, "estimator.shuffle")};
}

// ---------------------------------------------------------------------------
// Paths and manifests

struct OutputLayout {
  std::filesystem::path root;
  std::filesystem::path data, model_dir, evaluate, control;
  std::filesystem::path model_file;

  OutputLayout(const RunConfig& cfg, const std::filesystem::path& out)
      : root(out),
        data(cfg.data_dir.empty() ? out / "data" : std::filesystem::path(cfg.data_dir)),
        model_dir(out / "model"),
        evaluate(out / "evaluate"),
        control(out / "control"),
        model_file(cfg.model_path.empty() ? model_dir / "model.json" : std::filesystem::path(cfg.model_path)) {}

  std::filesystem::path capacitance_log() const { return data / "capacitance.csv"; }
  std::filesystem::path marker_log() const { return data / "markers.csv"; }
};

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  }
}

inline void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  csv::write_file(path.string(), j.dump(2) + "\n");
}

inline nlohmann::ordered_json read_json(const std::filesystem::path& path) {
  auto in = csv::open_input(path.string());
  try {
    return nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::data, path.string() + ": " + e.what());
  }
}

inline nlohmann::ordered_json manifest(const RunConfig& cfg, std::string_view command,
                                       const std::vector<std::string>& outputs,
                                       nlohmann::ordered_json seeds) {
  nlohmann::ordered_json j;
  j["tool"] = "foilctl";
  j["version"] = std::string(kVersion);
  j["command"] = std::string(command);
  j["config_hash"] = config_hash(cfg);
  j["seeds"] = std::move(seeds);
  j["outputs"] = outputs;
  RunConfig copy = cfg;
  nlohmann::ordered_json resolved;
  for (const auto& f : detail::config_fields(copy)) resolved[f.key] = f.get();
  j["config"] = resolved;
  return j;
}

// ---------------------------------------------------------------------------
// generate

inline SessionConfig session_config(const RunConfig& cfg) {
  SessionConfig sc;
  sc.plant = cfg.plant;
  sc.skin = cfg.skin;
  sc.skin.seed = seed_plan(cfg.seed).session_skin;
  sc.gains = cfg.control.gains;
  sc.baseline = cfg.session_baseline;
  sc.cycles = cfg.session_cycles;
  sc.cycle_period = cfg.session_cycle_period;
  sc.dt = cfg.dt();
  sc.camera_rate = cfg.camera_rate;
  return sc;
}

struct GenerateResult {
  std::size_t frames = 0, marker_sets = 0;
};

inline GenerateResult cmd_generate(const RunConfig& cfg, const std::filesystem::path& out) {
  const OutputLayout paths(cfg, out);
  const SessionConfig sc = session_config(cfg);
  const Session s = generate_session(sc);
  if (s.frames.empty() || s.markers.empty()) throw ConfigError("session is empty: raise session.baseline or cycles");
  ensure_directory(paths.data);
  write_capacitance_log(paths.capacitance_log().string(), s.frames);
  write_marker_log(paths.marker_log().string(), s.markers);
  nlohmann::ordered_json seeds{{"root", cfg.seed}, {"session_skin", sc.skin.seed}};
  auto m = manifest(cfg, "generate", {"capacitance.csv", "markers.csv"}, seeds);
  m["frames"] = s.frames.size();
  m["marker_sets"] = s.markers.size();
  m["duration_s"] = session_duration(sc);
  write_json(paths.data / "manifest.json", m);
  return {s.frames.size(), s.markers.size()};
}

// ---------------------------------------------------------------------------
// train / evaluate

struct LoadedData {
  std::vector<CapacitanceFrame> frames;
  std::vector<MarkerSet> markers;
  BaselineReference reference;
  AlignmentResult alignment;
  Dataset dataset;
};

/// Loads both logs, takes the reference from the leading rest window, and
/// rebuilds the seeded split.
inline LoadedData load_dataset(const RunConfig& cfg, const OutputLayout& paths) {
  LoadedData d;
  d.frames = load_capacitance_log(paths.capacitance_log().string());
  d.markers = load_marker_log(paths.marker_log().string());
  std::vector<CapacitanceFrame> rest;
  for (const auto& f : d.frames) {
    if (f.t < cfg.session_baseline) rest.push_back(f);
  }
  if (rest.empty()) throw CalibrationError("no capacitance frames inside the baseline window");
  d.reference = compute_baseline(rest);
  const double chord = cfg.plant.geometry.chord_length;
  d.alignment = align_streams(d.frames, d.markers, d.reference, cfg.align_tolerance, chord);
  d.dataset = split_dataset(d.alignment.pairs, seed_plan(cfg.seed).split, chord, cfg.split);
  return d;
}

inline MlpModel load_estimator(const std::filesystem::path& path) {
  MlpModel m = load_model(path.string());
  if (m.input_size() != kChannelCount || m.output_size() != kTargetCount) {
    throw Error(ErrorCategory::data, path.string() + ": model must map 9 channels to 10 coordinates");
  }
  return m;
}

inline nlohmann::ordered_json train_report_json(const TrainReport& r) {
  nlohmann::ordered_json j;
  j["epochs_run"] = r.validation_loss.size();
  j["initial_validation_loss"] = r.initial_validation_loss;
  j["best_validation_loss"] = r.best_validation_loss;
  j["best_epoch"] = r.best_epoch;
  j["final_train_loss"] = r.train_loss.empty() ? r.initial_validation_loss : r.train_loss.back();
  j["loss_reduction"] = r.best_validation_loss > 0.0 ? r.initial_validation_loss / r.best_validation_loss : 0.0;
  return j;
}

inline TrainResult cmd_train(const RunConfig& cfg, const std::filesystem::path& out) {
  const OutputLayout paths(cfg, out);
  const SeedPlan seeds = seed_plan(cfg.seed);
  const LoadedData d = load_dataset(cfg, paths);
  MlpModel initial;
  if (cfg.resume.empty()) {
    initial = mlp_init(kShapeEstimatorSizes, seeds.init);
    fit_scaling(initial, d.dataset);
  } else {
    initial = load_estimator(cfg.resume);
  }
  TrainConfig tc = cfg.train;
  tc.seed = seeds.shuffle;
  TrainResult result = train(initial, d.dataset, tc);

  ensure_directory(paths.model_dir);
  ensure_directory(paths.model_file.parent_path().empty() ? std::filesystem::path(".")
                                                          : paths.model_file.parent_path());
  save_model(paths.model_file.string(), result.model);
  write_json(paths.model_dir / "train_report.json", train_report_json(result.report));
  std::string losses = "epoch,train_loss,validation_loss\n";
  for (std::size_t e = 0; e < result.report.validation_loss.size(); ++e) {
    losses += std::to_string(e + 1);
    for (double v : {result.report.train_loss[e], result.report.validation_loss[e]}) {
      losses += ',';
      csv::append_value(losses, v);
    }
    losses += '\n';
  }
  csv::write_file((paths.model_dir / "losses.csv").string(), losses);
  write_json(paths.model_dir / "dataset.json",
             dataset_manifest(d.dataset, {paths.capacitance_log().filename().string(), paths.marker_log().filename().string(),
                                          cfg.align_tolerance, d.alignment.dropped, d.alignment.max_gap}));
  nlohmann::ordered_json sj{{"root", cfg.seed}, {"split", seeds.split}, {"init", seeds.init},
                            {"shuffle", seeds.shuffle}};
  write_json(paths.model_dir / "manifest.json",
             manifest(cfg, "train", {"model.json", "train_report.json", "losses.csv", "dataset.json"}, sj));
  return result;
}

inline std::vector<CamberBucket> buckets_of(const RunConfig& cfg) {
  std::vector<CamberBucket> out;
  for (std::size_t i = 1; i < cfg.bucket_edges.size(); ++i) out.push_back({cfg.bucket_edges[i - 1], cfg.bucket_edges[i]});
  return out;
}

/// Held-out tip error of `model` on the test split of the logged session.
inline SensorErrorReport evaluate_model(const RunConfig& cfg, const LoadedData& d, const MlpModel& model) {
  const double chord = cfg.plant.geometry.chord_length;
  std::vector<MarkerSet> est, truth;
  std::vector<double> camber;
  for (std::size_t idx : d.dataset.test) {
    const TrainingPair& p = d.dataset.pairs[idx];
    CapacitanceFrame f{p.t, p.input, FrameKind::normalized};
    est.push_back(estimate_markers(model, f));
    MarkerSet m;
    m.t = p.t;
    for (std::size_t k = 0; k < kMarkerCount; ++k) {
      m.points[k] = {p.target[2 * k] * d.dataset.target_scale, p.target[2 * k + 1] * d.dataset.target_scale};
    }
    camber.push_back(markers_to_camber(m, cfg.plant.geometry));
    truth.push_back(m);
  }
  if (truth.empty()) throw DatasetError("test split is empty");
  const auto buckets = buckets_of(cfg);
  return sensor_error_stats(est, truth, camber, chord, buckets);
}

inline nlohmann::ordered_json stats_json(const ErrorStats& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"std", s.std}, {"max", s.max},
          {"min", s.min},     {"marker_mean", s.marker_mean}};
}

inline nlohmann::ordered_json sensor_report_json(const SensorErrorReport& r) {
  nlohmann::ordered_json j;
  j["units"] = "percent of foil length";
  j["overall"] = stats_json(r.overall);
  j["buckets"] = nlohmann::ordered_json::array();
  for (const auto& b : r.buckets) {
    nlohmann::ordered_json e{{"camber_lo", b.bucket.lo}, {"camber_hi", b.bucket.hi}};
    e["stats"] = b.stats ? stats_json(*b.stats) : nlohmann::ordered_json(nullptr);
    j["buckets"].push_back(e);
  }
  return j;
}

inline std::string sensor_report_csv(const SensorErrorReport& r) {
  std::string out = "camber_lo,camber_hi,count,mean,std,max,min,marker_mean\n";
  auto row = [&out](std::string lo, std::string hi, const std::optional<ErrorStats>& s) {
    out += lo + ',' + hi + ',';
    if (!s) {
      out += "0,,,,,\n";  // absent, not zero
      return;
    }
    out += std::to_string(s->count);
    for (double v : {s->mean, s->std, s->max, s->min, s->marker_mean}) {
      out += ',';
      csv::append_value(out, v);
    }
    out += '\n';
  };
  for (const auto& b : r.buckets) row(detail::format_number(b.bucket.lo), detail::format_number(b.bucket.hi), b.stats);
  row("all", "all", r.overall);
  return out;
}

inline SensorErrorReport cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& out) {
  const OutputLayout paths(cfg, out);
  const LoadedData d = load_dataset(cfg, paths);
  const MlpModel model = load_estimator(paths.model_file);
  const SensorErrorReport report = evaluate_model(cfg, d, model);
  ensure_directory(paths.evaluate);
  auto j = sensor_report_json(report);
  j["test_pairs"] = d.dataset.test.size();
  write_json(paths.evaluate / "sensor_error.json", j);
  csv::write_file((paths.evaluate / "sensor_error.csv").string(), sensor_report_csv(report));
  write_json(paths.evaluate / "manifest.json",
             manifest(cfg, "evaluate", {"sensor_error.json", "sensor_error.csv"},
                      {{"root", cfg.seed}, {"split", seed_plan(cfg.seed).split}}));
  return report;
}

// ---------------------------------------------------------------------------
// control

inline std::string profile_name(const SetpointProfile& p) {
  if (p.kind == ProfileKind::step) return "step";
  return to_string(p.kind) + "_p2p" + detail::format_number(p.peak_to_peak) + "_T" +
         detail::format_number(p.period);
}

/// Waveform-major, then amplitude, then period, in config order.
inline std::vector<SetpointProfile> grid_profiles(const ControlSuite& suite) {
  std::vector<SetpointProfile> out;
  for (auto kind : suite.waveforms) {
    for (double a : suite.amplitudes) {
      for (double period : suite.periods) {
        SetpointProfile p;
        p.kind = kind;
        p.mean = suite.mean;
        p.peak_to_peak = a;
        p.period = period;
        out.push_back(p);
      }
    }
  }
  return out;
}

struct ProfileRun {
  std::string name;
  ExperimentRecord record;
  std::uint64_t seed = 0;
  double nrmse_truth = 0.0;     // set point vs true camber, scored cycles only
  double nrmse_estimate = 0.0;  // set point vs estimated camber
  std::optional<PhaseAverage> phase_setpoint, phase_truth, phase_estimate;
  std::vector<StepEvent> steps;
  std::vector<double> rise_times, plateau_errors;
};

enum class Feedback { estimator, truth };

inline ClosedLoopConfig loop_config(const RunConfig& cfg, const SetpointProfile& profile, std::uint64_t seed) {
  ClosedLoopConfig lc;
  lc.profile = profile;
  lc.plant = cfg.plant;
  lc.skin = cfg.skin;
  lc.skin.seed = seed;
  lc.gains = cfg.control.gains;
  lc.pid.derivative_cutoff = cfg.control.derivative_cutoff;
  lc.dt = cfg.dt();
  lc.baseline_duration = cfg.control.baseline;
  lc.duration = profile.kind == ProfileKind::step ? cfg.control.step_duration
                                                  : profile.period * static_cast<double>(cfg.control.cycles);
  return lc;
}

inline ProfileRun run_profile(const RunConfig& cfg, const MlpModel& model, const SetpointProfile& profile,
                              std::uint64_t seed, Feedback feedback = Feedback::estimator) {
  const ClosedLoopConfig lc = loop_config(cfg, profile, seed);
  ProfileRun run;
  run.name = profile_name(profile);
  run.seed = seed;
  run.record = feedback == Feedback::truth ? run_closed_loop_truth(lc) : run_closed_loop(lc, model);
  const auto& rec = run.record;
  if (profile.kind == ProfileKind::step) {
    run.steps = step_events(profile, lc.duration);
    // An unfinished step leaves a NaN rise time rather than failing the run.
    for (std::size_t k = 0; k < run.steps.size(); ++k) {
      const double end_t = k + 1 < run.steps.size() ? run.steps[k + 1].time : lc.duration;
      const auto end = std::min(rec.size(), static_cast<std::size_t>(std::llround(end_t / rec.dt)));
      try {
        run.rise_times.push_back(rise_time(std::span(rec.truth).first(end), rec.dt, std::span(&run.steps[k], 1)));
      } catch (const MetricError&) {
        run.rise_times.push_back(std::nan(""));
      }
    }
    std::vector<double> ends;
    for (const auto& s : run.steps) ends.push_back(s.time);
    ends.push_back(lc.duration);
    run.plateau_errors = plateau_errors(rec.setpoint, rec.truth, rec.dt, ends, cfg.control.plateau_window);
    run.nrmse_truth = nrmse(rec.setpoint, rec.truth);
    run.nrmse_estimate = nrmse(rec.setpoint, rec.estimate);
    return run;
  }
  const auto skip = std::min(rec.size(), static_cast<std::size_t>(std::llround(
                                             profile.period * static_cast<double>(cfg.control.warmup_cycles) / rec.dt)));
  const std::span<const double> sp = std::span(rec.setpoint).subspan(skip);
  const std::span<const double> tr = std::span(rec.truth).subspan(skip);
  const std::span<const double> es = std::span(rec.estimate).subspan(skip);
  run.nrmse_truth = nrmse(sp, tr);
  run.nrmse_estimate = nrmse(sp, es);
  run.phase_setpoint = phase_average(sp, profile.period, rec.dt, cfg.control.phase_bins);
  run.phase_truth = phase_average(tr, profile.period, rec.dt, cfg.control.phase_bins);
  run.phase_estimate = phase_average(es, profile.period, rec.dt, cfg.control.phase_bins);
  return run;
}

struct ControlSuiteResult {
  std::vector<ProfileRun> grid;
  ProfileRun step;
};

/// The periodic grid plus the step profile; each run draws its skin noise
/// from a seed derived from the root seed and the profile name.
inline ControlSuiteResult run_control_suite(const RunConfig& cfg, const MlpModel& model,
                                            Feedback feedback = Feedback::estimator) {
  const SeedPlan seeds = seed_plan(cfg.seed);
  ControlSuiteResult out;
  for (const auto& p : grid_profiles(cfg.control)) {
    out.grid.push_back(run_profile(cfg, model, p, seeds.control(profile_name(p)), feedback));
  }
  SetpointProfile step;
  out.step = run_profile(cfg, model, step, seeds.control("step"), feedback);
  return out;
}

inline std::string phase_csv(const ProfileRun& run) {
  std::string out = "phase,setpoint,truth_mean,truth_std,truth_sem,estimate_mean\n";
  const auto& tr = *run.phase_truth;
  for (std::size_t b = 0; b < tr.phase.size(); ++b) {
    csv::append_value(out, tr.phase[b]);
    for (double v : {run.phase_setpoint->mean[b], tr.mean[b], tr.std[b], tr.sem[b], run.phase_estimate->mean[b]}) {
      out += ',';
      csv::append_value(out, v);
    }
    out += '\n';
  }
  return out;
}

inline std::string summary_csv(const ControlSuiteResult& r) {
  std::string out = "profile,waveform,p2p,period,seed,nrmse_truth,nrmse_estimate,estimate_faults\n";
  auto row = [&out](const ProfileRun& run) {
    const auto& p = run.record.profile;
    out += run.name + ',' + to_string(p.kind) + ',';
    out += p.kind == ProfileKind::step ? std::string(",") : detail::format_number(p.peak_to_peak) + ',' +
                                                                detail::format_number(p.period);
    out += ',' + std::to_string(run.seed);
    for (double v : {run.nrmse_truth, run.nrmse_estimate}) {
      out += ',';
      csv::append_value(out, v);
    }
    out += ',' + std::to_string(run.record.estimate_faults) + '\n';
  };
  for (const auto& g : r.grid) row(g);
  row(r.step);
  return out;
}

/// Fig. 9 style pivot: one row per waveform and amplitude, one column per
/// period, ground-truth NRMSE in the cells.
inline std::string grid_csv(const ControlSuite& suite, const ControlSuiteResult& r) {
  std::string out = "waveform,p2p";
  for (double p : suite.periods) out += ",T" + detail::format_number(p);
  out += '\n';
  std::size_t i = 0;
  for (auto kind : suite.waveforms) {
    for (double a : suite.amplitudes) {
      out += to_string(kind) + ',' + detail::format_number(a);
      for (std::size_t k = 0; k < suite.periods.size(); ++k) {
        out += ',';
        csv::append_value(out, r.grid[i++].nrmse_truth);
      }
      out += '\n';
    }
  }
  return out;
}

inline std::string step_csv(const ProfileRun& step) {
  std::string out = "step,time,from,to,rise_time,plateau_error\n";
  for (std::size_t k = 0; k < step.steps.size(); ++k) {
    const auto& s = step.steps[k];
    out += std::to_string(k + 1) + ',';
    csv::append_time(out, s.time);
    for (double v : {s.from, s.to, step.rise_times[k], step.plateau_errors[k + 1]}) {
      out += ',';
      csv::append_value(out, v);
    }
    out += '\n';
  }
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline nlohmann::ordered_json control_summary_json(const ControlSuiteResult& r) {
  nlohmann::ordered_json j;
  j["grid"] = nlohmann::ordered_json::array();
  for (const auto& g : r.grid) {
    const auto& p = g.record.profile;
    j["grid"].push_back({{"profile", g.name},
                         {"waveform", to_string(p.kind)},
                         {"p2p", p.peak_to_peak},
                         {"period", p.period},
                         {"seed", g.seed},
                         {"nrmse_truth", g.nrmse_truth},
                         {"nrmse_estimate", g.nrmse_estimate},
                         {"estimate_faults", g.record.estimate_faults}});
  }
  nlohmann::ordered_json step;
  step["seed"] = r.step.seed;
  step["rise_times"] = r.step.rise_times;
  step["mean_rise_time"] = mean_of(r.step.rise_times);
  step["plateau_errors"] = r.step.plateau_errors;
  step["nrmse_truth"] = r.step.nrmse_truth;
  j["step"] = step;
  return j;
}

inline ControlSuiteResult cmd_control(const RunConfig& cfg, const std::filesystem::path& out) {
  const OutputLayout paths(cfg, out);
  const MlpModel model = load_estimator(paths.model_file);
  ControlSuiteResult r = run_control_suite(cfg, model);
  ensure_directory(paths.control / "records");
  ensure_directory(paths.control / "phase");
  std::vector<std::string> outputs;
  for (const ProfileRun* run : [&] {
         std::vector<const ProfileRun*> all;
         for (const auto& g : r.grid) all.push_back(&g);
         all.push_back(&r.step);
         return all;
       }()) {
    csv::write_file((paths.control / "records" / (run->name + ".csv")).string(), format_record(run->record));
    outputs.push_back("records/" + run->name + ".csv");
    if (run->phase_truth) {
      csv::write_file((paths.control / "phase" / (run->name + ".csv")).string(), phase_csv(*run));
      outputs.push_back("phase/" + run->name + ".csv");
    }
  }
  csv::write_file((paths.control / "summary.csv").string(), summary_csv(r));
  csv::write_file((paths.control / "grid.csv").string(), grid_csv(cfg.control, r));
  csv::write_file((paths.control / "step.csv").string(), step_csv(r.step));
  write_json(paths.control / "summary.json", control_summary_json(r));
  outputs.insert(outputs.end(), {"summary.csv", "grid.csv", "step.csv", "summary.json"});
  nlohmann::ordered_json seeds{{"root", cfg.seed}};
  for (const auto& g : r.grid) seeds[g.name] = g.seed;
  seeds["step"] = r.step.seed;
  write_json(paths.control / "manifest.json", manifest(cfg, "control", outputs, seeds));
  return r;
}

// ---------------------------------------------------------------------------
// report

/// Collects the train, evaluate and control outputs into one document.
inline std::string cmd_report(const RunConfig& cfg, const std::filesystem::path& out) {
  const OutputLayout paths(cfg, out);
  const auto train_j = read_json(paths.model_dir / "train_report.json");
  const auto eval_j = read_json(paths.evaluate / "sensor_error.json");
  const auto ctrl_j = read_json(paths.control / "summary.json");

  std::ostringstream md;
  md.setf(std::ios::fixed);
  auto num = [](const nlohmann::ordered_json& v) {
    if (!v.is_number()) return std::string("-");
    std::ostringstream o;
    o.setf(std::ios::fixed);
    o.precision(3);
    o << v.get<double>();
    return o.str();
  };
  md << "# foilskin report\n\nconfig hash `" << config_hash(cfg) << "`, root seed " << cfg.seed << "\n\n";
  md << "## Estimator training\n\n";
  md.precision(3);
  md << "- epochs run: " << train_j.at("epochs_run").get<std::size_t>() << ", best epoch "
     << train_j.at("best_epoch").get<std::size_t>() << "\n";
  md << std::scientific << "- validation loss: " << train_j.at("initial_validation_loss").get<double>()
     << " -> " << train_j.at("best_validation_loss").get<double>() << "\n\n" << std::fixed;

  md << "## Sensor error (percent of foil length, held-out frames)\n\n";
  md << "| camber | n | mean | std | max | min |\n|---|---|---|---|---|---|\n";
  auto stats_row = [&md](const std::string& label, const nlohmann::ordered_json& s) {
    if (s.is_null()) {
      md << "| " << label << " | 0 | - | - | - | - |\n";
      return;
    }
    md << "| " << label << " | " << s.at("count").get<std::size_t>() << " | " << s.at("mean").get<double>() << " | "
       << s.at("std").get<double>() << " | " << s.at("max").get<double>() << " | " << s.at("min").get<double>()
       << " |\n";
  };
  for (const auto& b : eval_j.at("buckets")) {
    std::ostringstream label;
    label.setf(std::ios::fixed);
    label.precision(1);
    label << b.at("camber_lo").get<double>() << "-" << b.at("camber_hi").get<double>() << "%";
    stats_row(label.str(), b.at("stats"));
  }
  stats_row("all", eval_j.at("overall"));

  md << "\n## Step response\n\n";
  const auto& step = ctrl_j.at("step");
  md << "- rise times (s):";
  for (const auto& v : step.at("rise_times")) md << " " << num(v);
  md << "\n- mean rise time: " << num(step.at("mean_rise_time")) << " s\n- plateau errors (% camber):";
  for (const auto& v : step.at("plateau_errors")) md << " " << num(v);
  md << "\n\n## Tracking NRMSE (ground truth)\n\n| waveform | p2p | period | NRMSE | NRMSE (estimate) |\n"
        "|---|---|---|---|---|\n";
  for (const auto& g : ctrl_j.at("grid")) {
    md << "| " << g.at("waveform").get<std::string>() << " | " << detail::format_number(g.at("p2p").get<double>())
       << " | " << detail::format_number(g.at("period").get<double>()) << " | " << num(g.at("nrmse_truth")) << " | "
       << num(g.at("nrmse_estimate")) << " |\n";
  }
  const std::string text = md.str();
  csv::write_file((paths.root / "report.md").string(), text);
  nlohmann::ordered_json all{{"config_hash", config_hash(cfg)}, {"train", train_j}, {"sensor_error", eval_j},
                             {"control", ctrl_j}};
  write_json(paths.root / "report.json", all);
  return text;
}

}  // namespace foilskin
