#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "CLI11.hpp"

#include "ehub/config.hpp"
#include "ehub/csv.hpp"
#include "ehub/gp.hpp"
#include "ehub/guarantees.hpp"
#include "ehub/sampler.hpp"
#include "ehub/scenario_mpc.hpp"
#include "ehub/simulator.hpp"
#include "ehub/time_utils.hpp"

namespace fs = std::filesystem;

namespace ehub::cli {
namespace {

int cfg_int(const Json& root, const std::string& path) {
  double v = cfg_num(root, path);
  if (v != std::floor(v) || std::abs(v) > 1e9)
    throw std::invalid_argument("config key '" + path + "' must be an integer");
  return static_cast<int>(v);
}

int cfg_int_or(const Json& root, const std::string& path, int fallback) {
  return cfg_has(root, path) ? cfg_int(root, path) : fallback;
}

std::uint64_t cfg_seed_or(const Json& root, const std::string& path, std::uint64_t fallback) {
  if (!cfg_has(root, path)) return fallback;
  double v = cfg_num(root, path);
  if (v < 0 || v != std::floor(v))
    throw std::invalid_argument("config key '" + path + "' must be a nonnegative integer");
  return static_cast<std::uint64_t>(v);
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

// Full config with every optional key at its default. Commands read only the
// sections they own; required keys (synth.start, synth.hours, data_csv,
// forecast.at, simulate.start, simulate.hours, certify.dump, ...) have no
// default and fail loudly when absent.
Json full_default_config() {
  Json j = default_config();
  j["data_csv"] = "demand.csv";

  Json& s = j["synth"];
  s["filename"] = "demand.csv";
  s["base_le"] = 180.0;
  s["base_lh"] = 250.0;
  s["daily_e"] = 0.25;
  s["weekly_e"] = 0.08;
  s["daily_h"] = 0.12;
  s["weekly_h"] = 0.04;
  s["workday_factor"] = 1.15;
  s["temp_sensitivity"] = 6.0;
  s["t_ref"] = 16.0;
  s["temp_mean"] = 10.0;
  s["temp_annual"] = 9.0;
  s["temp_daily"] = 4.0;
  s["irr_peak"] = 0.85;
  s["noise_e"] = 6.0;
  s["noise_h"] = 8.0;
  s["seed"] = 1;

  Json& t = j["train"];
  t["prefix"] = "model";
  t["subsample_cap"] = 256;
  t["conditioning_rows"] = 2160;
  t["restarts"] = 5;
  t["max_iterations"] = 200;
  t["gradient_tolerance"] = 1e-5;
  t["seed"] = 1;

  Json& f = j["forecast"];
  f["models_dir"] = ".";
  f["prefix"] = "model";
  f["M"] = 50;
  f["T"] = 24;
  f["seed"] = 1;
  f["antithetic"] = false;
  f["zero_variance"] = false;

  Json& m = j["simulate"];
  m["models_dir"] = ".";
  m["prefix"] = "model";
  m["controllers"] = Json::array({"pd", "scenario"});
  m["M"] = Json::array({1});
  m["T"] = 24;
  m["epigraph"] = false;
  m["sample_seed"] = 1;
  m["antithetic"] = false;
  m["refresh_every"] = 24;
  m["max_consecutive_failures"] = 3;
  m["jobs"] = 1;

  Json& c = j["certify"];
  c["beta"] = 0.05;
  c["alpha"] = 0.10;
  c["solution_tol"] = 1e-6;
  c["randomized_order"] = false;
  c["order_seed"] = 1;
  return j;
}

// Recursive overlay: objects merge key by key, anything else (arrays
// included) is replaced by the user's value.
void merge_over(Json& base, const Json& user) {
  if (!user.is_object() || !base.is_object()) {
    base = user;
    return;
  }
  for (auto it = user.begin(); it != user.end(); ++it) {
    if (base.contains(it.key()))
      merge_over(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
}

struct CommonFlags {
  std::string config;
  std::string out = ".";
  std::string manifest;
};

void add_common(CLI::App* cmd, CommonFlags* f) {
  cmd->add_option("--config", f->config, "JSON config file (defaults used when omitted)");
  cmd->add_option("--out", f->out, "output directory")->capture_default_str();
  cmd->add_option("--from-manifest", f->manifest,
                  "rerun from a stored manifest; ignores --config and overrides");
}

struct Run {
  Json snapshot;
  fs::path out;
};

std::string manifest_name(const std::string& command) {
  std::string n = command;
  std::replace(n.begin(), n.end(), '-', '_');
  return n + "_manifest.json";
}

// Resolves the config snapshot (file + flag overrides, or a stored manifest)
// and writes the manifest before anything else runs. The manifest body is a
// pure function of the logical run, so reruns reproduce it byte for byte.
Run prepare(const std::string& command, const CommonFlags& cf,
            const std::function<void(Json&)>& apply_flags) {
  Run r;
  r.out = cf.out.empty() ? fs::path(".") : fs::path(cf.out);
  std::string config_file = cf.config;
  std::string out_record = cf.out;
  if (!cf.manifest.empty()) {
    Json m = load_json_file(cf.manifest);
    if (cfg_str_or(m, "type", "") != "run_manifest")
      throw std::invalid_argument("'" + cf.manifest + "' is not a run manifest");
    std::string mc = cfg_str_or(m, "command", "");
    if (mc != command)
      throw std::invalid_argument("manifest '" + cf.manifest + "' was written by command '" +
                                  mc + "', not '" + command + "'");
    if (!m.contains("config") || !m["config"].is_object())
      throw std::invalid_argument("manifest '" + cf.manifest + "' has no config snapshot");
    r.snapshot = m["config"];
    config_file = cfg_str_or(m, "config_file", "");
    out_record = cfg_str_or(m, "out_dir", ".");
  } else {
    r.snapshot = full_default_config();
    if (!cf.config.empty()) merge_over(r.snapshot, load_json_file(cf.config));
    int sv = cfg_int_or(r.snapshot, "schema_version", 1);
    if (sv != 1)
      throw std::invalid_argument("unsupported config schema_version " + std::to_string(sv));
    apply_flags(r.snapshot);
  }
  fs::create_directories(r.out);
  Json m;
  m["schema_version"] = 1;
  m["type"] = "run_manifest";
  m["tool"] = "ehub";
  m["tool_version"] = kToolVersion;
  m["command"] = command;
  m["config_file"] = config_file;
  m["out_dir"] = out_record;
  m["config"] = r.snapshot;
  write_text_file((r.out / manifest_name(command)).string(), m.dump(2) + "\n");
  return r;
}

std::string out_path(const Run& r, const std::string& name) { return (r.out / name).string(); }

DemandHistory history_through(const DemandHistory& d, HourIndex through) {
  if (!d.covers(d.start, through + 1))
    throw std::invalid_argument("history ends at " + format_hour(d.end() - 1) +
                                ", before the requested hour " + format_hour(through));
  DemandHistory h;
  h.start = d.start;
  auto n = static_cast<std::size_t>(through - d.start + 1);
  h.le.assign(d.le.begin(), d.le.begin() + static_cast<std::ptrdiff_t>(n));
  h.lh.assign(d.lh.begin(), d.lh.begin() + static_cast<std::ptrdiff_t>(n));
  h.temp_c.assign(d.temp_c.begin(), d.temp_c.begin() + static_cast<std::ptrdiff_t>(n));
  h.irradiance.assign(d.irradiance.begin(),
                      d.irradiance.begin() + static_cast<std::ptrdiff_t>(n));
  h.extra_holidays = d.extra_holidays;
  return h;
}

std::string model_file(const std::string& dir, const std::string& prefix, DemandKind kind,
                       Season season) {
  fs::path p = fs::path(dir) / (prefix + "_" + demand_kind_name(kind) + "_" +
                                season_name(season) + ".json");
  return p.string();
}

double nearest_rank(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("percentile of an empty sample");
  auto n = static_cast<double>(sorted.size());
  auto idx = static_cast<std::size_t>(std::ceil(p * n)) - 1;
  idx = std::min(idx, sorted.size() - 1);
  return sorted[idx];
}

// ---------------------------------------------------------------- gen-data

SyntheticDataConfig synth_from(const Json& c) {
  SyntheticDataConfig sc;
  sc.start = parse_hour(cfg_str(c, "synth.start"));
  sc.hours = cfg_int(c, "synth.hours");
  sc.base_le = cfg_num_or(c, "synth.base_le", sc.base_le);
  sc.base_lh = cfg_num_or(c, "synth.base_lh", sc.base_lh);
  sc.daily_e = cfg_num_or(c, "synth.daily_e", sc.daily_e);
  sc.weekly_e = cfg_num_or(c, "synth.weekly_e", sc.weekly_e);
  sc.daily_h = cfg_num_or(c, "synth.daily_h", sc.daily_h);
  sc.weekly_h = cfg_num_or(c, "synth.weekly_h", sc.weekly_h);
  sc.workday_factor = cfg_num_or(c, "synth.workday_factor", sc.workday_factor);
  sc.temp_sensitivity = cfg_num_or(c, "synth.temp_sensitivity", sc.temp_sensitivity);
  sc.t_ref = cfg_num_or(c, "synth.t_ref", sc.t_ref);
  sc.temp_mean = cfg_num_or(c, "synth.temp_mean", sc.temp_mean);
  sc.temp_annual = cfg_num_or(c, "synth.temp_annual", sc.temp_annual);
  sc.temp_daily = cfg_num_or(c, "synth.temp_daily", sc.temp_daily);
  sc.irr_peak = cfg_num_or(c, "synth.irr_peak", sc.irr_peak);
  sc.noise_e = cfg_num_or(c, "synth.noise_e", sc.noise_e);
  sc.noise_h = cfg_num_or(c, "synth.noise_h", sc.noise_h);
  sc.seed = cfg_seed_or(c, "synth.seed", 1);
  return sc;
}

int cmd_gen_data(const Run& r) {
  SyntheticDataConfig sc = synth_from(r.snapshot);
  DemandHistory d = generate_synthetic_data(sc);
  std::string name = cfg_str_or(r.snapshot, "synth.filename", "demand.csv");
  save_history_csv(out_path(r, name), d);
  std::cout << "gen-data: " << d.size() << " hours from " << format_hour(d.start) << " -> "
            << name << "\n";
  return 0;
}

// ------------------------------------------------------------------- train

int cmd_train(const Run& r) {
  const Json& c = r.snapshot;
  DemandHistory data = load_history_csv(cfg_str(c, "data_csv"));
  std::vector<std::string> seasons = cfg_str_list(c, "train.seasons");
  if (seasons.empty()) throw std::invalid_argument("train.seasons is empty");
  std::string prefix = cfg_str_or(c, "train.prefix", "model");

  FitOptions fo;
  fo.subsample_cap = cfg_int_or(c, "train.subsample_cap", fo.subsample_cap);
  fo.conditioning_rows = cfg_int_or(c, "train.conditioning_rows", fo.conditioning_rows);
  fo.restarts = cfg_int_or(c, "train.restarts", fo.restarts);
  fo.max_iterations = cfg_int_or(c, "train.max_iterations", fo.max_iterations);
  fo.gradient_tolerance = cfg_num_or(c, "train.gradient_tolerance", fo.gradient_tolerance);
  fo.seed = cfg_seed_or(c, "train.seed", 1);
  if (cfg_has(c, "train.window_from")) fo.window_start = parse_hour(cfg_str(c, "train.window_from"));
  if (cfg_has(c, "train.window_to")) fo.window_end = parse_hour(cfg_str(c, "train.window_to"));

  Json diag;
  diag["schema_version"] = 1;
  diag["type"] = "train_diagnostics";
  diag["models"] = Json::array();
  for (const std::string& sname : seasons) {
    Season season = season_from_name(sname);
    for (DemandKind kind : {DemandKind::Electric, DemandKind::Heat}) {
      GPModel m;
      try {
        m = fit(data, kind, season, KernelHyperparameters::standard_init(kind), fo);
      } catch (const std::invalid_argument& e) {
        HourIndex ws = fo.window_start == 0 && fo.window_end == 0 ? data.start : fo.window_start;
        HourIndex we = fo.window_start == 0 && fo.window_end == 0 ? data.end() : fo.window_end;
        std::ostringstream os;
        os << e.what() << " (requested window [" << format_hour(ws) << ", " << format_hour(we)
           << "), data covers [" << format_hour(data.start) << ", " << format_hour(data.end())
           << "))";
        throw std::invalid_argument(os.str());
      }
      std::string fname =
          prefix + "_" + std::string(demand_kind_name(kind)) + "_" + season_name(season) + ".json";
      save_gp_model(out_path(r, fname), m);
      Json e;
      e["file"] = fname;
      e["kind"] = demand_kind_name(kind);
      e["season"] = season_name(season);
      e["rows"] = m.rows();
      e["log_marginal"] = m.log_marginal;
      e["grad_norm"] = m.grad_norm;
      e["converged"] = m.fit_converged;
      e["jitter"] = m.jitter;
      diag["models"].push_back(e);
      std::cout << "train: " << demand_kind_name(kind) << "/" << season_name(season)
                << " lml=" << m.log_marginal << " |grad|=" << m.grad_norm
                << " rows=" << m.rows() << " -> " << fname << "\n";
    }
  }
  write_text_file(out_path(r, "train_diagnostics.json"), diag.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------- forecast

int cmd_forecast(const Run& r) {
  const Json& c = r.snapshot;
  DemandHistory data = load_history_csv(cfg_str(c, "data_csv"));
  HourIndex at = parse_hour(cfg_str(c, "forecast.at"));
  int M = cfg_int_or(c, "forecast.M", 50);
  int T = cfg_int_or(c, "forecast.T", 24);
  bool zero_variance = cfg_bool_or(c, "forecast.zero_variance", false);
  std::string mdir = cfg_str_or(c, "forecast.models_dir", ".");
  std::string prefix = cfg_str_or(c, "forecast.prefix", "model");

  Season season = season_of_hour(at + 1);
  DemandHistory hist = history_through(data, at);
  GPModel electric = load_gp_model(model_file(mdir, prefix, DemandKind::Electric, season), hist);
  GPModel heat = load_gp_model(model_file(mdir, prefix, DemandKind::Heat, season), hist);

  if (!data.covers(at + 1, at + T + 1))
    throw std::invalid_argument("data ends at " + format_hour(data.end() - 1) +
                                ", horizon needs " + format_hour(at + T));
  WeatherForecast wf;
  wf.temp_c.resize(T);
  wf.irradiance.resize(T);
  for (int k = 0; k < T; ++k) {
    int idx = data.index_of(at + 1 + k);
    wf.temp_c[k] = data.temp_c[static_cast<std::size_t>(idx)];
    wf.irradiance[k] = data.irradiance[static_cast<std::size_t>(idx)];
  }

  TrajectorySample mean = mean_trajectory(electric, heat, hist, wf, T);
  std::vector<TrajectorySample> scenarios;
  if (zero_variance) {
    scenarios.assign(static_cast<std::size_t>(M), mean);
    for (int i = 0; i < M; ++i) scenarios[static_cast<std::size_t>(i)].scenario = i;
  } else {
    SamplerConfig scfg;
    scfg.M = M;
    scfg.T = T;
    scfg.seed = cfg_seed_or(c, "forecast.seed", 1);
    scfg.antithetic = cfg_bool_or(c, "forecast.antithetic", false);
    scenarios = sample_trajectories(electric, heat, hist, wf, scfg);
  }
  write_trajectories_csv(out_path(r, "trajectories.csv"), scenarios);
  write_trajectories_csv(out_path(r, "mean_trajectory.csv"), {mean});

  int clips = 0;
  for (const TrajectorySample& s : scenarios) clips += s.clips;
  Json summary;
  summary["schema_version"] = 1;
  summary["type"] = "forecast_summary";
  summary["at"] = format_hour(at);
  summary["season"] = season_name(season);
  summary["M"] = M;
  summary["T"] = T;
  summary["zero_variance"] = zero_variance;
  summary["clips"] = clips;

  // One-step residual backtest: predict each hour in [from, to) from the true
  // history and report nearest-rank quartiles plus 90% interval coverage.
  if (cfg_has(c, "forecast.quartiles_from") || cfg_has(c, "forecast.quartiles_to")) {
    HourIndex from = parse_hour(cfg_str(c, "forecast.quartiles_from"));
    HourIndex to = parse_hour(cfg_str(c, "forecast.quartiles_to"));
    if (to <= from) throw std::invalid_argument("forecast.quartiles_to must be after _from");
    constexpr double z90 = 1.6448536269514722;
    std::ostringstream os;
    os << "kind,count,q25_kwh,q50_kwh,q75_kwh,cover90\n";
    for (DemandKind kind : {DemandKind::Electric, DemandKind::Heat}) {
      const GPModel& m = kind == DemandKind::Electric ? electric : heat;
      std::vector<double> resid;
      int inside = 0;
      for (HourIndex h = from; h < to; ++h) {
        Posterior p = posterior(m, encode_features(kind, h, data));
        double truth = data.demand(kind, h);
        double e = truth - p.mean;
        resid.push_back(e);
        double sd = std::sqrt(p.variance + m.noise_variance_output());
        if (std::abs(e) <= z90 * sd) ++inside;
      }
      std::sort(resid.begin(), resid.end());
      os << demand_kind_name(kind) << ',' << resid.size() << ','
         << format_double(nearest_rank(resid, 0.25)) << ','
         << format_double(nearest_rank(resid, 0.50)) << ','
         << format_double(nearest_rank(resid, 0.75)) << ','
         << format_double(static_cast<double>(inside) / static_cast<double>(resid.size()))
         << '\n';
    }
    write_text_file(out_path(r, "residual_quartiles.csv"), os.str());
    summary["quartiles_from"] = format_hour(from);
    summary["quartiles_to"] = format_hour(to);
  }
  write_text_file(out_path(r, "forecast_summary.json"), summary.dump(2) + "\n");
  std::cout << "forecast: " << M << " scenarios x " << T << " h at " << format_hour(at)
            << " (clips " << clips << ") -> trajectories.csv\n";
  return 0;
}

// ---------------------------------------------------------------- simulate

struct Arm {
  std::string label;
  ControllerKind kind = ControllerKind::PdMpc;
  int M = 1;
};

struct ArmResult {
  bool ok = false;
  bool config_error = false;
  std::string error;
  ClosedLoopTrace trace;
  SummaryReport report;
};

void write_sp_dump(const Run& r, const std::string& label, const MpcStepResult& step) {
  std::string scen_name = "sp_scenarios_" + label + ".csv";
  write_trajectories_csv(out_path(r, scen_name), step.scenarios);
  Json d;
  d["schema_version"] = 1;
  d["type"] = "sp_dump";
  d["arm"] = label;
  d["state"]["es_level"] = step.state.es_level;
  d["state"]["ts_level"] = step.state.ts_level;
  d["state"]["clock"] = step.state.clock;
  d["sp"]["T"] = step.layout.T;
  d["sp"]["rho"] = step.layout.rho;
  d["sp"]["epigraph"] = step.layout.epigraph;
  d["pv_cap"] = to_std(step.pv_cap);
  d["scenarios_csv"] = scen_name;
  d["scenarios_hash"] = file_hash_hex(out_path(r, scen_name));
  d["solution"] = Json::parse(sp_solution_json(step.sp));
  write_text_file(out_path(r, "sp_dump_" + label + ".json"), d.dump(2) + "\n");
}

std::string csv_safe(std::string s) {
  for (char& ch : s)
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ' ';
  return s;
}

int cmd_simulate(const Run& r) {
  const Json& c = r.snapshot;
  HubConfig hub = parse_hub_config(c);
  DemandHistory data = load_history_csv(cfg_str(c, "data_csv"));
  HourIndex start = parse_hour(cfg_str(c, "simulate.start"));
  int hours = cfg_int(c, "simulate.hours");
  int T = cfg_int_or(c, "simulate.T", 24);

  std::vector<std::string> controllers = cfg_has(c, "simulate.controllers")
                                             ? cfg_str_list(c, "simulate.controllers")
                                             : std::vector<std::string>{"pd", "scenario"};
  std::vector<int> Ms;
  if (cfg_has(c, "simulate.M"))
    for (double v : cfg_num_list(c, "simulate.M")) {
      if (v < 1 || v != std::floor(v))
        throw std::invalid_argument("simulate.M entries must be positive integers");
      Ms.push_back(static_cast<int>(v));
    }
  else
    Ms.push_back(1);

  std::vector<Arm> arms;
  bool needs_models = false;
  for (const std::string& name : controllers) {
    if (name == "pd") {
      arms.push_back({"pd", ControllerKind::PdMpc, 1});
    } else if (name == "mean") {
      arms.push_back({"mean", ControllerKind::MeanMpc, 1});
      needs_models = true;
    } else if (name == "scenario") {
      for (int m : Ms) arms.push_back({"scenario_m" + std::to_string(m),
                                       ControllerKind::Scenario, m});
      needs_models = true;
    } else {
      throw std::invalid_argument("unknown controller '" + name +
                                  "' (expected pd, mean, or scenario)");
    }
  }
  if (arms.empty()) throw std::invalid_argument("simulate.controllers is empty");

  GPModel electric, heat;
  if (needs_models) {
    Season season = season_of_hour(start);
    std::string mdir = cfg_str_or(c, "simulate.models_dir", ".");
    std::string prefix = cfg_str_or(c, "simulate.prefix", "model");
    electric = load_gp_model(model_file(mdir, prefix, DemandKind::Electric, season), data);
    heat = load_gp_model(model_file(mdir, prefix, DemandKind::Heat, season), data);
  }

  std::optional<HourIndex> dump_at;
  if (cfg_has(c, "simulate.dump_sp_at"))
    dump_at = parse_hour(cfg_str(c, "simulate.dump_sp_at"));

  SPConfig sp;
  sp.T = T;
  sp.rho = hub.slack_penalty;
  sp.epigraph = cfg_bool_or(c, "simulate.epigraph", false);

  SimulationConfig base;
  base.start = start;
  base.hours = hours;
  base.sample_seed = cfg_seed_or(c, "simulate.sample_seed", 1);
  base.antithetic = cfg_bool_or(c, "simulate.antithetic", false);
  base.sp = sp;
  base.refresh_every = cfg_int_or(c, "simulate.refresh_every", 24);
  base.max_consecutive_failures = cfg_int_or(c, "simulate.max_consecutive_failures", 3);

  HubState init{hub.es_init, hub.ts_init, start - 1};

  std::vector<ArmResult> results(arms.size());
  auto run_arm = [&](std::size_t i) {
    const Arm& arm = arms[i];
    ArmResult& res = results[i];
    try {
      SimulationConfig sc = base;
      sc.controller = arm.kind;
      sc.M = arm.M;
      if (dump_at && arm.kind == ControllerKind::Scenario) {
        std::string label = arm.label;
        sc.plan_observer = [&r, label, hour = *dump_at](const MpcStepResult& step,
                                                        HourIndex apply_hour) {
          if (apply_hour == hour) write_sp_dump(r, label, step);
        };
      }
      const GPModel* e = arm.kind == ControllerKind::PdMpc ? nullptr : &electric;
      const GPModel* h = arm.kind == ControllerKind::PdMpc ? nullptr : &heat;
      res.trace = run_closed_loop(sc, e, h, data, hub.params, hub.tariffs, init);
      write_trace_csv(out_path(r, "trace_" + arm.label + ".csv"), res.trace);
      if (res.trace.hours.empty())
        throw std::runtime_error("aborted before completing the first hour");
      res.report = summarize(res.trace);
      write_text_file(out_path(r, "summary_" + arm.label + ".json"),
                      summary_json(res.report));
      res.ok = true;
    } catch (const std::invalid_argument& e) {
      res.ok = false;
      res.config_error = true;
      res.error = e.what();
    } catch (const std::exception& e) {
      res.ok = false;
      res.error = e.what();
    }
  };

  int jobs = std::clamp(cfg_int_or(c, "simulate.jobs", 1), 1,
                        static_cast<int>(arms.size()));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < arms.size(); ++i) run_arm(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(jobs));
    for (int w = 0; w < jobs; ++w)
      pool.emplace_back([&]() {
        for (std::size_t i = next.fetch_add(1); i < arms.size(); i = next.fetch_add(1))
          run_arm(i);
      });
    for (std::thread& t : pool) t.join();
  }

  std::ostringstream combined;
  combined << "arm,controller,M,hours,total_cost,mean_cost,violation_count,violation_kwh,"
              "solver_failures,aborted,error\n";
  int failed = 0;
  for (std::size_t i = 0; i < arms.size(); ++i) {
    const Arm& arm = arms[i];
    const ArmResult& res = results[i];
    combined << arm.label << ',' << controller_name(arm.kind) << ',' << arm.M << ',';
    if (res.ok) {
      const SummaryReport& s = res.report;
      combined << s.hours << ',' << format_double(s.total_cost) << ','
               << format_double(s.mean_cost) << ',' << s.violation_count << ','
               << format_double(s.violation_kwh) << ',' << s.solver_failures << ','
               << (s.aborted ? 1 : 0) << ",\n";
      std::cout << "simulate: " << arm.label << ": " << s.hours << " h, mean cost "
                << s.mean_cost << " CHF/h, violations " << s.violation_count << " ("
                << s.violation_kwh << " kWh)" << (s.aborted ? " [aborted]" : "") << "\n";
    } else {
      ++failed;
      combined << "0,0,0,0,0,0,1," << csv_safe(res.error) << '\n';
      std::cout << "simulate: " << arm.label << ": FAILED: " << res.error << "\n";
    }
  }
  write_text_file(out_path(r, "summary_combined.csv"), combined.str());
  if (failed > 0) {
    std::string msg = std::to_string(failed) + " of " + std::to_string(arms.size()) +
                      " arms failed";
    for (const ArmResult& res : results)
      if (!res.ok && res.config_error) throw std::invalid_argument(msg + ": " + res.error);
    throw std::runtime_error(msg);
  }
  return 0;
}

// ----------------------------------------------------------------- certify

int cmd_certify(const Run& r) {
  const Json& c = r.snapshot;
  double beta = cfg_num_or(c, "certify.beta", 0.05);

  if (cfg_has(c, "certify.eval")) {
    int M = cfg_int(c, "certify.eval.M");
    int s = cfg_int(c, "certify.eval.s");
    double eps = epsilon_closed_form(s, M, beta);
    Json j;
    j["schema_version"] = 1;
    j["type"] = "epsilon_eval";
    j["M"] = M;
    j["s"] = s;
    j["beta"] = beta;
    j["epsilon"] = eps;
    if (s < M)
      j["bound"] = epsilon_bound(s, M, beta);
    else
      j["bound"] = nullptr;
    write_text_file(out_path(r, "epsilon.json"), j.dump(2) + "\n");
    std::cout << "certify: epsilon(" << s << "; M=" << M << ", beta=" << beta << ") = " << eps
              << "\n";
    return 0;
  }

  HubConfig hub = parse_hub_config(c);
  Json dump = load_json_file(cfg_str(c, "certify.dump"));
  if (cfg_str_or(dump, "type", "") != "sp_dump")
    throw std::invalid_argument("'" + cfg_str(c, "certify.dump") + "' is not an sp_dump file");
  std::string scen_path = cfg_str(c, "certify.scenarios");
  std::string want_hash = cfg_str(dump, "scenarios_hash");
  std::string got_hash = file_hash_hex(scen_path);
  if (got_hash != want_hash)
    throw std::invalid_argument("scenario file '" + scen_path + "' hash " + got_hash +
                                " does not match the dump's embedded hash " + want_hash);
  std::vector<TrajectorySample> scenarios = read_trajectories_csv(scen_path);

  HubState state;
  state.es_level = cfg_num(dump, "state.es_level");
  state.ts_level = cfg_num(dump, "state.ts_level");
  state.clock = static_cast<HourIndex>(cfg_num(dump, "state.clock"));
  SPConfig sp;
  sp.T = cfg_int(dump, "sp.T");
  sp.rho = cfg_num(dump, "sp.rho");
  sp.epigraph = cfg_bool_or(dump, "sp.epigraph", false);
  std::vector<double> cap = cfg_num_list(dump, "pv_cap");
  Eigen::VectorXd pv_cap =
      Eigen::Map<const Eigen::VectorXd>(cap.data(), static_cast<Eigen::Index>(cap.size()));

  SpSolver resolve = make_sp_resolver(state, hub.params, hub.tariffs, pv_cap, sp);
  SPSolution reference = resolve(scenarios);
  double stored = cfg_num(dump, "solution.objective");
  if (std::abs(reference.objective - stored) > 1e-6 * (1.0 + std::abs(stored)))
    throw std::invalid_argument(
        "rebuilt program objective " + std::to_string(reference.objective) +
        " does not match the stored solution " + std::to_string(stored) +
        "; the config or files do not belong to this dump");

  GuaranteeConfig gc;
  gc.beta = beta;
  gc.alpha = cfg_num_or(c, "certify.alpha", gc.alpha);
  gc.solution_tol = cfg_num_or(c, "certify.solution_tol", gc.solution_tol);
  gc.epigraph = sp.epigraph;
  gc.randomized_order = cfg_bool_or(c, "certify.randomized_order", false);
  gc.order_seed = cfg_seed_or(c, "certify.order_seed", 1);
  GuaranteeResult res = certify(resolve, scenarios, reference, gc);
  write_text_file(out_path(r, "certificate.json"), certificate_json(res));
  std::cout << "certify: s*=" << res.s_star << " epsilon=" << res.epsilon
            << " bound=" << res.bound << " (M=" << scenarios.size() << ", beta=" << beta << ")"
            << (res.vacuous ? " [vacuous]" : "") << "\n";
  return 0;
}

} // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"energy hub scenario MPC toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("ehub ") + kToolVersion);

  CommonFlags gen_cf, train_cf, fc_cf, sim_cf, cert_cf;

  CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic demand/weather CSV");
  add_common(gen, &gen_cf);
  std::uint64_t gen_seed = 0;
  int gen_hours = 0;
  std::string gen_start;
  CLI::Option* o_gen_seed = gen->add_option("--seed", gen_seed, "synthetic noise seed");
  CLI::Option* o_gen_hours = gen->add_option("--hours", gen_hours, "series length in hours");
  CLI::Option* o_gen_start = gen->add_option("--start", gen_start, "first hour (YYYY-MM-DDTHH)");

  CLI::App* train = app.add_subcommand("train", "fit demand models per kind and season");
  add_common(train, &train_cf);
  std::uint64_t train_seed = 0;
  std::string train_seasons;
  CLI::Option* o_train_seed = train->add_option("--seed", train_seed, "restart seed");
  CLI::Option* o_train_seasons =
      train->add_option("--seasons", train_seasons, "comma list: winter,spring,summer,autumn");

  CLI::App* fc = app.add_subcommand("forecast", "sample demand trajectories from the models");
  add_common(fc, &fc_cf);
  std::uint64_t fc_seed = 0;
  int fc_M = 0, fc_T = 0;
  std::string fc_at;
  bool fc_zero = false;
  CLI::Option* o_fc_seed = fc->add_option("--seed", fc_seed, "sampler seed");
  CLI::Option* o_fc_M = fc->add_option("--M", fc_M, "scenario count");
  CLI::Option* o_fc_T = fc->add_option("--T", fc_T, "horizon in hours");
  CLI::Option* o_fc_at = fc->add_option("--at", fc_at, "forecast issue hour");
  CLI::Option* o_fc_zero =
      fc->add_flag("--zero-variance", fc_zero, "replace draws with the posterior mean");

  CLI::App* sim = app.add_subcommand("simulate", "closed-loop runs per controller arm");
  add_common(sim, &sim_cf);
  std::uint64_t sim_seed = 0;
  int sim_hours = 0, sim_T = 0, sim_jobs = 0;
  std::string sim_start, sim_M, sim_controllers, sim_dump;
  bool sim_epi = false;
  CLI::Option* o_sim_seed = sim->add_option("--seed", sim_seed, "scenario sampling seed");
  CLI::Option* o_sim_hours = sim->add_option("--hours", sim_hours, "controlled hours");
  CLI::Option* o_sim_T = sim->add_option("--T", sim_T, "planning horizon");
  CLI::Option* o_sim_jobs = sim->add_option("--jobs", sim_jobs, "parallel arms");
  CLI::Option* o_sim_start = sim->add_option("--start", sim_start, "first controlled hour");
  CLI::Option* o_sim_M = sim->add_option("--M", sim_M, "comma list of scenario counts");
  CLI::Option* o_sim_controllers =
      sim->add_option("--controllers", sim_controllers, "comma list: pd,scenario,mean");
  CLI::Option* o_sim_dump =
      sim->add_option("--dump-sp-at", sim_dump, "dump the scenario program at this hour");
  CLI::Option* o_sim_epi = sim->add_flag("--epigraph", sim_epi, "min-max objective");

  CLI::App* cert = app.add_subcommand("certify", "a-posteriori scenario guarantee");
  add_common(cert, &cert_cf);
  double cert_beta = 0.0;
  int cert_M = 0, cert_s = 0;
  std::string cert_dump, cert_scen;
  bool cert_eval = false;
  CLI::Option* o_cert_beta = cert->add_option("--beta", cert_beta, "confidence parameter");
  CLI::Option* o_cert_dump = cert->add_option("--dump", cert_dump, "sp_dump JSON from simulate");
  CLI::Option* o_cert_scen = cert->add_option("--scenarios", cert_scen, "trajectory CSV");
  CLI::Option* o_cert_eval =
      cert->add_flag("--eval-epsilon", cert_eval, "just evaluate epsilon(s; M, beta)");
  CLI::Option* o_cert_M = cert->add_option("--M", cert_M, "sample size for --eval-epsilon");
  CLI::Option* o_cert_s = cert->add_option("--s", cert_s, "support cardinality for --eval-epsilon");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto split_csv = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) out.push_back(item);
    return out;
  };

  try {
    if (gen->parsed()) {
      Run r = prepare("gen-data", gen_cf, [&](Json& s) {
        if (o_gen_seed->count()) s["synth"]["seed"] = gen_seed;
        if (o_gen_hours->count()) s["synth"]["hours"] = gen_hours;
        if (o_gen_start->count()) s["synth"]["start"] = gen_start;
      });
      return cmd_gen_data(r);
    }
    if (train->parsed()) {
      Run r = prepare("train", train_cf, [&](Json& s) {
        if (o_train_seed->count()) s["train"]["seed"] = train_seed;
        if (o_train_seasons->count()) s["train"]["seasons"] = split_csv(train_seasons);
      });
      return cmd_train(r);
    }
    if (fc->parsed()) {
      Run r = prepare("forecast", fc_cf, [&](Json& s) {
        if (o_fc_seed->count()) s["forecast"]["seed"] = fc_seed;
        if (o_fc_M->count()) s["forecast"]["M"] = fc_M;
        if (o_fc_T->count()) s["forecast"]["T"] = fc_T;
        if (o_fc_at->count()) s["forecast"]["at"] = fc_at;
        if (o_fc_zero->count()) s["forecast"]["zero_variance"] = fc_zero;
      });
      return cmd_forecast(r);
    }
    if (sim->parsed()) {
      Run r = prepare("simulate", sim_cf, [&](Json& s) {
        if (o_sim_seed->count()) s["simulate"]["sample_seed"] = sim_seed;
        if (o_sim_hours->count()) s["simulate"]["hours"] = sim_hours;
        if (o_sim_T->count()) s["simulate"]["T"] = sim_T;
        if (o_sim_jobs->count()) s["simulate"]["jobs"] = sim_jobs;
        if (o_sim_start->count()) s["simulate"]["start"] = sim_start;
        if (o_sim_dump->count()) s["simulate"]["dump_sp_at"] = sim_dump;
        if (o_sim_epi->count()) s["simulate"]["epigraph"] = sim_epi;
        if (o_sim_M->count()) {
          Json arr = Json::array();
          for (const std::string& v : split_csv(sim_M)) {
            try {
              std::size_t pos = 0;
              int m = std::stoi(v, &pos);
              if (pos != v.size()) throw std::invalid_argument(v);
              arr.push_back(m);
            } catch (const std::exception&) {
              throw std::invalid_argument("--M entry '" + v + "' is not an integer");
            }
          }
          s["simulate"]["M"] = arr;
        }
        if (o_sim_controllers->count()) s["simulate"]["controllers"] = split_csv(sim_controllers);
      });
      return cmd_simulate(r);
    }
    if (cert->parsed()) {
      Run r = prepare("certify", cert_cf, [&](Json& s) {
        if (o_cert_beta->count()) s["certify"]["beta"] = cert_beta;
        if (o_cert_dump->count()) s["certify"]["dump"] = cert_dump;
        if (o_cert_scen->count()) s["certify"]["scenarios"] = cert_scen;
        if (o_cert_eval->count() || o_cert_M->count() || o_cert_s->count()) {
          if (!s["certify"].contains("eval") || !s["certify"]["eval"].is_object())
            s["certify"]["eval"] = Json::object();
          if (o_cert_M->count()) s["certify"]["eval"]["M"] = cert_M;
          if (o_cert_s->count()) s["certify"]["eval"]["s"] = cert_s;
        }
      });
      return cmd_certify(r);
    }
    throw std::invalid_argument("no command selected");
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

} // namespace ehub::cli
