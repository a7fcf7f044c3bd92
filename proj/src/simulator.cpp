#include "ehub/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ehub/csv.hpp"
#include "ehub/rng.hpp"
#include "json.hpp"

namespace ehub {
namespace {

constexpr double kTwoPi = 6.283185307179586;
constexpr double kYearHours = 8766.0;

double wrap_mod(HourIndex k, int period) {
  return static_cast<double>(((k % period) + period) % period);
}

} // namespace

void SyntheticDataConfig::validate() const {
  if (hours < 1) throw std::invalid_argument("synthetic series needs at least one hour");
  if (base_le < 0.0 || base_lh < 0.0) throw std::invalid_argument("base loads must be nonnegative");
  if (noise_e < 0.0 || noise_h < 0.0) throw std::invalid_argument("noise std must be nonnegative");
  if (workday_factor <= 0.0) throw std::invalid_argument("workday factor must be positive");
  if (temp_sensitivity < 0.0) throw std::invalid_argument("temperature sensitivity must be nonnegative");
  if (irr_peak < 0.0) throw std::invalid_argument("irradiance peak must be nonnegative");
}

DemandHistory generate_synthetic_data(const SyntheticDataConfig& cfg) {
  cfg.validate();
  DemandHistory h;
  h.start = cfg.start;
  h.le.reserve(static_cast<std::size_t>(cfg.hours));
  for (int i = 0; i < cfg.hours; ++i) {
    HourIndex k = cfg.start + i;
    double yearpos = wrap_mod(k, 8766) / kYearHours;
    double hod = wrap_mod(k, 24);
    double how = wrap_mod(k, 168);
    double summer = 0.5 * (1.0 - std::cos(kTwoPi * yearpos));

    double temp = cfg.temp_mean - cfg.temp_annual * std::cos(kTwoPi * yearpos) -
                  cfg.temp_daily * std::cos(kTwoPi * (hod - 14.0) / 24.0);
    double irr = 0.0;
    if (hod >= 6.0 && hod <= 18.0)
      irr = cfg.irr_peak * std::sin(kTwoPi * (hod - 6.0) / 24.0) * (0.35 + 0.65 * summer);

    CounterRng rng = CounterRng::for_stream(cfg.seed, 0xda7a, static_cast<std::uint64_t>(k), 0);
    double z_e = rng.next_gaussian();
    double z_h = rng.next_gaussian();

    double harm_e = cfg.daily_e * std::cos(kTwoPi * (hod - 19.0) / 24.0) +
                    cfg.weekly_e * std::cos(kTwoPi * (how - 60.0) / 168.0);
    double work = is_workday(k) ? cfg.workday_factor : 1.0;
    double le = cfg.base_le * (1.0 + harm_e) * work + cfg.noise_e * z_e;

    double harm_h = cfg.base_lh * (cfg.daily_h * std::cos(kTwoPi * (hod - 7.0) / 24.0) +
                                   cfg.weekly_h * std::cos(kTwoPi * (how - 60.0) / 168.0));
    double lh = cfg.base_lh + cfg.temp_sensitivity * std::max(0.0, cfg.t_ref - temp) + harm_h +
                cfg.noise_h * z_h;

    h.temp_c.push_back(temp);
    h.irradiance.push_back(irr);
    h.le.push_back(std::max(0.0, le));
    h.lh.push_back(std::max(0.0, lh));
  }
  return h;
}

RealizedStep realize_step(const AppliedInputs& applied, double true_le, double true_lh,
                          const HubState& state, const HubParameters& params,
                          const Tariffs& tariffs, HubState* next) {
  if (!next) throw std::invalid_argument("null successor state");
  const double dt = params.dt;
  RealizedStep r;

  double net_e = applied.p_pv + applied.p_chp - applied.p_hp +
                 (applied.es_discharge - applied.es_charge) - true_le;
  if (net_e >= 0.0)
    r.grid_sell = net_e;
  else
    r.grid_buy = -net_e;

  r.es_level = storage_step(state.es_level, applied.es_discharge, applied.es_charge,
                            params.eta_es, params.gamma_es, dt);

  double gap = true_lh - (applied.q_gb + applied.q_chp + applied.q_hp);
  double level = params.gamma_ts * state.ts_level;
  if (gap > 0.0) {
    // Discharge as much as the floor allows; the rest is unserved heat.
    double d_max = std::max(0.0, (level - params.ts_min) * params.eta_ts / dt);
    r.ts_discharge = std::min(gap, d_max);
    r.violation.unserved_kwh = (gap - r.ts_discharge) * dt;
    level -= r.ts_discharge * dt / params.eta_ts;
  } else if (gap < 0.0) {
    // Charge up to the ceiling; the rest is dumped heat.
    double c_max = std::max(0.0, (params.ts_max - level) / (params.eta_ts * dt));
    r.ts_charge = std::min(-gap, c_max);
    r.violation.dumped_kwh = (-gap - r.ts_charge) * dt;
    level += params.eta_ts * r.ts_charge * dt;
  }
  r.ts_level = std::min(params.ts_max, std::max(params.ts_min, level));

  HourIndex hour = state.clock + 1;
  r.stage_cost = (tariffs.price_buy(hour) * r.grid_buy - tariffs.price_sell(hour) * r.grid_sell +
                  tariffs.price_gas(hour) * (applied.f_chp + applied.f_gb)) *
                 dt;

  next->es_level = r.es_level;
  next->ts_level = r.ts_level;
  next->clock = hour;
  return r;
}

const char* controller_name(ControllerKind c) {
  switch (c) {
    case ControllerKind::Scenario: return "scenario";
    case ControllerKind::PdMpc: return "pd";
    case ControllerKind::MeanMpc: return "mean";
  }
  return "unknown";
}

void SimulationConfig::validate() const {
  if (hours < 1) throw std::invalid_argument("simulation needs at least one hour");
  if (controller == ControllerKind::Scenario && M < 1)
    throw std::invalid_argument("scenario controller needs M >= 1");
  if (refresh_every < 1) throw std::invalid_argument("refresh interval must be positive");
  if (max_consecutive_failures < 1)
    throw std::invalid_argument("failure budget must be positive");
  if (sp.T < 1) throw std::invalid_argument("horizon must be at least 1");
}

namespace {

DemandHistory prefix_history(const DemandHistory& d, HourIndex through) {
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

AppliedInputs plan_slice(const SetPoints& sp, int k) {
  AppliedInputs a;
  a.p_pv = sp.p_pv[k];
  Eigen::Vector4d w = sp.chp_weights.col(k).cwiseMax(0.0);
  double total = w.sum();
  a.chp_weights = total > 0.0 ? Eigen::Vector4d(w / total) : Eigen::Vector4d(1.0, 0.0, 0.0, 0.0);
  a.p_chp = sp.p_chp[k];
  a.q_chp = sp.q_chp[k];
  a.f_chp = sp.f_chp[k];
  a.p_hp = sp.p_hp[k];
  a.q_hp = sp.q_hp[k];
  a.q_gb = sp.q_gb[k];
  a.f_gb = sp.f_gb[k];
  a.es_charge = sp.es_charge[k];
  a.es_discharge = sp.es_discharge[k];
  a.planned_es_level = sp.es_level[k];
  return a;
}

TrajectorySample truth_slice(const DemandHistory& d, HourIndex from, int T) {
  TrajectorySample s;
  s.l_e.resize(T);
  s.l_h.resize(T);
  for (int k = 0; k < T; ++k) {
    int idx = d.index_of(from + k);
    s.l_e[k] = d.le[static_cast<std::size_t>(idx)];
    s.l_h[k] = d.lh[static_cast<std::size_t>(idx)];
  }
  return s;
}

} // namespace

ClosedLoopTrace run_closed_loop(const SimulationConfig& cfg, const GPModel* electric,
                                const GPModel* heat, const DemandHistory& data,
                                const HubParameters& params, const Tariffs& tariffs,
                                HubState init) {
  cfg.validate();
  params.validate();
  tariffs.validate();
  const int T = cfg.sp.T;
  const bool needs_models = cfg.controller != ControllerKind::PdMpc;
  if (needs_models && (!electric || !heat))
    throw std::invalid_argument("this controller needs fitted demand models");
  if (init.clock != cfg.start - 1)
    throw std::invalid_argument("initial state clock must be start - 1");
  if (!data.covers(cfg.start - 168, cfg.start + cfg.hours + T - 1)) {
    std::ostringstream os;
    os << "data must cover hours [" << cfg.start - 168 << ", " << cfg.start + cfg.hours + T - 2
       << "] for warm-up and the final forecast horizon";
    throw std::invalid_argument(os.str());
  }

  GPModel e_local, h_local;
  if (needs_models) {
    e_local = *electric;
    h_local = *heat;
    if (e_local.kind != DemandKind::Electric || h_local.kind != DemandKind::Heat)
      throw std::invalid_argument("model kinds are swapped");
  }

  ClosedLoopTrace trace;
  HubState state = init;
  SetPoints prev_plan;
  Eigen::VectorXd prev_slack_pos, prev_slack_neg;
  bool have_plan = false;
  BasisHint warm;
  int consec = 0;

  for (int t = 0; t < cfg.hours; ++t) {
    const HourIndex apply_hour = state.clock + 1;
    DemandHistory hist = prefix_history(data, state.clock);
    WeatherForecast wf;
    wf.temp_c.resize(T);
    wf.irradiance.resize(T);
    for (int k = 0; k < T; ++k) {
      int idx = data.index_of(apply_hour + k);
      wf.temp_c[k] = data.temp_c[static_cast<std::size_t>(idx)];
      wf.irradiance[k] = data.irradiance[static_cast<std::size_t>(idx)];
    }

    MpcStepResult step;
    const BasisHint* warm_ptr = warm.empty() ? nullptr : &warm;
    try {
      if (cfg.controller == ControllerKind::Scenario) {
        SamplerConfig scfg;
        scfg.M = cfg.M;
        scfg.T = T;
        scfg.antithetic = cfg.antithetic;
        scfg.seed =
            cfg.sample_seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(apply_hour));
        step = mpc_step(state, params, tariffs, e_local, h_local, hist, wf, cfg.sp, scfg, warm_ptr);
      } else {
        step.state = state;
        std::vector<TrajectorySample> scenarios;
        if (cfg.controller == ControllerKind::PdMpc)
          scenarios.push_back(truth_slice(data, apply_hour, T));
        else
          scenarios.push_back(mean_trajectory(e_local, h_local, hist, wf, T));
        step.pv_cap.resize(T);
        for (int k = 0; k < T; ++k) step.pv_cap[k] = pv_output(wf.irradiance[k], params);
        step.scenarios = std::move(scenarios);
        LinearProgram lp;
        std::vector<ComplementarityPair> pairs;
        build_scenario_program(state, params, tariffs, step.scenarios, step.pv_cap, cfg.sp, &lp,
                               &pairs, &step.layout);
        if (cfg.sp.epigraph) epigraph_reformulate(&lp, &step.layout);
        step.sp = solve_sp(lp, pairs, step.layout, cfg.sp, warm_ptr);
        step.success = step.sp.set_points.horizon() == T &&
                       (step.sp.status == SolveStatus::Optimal || step.sp.degraded);
        if (step.success) step.applied = first_step_inputs(step.sp);
      }
    } catch (const std::exception&) {
      // Before the first plan exists a throw is a configuration problem and
      // should surface; afterwards it degrades to the fallback path.
      if (!have_plan) throw;
      step.success = false;
    }

    HourRecord rec;
    rec.hour = apply_hour;
    if (step.success) {
      if (cfg.plan_observer) cfg.plan_observer(step, apply_hour);
      consec = 0;
      prev_plan = step.sp.set_points;
      prev_slack_pos = step.sp.slack_pos;
      prev_slack_neg = step.sp.slack_neg;
      have_plan = true;
      warm = step.sp.basis;
      rec.applied = step.applied;
      rec.planned_slack = step.sp.slack_pos[0] + step.sp.slack_neg[0];
    } else {
      ++trace.solver_failures;
      ++consec;
      if (consec >= cfg.max_consecutive_failures || !have_plan || consec > T - 1) {
        trace.aborted = true;
        break;
      }
      rec.fallback = true;
      rec.applied = plan_slice(prev_plan, consec);
      rec.planned_slack = prev_slack_pos[consec] + prev_slack_neg[consec];
    }

    int idx = data.index_of(apply_hour);
    rec.true_le = data.le[static_cast<std::size_t>(idx)];
    rec.true_lh = data.lh[static_cast<std::size_t>(idx)];
    HubState next;
    rec.realized =
        realize_step(rec.applied, rec.true_le, rec.true_lh, state, params, tariffs, &next);
    state = next;

    trace.total_cost += rec.realized.stage_cost;
    if (rec.realized.violation.total() > kViolationCountEps) {
      ++trace.violation_count;
      trace.violation_kwh += rec.realized.violation.total();
    }
    trace.hours.push_back(std::move(rec));

    if (needs_models && (t + 1) % cfg.refresh_every == 0 && t + 1 < cfg.hours) {
      DemandHistory seen = prefix_history(data, state.clock);
      e_local = refresh_conditioning_set(e_local, seen, state.clock);
      h_local = refresh_conditioning_set(h_local, seen, state.clock);
    }
  }

  if (!trace.hours.empty())
    trace.mean_cost = trace.total_cost / static_cast<double>(trace.hours.size());
  return trace;
}

SummaryReport summarize(const ClosedLoopTrace& trace) {
  if (trace.hours.empty()) throw std::invalid_argument("trace is empty");
  SummaryReport r;
  r.hours = static_cast<int>(trace.hours.size());
  r.solver_failures = trace.solver_failures;
  r.aborted = trace.aborted;
  double day_sum = 0.0;
  int in_day = 0;
  for (const HourRecord& h : trace.hours) {
    r.total_cost += h.realized.stage_cost;
    double v = h.realized.violation.total();
    if (v > kViolationCountEps) {
      ++r.violation_count;
      r.violation_kwh += v;
      std::size_t bin = 0;
      while (bin < kViolationBinEdges.size() && v > kViolationBinEdges[bin]) ++bin;
      ++r.histogram[bin];
    }
    day_sum += h.realized.stage_cost;
    if (++in_day == 24) {
      r.daily_cost.push_back(day_sum);
      day_sum = 0.0;
      in_day = 0;
    }
  }
  if (in_day > 0) r.daily_cost.push_back(day_sum);
  r.mean_cost = r.total_cost / static_cast<double>(r.hours);
  return r;
}

std::string summary_json(const SummaryReport& r) {
  using nlohmann::json;
  json j;
  j["schema_version"] = 1;
  j["type"] = "closed_loop_summary";
  j["hours"] = r.hours;
  j["total_cost_chf"] = r.total_cost;
  j["mean_cost_chf_per_h"] = r.mean_cost;
  j["violation_count"] = r.violation_count;
  j["violation_kwh"] = r.violation_kwh;
  j["violation_histogram"] = r.histogram;
  std::vector<double> edges(kViolationBinEdges.begin(), kViolationBinEdges.end());
  j["violation_bin_edges_kwh"] = edges;
  j["daily_cost_chf"] = r.daily_cost;
  j["solver_failures"] = r.solver_failures;
  j["aborted"] = r.aborted;
  return j.dump(2) + "\n";
}

void write_trace_csv(const std::string& path, const ClosedLoopTrace& trace) {
  std::ostringstream os;
  os << "hour,fallback,p_pv,w_a,w_b,w_c,w_d,p_chp,q_chp,f_chp,p_hp,q_hp,q_gb,f_gb,"
        "es_charge,es_discharge,es_level,true_le,true_lh,grid_buy,grid_sell,"
        "ts_charge,ts_discharge,ts_level,planned_slack,unserved_kwh,dumped_kwh,stage_cost\n";
  for (const HourRecord& h : trace.hours) {
    os << h.hour << ',' << (h.fallback ? 1 : 0);
    const AppliedInputs& a = h.applied;
    for (double v : {a.p_pv, a.chp_weights[0], a.chp_weights[1], a.chp_weights[2],
                     a.chp_weights[3], a.p_chp, a.q_chp, a.f_chp, a.p_hp, a.q_hp, a.q_gb, a.f_gb,
                     a.es_charge, a.es_discharge})
      os << ',' << format_double(v);
    const RealizedStep& re = h.realized;
    for (double v : {re.es_level, h.true_le, h.true_lh, re.grid_buy, re.grid_sell, re.ts_charge,
                     re.ts_discharge, re.ts_level, h.planned_slack, re.violation.unserved_kwh,
                     re.violation.dumped_kwh, re.stage_cost})
      os << ',' << format_double(v);
    os << '\n';
  }
  write_text_file(path, os.str());
}

} // namespace ehub
