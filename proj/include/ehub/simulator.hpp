#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "ehub/guarantees.hpp"
#include "ehub/scenario_mpc.hpp"

namespace ehub {

// Synthetic hourly demand and weather series standing in for metered data.
// L_e = base_e * (1 + daily + weekly harmonics) * workday factor + noise,
// L_h = base_h + sensitivity * max(0, t_ref - temp) + harmonics + noise,
// both clipped at 0; sinusoidal annual temperature with a daily swing and a
// clear-sky irradiance arc scaled by season.
struct SyntheticDataConfig {
  HourIndex start = 0;
  int hours = 0;
  double base_le = 180.0; // kWh
  double base_lh = 250.0;
  double daily_e = 0.25, weekly_e = 0.08; // relative harmonic amplitudes
  double daily_h = 0.12, weekly_h = 0.04;
  double workday_factor = 1.15; // multiplies L_e on workdays
  double temp_sensitivity = 6.0; // kWh per degC below t_ref
  double t_ref = 16.0;
  double temp_mean = 10.0, temp_annual = 9.0, temp_daily = 4.0;
  double irr_peak = 0.85; // kW/m^2 clear-sky midsummer noon
  double noise_e = 6.0, noise_h = 8.0; // Gaussian std, kWh
  std::uint64_t seed = 1;

  void validate() const;
};

DemandHistory generate_synthetic_data(const SyntheticDataConfig& cfg);

// What the realization rule could not absorb within the hard TS bounds.
struct ViolationRecord {
  double unserved_kwh = 0.0; // heat deficit left when the storage hit bottom
  double dumped_kwh = 0.0;   // heat surplus left when the storage hit the top
  double total() const { return unserved_kwh + dumped_kwh; }
};

struct RealizedStep {
  double grid_buy = 0.0, grid_sell = 0.0;     // kW
  double ts_charge = 0.0, ts_discharge = 0.0; // kW
  double ts_level = 0.0, es_level = 0.0;      // kWh after the step
  double stage_cost = 0.0;                    // CHF
  ViolationRecord violation;
};

// Settles one hour against the true demands: the electric imbalance goes to
// the grid (unlimited), the thermal imbalance goes to the storage with
// saturation at the hard bounds, and whatever remains is recorded as
// unserved/dumped heat. Writes the successor state to *next.
RealizedStep realize_step(const AppliedInputs& applied, double true_le, double true_lh,
                          const HubState& state, const HubParameters& params,
                          const Tariffs& tariffs, HubState* next);

enum class ControllerKind { Scenario = 0, PdMpc = 1, MeanMpc = 2 };

const char* controller_name(ControllerKind c);

struct SimulationConfig {
  ControllerKind controller = ControllerKind::Scenario;
  int M = 1;            // scenario count (Scenario controller)
  HourIndex start = 0;  // first controlled hour
  int hours = 24;       // controlled hours
  std::uint64_t sample_seed = 1;
  bool antithetic = false;
  SPConfig sp;
  int refresh_every = 24; // hours between conditioning-set refreshes
  int max_consecutive_failures = 3;

  // Called after every successful plan with its apply hour; lets tooling dump
  // the scenario program mid-run. Never called on fallback hours.
  std::function<void(const MpcStepResult&, HourIndex)> plan_observer;

  void validate() const;
};

struct HourRecord {
  HourIndex hour = 0;    // the realized hour
  bool fallback = false; // inputs came from the previous plan, shifted
  AppliedInputs applied;
  double true_le = 0.0, true_lh = 0.0;
  double planned_slack = 0.0; // sigma+ + sigma- of the applied step
  RealizedStep realized;
};

struct ClosedLoopTrace {
  std::vector<HourRecord> hours;
  int solver_failures = 0;
  bool aborted = false; // too many consecutive failures
  double total_cost = 0.0;
  double mean_cost = 0.0; // CHF per realized hour
  int violation_count = 0;
  double violation_kwh = 0.0;
};

// Hour-by-hour receding horizon: sample/solve (per controller), realize
// against the true data, refresh the model conditioning sets every
// `refresh_every` hours. `data` is the ground truth; controllers only see it
// up to the current clock except PdMpc, which reads the future directly.
// `electric`/`heat` may be null for PdMpc. The initial state clock must be
// start - 1 and the data must cover a full 168 h of history before `start`.
ClosedLoopTrace run_closed_loop(const SimulationConfig& cfg, const GPModel* electric,
                                const GPModel* heat, const DemandHistory& data,
                                const HubParameters& params, const Tariffs& tariffs,
                                HubState init);

// Violations below this are numerical flutter, not physics (micro-kWh on a
// multi-MWh storage); the counters ignore them.
inline constexpr double kViolationCountEps = 1e-6;

// Severity histogram bin edges in kWh: (0,1], (1,5], (5,10], (10,25],
// (25,50], (50,100], (100,inf).
inline constexpr std::array<double, 6> kViolationBinEdges{1.0, 5.0, 10.0, 25.0, 50.0, 100.0};

struct SummaryReport {
  int hours = 0;
  double total_cost = 0.0;
  double mean_cost = 0.0;
  int violation_count = 0;
  double violation_kwh = 0.0;
  std::array<int, 7> histogram{};
  std::vector<double> daily_cost; // 24 h blocks, last may be partial
  int solver_failures = 0;
  bool aborted = false;
};

SummaryReport summarize(const ClosedLoopTrace& trace);

std::string summary_json(const SummaryReport& r);

// One row per realized hour; columns documented in the README. Deterministic
// byte output for fixed inputs.
void write_trace_csv(const std::string& path, const ClosedLoopTrace& trace);

} // namespace ehub
