#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ehub/hub_model.hpp"
#include "ehub/lp.hpp"
#include "ehub/sampler.hpp"

namespace ehub {

struct SPConfig {
  int T = 24;
  double rho = 2.0;           // CHF/kWh on the thermal-storage slacks
  bool epigraph = false;      // reformulate the cost before solving
  bool soft_terminal = false; // penalize |es_level_T - es_init| (off by default)
  double terminal_weight = 0.0;
  BranchMode mode = BranchMode::RelaxFirst;
  SolveOptions solver;
};

// Column/row layout of the assembled scenario program.
//
// Variables: a shared set-point block (15 per step, step-major), then one
// recourse block per scenario (5 per step), then the per-step slack pair.
//   |vars| = 15 T + 5 M T + 2 T
// Rows: 7 shared rows per step (CHP hull P/Q, weight simplex, fuel coupling,
// heat-pump coupling, boiler coupling, ES dynamics), then per scenario and
// step: electric balance, heat balance, TS dynamics, soft TS bounds.
//   |rows| = 7 T + 5 M T (+ M epigraph rows when reformulated)
struct SPLayout {
  enum Shared {
    kPpv = 0, kWA, kWB, kWC, kWD, kPchp, kQchp, kFchp,
    kPhp, kQhp, kQgb, kFgb, kEsCharge, kEsDischarge, kEsLevel
  };
  enum Recourse { kGridBuy = 0, kGridSell, kTsCharge, kTsDischarge, kTsLevel };
  enum SharedRow { kRowChpP = 0, kRowChpQ, kRowSimplex, kRowFuel, kRowHp, kRowGb, kRowEsDyn };
  enum ScenarioRow { kRowEBal = 0, kRowHBal, kRowTsDyn, kRowTsLo, kRowTsHi };

  static constexpr int kSharedPerStep = 15;
  static constexpr int kRecoursePerStep = 5;
  static constexpr int kSharedRowsPerStep = 7;
  static constexpr int kScenarioRowsPerStep = 5;

  int T = 0;
  int M = 0;
  HourIndex first_hour = 0; // hour of step 0
  double rho = 0.0;
  double dt = 1.0;
  Eigen::VectorXd price_buy, price_sell, price_gas; // per step

  int term_pos = -1, term_neg = -1, term_row = -1; // soft terminal (optional)
  double terminal_weight = 0.0;

  bool epigraph = false;
  int epi_var = -1;       // index of t
  int epi_row_start = -1; // first of the M cost rows

  int n_vars = 0, n_rows = 0; // totals as assembled

  int shared(int var, int k) const { return k * kSharedPerStep + var; }
  int recourse(int var, int i, int k) const {
    return T * kSharedPerStep + (i * T + k) * kRecoursePerStep + var;
  }
  int slack_pos(int k) const { return T * kSharedPerStep + M * T * kRecoursePerStep + 2 * k; }
  int slack_neg(int k) const { return slack_pos(k) + 1; }
  int shared_row(int row, int k) const { return k * kSharedRowsPerStep + row; }
  int scenario_row(int row, int i, int k) const {
    return T * kSharedRowsPerStep + (i * T + k) * kScenarioRowsPerStep + row;
  }
};

struct SPSolution {
  SetPoints set_points;
  std::vector<RecourseVariables> recourse; // one per scenario
  Eigen::VectorXd slack_pos, slack_neg;    // kWh per step
  double objective = 0.0;                  // solver objective
  SolveStatus status = SolveStatus::Infeasible;
  bool degraded = false; // iteration limit hit, incumbent returned
  long iterations = 0;
  BBStats bb;
  BasisHint basis;
};

// Assembles Eq.-style scenario program: shared set points, per-scenario
// recourse, shared soft TS slacks. `pv_cap` is the dispatchable PV ceiling
// per step (see pv_output). Complementarity pairs: ES charge/discharge per
// step, then grid buy/sell and TS charge/discharge per scenario and step.
void build_scenario_program(const HubState& state, const HubParameters& params,
                            const Tariffs& tariffs,
                            const std::vector<TrajectorySample>& scenarios,
                            const Eigen::VectorXd& pv_cap, const SPConfig& cfg,
                            LinearProgram* lp, std::vector<ComplementarityPair>* pairs,
                            SPLayout* layout);

// Replaces the in-sample mean cost with t subject to per-scenario rows
// cost_i <= t; the slack penalty stays in the objective. The layout records
// the extra variable and rows.
void epigraph_reformulate(LinearProgram* lp, SPLayout* layout);

// Solves the program and checks the solution invariants (balances, soft
// bounds, objective consistency) unless the solve degraded.
SPSolution solve_sp(const LinearProgram& lp, const std::vector<ComplementarityPair>& pairs,
                    const SPLayout& layout, const SPConfig& cfg,
                    const BasisHint* warm = nullptr);

// First-step slice of the shared set points, applied to the plant.
struct AppliedInputs {
  double p_pv = 0.0;
  Eigen::Vector4d chp_weights = Eigen::Vector4d::Zero();
  double p_chp = 0.0, q_chp = 0.0, f_chp = 0.0;
  double p_hp = 0.0, q_hp = 0.0;
  double q_gb = 0.0, f_gb = 0.0;
  double es_charge = 0.0, es_discharge = 0.0;
  double planned_es_level = 0.0;
};

AppliedInputs first_step_inputs(const SPSolution& sol);

// Stable-key JSON dump of a solution (set points, per-scenario recourse,
// slacks, objective, status).
std::string sp_solution_json(const SPSolution& sol);

struct MpcStepResult {
  bool success = false; // solved to optimality (possibly degraded)
  AppliedInputs applied;
  SPSolution sp;
  std::vector<TrajectorySample> scenarios;
  Eigen::VectorXd pv_cap; // effective PV ceiling used per step, kW
  HubState state;         // the state the plan was made from
  SPLayout layout;
};

// One receding-horizon step: sample M trajectories, assemble, solve, return
// the first-step inputs. Failures (infeasible/unbounded/numerical) come back
// with success=false so the caller can fall back to its previous plan.
MpcStepResult mpc_step(const HubState& state, const HubParameters& params,
                       const Tariffs& tariffs, const GPModel& electric, const GPModel& heat,
                       const DemandHistory& history, const WeatherForecast& weather,
                       const SPConfig& cfg, const SamplerConfig& sampler_cfg,
                       const BasisHint* warm = nullptr);

} // namespace ehub
