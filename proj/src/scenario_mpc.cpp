#include "ehub/scenario_mpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ehub {
namespace {

// Large boxes keep the LP bounded without ever binding in sane instances:
// flows (kW) and the epigraph cost variable get 1e5 / 1e9, TS levels 1e6 so
// the soft range ts_max + slack stays interior.
constexpr double kBigFlow = 1e5;
constexpr double kBigLevel = 1e6;
constexpr double kBigCost = 1e9;

double marginal_heat_cost(const HubParameters& p, double buy, double gas) {
  double via_hp = p.cop > 0.0 ? buy / p.cop : buy;
  double via_gb = p.eta_gb > 0.0 ? gas / p.eta_gb : gas;
  return std::max(via_hp, via_gb);
}

Tariffs layout_tariffs(const SPLayout& layout) {
  Tariffs t;
  t.start_hour = layout.first_hour;
  t.buy_series.assign(layout.price_buy.data(), layout.price_buy.data() + layout.T);
  t.sell_series.assign(layout.price_sell.data(), layout.price_sell.data() + layout.T);
  t.gas_series.assign(layout.price_gas.data(), layout.price_gas.data() + layout.T);
  return t;
}

} // namespace

void build_scenario_program(const HubState& state, const HubParameters& params,
                            const Tariffs& tariffs,
                            const std::vector<TrajectorySample>& scenarios,
                            const Eigen::VectorXd& pv_cap, const SPConfig& cfg,
                            LinearProgram* lp, std::vector<ComplementarityPair>* pairs,
                            SPLayout* layout) {
  if (!lp || !pairs || !layout) throw std::invalid_argument("null output argument");
  if (cfg.T < 1) throw std::invalid_argument("horizon must be at least 1");
  if (cfg.rho <= 0.0) throw std::invalid_argument("slack penalty must be positive");
  if (scenarios.empty()) throw std::invalid_argument("need at least one scenario");
  const int T = cfg.T;
  const int M = static_cast<int>(scenarios.size());
  for (int i = 0; i < M; ++i) {
    if (scenarios[i].l_e.size() != T || scenarios[i].l_h.size() != T) {
      std::ostringstream os;
      os << "scenario " << i << " has length " << scenarios[i].l_e.size() << ", expected " << T;
      throw std::invalid_argument(os.str());
    }
  }
  if (pv_cap.size() != T) throw std::invalid_argument("pv_cap must have one entry per step");
  if (cfg.soft_terminal && cfg.terminal_weight < 0.0)
    throw std::invalid_argument("terminal weight must be nonnegative");
  params.validate();

  SPLayout lay;
  lay.T = T;
  lay.M = M;
  lay.first_hour = state.clock + 1;
  lay.rho = cfg.rho;
  lay.dt = params.dt;
  lay.price_buy.resize(T);
  lay.price_sell.resize(T);
  lay.price_gas.resize(T);
  for (int k = 0; k < T; ++k) {
    HourIndex h = lay.first_hour + k;
    lay.price_buy[k] = tariffs.price_buy(h);
    lay.price_sell[k] = tariffs.price_sell(h);
    lay.price_gas[k] = tariffs.price_gas(h);
    double floor = marginal_heat_cost(params, lay.price_buy[k], lay.price_gas[k]);
    if (cfg.rho <= floor) {
      std::ostringstream os;
      os << "slack penalty " << cfg.rho << " must exceed the marginal heat cost " << floor
         << " at hour " << h;
      throw std::invalid_argument(os.str());
    }
  }

  const double dt = params.dt;
  LinearProgram prog;
  std::vector<ComplementarityPair> cp;

  const double q_chp_lo = *std::min_element(params.chp_q.begin(), params.chp_q.end());
  const double q_chp_hi = *std::max_element(params.chp_q.begin(), params.chp_q.end());
  for (int k = 0; k < T; ++k) {
    double pv_hi = std::min(pv_cap[k], params.p_pv_max);
    prog.add_variable(params.p_pv_min, std::max(params.p_pv_min, pv_hi), 0.0);
    for (int j = 0; j < 4; ++j) prog.add_variable(0.0, 1.0, 0.0);
    prog.add_variable(params.p_chp_min, params.p_chp_max, 0.0);
    prog.add_variable(q_chp_lo, q_chp_hi, 0.0);
    prog.add_variable(0.0, kBigFlow, dt * lay.price_gas[k]); // CHP fuel
    prog.add_variable(0.0, kBigFlow, 0.0);                   // HP power
    prog.add_variable(params.q_hp_min, params.q_hp_max, 0.0);
    prog.add_variable(params.q_gb_min, params.q_gb_max, 0.0);
    prog.add_variable(0.0, kBigFlow, dt * lay.price_gas[k]); // GB fuel
    prog.add_variable(0.0, kBigFlow, 0.0);                   // ES charge
    prog.add_variable(0.0, kBigFlow, 0.0);                   // ES discharge
    prog.add_variable(params.es_min, params.es_max, 0.0);
  }
  for (int i = 0; i < M; ++i) {
    for (int k = 0; k < T; ++k) {
      prog.add_variable(0.0, kBigFlow, dt * lay.price_buy[k] / M);
      prog.add_variable(0.0, kBigFlow, -dt * lay.price_sell[k] / M);
      prog.add_variable(0.0, kBigFlow, 0.0); // TS charge
      prog.add_variable(0.0, kBigFlow, 0.0); // TS discharge
      prog.add_variable(-kBigLevel, kBigLevel, 0.0);
    }
  }
  for (int k = 0; k < T; ++k) {
    prog.add_variable(0.0, kBigFlow, cfg.rho); // sigma+
    prog.add_variable(0.0, kBigFlow, cfg.rho); // sigma-
  }
  if (cfg.soft_terminal) {
    lay.terminal_weight = cfg.terminal_weight;
    lay.term_pos = prog.add_variable(0.0, kBigLevel, cfg.terminal_weight);
    lay.term_neg = prog.add_variable(0.0, kBigLevel, cfg.terminal_weight);
  }

  for (int k = 0; k < T; ++k) {
    int r = prog.add_row(RowSense::EQ, 0.0); // CHP electric output on the hull
    prog.add_entry(r, lay.shared(SPLayout::kPchp, k), 1.0);
    for (int j = 0; j < 4; ++j) {
      if (params.chp_p[j] != 0.0)
        prog.add_entry(r, lay.shared(SPLayout::kWA + j, k), -params.chp_p[j]);
    }
    r = prog.add_row(RowSense::EQ, 0.0); // CHP thermal output on the hull
    prog.add_entry(r, lay.shared(SPLayout::kQchp, k), 1.0);
    for (int j = 0; j < 4; ++j) {
      if (params.chp_q[j] != 0.0)
        prog.add_entry(r, lay.shared(SPLayout::kWA + j, k), -params.chp_q[j]);
    }
    r = prog.add_row(RowSense::EQ, 1.0); // weight simplex
    for (int j = 0; j < 4; ++j) prog.add_entry(r, lay.shared(SPLayout::kWA + j, k), 1.0);
    r = prog.add_row(RowSense::EQ, 0.0); // fuel coupling eta*F = P
    prog.add_entry(r, lay.shared(SPLayout::kFchp, k), params.eta_chp);
    prog.add_entry(r, lay.shared(SPLayout::kPchp, k), -1.0);
    r = prog.add_row(RowSense::EQ, 0.0); // heat pump coupling
    prog.add_entry(r, lay.shared(SPLayout::kQhp, k), 1.0);
    prog.add_entry(r, lay.shared(SPLayout::kPhp, k), -params.cop);
    r = prog.add_row(RowSense::EQ, 0.0); // boiler coupling
    prog.add_entry(r, lay.shared(SPLayout::kQgb, k), 1.0);
    prog.add_entry(r, lay.shared(SPLayout::kFgb, k), -params.eta_gb);
    r = prog.add_row(RowSense::EQ, k == 0 ? params.gamma_es * state.es_level : 0.0);
    prog.add_entry(r, lay.shared(SPLayout::kEsLevel, k), 1.0);
    prog.add_entry(r, lay.shared(SPLayout::kEsCharge, k), -params.eta_es * dt);
    prog.add_entry(r, lay.shared(SPLayout::kEsDischarge, k), dt / params.eta_es);
    if (k > 0) prog.add_entry(r, lay.shared(SPLayout::kEsLevel, k - 1), -params.gamma_es);
  }

  for (int i = 0; i < M; ++i) {
    for (int k = 0; k < T; ++k) {
      int r = prog.add_row(RowSense::EQ, scenarios[i].l_e[k]); // electric balance
      prog.add_entry(r, lay.shared(SPLayout::kPpv, k), 1.0);
      prog.add_entry(r, lay.shared(SPLayout::kPchp, k), 1.0);
      prog.add_entry(r, lay.shared(SPLayout::kPhp, k), -1.0);
      prog.add_entry(r, lay.recourse(SPLayout::kGridBuy, i, k), 1.0);
      prog.add_entry(r, lay.recourse(SPLayout::kGridSell, i, k), -1.0);
      prog.add_entry(r, lay.shared(SPLayout::kEsDischarge, k), 1.0);
      prog.add_entry(r, lay.shared(SPLayout::kEsCharge, k), -1.0);

      r = prog.add_row(RowSense::EQ, scenarios[i].l_h[k]); // heat balance
      prog.add_entry(r, lay.shared(SPLayout::kQgb, k), 1.0);
      prog.add_entry(r, lay.shared(SPLayout::kQchp, k), 1.0);
      prog.add_entry(r, lay.shared(SPLayout::kQhp, k), 1.0);
      prog.add_entry(r, lay.recourse(SPLayout::kTsDischarge, i, k), 1.0);
      prog.add_entry(r, lay.recourse(SPLayout::kTsCharge, i, k), -1.0);

      r = prog.add_row(RowSense::EQ, k == 0 ? params.gamma_ts * state.ts_level : 0.0);
      prog.add_entry(r, lay.recourse(SPLayout::kTsLevel, i, k), 1.0);
      prog.add_entry(r, lay.recourse(SPLayout::kTsCharge, i, k), -params.eta_ts * dt);
      prog.add_entry(r, lay.recourse(SPLayout::kTsDischarge, i, k), dt / params.eta_ts);
      if (k > 0) prog.add_entry(r, lay.recourse(SPLayout::kTsLevel, i, k - 1), -params.gamma_ts);

      r = prog.add_row(RowSense::GE, params.ts_min); // soft lower TS bound
      prog.add_entry(r, lay.recourse(SPLayout::kTsLevel, i, k), 1.0);
      prog.add_entry(r, lay.slack_neg(k), 1.0);

      r = prog.add_row(RowSense::LE, params.ts_max); // soft upper TS bound
      prog.add_entry(r, lay.recourse(SPLayout::kTsLevel, i, k), 1.0);
      prog.add_entry(r, lay.slack_pos(k), -1.0);
    }
  }
  if (cfg.soft_terminal) {
    lay.term_row = prog.add_row(RowSense::EQ, state.es_level);
    prog.add_entry(lay.term_row, lay.shared(SPLayout::kEsLevel, T - 1), 1.0);
    prog.add_entry(lay.term_row, lay.term_pos, -1.0);
    prog.add_entry(lay.term_row, lay.term_neg, 1.0);
  }

  for (int k = 0; k < T; ++k) {
    cp.push_back({lay.shared(SPLayout::kEsCharge, k), lay.shared(SPLayout::kEsDischarge, k)});
  }
  for (int i = 0; i < M; ++i) {
    for (int k = 0; k < T; ++k) {
      cp.push_back({lay.recourse(SPLayout::kGridBuy, i, k), lay.recourse(SPLayout::kGridSell, i, k)});
      cp.push_back({lay.recourse(SPLayout::kTsCharge, i, k), lay.recourse(SPLayout::kTsDischarge, i, k)});
    }
  }

  lay.n_vars = prog.num_vars;
  lay.n_rows = prog.num_rows();
  prog.validate();
  *lp = std::move(prog);
  *pairs = std::move(cp);
  *layout = lay;
}

void epigraph_reformulate(LinearProgram* lp, SPLayout* layout) {
  if (!lp || !layout) throw std::invalid_argument("null argument");
  if (layout->epigraph) throw std::invalid_argument("program is already in epigraph form");
  const int T = layout->T;
  const int M = layout->M;
  const double dt = layout->dt;
  for (int k = 0; k < T; ++k) {
    lp->cost[static_cast<std::size_t>(layout->shared(SPLayout::kFchp, k))] = 0.0;
    lp->cost[static_cast<std::size_t>(layout->shared(SPLayout::kFgb, k))] = 0.0;
  }
  for (int i = 0; i < M; ++i) {
    for (int k = 0; k < T; ++k) {
      lp->cost[static_cast<std::size_t>(layout->recourse(SPLayout::kGridBuy, i, k))] = 0.0;
      lp->cost[static_cast<std::size_t>(layout->recourse(SPLayout::kGridSell, i, k))] = 0.0;
    }
  }
  layout->epi_var = lp->add_variable(-kBigCost, kBigCost, 1.0);
  layout->epi_row_start = lp->num_rows();
  for (int i = 0; i < M; ++i) {
    int r = lp->add_row(RowSense::LE, 0.0); // scenario cost <= t
    for (int k = 0; k < T; ++k) {
      double gas = dt * layout->price_gas[k];
      if (gas != 0.0) {
        lp->add_entry(r, layout->shared(SPLayout::kFchp, k), gas);
        lp->add_entry(r, layout->shared(SPLayout::kFgb, k), gas);
      }
      if (layout->price_buy[k] != 0.0)
        lp->add_entry(r, layout->recourse(SPLayout::kGridBuy, i, k), dt * layout->price_buy[k]);
      if (layout->price_sell[k] != 0.0)
        lp->add_entry(r, layout->recourse(SPLayout::kGridSell, i, k), -dt * layout->price_sell[k]);
    }
    lp->add_entry(r, layout->epi_var, -1.0);
  }
  layout->epigraph = true;
  layout->n_vars = lp->num_vars;
  layout->n_rows = lp->num_rows();
  lp->validate();
}

namespace {

void extract_primal(const Eigen::VectorXd& x, const SPLayout& lay, SPSolution* sol) {
  const int T = lay.T;
  const int M = lay.M;
  SetPoints sp = SetPoints::zero(T);
  for (int k = 0; k < T; ++k) {
    sp.p_pv[k] = x[lay.shared(SPLayout::kPpv, k)];
    for (int j = 0; j < 4; ++j) sp.chp_weights(j, k) = x[lay.shared(SPLayout::kWA + j, k)];
    sp.p_chp[k] = x[lay.shared(SPLayout::kPchp, k)];
    sp.q_chp[k] = x[lay.shared(SPLayout::kQchp, k)];
    sp.f_chp[k] = x[lay.shared(SPLayout::kFchp, k)];
    sp.p_hp[k] = x[lay.shared(SPLayout::kPhp, k)];
    sp.q_hp[k] = x[lay.shared(SPLayout::kQhp, k)];
    sp.q_gb[k] = x[lay.shared(SPLayout::kQgb, k)];
    sp.f_gb[k] = x[lay.shared(SPLayout::kFgb, k)];
    sp.es_charge[k] = x[lay.shared(SPLayout::kEsCharge, k)];
    sp.es_discharge[k] = x[lay.shared(SPLayout::kEsDischarge, k)];
    sp.es_level[k] = x[lay.shared(SPLayout::kEsLevel, k)];
  }
  sol->set_points = std::move(sp);
  sol->recourse.assign(static_cast<std::size_t>(M), RecourseVariables::zero(T));
  for (int i = 0; i < M; ++i) {
    RecourseVariables& rec = sol->recourse[static_cast<std::size_t>(i)];
    for (int k = 0; k < T; ++k) {
      rec.grid_buy[k] = x[lay.recourse(SPLayout::kGridBuy, i, k)];
      rec.grid_sell[k] = x[lay.recourse(SPLayout::kGridSell, i, k)];
      rec.ts_charge[k] = x[lay.recourse(SPLayout::kTsCharge, i, k)];
      rec.ts_discharge[k] = x[lay.recourse(SPLayout::kTsDischarge, i, k)];
      rec.ts_level[k] = x[lay.recourse(SPLayout::kTsLevel, i, k)];
    }
  }
  sol->slack_pos.resize(T);
  sol->slack_neg.resize(T);
  for (int k = 0; k < T; ++k) {
    sol->slack_pos[k] = x[lay.slack_pos(k)];
    sol->slack_neg[k] = x[lay.slack_neg(k)];
  }
}

void check_invariants(const SPSolution& sol, const LinearProgram& lp, const SPLayout& lay,
                      const Eigen::VectorXd& x) {
  const int T = lay.T;
  const int M = lay.M;
  for (int k = 0; k < T; ++k) {
    if (sol.slack_pos[k] < -1e-9 || sol.slack_neg[k] < -1e-9)
      throw std::runtime_error("negative slack in scenario-program solution");
  }
  const Tariffs tariffs = layout_tariffs(lay);
  double mean_cost = 0.0;
  double max_cost = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < M; ++i) {
    const RecourseVariables& rec = sol.recourse[static_cast<std::size_t>(i)];
    double cost_i = 0.0;
    for (int k = 0; k < T; ++k) {
      double le = lp.rhs[static_cast<std::size_t>(lay.scenario_row(SPLayout::kRowEBal, i, k))];
      double lh = lp.rhs[static_cast<std::size_t>(lay.scenario_row(SPLayout::kRowHBal, i, k))];
      auto [re, rh] = balance_residuals(sol.set_points, rec, le, lh, k);
      if (std::abs(re) > 1e-6 || std::abs(rh) > 1e-6)
        throw std::runtime_error("scenario-program balance residual exceeds 1e-6");
      double lo = lp.rhs[static_cast<std::size_t>(lay.scenario_row(SPLayout::kRowTsLo, i, k))];
      double hi = lp.rhs[static_cast<std::size_t>(lay.scenario_row(SPLayout::kRowTsHi, i, k))];
      if (rec.ts_level[k] < lo - sol.slack_neg[k] - 1e-6 ||
          rec.ts_level[k] > hi + sol.slack_pos[k] + 1e-6)
        throw std::runtime_error("TS level escapes the softened bounds");
      cost_i += stage_cost(sol.set_points, rec, tariffs, k, lay.first_hour + k, lay.dt);
    }
    mean_cost += cost_i / M;
    max_cost = std::max(max_cost, cost_i);
  }
  double extras = lay.rho * (sol.slack_pos.sum() + sol.slack_neg.sum());
  if (lay.term_pos >= 0) extras += lay.terminal_weight * (x[lay.term_pos] + x[lay.term_neg]);
  double expected;
  if (lay.epigraph) {
    double t = x[lay.epi_var];
    if (std::abs(max_cost - t) > 1e-6 * (1.0 + std::abs(t)))
      throw std::runtime_error("epigraph variable does not match the max scenario cost");
    expected = t + extras;
  } else {
    expected = mean_cost + extras;
  }
  if (std::abs(expected - sol.objective) > 1e-6 * (1.0 + std::abs(sol.objective)))
    throw std::runtime_error("scenario-program objective fails the recomputation check");
}

} // namespace

SPSolution solve_sp(const LinearProgram& lp, const std::vector<ComplementarityPair>& pairs,
                    const SPLayout& layout, const SPConfig& cfg, const BasisHint* warm) {
  SolveResult res = solve_with_complementarity(lp, pairs, cfg.mode, cfg.solver, warm);
  SPSolution sol;
  sol.status = res.status;
  sol.degraded = res.status == SolveStatus::IterationLimit;
  sol.objective = res.objective;
  sol.iterations = res.iterations;
  sol.bb = res.bb;
  sol.basis = std::move(res.basis);
  bool have_primal = res.x.size() == lp.num_vars;
  if ((res.status == SolveStatus::Optimal || sol.degraded) && have_primal) {
    extract_primal(res.x, layout, &sol);
    if (!sol.degraded) check_invariants(sol, lp, layout, res.x);
  }
  return sol;
}

AppliedInputs first_step_inputs(const SPSolution& sol) {
  if (sol.set_points.horizon() < 1)
    throw std::invalid_argument("solution carries no set points");
  AppliedInputs a;
  a.p_pv = sol.set_points.p_pv[0];
  Eigen::Vector4d w = sol.set_points.chp_weights.col(0).cwiseMax(0.0);
  double total = w.sum();
  a.chp_weights = total > 0.0 ? Eigen::Vector4d(w / total) : Eigen::Vector4d(1.0, 0.0, 0.0, 0.0);
  a.p_chp = sol.set_points.p_chp[0];
  a.q_chp = sol.set_points.q_chp[0];
  a.f_chp = sol.set_points.f_chp[0];
  a.p_hp = sol.set_points.p_hp[0];
  a.q_hp = sol.set_points.q_hp[0];
  a.q_gb = sol.set_points.q_gb[0];
  a.f_gb = sol.set_points.f_gb[0];
  a.es_charge = sol.set_points.es_charge[0];
  a.es_discharge = sol.set_points.es_discharge[0];
  a.planned_es_level = sol.set_points.es_level[0];
  return a;
}

std::string sp_solution_json(const SPSolution& sol) {
  using nlohmann::json;
  auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  json j;
  j["schema_version"] = 1;
  j["type"] = "sp_solution";
  j["status"] = status_name(sol.status);
  j["degraded"] = sol.degraded;
  j["objective"] = sol.objective;
  j["iterations"] = sol.iterations;
  json sp;
  sp["p_pv"] = vec(sol.set_points.p_pv);
  std::vector<std::vector<double>> weights;
  for (int k = 0; k < sol.set_points.horizon(); ++k) {
    Eigen::Vector4d c = sol.set_points.chp_weights.col(k);
    weights.push_back({c[0], c[1], c[2], c[3]});
  }
  sp["chp_weights"] = weights;
  sp["p_chp"] = vec(sol.set_points.p_chp);
  sp["q_chp"] = vec(sol.set_points.q_chp);
  sp["f_chp"] = vec(sol.set_points.f_chp);
  sp["p_hp"] = vec(sol.set_points.p_hp);
  sp["q_hp"] = vec(sol.set_points.q_hp);
  sp["q_gb"] = vec(sol.set_points.q_gb);
  sp["f_gb"] = vec(sol.set_points.f_gb);
  sp["es_charge"] = vec(sol.set_points.es_charge);
  sp["es_discharge"] = vec(sol.set_points.es_discharge);
  sp["es_level"] = vec(sol.set_points.es_level);
  j["set_points"] = sp;
  json recs = json::array();
  for (const RecourseVariables& rec : sol.recourse) {
    json r;
    r["grid_buy"] = vec(rec.grid_buy);
    r["grid_sell"] = vec(rec.grid_sell);
    r["ts_charge"] = vec(rec.ts_charge);
    r["ts_discharge"] = vec(rec.ts_discharge);
    r["ts_level"] = vec(rec.ts_level);
    recs.push_back(r);
  }
  j["recourse"] = recs;
  j["slack_pos"] = vec(sol.slack_pos);
  j["slack_neg"] = vec(sol.slack_neg);
  return j.dump(2) + "\n";
}

MpcStepResult mpc_step(const HubState& state, const HubParameters& params,
                       const Tariffs& tariffs, const GPModel& electric, const GPModel& heat,
                       const DemandHistory& history, const WeatherForecast& weather,
                       const SPConfig& cfg, const SamplerConfig& sampler_cfg,
                       const BasisHint* warm) {
  if (history.size() == 0 || state.clock != history.end() - 1) {
    std::ostringstream os;
    os << "state clock " << state.clock << " must equal the last history hour "
       << (history.size() == 0 ? -1 : history.end() - 1);
    throw std::invalid_argument(os.str());
  }
  MpcStepResult out;
  out.state = state;
  SamplerConfig scfg = sampler_cfg;
  scfg.T = cfg.T; // the program horizon governs
  out.scenarios = sample_trajectories(electric, heat, history, weather, scfg);

  out.pv_cap.resize(cfg.T);
  for (int k = 0; k < cfg.T; ++k) out.pv_cap[k] = pv_output(weather.irradiance[k], params);

  LinearProgram lp;
  std::vector<ComplementarityPair> pairs;
  build_scenario_program(state, params, tariffs, out.scenarios, out.pv_cap, cfg, &lp, &pairs,
                         &out.layout);
  if (cfg.epigraph) epigraph_reformulate(&lp, &out.layout);
  try {
    out.sp = solve_sp(lp, pairs, out.layout, cfg, warm);
  } catch (const std::exception&) {
    out.success = false;
    return out;
  }
  bool usable = out.sp.set_points.horizon() == cfg.T;
  out.success = usable && (out.sp.status == SolveStatus::Optimal || out.sp.degraded);
  if (out.success) out.applied = first_step_inputs(out.sp);
  return out;
}

} // namespace ehub
