#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "ehub/time_utils.hpp"

namespace ehub {

// Converter and storage parameters of the hub. Storage conventions follow the
// dynamics level' = gamma*level + eta*charge*dt - discharge*dt/eta, i.e. the
// "charge" flow fills the storage and the "discharge" flow feeds the hub.
struct HubParameters {
  // CHP operating region: convex hull of four (P, Q) vertices. Fuel draw is
  // P/eta_chp.
  std::array<double, 4> chp_p{};
  std::array<double, 4> chp_q{};
  double eta_chp = 0.0;

  double cop = 0.0;    // heat pump: Q_hp = cop * P_hp
  double eta_gb = 0.0; // boiler:    Q_gb = eta_gb * F_gb

  double eta_pv = 0.0; // PV ceiling: min(eta_pv * irradiance * a_pv, p_pv_max)
  double a_pv = 0.0;   // m^2

  double p_chp_min = 0.0, p_chp_max = 0.0;
  double q_hp_min = 0.0, q_hp_max = 0.0;
  double q_gb_min = 0.0, q_gb_max = 0.0;
  double p_pv_min = 0.0, p_pv_max = 0.0;

  double eta_es = 0.0, gamma_es = 0.0, es_min = 0.0, es_max = 0.0; // kWh bounds
  double eta_ts = 0.0, gamma_ts = 0.0, ts_min = 0.0, ts_max = 0.0; // kWh bounds

  double dt = 1.0; // hours per step

  static HubParameters defaults();
  void validate() const; // throws std::invalid_argument with the failing field
};

// Prices in CHF/kWh. Flat values unless a series is attached; a series covers
// [start_hour, start_hour + size) on the hour index and lookups outside it
// throw.
struct Tariffs {
  double flat_buy = 0.20;
  double flat_sell = 0.06;
  double flat_gas = 0.11;

  HourIndex start_hour = 0;
  std::vector<double> buy_series;
  std::vector<double> sell_series;
  std::vector<double> gas_series;

  double price_buy(HourIndex k) const;
  double price_sell(HourIndex k) const;
  double price_gas(HourIndex k) const;

  bool has_series() const { return !buy_series.empty(); }
  void validate() const;
};

struct HubState {
  double es_level = 0.0; // kWh
  double ts_level = 0.0; // kWh
  HourIndex clock = 0;
};

// Shared (first-stage) decisions, one entry per step of the horizon.
struct SetPoints {
  Eigen::VectorXd p_pv;
  Eigen::MatrixXd chp_weights; // 4 x T, columns on the unit simplex
  Eigen::VectorXd p_chp, q_chp, f_chp;
  Eigen::VectorXd p_hp, q_hp;
  Eigen::VectorXd q_gb, f_gb;
  Eigen::VectorXd es_charge, es_discharge, es_level;

  int horizon() const { return static_cast<int>(p_pv.size()); }
  static SetPoints zero(int T);
};

// Per-scenario recourse trajectory.
struct RecourseVariables {
  Eigen::VectorXd grid_buy, grid_sell;       // kW
  Eigen::VectorXd ts_charge, ts_discharge;   // kW
  Eigen::VectorXd ts_level;                  // kWh

  int horizon() const { return static_cast<int>(grid_buy.size()); }
  static RecourseVariables zero(int T);
};

struct ChpOutput {
  double p;    // kW electrical
  double q;    // kW thermal
  double fuel; // kW gas draw
};

// P = sum w_j P_j, Q = sum w_j Q_j, F = P / eta_chp. Weights must lie on the
// unit simplex within 1e-9.
ChpOutput chp_output(const Eigen::Vector4d& weights, const HubParameters& params);

// Q_hp = cop * P_hp and Q_gb = eta_gb * F_gb; negative inputs rejected.
std::pair<double, double> hp_gb_output(double p_hp, double f_gb, const HubParameters& params);

// Dispatchable PV ceiling for a given irradiance in kW/m^2.
double pv_output(double irradiance, const HubParameters& params);

// One storage transition: level' = gamma*level + eta*outflow*dt - inflow*dt/eta.
// "outflow" charges the storage, "inflow" discharges it into the hub.
double storage_step(double level, double inflow, double outflow, double eta, double gamma,
                    double dt);

// Supply-minus-demand residuals of the two power balances at step k:
//   r_e = P_pv + P_chp - P_hp + (grid_buy - grid_sell) + (es_discharge - es_charge) - L_e
//   r_h = Q_gb + Q_chp + Q_hp + (ts_discharge - ts_charge) - L_h
std::pair<double, double> balance_residuals(const SetPoints& sp, const RecourseVariables& rec,
                                            double load_e, double load_h, int k);

// price_buy*grid_buy - price_sell*grid_sell + price_gas*(f_chp + f_gb), scaled
// by dt; `hour` is the absolute hour used for the tariff lookup.
double stage_cost(const SetPoints& sp, const RecourseVariables& rec, const Tariffs& tariffs,
                  int k, HourIndex hour, double dt = 1.0);

} // namespace ehub
