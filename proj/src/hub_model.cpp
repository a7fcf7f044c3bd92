#include "ehub/hub_model.hpp"

#include <cmath>
#include <stdexcept>

namespace ehub {

HubParameters HubParameters::defaults() {
  HubParameters p;
  p.chp_p = {120.0, 106.0, 252.0, 305.0};
  p.chp_q = {0.0, 171.0, 408.0, 0.0};
  p.eta_chp = 0.36;
  p.cop = 4.5;
  p.eta_gb = 0.78;
  p.eta_pv = 0.15;
  p.a_pv = 3000.0;
  p.p_chp_min = 106.0;
  p.p_chp_max = 305.0;
  p.q_hp_min = 0.0;
  p.q_hp_max = 120.0;
  p.q_gb_min = 0.0;
  p.q_gb_max = 120.0;
  p.p_pv_min = 0.0;
  p.p_pv_max = 400.0;
  p.eta_es = 0.95;
  p.gamma_es = 0.999;
  p.es_min = 40.0;
  p.es_max = 250.0;
  p.eta_ts = 0.99;
  p.gamma_ts = 0.992;
  p.ts_min = 0.0;
  p.ts_max = 4800.0;
  p.dt = 1.0;
  return p;
}

namespace {
void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("hub parameters: ") + what);
}
} // namespace

void HubParameters::validate() const {
  require(eta_chp > 0 && eta_chp <= 1, "eta_chp must be in (0,1]");
  require(cop > 0, "cop must be positive");
  require(eta_gb > 0 && eta_gb <= 1, "eta_gb must be in (0,1]");
  require(eta_pv > 0 && eta_pv <= 1, "eta_pv must be in (0,1]");
  require(a_pv > 0, "a_pv must be positive");
  require(eta_es > 0 && eta_es <= 1, "eta_es must be in (0,1]");
  require(eta_ts > 0 && eta_ts <= 1, "eta_ts must be in (0,1]");
  require(gamma_es > 0 && gamma_es <= 1, "gamma_es must be in (0,1]");
  require(gamma_ts > 0 && gamma_ts <= 1, "gamma_ts must be in (0,1]");
  require(p_chp_min <= p_chp_max, "p_chp_min must not exceed p_chp_max");
  require(q_hp_min <= q_hp_max, "q_hp_min must not exceed q_hp_max");
  require(q_gb_min <= q_gb_max, "q_gb_min must not exceed q_gb_max");
  require(p_pv_min <= p_pv_max, "p_pv_min must not exceed p_pv_max");
  require(es_min <= es_max, "es_min must not exceed es_max");
  require(ts_min <= ts_max, "ts_min must not exceed ts_max");
  require(dt > 0, "dt must be positive");
  for (double pj : chp_p)
    require(pj >= p_chp_min - 1e-12 && pj <= p_chp_max + 1e-12,
            "CHP vertex P outside [p_chp_min, p_chp_max]");
}

namespace {
double series_at(const std::vector<double>& v, double flat, HourIndex start, HourIndex k) {
  if (v.empty()) return flat;
  const HourIndex off = k - start;
  if (off < 0 || off >= static_cast<HourIndex>(v.size()))
    throw std::out_of_range("tariff lookup at hour " + std::to_string(k) +
                            " outside loaded series");
  return v[static_cast<std::size_t>(off)];
}
} // namespace

double Tariffs::price_buy(HourIndex k) const { return series_at(buy_series, flat_buy, start_hour, k); }
double Tariffs::price_sell(HourIndex k) const { return series_at(sell_series, flat_sell, start_hour, k); }
double Tariffs::price_gas(HourIndex k) const { return series_at(gas_series, flat_gas, start_hour, k); }

void Tariffs::validate() const {
  auto nonneg = [](double x) { return x >= 0.0; };
  if (!nonneg(flat_buy) || !nonneg(flat_sell) || !nonneg(flat_gas))
    throw std::invalid_argument("tariffs: prices must be nonnegative");
  if (flat_sell > flat_buy)
    throw std::invalid_argument("tariffs: price_sell must not exceed price_buy");
  if (buy_series.size() != sell_series.size() || buy_series.size() != gas_series.size())
    throw std::invalid_argument("tariffs: series lengths differ");
  for (std::size_t i = 0; i < buy_series.size(); ++i) {
    if (!nonneg(buy_series[i]) || !nonneg(sell_series[i]) || !nonneg(gas_series[i]))
      throw std::invalid_argument("tariffs: prices must be nonnegative");
    if (sell_series[i] > buy_series[i])
      throw std::invalid_argument("tariffs: price_sell must not exceed price_buy");
  }
}

SetPoints SetPoints::zero(int T) {
  SetPoints s;
  s.p_pv = Eigen::VectorXd::Zero(T);
  s.chp_weights = Eigen::MatrixXd::Zero(4, T);
  s.p_chp = Eigen::VectorXd::Zero(T);
  s.q_chp = Eigen::VectorXd::Zero(T);
  s.f_chp = Eigen::VectorXd::Zero(T);
  s.p_hp = Eigen::VectorXd::Zero(T);
  s.q_hp = Eigen::VectorXd::Zero(T);
  s.q_gb = Eigen::VectorXd::Zero(T);
  s.f_gb = Eigen::VectorXd::Zero(T);
  s.es_charge = Eigen::VectorXd::Zero(T);
  s.es_discharge = Eigen::VectorXd::Zero(T);
  s.es_level = Eigen::VectorXd::Zero(T);
  return s;
}

RecourseVariables RecourseVariables::zero(int T) {
  RecourseVariables r;
  r.grid_buy = Eigen::VectorXd::Zero(T);
  r.grid_sell = Eigen::VectorXd::Zero(T);
  r.ts_charge = Eigen::VectorXd::Zero(T);
  r.ts_discharge = Eigen::VectorXd::Zero(T);
  r.ts_level = Eigen::VectorXd::Zero(T);
  return r;
}

ChpOutput chp_output(const Eigen::Vector4d& weights, const HubParameters& params) {
  for (int j = 0; j < 4; ++j)
    if (weights[j] < -1e-9)
      throw std::invalid_argument("chp_output: negative simplex weight");
  if (std::abs(weights.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("chp_output: weights must sum to 1");
  ChpOutput out{0.0, 0.0, 0.0};
  for (int j = 0; j < 4; ++j) {
    out.p += weights[j] * params.chp_p[static_cast<std::size_t>(j)];
    out.q += weights[j] * params.chp_q[static_cast<std::size_t>(j)];
  }
  out.fuel = out.p / params.eta_chp;
  return out;
}

std::pair<double, double> hp_gb_output(double p_hp, double f_gb, const HubParameters& params) {
  if (p_hp < 0 || f_gb < 0) throw std::invalid_argument("hp_gb_output: negative input");
  return {params.cop * p_hp, params.eta_gb * f_gb};
}

double pv_output(double irradiance, const HubParameters& params) {
  if (irradiance < 0) throw std::invalid_argument("pv_output: negative irradiance");
  return std::min(params.eta_pv * irradiance * params.a_pv, params.p_pv_max);
}

double storage_step(double level, double inflow, double outflow, double eta, double gamma,
                    double dt) {
  return gamma * level + eta * outflow * dt - inflow * dt / eta;
}

std::pair<double, double> balance_residuals(const SetPoints& sp, const RecourseVariables& rec,
                                            double load_e, double load_h, int k) {
  const double r_e = sp.p_pv[k] + sp.p_chp[k] - sp.p_hp[k] + rec.grid_buy[k] - rec.grid_sell[k] +
                     sp.es_discharge[k] - sp.es_charge[k] - load_e;
  const double r_h = sp.q_gb[k] + sp.q_chp[k] + sp.q_hp[k] + rec.ts_discharge[k] -
                     rec.ts_charge[k] - load_h;
  return {r_e, r_h};
}

double stage_cost(const SetPoints& sp, const RecourseVariables& rec, const Tariffs& tariffs,
                  int k, HourIndex hour, double dt) {
  return dt * (tariffs.price_buy(hour) * rec.grid_buy[k] -
               tariffs.price_sell(hour) * rec.grid_sell[k] +
               tariffs.price_gas(hour) * (sp.f_chp[k] + sp.f_gb[k]));
}

} // namespace ehub
