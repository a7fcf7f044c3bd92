#include "ehub/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ehub/csv.hpp"

namespace ehub {

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return j;
}

namespace {
const Json* walk(const Json& root, const std::string& dotted) {
  const Json* cur = &root;
  std::size_t pos = 0;
  while (pos <= dotted.size()) {
    const std::size_t dot = dotted.find('.', pos);
    const std::string key = dotted.substr(pos, dot == std::string::npos ? dot : dot - pos);
    if (!cur->is_object() || !cur->contains(key)) return nullptr;
    cur = &(*cur)[key];
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  return cur;
}

[[noreturn]] void missing(const std::string& path) {
  throw std::invalid_argument("missing config key '" + path + "'");
}
} // namespace

bool cfg_has(const Json& root, const std::string& dotted_path) {
  return walk(root, dotted_path) != nullptr;
}

double cfg_num(const Json& root, const std::string& dotted_path) {
  const Json* v = walk(root, dotted_path);
  if (!v) missing(dotted_path);
  if (!v->is_number())
    throw std::invalid_argument("config key '" + dotted_path + "' must be a number");
  return v->get<double>();
}

double cfg_num_or(const Json& root, const std::string& dotted_path, double fallback) {
  return cfg_has(root, dotted_path) ? cfg_num(root, dotted_path) : fallback;
}

std::string cfg_str(const Json& root, const std::string& dotted_path) {
  const Json* v = walk(root, dotted_path);
  if (!v) missing(dotted_path);
  if (!v->is_string())
    throw std::invalid_argument("config key '" + dotted_path + "' must be a string");
  return v->get<std::string>();
}

std::string cfg_str_or(const Json& root, const std::string& dotted_path,
                       const std::string& fallback) {
  return cfg_has(root, dotted_path) ? cfg_str(root, dotted_path) : fallback;
}

bool cfg_bool_or(const Json& root, const std::string& dotted_path, bool fallback) {
  const Json* v = walk(root, dotted_path);
  if (!v) return fallback;
  if (!v->is_boolean())
    throw std::invalid_argument("config key '" + dotted_path + "' must be a boolean");
  return v->get<bool>();
}

std::vector<double> cfg_num_list(const Json& root, const std::string& dotted_path) {
  const Json* v = walk(root, dotted_path);
  if (!v) missing(dotted_path);
  if (!v->is_array())
    throw std::invalid_argument("config key '" + dotted_path + "' must be an array of numbers");
  std::vector<double> out;
  for (const Json& e : *v) {
    if (!e.is_number())
      throw std::invalid_argument("config key '" + dotted_path + "' must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<std::string> cfg_str_list(const Json& root, const std::string& dotted_path) {
  const Json* v = walk(root, dotted_path);
  if (!v) missing(dotted_path);
  if (!v->is_array())
    throw std::invalid_argument("config key '" + dotted_path + "' must be an array of strings");
  std::vector<std::string> out;
  for (const Json& e : *v) {
    if (!e.is_string())
      throw std::invalid_argument("config key '" + dotted_path + "' must be an array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

Tariffs load_tariff_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  const int ct = t.require_column("timestamp");
  const int cb = t.require_column("price_buy");
  const int cs = t.require_column("price_sell");
  const int cg = t.require_column("price_gas");
  if (t.rows.empty()) throw std::invalid_argument("tariff CSV '" + path + "' has no rows");
  Tariffs tf;
  tf.start_hour = parse_hour(t.rows[0][static_cast<std::size_t>(ct)]);
  tf.buy_series.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    const HourIndex h = parse_hour(r[static_cast<std::size_t>(ct)]);
    if (h != tf.start_hour + static_cast<HourIndex>(i))
      throw std::invalid_argument("tariff CSV '" + path + "': rows must be consecutive hours");
    tf.buy_series.push_back(std::stod(r[static_cast<std::size_t>(cb)]));
    tf.sell_series.push_back(std::stod(r[static_cast<std::size_t>(cs)]));
    tf.gas_series.push_back(std::stod(r[static_cast<std::size_t>(cg)]));
  }
  tf.validate();
  return tf;
}

HubConfig parse_hub_config(const Json& root) {
  static const std::set<std::string> hub_keys = {
      "P_A", "P_B", "P_C", "P_D", "Q_A", "Q_B", "Q_C", "Q_D",
      "eta_chp", "cop", "eta_gb", "eta_pv", "a_pv",
      "P_chp_min", "P_chp_max", "Q_hp_min", "Q_hp_max", "Q_gb_min", "Q_gb_max",
      "P_pv_min", "P_pv_max",
      "eta_es", "gamma_es", "P_es_min", "P_es_max",
      "eta_ts", "gamma_ts", "Q_ts_min", "Q_ts_max",
      "dt_hours"};
  const Json* hub = walk(root, "hub");
  if (!hub) missing("hub");
  for (auto it = hub->begin(); it != hub->end(); ++it)
    if (!hub_keys.count(it.key()))
      throw std::invalid_argument("unknown config key 'hub." + it.key() + "'");

  HubConfig c;
  HubParameters& p = c.params;
  p.chp_p = {cfg_num(root, "hub.P_A"), cfg_num(root, "hub.P_B"), cfg_num(root, "hub.P_C"),
             cfg_num(root, "hub.P_D")};
  p.chp_q = {cfg_num(root, "hub.Q_A"), cfg_num(root, "hub.Q_B"), cfg_num(root, "hub.Q_C"),
             cfg_num(root, "hub.Q_D")};
  p.eta_chp = cfg_num(root, "hub.eta_chp");
  p.cop = cfg_num(root, "hub.cop");
  p.eta_gb = cfg_num(root, "hub.eta_gb");
  p.eta_pv = cfg_num(root, "hub.eta_pv");
  p.a_pv = cfg_num(root, "hub.a_pv");
  p.p_chp_min = cfg_num(root, "hub.P_chp_min");
  p.p_chp_max = cfg_num(root, "hub.P_chp_max");
  p.q_hp_min = cfg_num(root, "hub.Q_hp_min");
  p.q_hp_max = cfg_num(root, "hub.Q_hp_max");
  p.q_gb_min = cfg_num(root, "hub.Q_gb_min");
  p.q_gb_max = cfg_num(root, "hub.Q_gb_max");
  p.p_pv_min = cfg_num(root, "hub.P_pv_min");
  p.p_pv_max = cfg_num(root, "hub.P_pv_max");
  p.eta_es = cfg_num(root, "hub.eta_es");
  p.gamma_es = cfg_num(root, "hub.gamma_es");
  p.es_min = cfg_num(root, "hub.P_es_min");
  p.es_max = cfg_num(root, "hub.P_es_max");
  p.eta_ts = cfg_num(root, "hub.eta_ts");
  p.gamma_ts = cfg_num(root, "hub.gamma_ts");
  p.ts_min = cfg_num(root, "hub.Q_ts_min");
  p.ts_max = cfg_num(root, "hub.Q_ts_max");
  p.dt = cfg_num_or(root, "hub.dt_hours", 1.0);
  p.validate();

  if (cfg_has(root, "tariffs.series_csv")) {
    c.tariffs = load_tariff_csv(cfg_str(root, "tariffs.series_csv"));
  } else {
    c.tariffs.flat_buy = cfg_num(root, "tariffs.price_buy");
    c.tariffs.flat_sell = cfg_num(root, "tariffs.price_sell");
    c.tariffs.flat_gas = cfg_num(root, "tariffs.price_gas");
    c.tariffs.validate();
  }

  c.es_init = cfg_num_or(root, "initial_state.es_level", p.es_min);
  c.ts_init = cfg_num_or(root, "initial_state.ts_level", 0.5 * (p.ts_min + p.ts_max));
  if (c.es_init < p.es_min || c.es_init > p.es_max)
    throw std::invalid_argument("initial_state.es_level outside storage bounds");
  if (c.ts_init < p.ts_min || c.ts_init > p.ts_max)
    throw std::invalid_argument("initial_state.ts_level outside storage bounds");

  double max_buy = c.tariffs.flat_buy;
  for (double b : c.tariffs.buy_series) max_buy = std::max(max_buy, b);
  c.slack_penalty = cfg_num_or(root, "slack_penalty", 10.0 * max_buy);
  if (c.slack_penalty <= 0) throw std::invalid_argument("slack_penalty must be positive");
  return c;
}

Json default_config() {
  Json j;
  j["schema_version"] = 1;
  Json& h = j["hub"];
  h["P_A"] = 120.0;
  h["P_B"] = 106.0;
  h["P_C"] = 252.0;
  h["P_D"] = 305.0;
  h["Q_A"] = 0.0;
  h["Q_B"] = 171.0;
  h["Q_C"] = 408.0;
  h["Q_D"] = 0.0;
  h["eta_chp"] = 0.36;
  h["cop"] = 4.5;
  h["eta_gb"] = 0.78;
  h["eta_pv"] = 0.15;
  h["a_pv"] = 3000.0;
  h["P_chp_min"] = 106.0;
  h["P_chp_max"] = 305.0;
  h["Q_hp_min"] = 0.0;
  h["Q_hp_max"] = 120.0;
  h["Q_gb_min"] = 0.0;
  h["Q_gb_max"] = 120.0;
  h["P_pv_min"] = 0.0;
  h["P_pv_max"] = 400.0;
  h["eta_es"] = 0.95;
  h["gamma_es"] = 0.999;
  h["P_es_min"] = 40.0;
  h["P_es_max"] = 250.0;
  h["eta_ts"] = 0.99;
  h["gamma_ts"] = 0.992;
  h["Q_ts_min"] = 0.0;
  h["Q_ts_max"] = 4800.0;
  h["dt_hours"] = 1.0;
  Json& t = j["tariffs"];
  t["price_buy"] = 0.20;
  t["price_sell"] = 0.06;
  t["price_gas"] = 0.11;
  return j;
}

} // namespace ehub
