#pragma once

#include <string>

#include "json.hpp"

#include "ehub/hub_model.hpp"

namespace ehub {

using Json = nlohmann::json;

// Parsed "hub" + "tariffs" + "initial_state" sections of a run config.
struct HubConfig {
  HubParameters params;
  Tariffs tariffs;
  double es_init = 0.0;        // kWh at simulation start
  double ts_init = 0.0;        // kWh at simulation start
  double slack_penalty = 0.0;  // CHF/kWh on thermal-storage bound slack
};

Json load_json_file(const std::string& path);

// Config field access by dotted path from the document root; a missing or
// mistyped key throws std::invalid_argument naming the full path.
double cfg_num(const Json& root, const std::string& dotted_path);
double cfg_num_or(const Json& root, const std::string& dotted_path, double fallback);
std::string cfg_str(const Json& root, const std::string& dotted_path);
std::string cfg_str_or(const Json& root, const std::string& dotted_path,
                       const std::string& fallback);
bool cfg_bool_or(const Json& root, const std::string& dotted_path, bool fallback);
std::vector<double> cfg_num_list(const Json& root, const std::string& dotted_path);
std::vector<std::string> cfg_str_list(const Json& root, const std::string& dotted_path);
bool cfg_has(const Json& root, const std::string& dotted_path);

// Parses and validates the hub sections. Unknown hub keys are rejected so
// typos fail loudly. Optional "tariffs.series_csv" attaches hourly series.
HubConfig parse_hub_config(const Json& root);

// CSV with header timestamp,price_buy,price_sell,price_gas and consecutive
// hourly rows.
Tariffs load_tariff_csv(const std::string& path);

// Ships every key parse_hub_config needs, with the default parameter table.
Json default_config();

} // namespace ehub
