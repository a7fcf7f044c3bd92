#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ehub/gp.hpp"

namespace ehub {

// Exact weather over the prediction horizon, one row per step k+1 .. k+T.
struct WeatherForecast {
  Eigen::VectorXd temp_c;
  Eigen::VectorXd irradiance;

  int steps() const { return static_cast<int>(temp_c.size()); }
  void validate(int T) const;
};

struct SamplerConfig {
  int M = 1;
  int T = 24;
  std::uint64_t seed = 1;
  bool antithetic = false;

  void validate() const;
};

struct TrajectorySample {
  Eigen::VectorXd l_e; // kWh, steps k+1 .. k+T
  Eigen::VectorXd l_h;
  int scenario = 0;
  int clips = 0; // negative draws clipped to 0, both chains
};

// Recursive one-step sampling: each scenario extends its own mixed window
// (real history plus its previous samples), draws one Gaussian from the
// one-step posterior per step and chain, and appends. Electricity and heat
// chains are independent; scenario i depends only on (seed, i), never on M
// or execution order.
std::vector<TrajectorySample> sample_trajectories(const GPModel& electric, const GPModel& heat,
                                                  const DemandHistory& history,
                                                  const WeatherForecast& weather,
                                                  const SamplerConfig& cfg);

// The same recursion with every draw replaced by the posterior mean.
TrajectorySample mean_trajectory(const GPModel& electric, const GPModel& heat,
                                 const DemandHistory& history, const WeatherForecast& weather,
                                 int T);

// CSV schema: scenario,step,L_e_kwh,L_h_kwh
void write_trajectories_csv(const std::string& path,
                            const std::vector<TrajectorySample>& samples);

// Inverse of write_trajectories_csv. Rows must come grouped by scenario with
// consecutive steps; every scenario must have the same horizon.
std::vector<TrajectorySample> read_trajectories_csv(const std::string& path);

} // namespace ehub
