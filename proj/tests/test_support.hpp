#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ehub/gp.hpp"
#include "ehub/rng.hpp"
#include "ehub/sampler.hpp"
#include "ehub/time_utils.hpp"

namespace ehub::testing {

// Smooth daily/weekly demand patterns plus seasonal weather; deterministic
// in (start, hours, seed).
inline DemandHistory synth_history(HourIndex start, int hours, std::uint64_t seed) {
  DemandHistory h;
  h.start = start;
  constexpr double pi = 3.14159265358979323846;
  for (int i = 0; i < hours; ++i) {
    HourIndex k = start + i;
    int hod = static_cast<int>(((k % 24) + 24) % 24);
    double work = is_workday(k) ? 1.0 : 0.0;
    double daily = std::sin(2.0 * pi * hod / 24.0);
    double annual = std::sin(2.0 * pi * static_cast<double>(k % 8766) / 8766.0);
    CounterRng rng = CounterRng::for_stream(seed, static_cast<std::uint64_t>(k), 0, 0);
    double temp = 10.0 + 8.0 * annual + 4.0 * daily + 0.5 * rng.next_gaussian();
    double irr = hod >= 6 && hod <= 18 ? 0.8 * std::sin(pi * (hod - 6) / 12.0) : 0.0;
    double le = 150.0 + 60.0 * daily + 25.0 * work + 3.0 * rng.next_gaussian();
    double lh = 220.0 + 80.0 * std::cos(2.0 * pi * hod / 24.0) - 4.0 * (temp - 10.0) +
                4.0 * rng.next_gaussian();
    h.temp_c.push_back(temp);
    h.irradiance.push_back(std::max(0.0, irr));
    h.le.push_back(std::max(1.0, le));
    h.lh.push_back(std::max(1.0, lh));
  }
  return h;
}

// Conditioned model with fixed, plausible hyperparameters (no fitting) on the
// most recent `rows` winter hours of `h`.
inline GPModel quick_model(DemandKind kind, const DemandHistory& h, int rows) {
  std::vector<HourIndex> hours;
  for (HourIndex k = h.end() - 1; k >= h.start + 168 && static_cast<int>(hours.size()) < rows;
       --k)
    if (season_of_hour(k) == Season::Winter) hours.push_back(k);
  std::reverse(hours.begin(), hours.end());
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  encode_rows(kind, hours, h, &X, &y);
  KernelHyperparameters hp = KernelHyperparameters::standard_init(kind);
  hp.rbf_lengthscales.setConstant(3.0);
  hp.linear_variance.setConstant(0.02);
  hp.noise_variance = 0.02;
  return make_model(kind, Season::Winter, hp, X, y, default_linear_dims(kind), true, hours);
}

// A 40-day history, the true weather for the next `horizon` hours, and a
// conditioned model pair.
struct ForecastSetup {
  DemandHistory hist;
  WeatherForecast wf;
  GPModel electric, heat;
};

inline ForecastSetup forecast_setup(int horizon, std::uint64_t seed = 3, int rows = 250) {
  DemandHistory full = synth_history(hour_from_civil(2023, 1, 1, 0), 42 * 24, seed);
  ForecastSetup s;
  s.hist = full;
  int keep = 40 * 24;
  s.hist.le.resize(keep);
  s.hist.lh.resize(keep);
  s.hist.temp_c.resize(keep);
  s.hist.irradiance.resize(keep);
  s.wf.temp_c.resize(horizon);
  s.wf.irradiance.resize(horizon);
  for (int t = 0; t < horizon; ++t) {
    s.wf.temp_c[t] = full.temp_c[keep + t];
    s.wf.irradiance[t] = full.irradiance[keep + t];
  }
  s.electric = quick_model(DemandKind::Electric, s.hist, rows);
  s.heat = quick_model(DemandKind::Heat, s.hist, rows);
  return s;
}

} // namespace ehub::testing
