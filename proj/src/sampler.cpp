#include "ehub/sampler.hpp"

#include <cmath>
#include <stdexcept>

#include "ehub/csv.hpp"
#include "ehub/rng.hpp"

namespace ehub {

namespace {

constexpr int kLagWindow = 168;

// Trailing real window plus placeholder rows for the horizon; sampled demands
// are written into the placeholder rows as the recursion advances.
DemandHistory mixed_window_base(const DemandHistory& history, const WeatherForecast& weather,
                                int T) {
  if (history.size() < kLagWindow)
    throw std::invalid_argument("sampling needs " + std::to_string(kLagWindow) +
                                " h of history, have " + std::to_string(history.size()));
  DemandHistory w;
  w.start = history.end() - kLagWindow;
  w.extra_holidays = history.extra_holidays;
  int base = history.index_of(w.start);
  for (int i = 0; i < kLagWindow; ++i) {
    w.le.push_back(history.le[base + i]);
    w.lh.push_back(history.lh[base + i]);
    w.temp_c.push_back(history.temp_c[base + i]);
    w.irradiance.push_back(history.irradiance[base + i]);
  }
  for (int s = 0; s < T; ++s) {
    w.le.push_back(0.0);
    w.lh.push_back(0.0);
    w.temp_c.push_back(weather.temp_c[s]);
    w.irradiance.push_back(weather.irradiance[s]);
  }
  return w;
}

std::vector<TrajectorySample> run_recursion(const GPModel& electric, const GPModel& heat,
                                            const DemandHistory& history,
                                            const WeatherForecast& weather, int M, int T,
                                            bool mean_only, std::uint64_t seed,
                                            bool antithetic) {
  DemandHistory base = mixed_window_base(history, weather, T);
  HourIndex k = history.end() - 1;

  std::vector<DemandHistory> mixed(M, base);
  std::vector<TrajectorySample> out(M);
  for (int i = 0; i < M; ++i) {
    out[i].scenario = i;
    out[i].l_e.resize(T);
    out[i].l_h.resize(T);
  }

  auto draw = [&](int i, int s, int chain, double mean, double var) {
    if (mean_only) return mean;
    double z;
    if (antithetic) {
      z = gaussian_at(seed, static_cast<std::uint64_t>(i / 2), static_cast<std::uint64_t>(s),
                      static_cast<std::uint64_t>(chain));
      if (i % 2 == 1) z = -z;
    } else {
      z = gaussian_at(seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(s),
                      static_cast<std::uint64_t>(chain));
    }
    return mean + std::sqrt(var) * z;
  };

  Eigen::MatrixXd Xe(M, feature_dim(DemandKind::Electric));
  Eigen::MatrixXd Xh(M, feature_dim(DemandKind::Heat));
  Eigen::VectorXd me, ve, mh, vh;
  for (int s = 0; s < T; ++s) {
    HourIndex ks = k + 1 + s;
    for (int i = 0; i < M; ++i) {
      Xe.row(i) = encode_features(DemandKind::Electric, ks, mixed[i]).transpose();
      Xh.row(i) = encode_features(DemandKind::Heat, ks, mixed[i]).transpose();
    }
    posterior_batch(electric, Xe, &me, &ve);
    posterior_batch(heat, Xh, &mh, &vh);
    for (int i = 0; i < M; ++i) {
      int row = mixed[i].index_of(ks);
      double le = draw(i, s, 0, me[i], ve[i]);
      if (le < 0.0) {
        le = 0.0;
        ++out[i].clips;
      }
      double lh = draw(i, s, 1, mh[i], vh[i]);
      if (lh < 0.0) {
        lh = 0.0;
        ++out[i].clips;
      }
      mixed[i].le[row] = le;
      mixed[i].lh[row] = lh;
      out[i].l_e[s] = le;
      out[i].l_h[s] = lh;
    }
  }
  return out;
}

} // namespace

void WeatherForecast::validate(int T) const {
  if (steps() < T || irradiance.size() < T)
    throw std::invalid_argument("weather forecast covers " +
                                std::to_string(std::min<int>(steps(), static_cast<int>(irradiance.size()))) +
                                " steps, horizon needs " + std::to_string(T));
  if (temp_c.size() != irradiance.size())
    throw std::invalid_argument("weather forecast series lengths differ");
  for (int i = 0; i < steps(); ++i)
    if (!std::isfinite(temp_c[i]) || !(irradiance[i] >= 0.0))
      throw std::invalid_argument("non-finite weather forecast at step " + std::to_string(i));
}

void SamplerConfig::validate() const {
  if (M < 1 || T < 1) throw std::invalid_argument("sampler needs M >= 1 and T >= 1");
}

std::vector<TrajectorySample> sample_trajectories(const GPModel& electric, const GPModel& heat,
                                                  const DemandHistory& history,
                                                  const WeatherForecast& weather,
                                                  const SamplerConfig& cfg) {
  cfg.validate();
  weather.validate(cfg.T);
  return run_recursion(electric, heat, history, weather, cfg.M, cfg.T, false, cfg.seed,
                       cfg.antithetic);
}

TrajectorySample mean_trajectory(const GPModel& electric, const GPModel& heat,
                                 const DemandHistory& history, const WeatherForecast& weather,
                                 int T) {
  if (T < 1) throw std::invalid_argument("mean trajectory needs T >= 1");
  weather.validate(T);
  return run_recursion(electric, heat, history, weather, 1, T, true, 0, false)[0];
}

void write_trajectories_csv(const std::string& path,
                            const std::vector<TrajectorySample>& samples) {
  std::string out = "scenario,step,L_e_kwh,L_h_kwh\n";
  for (const TrajectorySample& s : samples)
    for (int t = 0; t < s.l_e.size(); ++t) {
      out += std::to_string(s.scenario);
      out += ',';
      out += std::to_string(t);
      out += ',';
      out += format_double(s.l_e[t]);
      out += ',';
      out += format_double(s.l_h[t]);
      out += '\n';
    }
  write_text_file(path, out);
}

std::vector<TrajectorySample> read_trajectories_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  const int cs = t.require_column("scenario");
  const int ct = t.require_column("step");
  const int ce = t.require_column("L_e_kwh");
  const int ch = t.require_column("L_h_kwh");
  if (t.rows.empty()) throw std::invalid_argument("'" + path + "' has no trajectory rows");

  std::vector<TrajectorySample> out;
  std::vector<double> le, lh;
  int cur = -1;
  auto flush = [&]() {
    if (cur < 0) return;
    TrajectorySample s;
    s.scenario = cur;
    s.l_e = Eigen::Map<const Eigen::VectorXd>(le.data(), static_cast<Eigen::Index>(le.size()));
    s.l_h = Eigen::Map<const Eigen::VectorXd>(lh.data(), static_cast<Eigen::Index>(lh.size()));
    if (!out.empty() && out.front().l_e.size() != s.l_e.size())
      throw std::invalid_argument("'" + path + "': scenarios have unequal horizons");
    out.push_back(std::move(s));
    le.clear();
    lh.clear();
  };
  for (const auto& row : t.rows) {
    int sc = std::stoi(row[static_cast<std::size_t>(cs)]);
    int step = std::stoi(row[static_cast<std::size_t>(ct)]);
    if (sc != cur) {
      flush();
      cur = sc;
    }
    if (step != static_cast<int>(le.size()))
      throw std::invalid_argument("'" + path + "': steps of scenario " + std::to_string(sc) +
                                  " are not consecutive from 0");
    le.push_back(std::stod(row[static_cast<std::size_t>(ce)]));
    lh.push_back(std::stod(row[static_cast<std::size_t>(ch)]));
  }
  flush();
  return out;
}

} // namespace ehub
