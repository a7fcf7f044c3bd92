#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "ehub/csv.hpp"
#include "ehub/rng.hpp"
#include "ehub/sampler.hpp"
#include "test_support.hpp"

using namespace ehub;

namespace {

using Setup = testing::ForecastSetup;

Setup make_setup(int horizon) { return testing::forecast_setup(horizon); }

// The sampler's mixed window rebuilt from scratch: trailing 168 real hours,
// horizon weather, and whatever demands the scenario has produced so far.
DemandHistory rebuild_window(const Setup& s, const TrajectorySample& traj, int upto_steps) {
  DemandHistory w;
  w.start = s.hist.end() - 168;
  int base = s.hist.index_of(w.start);
  for (int i = 0; i < 168; ++i) {
    w.le.push_back(s.hist.le[base + i]);
    w.lh.push_back(s.hist.lh[base + i]);
    w.temp_c.push_back(s.hist.temp_c[base + i]);
    w.irradiance.push_back(s.hist.irradiance[base + i]);
  }
  for (int t = 0; t < s.wf.steps(); ++t) {
    w.le.push_back(t < upto_steps ? traj.l_e[t] : 0.0);
    w.lh.push_back(t < upto_steps ? traj.l_h[t] : 0.0);
    w.temp_c.push_back(s.wf.temp_c[t]);
    w.irradiance.push_back(s.wf.irradiance[t]);
  }
  return w;
}

} // namespace

TEST_CASE("sampling is deterministic in the seed") {
  Setup s = make_setup(6);
  SamplerConfig cfg;
  cfg.M = 4;
  cfg.T = 6;
  cfg.seed = 42;
  auto a = sample_trajectories(s.electric, s.heat, s.hist, s.wf, cfg);
  auto b = sample_trajectories(s.electric, s.heat, s.hist, s.wf, cfg);
  REQUIRE(a.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK((a[i].l_e.array() == b[i].l_e.array()).all());
    CHECK((a[i].l_h.array() == b[i].l_h.array()).all());
  }
  cfg.seed = 43;
  auto c = sample_trajectories(s.electric, s.heat, s.hist, s.wf, cfg);
  CHECK(!(a[0].l_e.array() == c[0].l_e.array()).all());
}

TEST_CASE("scenario substreams are independent of M") {
  Setup s = make_setup(4);
  SamplerConfig small;
  small.M = 3;
  small.T = 4;
  small.seed = 7;
  SamplerConfig big = small;
  big.M = 7;
  auto a = sample_trajectories(s.electric, s.heat, s.hist, s.wf, small);
  auto b = sample_trajectories(s.electric, s.heat, s.hist, s.wf, big);
  for (int i = 0; i < 3; ++i) {
    CHECK((a[i].l_e.array() == b[i].l_e.array()).all());
    CHECK((a[i].l_h.array() == b[i].l_h.array()).all());
  }
}

TEST_CASE("zero posterior variance collapses every scenario onto the mean trajectory") {
  Setup s = make_setup(5);
  KernelHyperparameters dead = KernelHyperparameters::standard_init(DemandKind::Electric);
  dead.rbf_signal_variance = 1e-300;
  dead.linear_variance.setZero();
  GPModel e0 = make_model(DemandKind::Electric, Season::Winter, dead, s.electric.X,
                          s.electric.y_std * s.electric.target_std +
                              Eigen::VectorXd::Constant(s.electric.rows(), s.electric.target_mean),
                          s.electric.linear_dims, true, s.electric.row_hours);
  KernelHyperparameters dead_h = KernelHyperparameters::standard_init(DemandKind::Heat);
  dead_h.rbf_signal_variance = 1e-300;
  dead_h.linear_variance.setZero();
  GPModel h0 = make_model(DemandKind::Heat, Season::Winter, dead_h, s.heat.X,
                          s.heat.y_std * s.heat.target_std +
                              Eigen::VectorXd::Constant(s.heat.rows(), s.heat.target_mean),
                          s.heat.linear_dims, true, s.heat.row_hours);

  SamplerConfig cfg;
  cfg.M = 5;
  cfg.T = 5;
  cfg.seed = 11;
  auto samples = sample_trajectories(e0, h0, s.hist, s.wf, cfg);
  TrajectorySample mean = mean_trajectory(e0, h0, s.hist, s.wf, 5);
  for (const auto& traj : samples) {
    CHECK((traj.l_e.array() == mean.l_e.array()).all());
    CHECK((traj.l_h.array() == mean.l_h.array()).all());
    CHECK(traj.clips == 0);
  }
}

TEST_CASE("mean trajectory matches a step-by-step posterior recomputation") {
  Setup s = make_setup(6);
  TrajectorySample mean = mean_trajectory(s.electric, s.heat, s.hist, s.wf, 6);
  TrajectorySample manual;
  manual.l_e.resize(6);
  manual.l_h.resize(6);
  HourIndex k = s.hist.end() - 1;
  for (int t = 0; t < 6; ++t) {
    DemandHistory w = rebuild_window(s, manual, t);
    double le = posterior(s.electric, encode_electric(k + 1 + t, w)).mean;
    double lh = posterior(s.heat, encode_heat(k + 1 + t, w)).mean;
    manual.l_e[t] = std::max(0.0, le);
    manual.l_h[t] = std::max(0.0, lh);
  }
  for (int t = 0; t < 6; ++t) {
    CHECK(mean.l_e[t] == doctest::Approx(manual.l_e[t]).epsilon(1e-9));
    CHECK(mean.l_h[t] == doctest::Approx(manual.l_h[t]).epsilon(1e-9));
  }
}

TEST_CASE("sampled scenario matches a manual rebuild of the recursion") {
  Setup s = make_setup(5);
  SamplerConfig cfg;
  cfg.M = 4;
  cfg.T = 5;
  cfg.seed = 19;
  auto samples = sample_trajectories(s.electric, s.heat, s.hist, s.wf, cfg);

  int i = 2; // rebuild one scenario end to end
  TrajectorySample manual;
  manual.l_e.resize(5);
  manual.l_h.resize(5);
  HourIndex k = s.hist.end() - 1;
  for (int t = 0; t < 5; ++t) {
    DemandHistory w = rebuild_window(s, manual, t);
    Posterior pe = posterior(s.electric, encode_electric(k + 1 + t, w));
    Posterior ph = posterior(s.heat, encode_heat(k + 1 + t, w));
    double le = pe.mean + std::sqrt(pe.variance) * gaussian_at(19, i, t, 0);
    double lh = ph.mean + std::sqrt(ph.variance) * gaussian_at(19, i, t, 1);
    manual.l_e[t] = std::max(0.0, le);
    manual.l_h[t] = std::max(0.0, lh);
  }
  for (int t = 0; t < 5; ++t) {
    CHECK(samples[i].l_e[t] == doctest::Approx(manual.l_e[t]).epsilon(1e-9));
    CHECK(samples[i].l_h[t] == doctest::Approx(manual.l_h[t]).epsilon(1e-9));
  }
}

TEST_CASE("lag features mix own samples with real history") {
  Setup s = make_setup(4);
  SamplerConfig cfg;
  cfg.M = 2;
  cfg.T = 4;
  cfg.seed = 23;
  auto samples = sample_trajectories(s.electric, s.heat, s.hist, s.wf, cfg);
  const TrajectorySample& traj = samples[1];

  int t = 3; // features for step 3: lags 1..3 sampled, lag 4.. real
  DemandHistory w = rebuild_window(s, traj, t);
  HourIndex ks = s.hist.end() + t;
  Eigen::VectorXd x = encode_electric(ks, w);
  CHECK(x[8] == traj.l_e[2]);
  CHECK(x[9] == traj.l_e[1]);
  CHECK(x[10] == traj.l_e[0]);
  CHECK(x[11] == s.hist.le[s.hist.size() - 1]);
  CHECK(x[12] == s.hist.le[s.hist.size() - 2]);
}

TEST_CASE("one-step sample mean converges to the posterior mean") {
  Setup s = make_setup(1);
  HourIndex k = s.hist.end() - 1;
  DemandHistory w = rebuild_window(s, TrajectorySample{}, 0);
  Posterior pe = posterior(s.electric, encode_electric(k + 1, w));
  double sigma = std::sqrt(pe.variance);

  SamplerConfig cfg;
  cfg.M = 10000;
  cfg.T = 1;
  cfg.seed = 5;
  auto samples = sample_trajectories(s.electric, s.heat, s.hist, s.wf, cfg);
  double mc = 0.0;
  for (const auto& traj : samples) mc += traj.l_e[0];
  mc /= cfg.M;
  CHECK(std::abs(mc - pe.mean) < 4.0 * sigma / std::sqrt(static_cast<double>(cfg.M)));

  double var = 0.0;
  for (const auto& traj : samples) var += (traj.l_e[0] - mc) * (traj.l_e[0] - mc);
  var /= cfg.M - 1;
  CHECK(std::sqrt(var) == doctest::Approx(sigma).epsilon(0.05));
}

TEST_CASE("clips are rare on calibrated synthetic demand") {
  Setup s = make_setup(24);
  SamplerConfig cfg;
  cfg.M = 100;
  cfg.T = 24;
  cfg.seed = 31;
  auto samples = sample_trajectories(s.electric, s.heat, s.hist, s.wf, cfg);
  int clips = 0;
  for (const auto& traj : samples) clips += traj.clips;
  CHECK(static_cast<double>(clips) / (100.0 * 24.0 * 2.0) < 0.005);
}

TEST_CASE("antithetic pairs mirror around the one-step posterior mean") {
  Setup s = make_setup(1);
  HourIndex k = s.hist.end() - 1;
  DemandHistory w = rebuild_window(s, TrajectorySample{}, 0);
  Posterior pe = posterior(s.electric, encode_electric(k + 1, w));

  SamplerConfig cfg;
  cfg.M = 6;
  cfg.T = 1;
  cfg.seed = 13;
  cfg.antithetic = true;
  auto samples = sample_trajectories(s.electric, s.heat, s.hist, s.wf, cfg);
  for (int p = 0; p < 3; ++p) {
    double a = samples[2 * p].l_e[0];
    double b = samples[2 * p + 1].l_e[0];
    CHECK((a + b) / 2.0 == doctest::Approx(pe.mean).epsilon(1e-9));
  }
}

TEST_CASE("sampler input validation") {
  Setup s = make_setup(4);
  SamplerConfig cfg;
  cfg.M = 0;
  cfg.T = 4;
  CHECK_THROWS_AS(sample_trajectories(s.electric, s.heat, s.hist, s.wf, cfg),
                  std::invalid_argument);
  cfg.M = 2;
  cfg.T = 10; // forecast only covers 4
  CHECK_THROWS_WITH_AS(sample_trajectories(s.electric, s.heat, s.hist, s.wf, cfg),
                       doctest::Contains("weather forecast"), std::invalid_argument);
  cfg.T = 4;
  DemandHistory tiny = s.hist;
  tiny.le.resize(100);
  tiny.lh.resize(100);
  tiny.temp_c.resize(100);
  tiny.irradiance.resize(100);
  CHECK_THROWS_WITH_AS(sample_trajectories(s.electric, s.heat, tiny, s.wf, cfg),
                       doctest::Contains("168"), std::invalid_argument);
}

TEST_CASE("trajectory csv dump") {
  Setup s = make_setup(3);
  SamplerConfig cfg;
  cfg.M = 2;
  cfg.T = 3;
  cfg.seed = 3;
  auto samples = sample_trajectories(s.electric, s.heat, s.hist, s.wf, cfg);
  write_trajectories_csv("traj_dump.csv", samples);
  CsvTable t = read_csv("traj_dump.csv");
  REQUIRE(t.rows.size() == 6);
  CHECK(t.header[0] == "scenario");
  CHECK(t.header[3] == "L_h_kwh");
  CHECK(std::stod(t.rows[4][2]) == samples[1].l_e[1]);
  std::remove("traj_dump.csv");
}
