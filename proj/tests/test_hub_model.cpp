#include "doctest.h"
#include "ehub/config.hpp"
#include "ehub/hub_model.hpp"
#include "ehub/rng.hpp"

#include <cmath>

using namespace ehub;

namespace {
HubParameters table_params() { return HubParameters::defaults(); }

// Signed area of the triangle (a, b, c); used for point-in-hull checks.
double cross(double ax, double ay, double bx, double by, double cx, double cy) {
  return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
}

// Membership in the convex hull of the four CHP vertices, computed from the
// polygon's edges rather than from the weights under test.
bool in_chp_hull(const HubParameters& p, double x, double y, double tol) {
  // Hull of the four vertices in counterclockwise order: B(106,0 side), A, D, C.
  const int order[4] = {1, 0, 3, 2};
  for (int i = 0; i < 4; ++i) {
    const int a = order[i], b = order[(i + 1) % 4];
    if (cross(p.chp_p[a], p.chp_q[a], p.chp_p[b], p.chp_q[b], x, y) < -tol) return false;
  }
  return true;
}
} // namespace

TEST_CASE("chp output at the vertices and at the centroid") {
  const HubParameters p = table_params();

  ChpOutput a = chp_output(Eigen::Vector4d(1, 0, 0, 0), p);
  CHECK(a.p == doctest::Approx(120.0).epsilon(1e-12));
  CHECK(a.q == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(a.fuel == doctest::Approx(120.0 / 0.36).epsilon(1e-12));

  ChpOutput c = chp_output(Eigen::Vector4d(0.25, 0.25, 0.25, 0.25), p);
  CHECK(c.p == doctest::Approx(195.75).epsilon(1e-12));
  CHECK(c.q == doctest::Approx(144.75).epsilon(1e-12));
}

TEST_CASE("chp rejects weights off the simplex") {
  const HubParameters p = table_params();
  CHECK_THROWS(chp_output(Eigen::Vector4d(0.5, 0.5, 0.5, -0.5), p));
  CHECK_THROWS(chp_output(Eigen::Vector4d(0.5, 0.5, 0.5, 0.5), p));
}

TEST_CASE("random simplex weights stay inside the chp hull") {
  const HubParameters p = table_params();
  CounterRng rng = CounterRng::for_stream(91, 0, 0, 0);
  for (int it = 0; it < 1000; ++it) {
    Eigen::Vector4d e;
    for (int j = 0; j < 4; ++j) e[j] = -std::log(rng.next_unit());
    Eigen::Vector4d w = e / e.sum();
    ChpOutput o = chp_output(w, p);
    CHECK(in_chp_hull(p, o.p, o.q, 1e-7));
  }
}

TEST_CASE("heat pump and boiler conversion") {
  const HubParameters p = table_params();
  auto [qhp0, qgb0] = hp_gb_output(0.0, 0.0, p);
  CHECK(qhp0 == 0.0);
  CHECK(qgb0 == 0.0);
  auto [qhp, qgb] = hp_gb_output(10.0, 100.0, p);
  CHECK(qhp == doctest::Approx(45.0).epsilon(1e-12));
  CHECK(qgb == doctest::Approx(78.0).epsilon(1e-12));
  CHECK_THROWS(hp_gb_output(-1.0, 0.0, p));
}

TEST_CASE("pv ceiling with curtailment cap") {
  const HubParameters p = table_params();
  CHECK(pv_output(0.0, p) == 0.0);
  CHECK(pv_output(0.5, p) == doctest::Approx(225.0).epsilon(1e-12));
  CHECK(pv_output(1.0, p) == doctest::Approx(400.0).epsilon(1e-12)); // 450 clipped
  CHECK_THROWS(pv_output(-0.1, p));
}

TEST_CASE("storage transition") {
  CHECK(storage_step(100.0, 0.0, 0.0, 0.99, 0.992, 1.0) == doctest::Approx(99.2).epsilon(1e-12));
  CHECK(storage_step(0.0, 0.0, 10.0, 1.0, 1.0, 1.0) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(storage_step(50.0, 10.0, 0.0, 0.95, 0.999, 1.0) ==
        doctest::Approx(50.0 * 0.999 - 10.0 / 0.95).epsilon(1e-12));
}

TEST_CASE("storage monotonicity and lossless accounting") {
  CounterRng rng = CounterRng::for_stream(92, 0, 0, 0);
  for (int it = 0; it < 200; ++it) {
    const double level = 100.0 * rng.next_unit();
    const double in = 20.0 * rng.next_unit();
    const double out = 20.0 * rng.next_unit();
    const double eta = 0.5 + 0.5 * rng.next_unit();
    const double gamma = 0.9 + 0.1 * rng.next_unit();
    const double base = storage_step(level, in, out, eta, gamma, 1.0);
    CHECK(storage_step(level, in, out + 1.0, eta, gamma, 1.0) > base);
    CHECK(storage_step(level, in + 1.0, out, eta, gamma, 1.0) < base);
    CHECK(storage_step(level, in, out, 1.0, 1.0, 1.0) ==
          doctest::Approx(level + out - in).epsilon(1e-12));
  }
}

TEST_CASE("balance residuals on a hand-balanced step") {
  SetPoints sp = SetPoints::zero(1);
  RecourseVariables rec = RecourseVariables::zero(1);
  auto [re0, rh0] = balance_residuals(sp, rec, 0.0, 0.0, 0);
  CHECK(re0 == 0.0);
  CHECK(rh0 == 0.0);

  sp.p_pv[0] = 100.0;
  rec.grid_buy[0] = 50.0;
  auto [re, rh] = balance_residuals(sp, rec, 150.0, 0.0, 0);
  CHECK(re == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rh == 0.0);
}

TEST_CASE("stage cost terms and horizon additivity") {
  Tariffs tf;
  SetPoints sp = SetPoints::zero(24);
  RecourseVariables rec = RecourseVariables::zero(24);
  CHECK(stage_cost(sp, rec, tf, 0, 0) == 0.0);

  rec.grid_buy[3] = 10.0;
  CHECK(stage_cost(sp, rec, tf, 3, 3) == doctest::Approx(2.0).epsilon(1e-12));

  CounterRng rng = CounterRng::for_stream(93, 0, 0, 0);
  for (int k = 0; k < 24; ++k) {
    rec.grid_buy[k] = 100.0 * rng.next_unit();
    rec.grid_sell[k] = 100.0 * rng.next_unit();
    sp.f_chp[k] = 300.0 * rng.next_unit();
    sp.f_gb[k] = 100.0 * rng.next_unit();
  }
  double total = 0.0;
  for (int k = 0; k < 24; ++k) total += stage_cost(sp, rec, tf, k, k);
  double direct = 0.0;
  for (int k = 0; k < 24; ++k)
    direct += 0.20 * rec.grid_buy[k] - 0.06 * rec.grid_sell[k] +
              0.11 * (sp.f_chp[k] + sp.f_gb[k]);
  CHECK(total == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("parameter validation rejects broken fields") {
  HubParameters p = table_params();
  p.validate();
  p.eta_chp = 0.0;
  CHECK_THROWS(p.validate());
  p = table_params();
  p.gamma_ts = 1.5;
  CHECK_THROWS(p.validate());
  p = table_params();
  p.es_min = 300.0;
  CHECK_THROWS(p.validate());
  p = table_params();
  p.chp_p[0] = 50.0; // below P_chp_min
  CHECK_THROWS(p.validate());
}

TEST_CASE("tariff validation enforces sell below buy") {
  Tariffs t;
  t.validate();
  t.flat_sell = 0.30;
  CHECK_THROWS(t.validate());
}

TEST_CASE("config round trip and missing-key reporting") {
  Json j = default_config();
  HubConfig c = parse_hub_config(j);
  CHECK(c.params.eta_chp == 0.36);
  CHECK(c.params.ts_max == 4800.0);
  CHECK(c.tariffs.flat_gas == 0.11);
  CHECK(c.es_init == 40.0);
  CHECK(c.ts_init == 2400.0);
  CHECK(c.slack_penalty == doctest::Approx(2.0));

  j["hub"].erase("eta_gb");
  try {
    parse_hub_config(j);
    FAIL("expected missing-key error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("hub.eta_gb") != std::string::npos);
  }

  Json j2 = default_config();
  j2["hub"]["eta_gp"] = 0.5; // typo must be rejected
  CHECK_THROWS(parse_hub_config(j2));
}
