#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "ehub/guarantees.hpp"

using namespace ehub;

namespace {

TrajectorySample make_scenario(const std::vector<double>& le, const std::vector<double>& lh,
                               int index = 0) {
  TrajectorySample s;
  s.l_e = Eigen::Map<const Eigen::VectorXd>(le.data(), static_cast<Eigen::Index>(le.size()));
  s.l_h = Eigen::Map<const Eigen::VectorXd>(lh.data(), static_cast<Eigen::Index>(lh.size()));
  s.scenario = index;
  return s;
}

double binom(int M, int s) {
  return std::exp(std::lgamma(M + 1.0) - std::lgamma(s + 1.0) - std::lgamma(M - s + 1.0));
}

} // namespace

TEST_CASE("epsilon closed form satisfies the defining binomial identity") {
  for (int M : {1, 2, 5, 12, 21, 30}) {
    for (double beta : {0.1, 0.01, 1e-4}) {
      double sum = 0.0;
      for (int s = 0; s < M; ++s) {
        double eps = epsilon_closed_form(s, M, beta);
        sum += binom(M, s) * std::pow(1.0 - eps, M - s);
      }
      CHECK(std::abs(sum - beta) <= 1e-10);
    }
  }
  CHECK(epsilon_closed_form(7, 7, 0.05) == 1.0);
  CHECK(epsilon_closed_form(0, 1, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("epsilon respects its logarithmic upper bound and monotonicities") {
  for (int M : {2, 10, 50, 100}) {
    double prev = -1.0;
    for (int s = 0; s < M; ++s) {
      double eps = epsilon_closed_form(s, M, 0.05);
      CHECK(eps <= epsilon_bound(s, M, 0.05) + 1e-12);
      CHECK(eps >= prev - 1e-14); // non-decreasing in s
      prev = eps;
    }
  }
  for (int M = 6; M <= 200; ++M) // non-increasing in M at fixed s
    CHECK(epsilon_closed_form(5, M + 1, 0.05) <= epsilon_closed_form(5, M, 0.05) + 1e-14);
  CHECK(epsilon_closed_form(3, 20, 0.10) <= epsilon_closed_form(3, 20, 0.01) + 1e-14);
}

TEST_CASE("bound algebra: beta halving and the beta-to-one limit") {
  for (int M : {4, 30, 120}) {
    for (int s : {0, 1, 3}) {
      double d = epsilon_bound(s, M, 0.025) - epsilon_bound(s, M, 0.05);
      CHECK(d == doctest::Approx(std::log(2.0) / (M - s)).epsilon(1e-12));
    }
    double nearly_one = epsilon_bound(0, M, 1.0 - 1e-13);
    CHECK(nearly_one == doctest::Approx(std::log(static_cast<double>(M)) / M).epsilon(1e-9));
  }
  for (int s : {0, 2}) { // non-increasing in M at fixed s, beta
    double prev = std::numeric_limits<double>::infinity();
    for (int M = s + 1; M <= 200; ++M) {
      double b = epsilon_bound(s, M, 0.05);
      CHECK(b <= prev + 1e-14);
      prev = b;
    }
  }
}

TEST_CASE("guarantee inputs are validated") {
  CHECK_THROWS_AS(epsilon_closed_form(-1, 5, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(epsilon_closed_form(6, 5, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(epsilon_closed_form(2, 5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(epsilon_closed_form(2, 5, 1.0), std::invalid_argument);
  CHECK_THROWS_WITH_AS(epsilon_bound(5, 5, 0.1), doctest::Contains("undefined"),
                       std::invalid_argument);
  GuaranteeConfig bad;
  bad.beta = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("duplicated scenarios collapse to a single support scenario") {
  HubParameters params = HubParameters::defaults();
  Tariffs tariffs;
  HubState state{70.0, 1100.0, 3000};
  TrajectorySample s = make_scenario({217.3, 188.9}, {341.7, 306.2});
  std::vector<TrajectorySample> sc{s, s, s, s, s};
  SPConfig cfg;
  cfg.T = 2;
  Eigen::VectorXd pv(2);
  pv << 90.0, 30.0;
  SpSolver resolve = make_sp_resolver(state, params, tariffs, pv, cfg);
  SPSolution ref = resolve(sc);
  REQUIRE(ref.status == SolveStatus::Optimal);
  GuaranteeConfig gcfg;
  GuaranteeResult r = find_support_subsample(resolve, sc, ref, gcfg);
  CHECK(r.s_star == 1);
  CHECK(static_cast<int>(r.removed.size()) == 4);
  CHECK(!r.vacuous);
  CHECK(r.epsilon == doctest::Approx(epsilon_closed_form(1, 5, gcfg.beta)).epsilon(1e-14));
  CHECK(r.epsilon <= r.bound + 1e-12);

  GuaranteeResult c = certify(resolve, sc, ref, gcfg);
  CHECK(c.s_star == r.s_star);
  CHECK(c.epsilon == r.epsilon);
}

TEST_CASE("a planted worst-case scenario is the retained support") {
  HubParameters params = HubParameters::defaults();
  Tariffs tariffs;
  // Small thermal buffer; scenario 2's heat demand exceeds every supply path
  // and forces the soft bound open, the other two are comfortably servable.
  HubState state{40.0, 100.0, 5100};
  std::vector<TrajectorySample> sc{make_scenario({203.1}, {311.4}, 0),
                                   make_scenario({197.6}, {297.8}, 1),
                                   make_scenario({221.9}, {1400.0}, 2)};
  SPConfig cfg;
  cfg.T = 1;
  SpSolver resolve = make_sp_resolver(state, params, tariffs, Eigen::VectorXd::Zero(1), cfg);
  SPSolution ref = resolve(sc);
  REQUIRE(ref.status == SolveStatus::Optimal);
  REQUIRE(ref.slack_neg[0] > 1.0); // the plant is real

  GuaranteeConfig gcfg;
  GuaranteeResult r = find_support_subsample(resolve, sc, ref, gcfg);
  CHECK(r.s_star == 1);
  REQUIRE(static_cast<int>(r.removed.size()) == 2);
  CHECK(r.removed[0] == 0);
  CHECK(r.removed[1] == 1);

  // Constraint activity agrees: only the planted scenario pins the slack.
  CHECK(ref.recourse[2].ts_level[0] ==
        doctest::Approx(params.ts_min - ref.slack_neg[0]).epsilon(1e-6));
  CHECK(ref.recourse[0].ts_level[0] > params.ts_min - 1e-6);
  CHECK(ref.recourse[1].ts_level[0] > params.ts_min - 1e-6);

  // Irreducibility: dropping the worst-case scenario as well changes the
  // re-solved slacks beyond the tolerance.
  SPSolution without = resolve({sc[0], sc[1]});
  REQUIRE(without.status == SolveStatus::Optimal);
  CHECK(std::abs(without.slack_neg[0] - ref.slack_neg[0]) > 1.0);
}

TEST_CASE("single-scenario support search keeps the scenario") {
  HubParameters params = HubParameters::defaults();
  Tariffs tariffs;
  HubState state{40.0, 2400.0, 880};
  std::vector<TrajectorySample> sc{make_scenario({214.0}, {333.0})};
  SPConfig cfg;
  cfg.T = 1;
  SpSolver resolve = make_sp_resolver(state, params, tariffs, Eigen::VectorXd::Zero(1), cfg);
  SPSolution ref = resolve(sc);
  REQUIRE(ref.status == SolveStatus::Optimal);
  GuaranteeConfig gcfg;
  GuaranteeResult r = find_support_subsample(resolve, sc, ref, gcfg);
  CHECK(r.s_star == 1);
  CHECK(r.removed.empty());
  CHECK(r.vacuous);
  CHECK(r.epsilon == 1.0);
  CHECK(std::isinf(r.bound));
  std::string j = certificate_json(r);
  CHECK(j.find("\"vacuous\": true") != std::string::npos);
  CHECK(j.find("\"bound\": null") != std::string::npos);
  CHECK(j.find("\"s_star\": 1") != std::string::npos);
}

TEST_CASE("randomized greedy order visits every scenario once") {
  HubParameters params = HubParameters::defaults();
  Tariffs tariffs;
  HubState state{70.0, 1100.0, 3000};
  TrajectorySample s = make_scenario({217.3}, {341.7});
  std::vector<TrajectorySample> sc{s, s, s, s};
  SPConfig cfg;
  cfg.T = 1;
  SpSolver resolve = make_sp_resolver(state, params, tariffs, Eigen::VectorXd::Zero(1), cfg);
  SPSolution ref = resolve(sc);
  REQUIRE(ref.status == SolveStatus::Optimal);
  GuaranteeConfig gcfg;
  gcfg.randomized_order = true;
  gcfg.order_seed = 7;
  GuaranteeResult r = find_support_subsample(resolve, sc, ref, gcfg);
  CHECK(r.s_star == 1);
  CHECK(static_cast<int>(r.removed.size()) == 3);
}

TEST_CASE("epigraph support detection treats the worst-cost scenario as binding") {
  HubParameters params = HubParameters::defaults();
  Tariffs tariffs;
  HubState state{40.0, 2400.0, 7700};
  // Scenario 1 is strictly costlier (more electricity and heat); in epigraph
  // form its cost row pins t even though no TS bound binds.
  std::vector<TrajectorySample> sc{make_scenario({180.0}, {250.0}, 0),
                                   make_scenario({420.0}, {460.0}, 1)};
  SPConfig cfg;
  cfg.T = 1;
  cfg.epigraph = true;
  SpSolver resolve = make_sp_resolver(state, params, tariffs, Eigen::VectorXd::Zero(1), cfg);
  SPSolution ref = resolve(sc);
  REQUIRE(ref.status == SolveStatus::Optimal);
  GuaranteeConfig gcfg;
  gcfg.epigraph = true;
  GuaranteeResult r = find_support_subsample(resolve, sc, ref, gcfg);
  CHECK(r.epigraph_active);
  // The cheap scenario may or may not move the shared plan, but the expensive
  // one must be retained: dropping it would lower t.
  for (int idx : r.removed) CHECK(idx != 1);
}

TEST_CASE("support search aborts loudly when a re-solve fails") {
  TrajectorySample s = make_scenario({200.0}, {300.0});
  std::vector<TrajectorySample> sc{s, s};
  SPSolution ref;
  ref.status = SolveStatus::Optimal;
  ref.set_points = SetPoints::zero(1);
  ref.slack_pos = Eigen::VectorXd::Zero(1);
  ref.slack_neg = Eigen::VectorXd::Zero(1);
  GuaranteeConfig gcfg;
  SpSolver broken = [](const std::vector<TrajectorySample>&) -> SPSolution {
    throw std::runtime_error("solver exploded");
  };
  CHECK_THROWS_WITH_AS(find_support_subsample(broken, sc, ref, gcfg),
                       doctest::Contains("after 0 confirmed removals"), std::runtime_error);
  SpSolver infeasible = [](const std::vector<TrajectorySample>&) {
    SPSolution bad;
    bad.status = SolveStatus::Infeasible;
    return bad;
  };
  CHECK_THROWS_WITH_AS(find_support_subsample(infeasible, sc, ref, gcfg),
                       doctest::Contains("infeasible"), std::runtime_error);
}

TEST_CASE("empirical violation flags exactly the scenarios that breach the bounds") {
  HubParameters params = HubParameters::defaults();
  Tariffs tariffs;
  HubState state{40.0, 150.0, 4242};
  std::vector<TrajectorySample> sc{make_scenario({210.0, 190.0}, {320.0, 340.0}, 0),
                                   make_scenario({190.0, 205.0}, {305.0, 355.0}, 1)};
  SPConfig cfg;
  cfg.T = 2;
  SpSolver resolve = make_sp_resolver(state, params, tariffs, Eigen::VectorXd::Zero(2), cfg);
  SPSolution sol = resolve(sc);
  REQUIRE(sol.status == SolveStatus::Optimal);

  // In-sample scenarios never violate their own optimized bounds.
  CHECK(empirical_violation(sol, sc, params, state) == 0.0);

  // One absurd fresh scenario out of four breaches the floor. The optimum
  // drains the storage, so the benign ones must demand strictly less heat
  // than every in-sample scenario at every step.
  std::vector<TrajectorySample> fresh{make_scenario({200.0, 200.0}, {280.0, 300.0}, 0),
                                      make_scenario({211.0, 207.0}, {5000.0, 320.0}, 1),
                                      make_scenario({195.0, 214.0}, {275.0, 295.0}, 2),
                                      make_scenario({205.0, 209.0}, {290.0, 310.0}, 3)};
  CHECK(empirical_violation(sol, fresh, params, state) == doctest::Approx(0.25).epsilon(1e-12));

  // A solution with enormous slack absorbs anything.
  SPSolution roomy = sol;
  roomy.slack_pos.setConstant(1e7);
  roomy.slack_neg.setConstant(1e7);
  CHECK(empirical_violation(roomy, fresh, params, state) == 0.0);

  CHECK_THROWS_AS(empirical_violation(sol, {}, params, state), std::invalid_argument);
  std::vector<TrajectorySample> short_one{make_scenario({200.0}, {300.0})};
  CHECK_THROWS_AS(empirical_violation(sol, short_one, params, state), std::invalid_argument);
}
