#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ehub/scenario_mpc.hpp"

namespace ehub {

struct GuaranteeConfig {
  double beta = 0.05;         // confidence parameter, in (0,1)
  double alpha = 0.10;        // reported target violation level, in (0,1]
  double solution_tol = 1e-6; // relative tolerance for "solution unchanged"
  bool epigraph = false;      // objective joins the comparison (cost rows are
                              // scenario constraints in epigraph form)
  bool randomized_order = false;
  std::uint64_t order_seed = 1;

  void validate() const;
};

struct GuaranteeResult {
  int s_star = 0;       // support subsample cardinality
  double epsilon = 1.0; // a-posteriori violation level
  double bound = 0.0;   // logarithmic upper bound, +inf when vacuous
  std::vector<int> removed; // indices confirmed removable, ascending
  bool vacuous = false;     // s_star == M, certificate carries no information
  bool epigraph_active = false;
  double beta = 0.0;
};

// epsilon(s): 1 when s = M, else 1 - (beta / (M * C(M,s)))^{1/(M-s)}.
// Evaluated in log space; exact for M up to 1e6.
double epsilon_closed_form(int s, int M, double beta);

// The explicit upper bound (log(1/beta) + log(M * C(M,s))) / (M - s);
// rejects s = M.
double epsilon_bound(int s, int M, double beta);

// Re-solves the scenario program on a subset of the scenarios.
using SpSolver = std::function<SPSolution(const std::vector<TrajectorySample>&)>;

// Wraps build_scenario_program + (optional epigraph) + solve_sp with fixed
// instance data; subset size may differ from the original M.
SpSolver make_sp_resolver(const HubState& state, const HubParameters& params,
                          const Tariffs& tariffs, const Eigen::VectorXd& pv_cap,
                          const SPConfig& cfg);

// Greedy single pass: tentatively drop each scenario (on top of confirmed
// removals), re-solve, and confirm the removal when the shared set points and
// slacks (plus the objective in epigraph form) match the reference within
// cfg.solution_tol. The retained set is an irreducible support superset. The
// last remaining scenario is never dropped. Re-solve failures abort with the
// progress so far in the message.
GuaranteeResult find_support_subsample(const SpSolver& resolve,
                                       const std::vector<TrajectorySample>& scenarios,
                                       const SPSolution& reference, const GuaranteeConfig& cfg);

// find_support_subsample + epsilon_closed_form + bound. The guarantee reads:
// with confidence 1 - beta over the M-sample draw, the probability (under the
// scenario-generating distribution) that a fresh scenario violates the
// optimized soft TS bounds is at most epsilon.
GuaranteeResult certify(const SpSolver& resolve, const std::vector<TrajectorySample>& scenarios,
                        const SPSolution& reference, const GuaranteeConfig& cfg);

std::string certificate_json(const GuaranteeResult& r);

// Out-of-sample check: freeze the shared set points, re-derive each fresh
// scenario's unique complementary TS flows from the heat balance, roll the
// level forward from state.ts_level, and report the fraction of scenarios
// whose trajectory leaves [ts_min - slack_neg_k, ts_max + slack_pos_k] at any
// step. level_tol absorbs the solver's complementarity acceptance.
double empirical_violation(const SPSolution& sol, const std::vector<TrajectorySample>& fresh,
                           const HubParameters& params, const HubState& state,
                           double level_tol = 1e-3);

} // namespace ehub
