#include "ehub/guarantees.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ehub/rng.hpp"
#include "json.hpp"

namespace ehub {
namespace {

double log_binom(int M, int s) {
  return std::lgamma(M + 1.0) - std::lgamma(s + 1.0) - std::lgamma(M - s + 1.0);
}

void check_sm_beta(int s, int M, double beta) {
  if (M < 1) throw std::invalid_argument("sample count must be at least 1");
  if (s < 0 || s > M) throw std::invalid_argument("support cardinality must lie in [0, M]");
  if (!(beta > 0.0 && beta < 1.0))
    throw std::invalid_argument("confidence parameter must lie in (0, 1)");
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol * (1.0 + std::abs(b)); }

bool vectors_match(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double tol) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (!close(a[i], b[i], tol)) return false;
  return true;
}

bool solutions_match(const SPSolution& ref, const SPSolution& cand, double tol,
                     bool include_objective) {
  const SetPoints& r = ref.set_points;
  const SetPoints& c = cand.set_points;
  if (r.horizon() != c.horizon()) return false;
  for (int k = 0; k < r.horizon(); ++k)
    for (int j = 0; j < 4; ++j)
      if (!close(c.chp_weights(j, k), r.chp_weights(j, k), tol)) return false;
  bool ok = vectors_match(c.p_pv, r.p_pv, tol) && vectors_match(c.p_chp, r.p_chp, tol) &&
            vectors_match(c.q_chp, r.q_chp, tol) && vectors_match(c.f_chp, r.f_chp, tol) &&
            vectors_match(c.p_hp, r.p_hp, tol) && vectors_match(c.q_hp, r.q_hp, tol) &&
            vectors_match(c.q_gb, r.q_gb, tol) && vectors_match(c.f_gb, r.f_gb, tol) &&
            vectors_match(c.es_charge, r.es_charge, tol) &&
            vectors_match(c.es_discharge, r.es_discharge, tol) &&
            vectors_match(c.es_level, r.es_level, tol) &&
            vectors_match(cand.slack_pos, ref.slack_pos, tol) &&
            vectors_match(cand.slack_neg, ref.slack_neg, tol);
  if (ok && include_objective) ok = close(cand.objective, ref.objective, tol);
  return ok;
}

} // namespace

void GuaranteeConfig::validate() const {
  if (!(beta > 0.0 && beta < 1.0))
    throw std::invalid_argument("confidence parameter must lie in (0, 1)");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("target violation level must lie in (0, 1]");
  if (!(solution_tol > 0.0)) throw std::invalid_argument("solution tolerance must be positive");
}

double epsilon_closed_form(int s, int M, double beta) {
  check_sm_beta(s, M, beta);
  if (s == M) return 1.0;
  double inner = (std::log(beta) - std::log(static_cast<double>(M)) - log_binom(M, s)) / (M - s);
  return -std::expm1(inner);
}

double epsilon_bound(int s, int M, double beta) {
  check_sm_beta(s, M, beta);
  if (s == M) throw std::invalid_argument("the bound is undefined at s = M");
  return (std::log(1.0 / beta) + std::log(static_cast<double>(M)) + log_binom(M, s)) / (M - s);
}

SpSolver make_sp_resolver(const HubState& state, const HubParameters& params,
                          const Tariffs& tariffs, const Eigen::VectorXd& pv_cap,
                          const SPConfig& cfg) {
  return [state, params, tariffs, pv_cap, cfg](const std::vector<TrajectorySample>& subset) {
    LinearProgram lp;
    std::vector<ComplementarityPair> pairs;
    SPLayout layout;
    build_scenario_program(state, params, tariffs, subset, pv_cap, cfg, &lp, &pairs, &layout);
    if (cfg.epigraph) epigraph_reformulate(&lp, &layout);
    return solve_sp(lp, pairs, layout, cfg);
  };
}

GuaranteeResult find_support_subsample(const SpSolver& resolve,
                                       const std::vector<TrajectorySample>& scenarios,
                                       const SPSolution& reference, const GuaranteeConfig& cfg) {
  cfg.validate();
  if (!resolve) throw std::invalid_argument("null resolver");
  if (scenarios.empty()) throw std::invalid_argument("need at least one scenario");
  if (reference.status != SolveStatus::Optimal || reference.degraded)
    throw std::invalid_argument("reference solution must be solved to optimality");
  const int M = static_cast<int>(scenarios.size());

  std::vector<int> order(static_cast<std::size_t>(M));
  std::iota(order.begin(), order.end(), 0);
  if (cfg.randomized_order) {
    CounterRng rng = CounterRng::for_stream(cfg.order_seed, 0x5e0, 0, 0);
    for (int i = M - 1; i > 0; --i)
      std::swap(order[static_cast<std::size_t>(i)],
                order[rng.next_below(static_cast<std::uint64_t>(i + 1))]);
  }

  std::vector<char> gone(static_cast<std::size_t>(M), 0);
  std::vector<int> removed;
  for (int idx : order) {
    std::vector<TrajectorySample> subset;
    for (int j = 0; j < M; ++j)
      if (!gone[static_cast<std::size_t>(j)] && j != idx)
        subset.push_back(scenarios[static_cast<std::size_t>(j)]);
    if (subset.empty()) continue; // the last scenario always stays
    SPSolution cand;
    try {
      cand = resolve(subset);
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << "support search aborted at scenario " << idx << " after " << removed.size()
         << " confirmed removals: " << e.what();
      throw std::runtime_error(os.str());
    }
    if (cand.status != SolveStatus::Optimal || cand.degraded) {
      std::ostringstream os;
      os << "support search aborted at scenario " << idx << " after " << removed.size()
         << " confirmed removals: re-solve returned " << status_name(cand.status);
      throw std::runtime_error(os.str());
    }
    if (solutions_match(reference, cand, cfg.solution_tol, cfg.epigraph)) {
      gone[static_cast<std::size_t>(idx)] = 1;
      removed.push_back(idx);
    }
  }
  std::sort(removed.begin(), removed.end());

  GuaranteeResult r;
  r.s_star = M - static_cast<int>(removed.size());
  r.removed = std::move(removed);
  r.beta = cfg.beta;
  r.epigraph_active = cfg.epigraph;
  r.vacuous = r.s_star == M;
  r.epsilon = epsilon_closed_form(r.s_star, M, cfg.beta);
  r.bound = r.vacuous ? std::numeric_limits<double>::infinity()
                      : epsilon_bound(r.s_star, M, cfg.beta);
  return r;
}

GuaranteeResult certify(const SpSolver& resolve, const std::vector<TrajectorySample>& scenarios,
                        const SPSolution& reference, const GuaranteeConfig& cfg) {
  return find_support_subsample(resolve, scenarios, reference, cfg);
}

std::string certificate_json(const GuaranteeResult& r) {
  using nlohmann::json;
  json j;
  j["schema_version"] = 1;
  j["type"] = "scenario_certificate";
  j["beta"] = r.beta;
  j["s_star"] = r.s_star;
  j["epsilon"] = r.epsilon;
  if (std::isfinite(r.bound))
    j["bound"] = r.bound;
  else
    j["bound"] = nullptr;
  j["removed_indices"] = r.removed;
  j["epigraph_active"] = r.epigraph_active;
  j["vacuous"] = r.vacuous;
  j["statement"] = "with confidence 1 - beta over the sampled scenarios, the probability under "
                   "the scenario-generating distribution that a fresh scenario breaches the "
                   "optimized thermal-storage bounds is at most epsilon";
  return j.dump(2) + "\n";
}

double empirical_violation(const SPSolution& sol, const std::vector<TrajectorySample>& fresh,
                           const HubParameters& params, const HubState& state,
                           double level_tol) {
  if (fresh.empty()) throw std::invalid_argument("need at least one fresh scenario");
  const int T = sol.set_points.horizon();
  if (T < 1) throw std::invalid_argument("solution carries no set points");
  if (sol.slack_pos.size() != T || sol.slack_neg.size() != T)
    throw std::invalid_argument("solution slacks do not cover the horizon");
  int violated = 0;
  for (const TrajectorySample& sc : fresh) {
    if (sc.l_h.size() != T || sc.l_e.size() != T)
      throw std::invalid_argument("fresh scenario horizon mismatch");
    double level = state.ts_level;
    bool bad = false;
    for (int k = 0; k < T && !bad; ++k) {
      double supplied =
          sol.set_points.q_gb[k] + sol.set_points.q_chp[k] + sol.set_points.q_hp[k];
      double gap = sc.l_h[k] - supplied; // positive: storage must discharge
      double discharge = gap > 0.0 ? gap : 0.0;
      double charge = gap < 0.0 ? -gap : 0.0;
      level = storage_step(level, discharge, charge, params.eta_ts, params.gamma_ts, params.dt);
      if (level < params.ts_min - sol.slack_neg[k] - level_tol ||
          level > params.ts_max + sol.slack_pos[k] + level_tol)
        bad = true;
    }
    if (bad) ++violated;
  }
  return static_cast<double>(violated) / static_cast<double>(fresh.size());
}

} // namespace ehub
