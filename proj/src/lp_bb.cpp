#include "ehub/lp.hpp"

#include <algorithm>
#include <queue>
#include <stdexcept>
#include <vector>

namespace ehub {

namespace {

struct Node {
  double bound = 0.0; // parent objective, a valid lower bound
  long id = 0;
  int depth = 0;
  std::vector<int> fixed_to_zero;
  BasisHint basis;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.id > b.id;
  }
};

// Index of the worst pair with product strictly above `threshold`, ties to
// the lowest pair index; -1 when none.
int worst_pair(const Eigen::VectorXd& x, const std::vector<ComplementarityPair>& pairs,
               double threshold) {
  int best = -1;
  double best_v = threshold;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double v = x[pairs[i].a] * x[pairs[i].b];
    if (v > best_v + 1e-15) {
      best_v = v;
      best = static_cast<int>(i);
    }
  }
  return best;
}

} // namespace

SolveResult solve_with_complementarity(const LinearProgram& lp,
                                       const std::vector<ComplementarityPair>& pairs,
                                       BranchMode mode, const SolveOptions& options,
                                       const BasisHint* warm_start) {
  lp.validate();
  for (const auto& p : pairs) {
    if (p.a < 0 || p.a >= lp.num_vars || p.b < 0 || p.b >= lp.num_vars || p.a == p.b)
      throw std::invalid_argument("complementarity pair: invalid variable indices");
    if (lp.lower[static_cast<std::size_t>(p.a)] != 0.0 ||
        lp.lower[static_cast<std::size_t>(p.b)] != 0.0)
      throw std::invalid_argument("complementarity pair: variables must have lower bound 0");
  }

  const double threshold = mode == BranchMode::RelaxFirst ? options.comp_tol : 0.0;

  SolveResult root = solve_lp(lp, options, warm_start);
  if (root.status != SolveStatus::Optimal) return root;
  const int root_worst = worst_pair(root.x, pairs, threshold);
  if (root_worst < 0) return root;

  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  long next_id = 0;
  BBStats stats;
  stats.pairs_branched = 1;

  auto push_children = [&](const SolveResult& parent, const std::vector<int>& parent_fixed,
                           int pair_idx, int depth) {
    for (int var : {pairs[static_cast<std::size_t>(pair_idx)].a,
                    pairs[static_cast<std::size_t>(pair_idx)].b}) {
      Node child;
      child.bound = parent.objective;
      child.id = next_id++;
      child.depth = depth;
      child.fixed_to_zero = parent_fixed;
      child.fixed_to_zero.push_back(var);
      child.basis = parent.basis;
      open.push(std::move(child));
    }
  };
  push_children(root, {}, root_worst, 1);

  SolveResult incumbent;
  bool have_incumbent = false;

  while (!open.empty()) {
    const Node node = open.top();
    open.pop();
    if (have_incumbent) {
      const double margin = 1e-9 * (1.0 + std::abs(incumbent.objective));
      if (node.bound >= incumbent.objective - margin) break; // best-bound: rest prune too
    }
    if (stats.nodes >= options.node_limit) {
      SolveResult out = have_incumbent ? incumbent : root;
      out.status = SolveStatus::IterationLimit;
      out.bb = stats;
      return out;
    }

    LinearProgram work = lp;
    for (int var : node.fixed_to_zero) work.upper[static_cast<std::size_t>(var)] = 0.0;
    SolveResult res = solve_lp(work, options, node.basis.empty() ? nullptr : &node.basis);
    ++stats.nodes;
    stats.max_depth = std::max(stats.max_depth, node.depth);

    if (res.status == SolveStatus::IterationLimit) {
      SolveResult out = have_incumbent ? incumbent : res;
      out.status = SolveStatus::IterationLimit;
      out.bb = stats;
      return out;
    }
    if (res.status != SolveStatus::Optimal) continue;

    const int viol = worst_pair(res.x, pairs, threshold);
    if (viol < 0) {
      if (!have_incumbent || res.objective < incumbent.objective - 1e-12) {
        incumbent = res;
        have_incumbent = true;
      }
      continue;
    }
    ++stats.pairs_branched;
    push_children(res, node.fixed_to_zero, viol, node.depth + 1);
  }

  if (!have_incumbent) {
    SolveResult out;
    out.status = SolveStatus::Infeasible;
    out.x = Eigen::VectorXd::Zero(lp.num_vars);
    out.y = Eigen::VectorXd::Zero(lp.num_rows());
    out.reduced_costs = Eigen::VectorXd::Zero(lp.num_vars);
    out.bb = stats;
    return out;
  }
  incumbent.bb = stats;
  return incumbent;
}

} // namespace ehub
