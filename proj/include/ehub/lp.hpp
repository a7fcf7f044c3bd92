#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <string>
#include <vector>

namespace ehub {

enum class RowSense : char { LE = 0, EQ = 1, GE = 2 };

enum class SolveStatus : char { Optimal = 0, Infeasible = 1, Unbounded = 2, IterationLimit = 3 };

const char* status_name(SolveStatus s);

// min cost'x  s.t.  A x {<=,=,>=} rhs,  lower <= x <= upper.
// Infinite bounds are +/-inf; coefficients must be finite.
struct LinearProgram {
  int num_vars = 0;
  std::vector<double> cost;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<Eigen::Triplet<double>> entries; // (row, col, value)
  std::vector<RowSense> senses;
  std::vector<double> rhs;

  int num_rows() const { return static_cast<int>(senses.size()); }

  int add_variable(double lb, double ub, double c);
  int add_row(RowSense sense, double b);
  void add_entry(int row, int col, double value);

  void validate() const; // throws std::invalid_argument
  Eigen::SparseMatrix<double> matrix() const; // column-major num_rows x num_vars
};

// Two nonnegative variables constrained to x_a * x_b = 0.
struct ComplementarityPair {
  int a = -1;
  int b = -1;
};

enum class BranchMode : char { RelaxFirst = 0, AlwaysBranch = 1 };

struct SolveOptions {
  double feas_tol = 1e-7;   // primal feasibility
  double opt_tol = 1e-9;    // reduced-cost threshold
  double comp_tol = 1e-6;   // complementarity product acceptance
  double pivot_tol = 1e-9;  // smallest admissible pivot magnitude
  long max_iters = 200000;
  int refactor_every = 100; // eta updates between refactorizations
  int stall_window = 500;   // non-improving pivots before Bland's rule
  int node_limit = 20000;   // branch-and-bound nodes
};

// Basis snapshot for warm starts. `state` is one entry per structural-plus-
// slack column: 0 basic, 1 at lower bound, 2 at upper bound, 3 free at zero.
struct BasisHint {
  std::vector<int> basic;
  std::vector<signed char> state;
  bool empty() const { return basic.empty(); }
};

struct BBStats {
  int nodes = 0;
  int max_depth = 0;
  int pairs_branched = 0;
};

struct SolveResult {
  SolveStatus status = SolveStatus::Infeasible;
  Eigen::VectorXd x;             // structural variable values
  double objective = 0.0;
  Eigen::VectorXd y;             // one dual per row
  Eigen::VectorXd reduced_costs; // structural reduced costs at the solution
  long iterations = 0;
  BBStats bb;
  BasisHint basis;
};

SolveResult solve_lp(const LinearProgram& lp, const SolveOptions& options = {},
                     const BasisHint* warm_start = nullptr);

// Exact minimization subject to the disjunctions x_a = 0 or x_b = 0 for each
// pair: LP relaxation plus branch-and-bound on violated pairs. RelaxFirst
// accepts a relaxation whose pair products are below comp_tol; AlwaysBranch
// accepts only products that are exactly zero at the relaxation optimum.
SolveResult solve_with_complementarity(const LinearProgram& lp,
                                       const std::vector<ComplementarityPair>& pairs,
                                       BranchMode mode = BranchMode::RelaxFirst,
                                       const SolveOptions& options = {},
                                       const BasisHint* warm_start = nullptr);

// Independent optimality check: recomputes feasibility, dual feasibility and
// the primal-dual gap from (lp, x, y) alone.
struct CertificateReport {
  bool ok = false;
  double max_row_violation = 0.0;
  double max_bound_violation = 0.0;
  double max_dual_violation = 0.0; // reduced-cost sign violations
  double relative_gap = 0.0;
  std::string detail;
};

CertificateReport certify_lp_solution(const LinearProgram& lp, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& y, double feas_tol = 1e-7,
                                      double gap_tol = 1e-6);

// Plain-text canonical form (vars, cost, bounds, rows, pairs); doubles are
// written shortest-round-trip so parse(write(lp)) is exact.
std::string write_lp_text(const LinearProgram& lp, const std::vector<ComplementarityPair>& pairs);
std::pair<LinearProgram, std::vector<ComplementarityPair>> parse_lp_text(const std::string& text);

} // namespace ehub
