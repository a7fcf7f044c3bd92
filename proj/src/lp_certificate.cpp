#include "ehub/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "ehub/csv.hpp"

namespace ehub {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
} // namespace

// Checks (lp, x, y) from scratch: row and bound feasibility of x, sign
// feasibility of the reduced costs implied by y (slack rows included), and
// the primal-dual objective gap. Shares no state with the solver.
CertificateReport certify_lp_solution(const LinearProgram& lp, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& y, double feas_tol,
                                      double gap_tol) {
  CertificateReport rep;
  const int n = lp.num_vars;
  const int m = lp.num_rows();
  if (x.size() != n || y.size() != m) {
    rep.detail = "dimension mismatch";
    return rep;
  }

  Eigen::VectorXd ax = Eigen::VectorXd::Zero(m);
  for (const auto& t : lp.entries) ax[t.row()] += t.value() * x[t.col()];

  double cmax = 1.0;
  for (int j = 0; j < n; ++j) cmax = std::max(cmax, std::abs(lp.cost[static_cast<std::size_t>(j)]));
  const double dual_tol = 1e-6 * cmax;

  for (int i = 0; i < m; ++i) {
    const double r = ax[i] - lp.rhs[static_cast<std::size_t>(i)];
    double v = 0.0;
    switch (lp.senses[static_cast<std::size_t>(i)]) {
      case RowSense::LE: v = std::max(0.0, r); break;
      case RowSense::GE: v = std::max(0.0, -r); break;
      case RowSense::EQ: v = std::abs(r); break;
    }
    rep.max_row_violation = std::max(rep.max_row_violation, v);
  }

  // Reduced costs of the structural columns.
  Eigen::VectorXd rc(n);
  for (int j = 0; j < n; ++j) rc[j] = lp.cost[static_cast<std::size_t>(j)];
  for (const auto& t : lp.entries) rc[t.col()] -= y[t.row()] * t.value();

  double dual_obj = 0.0;
  for (int i = 0; i < m; ++i) dual_obj += y[i] * lp.rhs[static_cast<std::size_t>(i)];
  bool dual_ray = false;

  auto column_check = [&](double lo, double hi, double val, double r) {
    rep.max_bound_violation =
        std::max({rep.max_bound_violation, lo - val, val - hi, 0.0});
    if (lo == hi) return; // fixed column carries no dual condition
    const double pos_tol = std::max(feas_tol, 1e-7 * (1.0 + std::abs(val)));
    const bool at_lower = lo > -kInf && val <= lo + pos_tol;
    const bool at_upper = hi < kInf && val >= hi - pos_tol;
    double dv = 0.0;
    if (at_lower && at_upper) dv = 0.0;
    else if (at_lower) dv = std::max(0.0, -r);
    else if (at_upper) dv = std::max(0.0, r);
    else dv = std::abs(r);
    rep.max_dual_violation = std::max(rep.max_dual_violation, dv);
    // Dual objective contribution of the bound multipliers.
    const double rp = std::max(0.0, r);
    const double rm = std::max(0.0, -r);
    if (rp > dual_tol) {
      if (lo == -kInf) dual_ray = true;
      else dual_obj += rp * lo;
    }
    if (rm > dual_tol) {
      if (hi == kInf) dual_ray = true;
      else dual_obj -= rm * hi;
    }
  };

  for (int j = 0; j < n; ++j)
    column_check(lp.lower[static_cast<std::size_t>(j)], lp.upper[static_cast<std::size_t>(j)],
                 x[j], rc[j]);
  for (int i = 0; i < m; ++i) {
    // Slack column: value b - Ax, cost 0, reduced cost -y_i, bounds by sense.
    double lo = 0.0, hi = 0.0;
    switch (lp.senses[static_cast<std::size_t>(i)]) {
      case RowSense::LE: lo = 0.0; hi = kInf; break;
      case RowSense::EQ: lo = 0.0; hi = 0.0; break;
      case RowSense::GE: lo = -kInf; hi = 0.0; break;
    }
    column_check(lo, hi, lp.rhs[static_cast<std::size_t>(i)] - ax[i], -y[i]);
  }

  double primal_obj = 0.0;
  for (int j = 0; j < n; ++j) primal_obj += lp.cost[static_cast<std::size_t>(j)] * x[j];
  rep.relative_gap = dual_ray ? kInf
                              : std::abs(primal_obj - dual_obj) /
                                    std::max(1.0, std::abs(primal_obj));

  std::ostringstream why;
  bool ok = true;
  if (rep.max_row_violation > feas_tol) { ok = false; why << "row feasibility; "; }
  if (rep.max_bound_violation > feas_tol) { ok = false; why << "bound feasibility; "; }
  if (rep.max_dual_violation > dual_tol) { ok = false; why << "dual feasibility; "; }
  if (!(rep.relative_gap <= gap_tol)) { ok = false; why << "duality gap; "; }
  rep.ok = ok;
  rep.detail = ok ? "ok" : why.str();
  return rep;
}

namespace {
std::string bound_token(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  return format_double(v);
}

double parse_bound(const std::string& tok) {
  if (tok == "inf") return kInf;
  if (tok == "-inf") return -kInf;
  return std::stod(tok);
}
} // namespace

std::string write_lp_text(const LinearProgram& lp, const std::vector<ComplementarityPair>& pairs) {
  // Canonical layout; doubles shortest-round-trip, entries sorted row-major.
  std::ostringstream out;
  out << "ehub-lp 1\n";
  out << "vars " << lp.num_vars << "\n";
  out << "cost";
  for (double c : lp.cost) out << ' ' << format_double(c);
  out << "\nlb";
  for (double v : lp.lower) out << ' ' << bound_token(v);
  out << "\nub";
  for (double v : lp.upper) out << ' ' << bound_token(v);
  out << "\nrows " << lp.num_rows() << "\n";
  std::vector<std::vector<std::pair<int, double>>> by_row(
      static_cast<std::size_t>(lp.num_rows()));
  for (const auto& t : lp.entries)
    by_row[static_cast<std::size_t>(t.row())].emplace_back(t.col(), t.value());
  for (int i = 0; i < lp.num_rows(); ++i) {
    auto& cols = by_row[static_cast<std::size_t>(i)];
    std::sort(cols.begin(), cols.end());
    const char* sense = lp.senses[static_cast<std::size_t>(i)] == RowSense::LE   ? "le"
                        : lp.senses[static_cast<std::size_t>(i)] == RowSense::EQ ? "eq"
                                                                                 : "ge";
    out << "row " << sense << ' ' << format_double(lp.rhs[static_cast<std::size_t>(i)]) << ' '
        << cols.size();
    for (const auto& [c, v] : cols) out << ' ' << c << ':' << format_double(v);
    out << "\n";
  }
  out << "pairs " << pairs.size() << "\n";
  for (const auto& p : pairs) out << "pair " << p.a << ' ' << p.b << "\n";
  out << "end\n";
  return out.str();
}

std::pair<LinearProgram, std::vector<ComplementarityPair>> parse_lp_text(const std::string& text) {
  std::istringstream in(text);
  std::string tok;
  auto expect = [&](const char* want) {
    if (!(in >> tok) || tok != want)
      throw std::invalid_argument(std::string("lp text: expected '") + want + "'");
  };
  expect("ehub-lp");
  int version = 0;
  in >> version;
  if (version != 1) throw std::invalid_argument("lp text: unsupported version");

  LinearProgram lp;
  expect("vars");
  int n = 0;
  in >> n;
  if (n < 0) throw std::invalid_argument("lp text: bad var count");
  lp.num_vars = n;
  lp.cost.resize(static_cast<std::size_t>(n));
  lp.lower.resize(static_cast<std::size_t>(n));
  lp.upper.resize(static_cast<std::size_t>(n));
  expect("cost");
  for (auto& c : lp.cost) in >> c;
  expect("lb");
  for (auto& v : lp.lower) { in >> tok; v = parse_bound(tok); }
  expect("ub");
  for (auto& v : lp.upper) { in >> tok; v = parse_bound(tok); }
  expect("rows");
  int m = 0;
  in >> m;
  for (int i = 0; i < m; ++i) {
    expect("row");
    std::string sense;
    double b = 0.0;
    int nnz = 0;
    in >> sense >> b >> nnz;
    RowSense rs = sense == "le" ? RowSense::LE : sense == "eq" ? RowSense::EQ : RowSense::GE;
    if (sense != "le" && sense != "eq" && sense != "ge")
      throw std::invalid_argument("lp text: bad row sense");
    lp.add_row(rs, b);
    for (int k = 0; k < nnz; ++k) {
      in >> tok;
      const std::size_t colon = tok.find(':');
      if (colon == std::string::npos) throw std::invalid_argument("lp text: bad entry");
      lp.add_entry(i, std::stoi(tok.substr(0, colon)), std::stod(tok.substr(colon + 1)));
    }
  }
  std::vector<ComplementarityPair> pairs;
  expect("pairs");
  int np = 0;
  in >> np;
  for (int i = 0; i < np; ++i) {
    expect("pair");
    ComplementarityPair p;
    in >> p.a >> p.b;
    pairs.push_back(p);
  }
  expect("end");
  if (!in) throw std::invalid_argument("lp text: truncated");
  lp.validate();
  return {std::move(lp), std::move(pairs)};
}

} // namespace ehub
