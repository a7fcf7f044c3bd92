#include "ehub/lp.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ehub {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = 1e-9;       // internal feasibility classification
constexpr double kRatioZero = 1e-10;
} // namespace

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::IterationLimit: return "iteration_limit";
  }
  return "unknown";
}

int LinearProgram::add_variable(double lb, double ub, double c) {
  lower.push_back(lb);
  upper.push_back(ub);
  cost.push_back(c);
  return num_vars++;
}

int LinearProgram::add_row(RowSense sense, double b) {
  senses.push_back(sense);
  rhs.push_back(b);
  return static_cast<int>(senses.size()) - 1;
}

void LinearProgram::add_entry(int row, int col, double value) {
  entries.emplace_back(row, col, value);
}

void LinearProgram::validate() const {
  if (static_cast<int>(cost.size()) != num_vars || static_cast<int>(lower.size()) != num_vars ||
      static_cast<int>(upper.size()) != num_vars)
    throw std::invalid_argument("linear program: variable array sizes disagree");
  if (senses.size() != rhs.size())
    throw std::invalid_argument("linear program: row array sizes disagree");
  for (int j = 0; j < num_vars; ++j) {
    if (!std::isfinite(cost[static_cast<std::size_t>(j)]))
      throw std::invalid_argument("linear program: non-finite cost");
    const double lo = lower[static_cast<std::size_t>(j)];
    const double hi = upper[static_cast<std::size_t>(j)];
    if (std::isnan(lo) || std::isnan(hi) || lo > hi)
      throw std::invalid_argument("linear program: invalid bounds");
  }
  for (double b : rhs)
    if (!std::isfinite(b)) throw std::invalid_argument("linear program: non-finite rhs");
  const int m = num_rows();
  for (const auto& t : entries) {
    if (t.row() < 0 || t.row() >= m || t.col() < 0 || t.col() >= num_vars)
      throw std::invalid_argument("linear program: entry index out of range");
    if (!std::isfinite(t.value()))
      throw std::invalid_argument("linear program: non-finite coefficient");
  }
}

Eigen::SparseMatrix<double> LinearProgram::matrix() const {
  Eigen::SparseMatrix<double> a(num_rows(), num_vars);
  a.setFromTriplets(entries.begin(), entries.end());
  return a;
}

namespace {

enum ColState : signed char { kBasic = 0, kAtLower = 1, kAtUpper = 2, kFreeNB = 3 };

struct SingularBasis {};

// Bounded-variable revised simplex over the equality form [A I][x;s] = b.
// The basis inverse is a sparse LU of a reference basis plus product-form eta
// updates, refreshed every `refactor_every` pivots. Infeasible starts run a
// composite phase 1 that minimizes the total bound violation of the basics,
// so warm starts never need artificial variables.
class Simplex {
public:
  Simplex(const LinearProgram& lp, const SolveOptions& opt) : opt_(opt) {
    n_ = lp.num_vars;
    m_ = lp.num_rows();
    ncols_ = n_ + m_;
    std::vector<Eigen::Triplet<double>> tr = lp.entries;
    tr.reserve(tr.size() + static_cast<std::size_t>(m_));
    for (int i = 0; i < m_; ++i) tr.emplace_back(i, n_ + i, 1.0);
    a_.resize(m_, ncols_);
    a_.setFromTriplets(tr.begin(), tr.end());

    c_ = Eigen::VectorXd::Zero(ncols_);
    lb_.resize(ncols_);
    ub_.resize(ncols_);
    for (int j = 0; j < n_; ++j) {
      c_[j] = lp.cost[static_cast<std::size_t>(j)];
      lb_[j] = lp.lower[static_cast<std::size_t>(j)];
      ub_[j] = lp.upper[static_cast<std::size_t>(j)];
    }
    for (int i = 0; i < m_; ++i) {
      switch (lp.senses[static_cast<std::size_t>(i)]) {
        case RowSense::LE: lb_[n_ + i] = 0.0; ub_[n_ + i] = kInf; break;
        case RowSense::EQ: lb_[n_ + i] = 0.0; ub_[n_ + i] = 0.0; break;
        case RowSense::GE: lb_[n_ + i] = -kInf; ub_[n_ + i] = 0.0; break;
      }
    }
    b_ = Eigen::Map<const Eigen::VectorXd>(lp.rhs.data(), m_);
  }

  SolveStatus run(const BasisHint* warm) {
    if (!init_basis(warm)) start_cold();
    long iter = 0;
    int cleanup_rounds = 0;
    bool bland = false;
    long stall = 0;
    bool was_phase1 = true;
    std::vector<char> banned(static_cast<std::size_t>(ncols_), 0);
    Eigen::VectorXd d_basic(m_);

    while (true) {
      iterations_ = iter;
      if (iter++ > opt_.max_iters) return SolveStatus::IterationLimit;

      const double infeas = infeasibility(&d_basic);
      const bool phase1 = infeas > kEps;
      if (!phase1)
        for (int i = 0; i < m_; ++i) d_basic[i] = c_[basis_[static_cast<std::size_t>(i)]];
      if (phase1 != was_phase1) {
        stall = 0;
        bland = false;
        was_phase1 = phase1;
      }
      const double merit_before = phase1 ? infeas : objective_value();

      const Eigen::VectorXd y = btran(d_basic);

      int enter = -1;
      double enter_rc = 0.0;
      double best_score = 0.0;
      bool banned_candidate = false;
      for (int j = 0; j < ncols_; ++j) {
        const ColState st = state_[static_cast<std::size_t>(j)];
        if (st == kBasic || lb_[j] == ub_[j]) continue;
        double rc = phase1 ? 0.0 : c_[j];
        for (Eigen::SparseMatrix<double>::InnerIterator it(a_, j); it; ++it)
          rc -= y[it.row()] * it.value();
        bool eligible = false;
        if (st == kAtLower) eligible = rc < -opt_.opt_tol;
        else if (st == kAtUpper) eligible = rc > opt_.opt_tol;
        else eligible = std::abs(rc) > opt_.opt_tol;
        if (!eligible) continue;
        if (banned[static_cast<std::size_t>(j)]) {
          banned_candidate = true;
          continue;
        }
        if (bland) { enter = j; enter_rc = rc; break; }
        const double score = std::abs(rc);
        if (score > best_score + 1e-15) {
          best_score = score;
          enter = j;
          enter_rc = rc;
        }
      }

      if (enter < 0) {
        if (!just_refactored_) { refactor(); continue; }
        if (banned_candidate)
          throw std::runtime_error("simplex: numerical breakdown, unusable pivot columns");
        if (phase1) return SolveStatus::Infeasible;
        if (max_violation() > opt_.feas_tol) {
          if (++cleanup_rounds > 3) return SolveStatus::IterationLimit;
          just_refactored_ = false;
          continue;
        }
        return SolveStatus::Optimal;
      }

      const ColState enter_state = state_[static_cast<std::size_t>(enter)];
      const double sig =
          (enter_state == kAtUpper || (enter_state == kFreeNB && enter_rc > 0)) ? -1.0 : 1.0;
      Eigen::VectorXd w = ftran(column(enter));

      // Ratio test: nearest blocking bound among the basics (ties resolved
      // toward the largest pivot magnitude, then the lowest row), or the
      // entering variable's own opposite bound.
      int block_row = -1;
      ColState block_state = kAtLower;
      double t_min = kInf;
      double block_mag = 0.0;
      for (int i = 0; i < m_; ++i) {
        const double ai = sig * w[i];
        if (std::abs(ai) <= kRatioZero) continue;
        const int bi = basis_[static_cast<std::size_t>(i)];
        const double xi = xB_[i];
        double t = kInf;
        ColState target = kAtLower;
        if (ai > 0) { // basic value decreases
          if (phase1 && xi > ub_[bi] + kEps) {
            t = (xi - ub_[bi]) / ai;
            target = kAtUpper;
          } else if (lb_[bi] > -kInf && xi >= lb_[bi] - kEps) {
            t = std::max(0.0, xi - lb_[bi]) / ai;
            target = kAtLower;
          }
        } else { // basic value increases
          if (phase1 && xi < lb_[bi] - kEps) {
            t = (lb_[bi] - xi) / (-ai);
            target = kAtLower;
          } else if (ub_[bi] < kInf && xi <= ub_[bi] + kEps) {
            t = std::max(0.0, ub_[bi] - xi) / (-ai);
            target = kAtUpper;
          }
        }
        if (t == kInf) continue;
        const double band = 1e-9 * (1.0 + std::min(t, t_min));
        if (t < t_min - band || (t <= t_min + band && std::abs(ai) > block_mag)) {
          t_min = std::min(t, t_min);
          block_row = i;
          block_state = target;
          block_mag = std::abs(ai);
        }
      }
      const double range = ub_[enter] - lb_[enter];
      const double t_flip = (enter_state != kFreeNB && std::isfinite(range)) ? range : kInf;

      if (block_row < 0 && t_flip == kInf) {
        if (!just_refactored_) { refactor(); continue; }
        if (!phase1) return SolveStatus::Unbounded;
        // A descent ray in phase 1 contradicts f >= 0; only numerics can
        // produce one.
        throw std::runtime_error("simplex: phase-1 descent ray");
      }

      if (block_row < 0 || t_flip < t_min - 1e-12) {
        // Bound flip: entering variable jumps to its other bound.
        for (int i = 0; i < m_; ++i) xB_[i] -= t_flip * sig * w[i];
        state_[static_cast<std::size_t>(enter)] = enter_state == kAtLower ? kAtUpper : kAtLower;
        xval_[enter] =
            state_[static_cast<std::size_t>(enter)] == kAtLower ? lb_[enter] : ub_[enter];
        just_refactored_ = false;
        if (++updates_ >= opt_.refactor_every) refactor();
      } else {
        if (std::abs(w[block_row]) < opt_.pivot_tol) {
          if (!just_refactored_) {
            refactor();
            continue;
          }
          banned[static_cast<std::size_t>(enter)] = 1;
          continue;
        }
        just_refactored_ = false;
        const double t = std::max(0.0, t_min);
        const int leave = basis_[static_cast<std::size_t>(block_row)];
        for (int i = 0; i < m_; ++i) xB_[i] -= t * sig * w[i];
        state_[static_cast<std::size_t>(leave)] =
            (lb_[leave] == ub_[leave]) ? kAtLower : block_state;
        xval_[leave] = block_state == kAtUpper ? ub_[leave] : lb_[leave];
        basic_pos_[static_cast<std::size_t>(leave)] = -1;

        const double enter_val = xval_[enter] + sig * t;
        basis_[static_cast<std::size_t>(block_row)] = enter;
        basic_pos_[static_cast<std::size_t>(enter)] = block_row;
        state_[static_cast<std::size_t>(enter)] = kBasic;
        xB_[block_row] = enter_val;
        etas_.emplace_back(block_row, std::move(w));
        std::fill(banned.begin(), banned.end(), 0);
        if (++updates_ >= opt_.refactor_every) refactor();
      }

      const double f_after = infeasibility(nullptr);
      const double merit_after =
          phase1 ? f_after : (f_after > kEps ? merit_before : objective_value());
      if (phase1 && f_after <= kEps) {
        stall = 0;
        bland = false;
      } else if (merit_after < merit_before - 1e-12) {
        stall = 0;
        bland = false;
      } else if (++stall > opt_.stall_window) {
        bland = true;
      }
    }
  }

  long iterations() const { return iterations_; }

  Eigen::VectorXd structural_x() const {
    Eigen::VectorXd x(n_);
    for (int j = 0; j < n_; ++j) x[j] = value(j);
    return x;
  }

  double objective_value() const {
    double v = 0.0;
    for (int j = 0; j < n_; ++j) v += c_[j] * value(j);
    return v;
  }

  Eigen::VectorXd duals() {
    Eigen::VectorXd cB(m_);
    for (int i = 0; i < m_; ++i) cB[i] = c_[basis_[static_cast<std::size_t>(i)]];
    return btran(std::move(cB));
  }

  Eigen::VectorXd reduced_costs(const Eigen::VectorXd& y) const {
    Eigen::VectorXd rc(n_);
    for (int j = 0; j < n_; ++j) {
      double v = c_[j];
      for (Eigen::SparseMatrix<double>::InnerIterator it(a_, j); it; ++it)
        v -= y[it.row()] * it.value();
      rc[j] = v;
    }
    return rc;
  }

  BasisHint basis_snapshot() const {
    BasisHint h;
    h.basic = basis_;
    h.state.resize(static_cast<std::size_t>(ncols_));
    for (int j = 0; j < ncols_; ++j)
      h.state[static_cast<std::size_t>(j)] =
          static_cast<signed char>(state_[static_cast<std::size_t>(j)]);
    return h;
  }

private:
  Eigen::VectorXd column(int j) const {
    Eigen::VectorXd col = Eigen::VectorXd::Zero(m_);
    for (Eigen::SparseMatrix<double>::InnerIterator it(a_, j); it; ++it)
      col[it.row()] = it.value();
    return col;
  }

  double value(int j) const {
    return state_[static_cast<std::size_t>(j)] == kBasic
               ? xB_[basic_pos_[static_cast<std::size_t>(j)]]
               : xval_[j];
  }

  // Total bound violation of the basics; optionally fills the phase-1
  // gradient (+1 above upper, -1 below lower).
  double infeasibility(Eigen::VectorXd* d) const {
    double f = 0.0;
    for (int i = 0; i < m_; ++i) {
      const int bi = basis_[static_cast<std::size_t>(i)];
      double di = 0.0;
      if (xB_[i] > ub_[bi] + kEps) {
        f += xB_[i] - ub_[bi];
        di = 1.0;
      } else if (xB_[i] < lb_[bi] - kEps) {
        f += lb_[bi] - xB_[i];
        di = -1.0;
      }
      if (d) (*d)[i] = di;
    }
    return f;
  }

  double max_violation() const {
    double v = 0.0;
    for (int i = 0; i < m_; ++i) {
      const int bi = basis_[static_cast<std::size_t>(i)];
      v = std::max(v, lb_[bi] - xB_[i]);
      v = std::max(v, xB_[i] - ub_[bi]);
    }
    return std::max(v, 0.0);
  }

  bool init_basis(const BasisHint* warm) {
    if (!warm || warm->empty()) return false;
    if (static_cast<int>(warm->basic.size()) != m_ ||
        static_cast<int>(warm->state.size()) != ncols_)
      return false;
    std::vector<char> used(static_cast<std::size_t>(ncols_), 0);
    for (int col : warm->basic) {
      if (col < 0 || col >= ncols_ || used[static_cast<std::size_t>(col)]) return false;
      used[static_cast<std::size_t>(col)] = 1;
    }
    basis_ = warm->basic;
    state_.assign(static_cast<std::size_t>(ncols_), kAtLower);
    for (int j = 0; j < ncols_; ++j) {
      signed char s = warm->state[static_cast<std::size_t>(j)];
      if (used[static_cast<std::size_t>(j)]) {
        state_[static_cast<std::size_t>(j)] = kBasic;
        continue;
      }
      if (s == kBasic || s < 0 || s > 3) s = kAtLower;
      if (s == kAtLower && lb_[j] == -kInf) s = ub_[j] < kInf ? kAtUpper : kFreeNB;
      if (s == kAtUpper && ub_[j] == kInf) s = lb_[j] > -kInf ? kAtLower : kFreeNB;
      if (s == kFreeNB && (lb_[j] > -kInf || ub_[j] < kInf))
        s = lb_[j] > -kInf ? kAtLower : kAtUpper;
      state_[static_cast<std::size_t>(j)] = static_cast<ColState>(s);
    }
    try {
      finish_setup();
    } catch (const SingularBasis&) {
      return false;
    }
    return true;
  }

  void start_cold() {
    basis_.resize(static_cast<std::size_t>(m_));
    state_.assign(static_cast<std::size_t>(ncols_), kAtLower);
    for (int j = 0; j < n_; ++j) {
      if (lb_[j] > -kInf) state_[static_cast<std::size_t>(j)] = kAtLower;
      else if (ub_[j] < kInf) state_[static_cast<std::size_t>(j)] = kAtUpper;
      else state_[static_cast<std::size_t>(j)] = kFreeNB;
    }
    for (int i = 0; i < m_; ++i) {
      basis_[static_cast<std::size_t>(i)] = n_ + i;
      state_[static_cast<std::size_t>(n_ + i)] = kBasic;
    }
    finish_setup();
  }

  void finish_setup() {
    basic_pos_.assign(static_cast<std::size_t>(ncols_), -1);
    for (int i = 0; i < m_; ++i)
      basic_pos_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)])] = i;
    xval_.resize(ncols_);
    for (int j = 0; j < ncols_; ++j) {
      switch (state_[static_cast<std::size_t>(j)]) {
        case kAtLower: xval_[j] = lb_[j]; break;
        case kAtUpper: xval_[j] = ub_[j]; break;
        default: xval_[j] = 0.0; break;
      }
    }
    refactor();
  }

  void refactor() {
    factorize();
    compute_xB();
    just_refactored_ = true;
    updates_ = 0;
  }

  void factorize() {
    etas_.clear();
    if (m_ == 0) return;
    std::vector<Eigen::Triplet<double>> tr;
    for (int i = 0; i < m_; ++i) {
      const int j = basis_[static_cast<std::size_t>(i)];
      for (Eigen::SparseMatrix<double>::InnerIterator it(a_, j); it; ++it)
        tr.emplace_back(it.row(), i, it.value());
    }
    Eigen::SparseMatrix<double> B(m_, m_);
    B.setFromTriplets(tr.begin(), tr.end());
    lu_.compute(B);
    if (lu_.info() != Eigen::Success) throw SingularBasis{};
  }

  void compute_xB() {
    Eigen::VectorXd r = b_;
    for (int j = 0; j < ncols_; ++j) {
      if (state_[static_cast<std::size_t>(j)] == kBasic) continue;
      const double v = xval_[j];
      if (v == 0.0) continue;
      for (Eigen::SparseMatrix<double>::InnerIterator it(a_, j); it; ++it)
        r[it.row()] -= it.value() * v;
    }
    xB_ = ftran(std::move(r));
  }

  Eigen::VectorXd ftran(Eigen::VectorXd v) {
    if (m_ == 0) return v;
    Eigen::VectorXd out = lu_.solve(v);
    for (const auto& [p, w] : etas_) {
      const double t = out[p] / w[p];
      out -= t * w;
      out[p] = t;
    }
    return out;
  }

  Eigen::VectorXd btran(Eigen::VectorXd v) {
    if (m_ == 0) return v;
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      const auto& [p, w] = *it;
      const double s = w.dot(v) - w[p] * v[p];
      v[p] = (v[p] - s) / w[p];
    }
    return lu_.transpose().solve(v);
  }

  const SolveOptions opt_;
  int n_ = 0, m_ = 0, ncols_ = 0;
  Eigen::SparseMatrix<double> a_;
  Eigen::VectorXd c_, lb_, ub_, b_;

  std::vector<int> basis_;
  std::vector<ColState> state_;
  std::vector<int> basic_pos_;
  Eigen::VectorXd xB_;
  Eigen::VectorXd xval_;

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  std::vector<std::pair<int, Eigen::VectorXd>> etas_;
  bool just_refactored_ = false;
  int updates_ = 0;
  long iterations_ = 0;
};

} // namespace

SolveResult solve_lp(const LinearProgram& lp, const SolveOptions& options,
                     const BasisHint* warm_start) {
  lp.validate();
  Simplex s(lp, options);
  SolveResult res;
  res.status = s.run(warm_start);
  res.iterations = s.iterations();
  res.x = s.structural_x();
  res.objective = s.objective_value();
  res.y = s.duals();
  res.reduced_costs = s.reduced_costs(res.y);
  res.basis = s.basis_snapshot();
  return res;
}

} // namespace ehub
