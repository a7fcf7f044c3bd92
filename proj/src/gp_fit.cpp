#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ehub/rng.hpp"
#include "gp_internal.hpp"

namespace ehub {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct LmlEval {
  double value = kNegInf;
  Eigen::VectorXd grad;
  bool ok = false;
};

// Zero-mean LML and its gradient in log-hyperparameter space. A Gram matrix
// past the jitter ladder yields ok=false instead of throwing so the line
// search can back off.
LmlEval eval_lml(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                 const KernelHyperparameters& hp, const std::vector<int>& linear_dims,
                 bool want_grad) {
  LmlEval out;
  int n = static_cast<int>(X.rows());
  Eigen::MatrixXd L;
  double jitter = 0.0;
  if (!detail::try_chol_gram(X, hp, linear_dims, &L, &jitter)) return out;

  Eigen::VectorXd alpha = L.transpose().triangularView<Eigen::Upper>().solve(
      L.triangularView<Eigen::Lower>().solve(y));
  double lml = -0.5 * y.dot(alpha) - L.diagonal().array().log().sum() - 0.5 * n * kLog2Pi;
  if (!std::isfinite(lml)) return out;
  out.value = lml;
  out.ok = true;
  if (!want_grad) return out;

  Eigen::MatrixXd Kinv = L.transpose().triangularView<Eigen::Upper>().solve(
      L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n)));
  Eigen::MatrixXd W = alpha * alpha.transpose() - Kinv;

  Eigen::VectorXd inv_l = hp.rbf_lengthscales.cwiseInverse();
  Eigen::MatrixXd Z = X * inv_l.asDiagonal();
  Eigen::VectorXd sz = Z.rowwise().squaredNorm();
  Eigen::MatrixXd D2 =
      sz.replicate(1, n) + sz.transpose().replicate(n, 1) - 2.0 * (Z * Z.transpose());
  Eigen::MatrixXd Krbf =
      hp.rbf_signal_variance * (-0.5 * D2.cwiseMax(0.0).array()).exp().matrix();

  out.grad.resize(detail::hyperparameter_count(hp));
  int p = 0;
  Eigen::MatrixXd G = W.cwiseProduct(Krbf);
  out.grad[p++] = 0.5 * G.sum();
  Eigen::VectorXd grow = G.rowwise().sum();
  for (int d = 0; d < X.cols(); ++d) {
    // d/dlog(l_d) of the RBF part: Krbf .* (x_d - x'_d)^2 / l_d^2
    Eigen::VectorXd u = Z.col(d);
    double quad = u.array().square().matrix().dot(grow) - u.dot(G * u);
    out.grad[p++] = quad;
  }
  for (size_t i = 0; i < linear_dims.size(); ++i) {
    Eigen::VectorXd v = X.col(linear_dims[i]);
    out.grad[p++] = 0.5 * hp.linear_variance[static_cast<int>(i)] * v.dot(W * v);
  }
  out.grad[p] = 0.5 * hp.noise_variance * W.trace();
  return out;
}

struct AscentResult {
  Eigen::VectorXd theta;
  double value = kNegInf;
  double grad_norm = std::numeric_limits<double>::infinity();
  bool converged = false;
};

AscentResult ascend(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const std::vector<int>& linear_dims, Eigen::VectorXd theta, int dim,
                    int linear_count, int max_iters, double grad_tol) {
  auto eval = [&](const Eigen::VectorXd& th, bool grad) {
    return eval_lml(X, y, detail::unpack_log(th, dim, linear_count), linear_dims, grad);
  };

  AscentResult res;
  LmlEval cur = eval(theta, true);
  if (!cur.ok) return res;

  double step = 0.05;
  Eigen::VectorXd prev_theta, prev_grad;
  bool have_prev = false;
  for (int iter = 0; iter < max_iters; ++iter) {
    res.grad_norm = cur.grad.norm();
    if (res.grad_norm < grad_tol) {
      res.converged = true;
      break;
    }
    if (have_prev) {
      Eigen::VectorXd s = theta - prev_theta;
      Eigen::VectorXd u = cur.grad - prev_grad;
      double su = s.dot(u);
      if (su < -1e-300) step = std::clamp(-s.squaredNorm() / su, 1e-5, 50.0);
    }
    bool moved = false;
    double trial = step;
    for (int half = 0; half < 30; ++half) {
      Eigen::VectorXd cand =
          (theta + trial * cur.grad).cwiseMax(-20.0).cwiseMin(20.0);
      LmlEval next = eval(cand, true);
      if (next.ok && next.value > cur.value) {
        prev_theta = theta;
        prev_grad = cur.grad;
        have_prev = true;
        theta = cand;
        cur = next;
        step = trial;
        moved = true;
        break;
      }
      trial *= 0.5;
    }
    if (!moved) break; // no ascent direction at numerical precision
  }
  res.theta = theta;
  res.value = cur.value;
  res.grad_norm = cur.grad.norm();
  res.converged = res.converged || res.grad_norm < grad_tol;
  return res;
}

} // namespace

double gp_log_marginal(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const KernelHyperparameters& hp, const std::vector<int>& linear_dims) {
  hp.validate(static_cast<int>(X.cols()), static_cast<int>(linear_dims.size()));
  LmlEval e = eval_lml(X, y, hp, linear_dims, false);
  if (!e.ok) throw std::runtime_error("kernel matrix is not positive definite even with maximum jitter");
  return e.value;
}

double gp_log_marginal_grad(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const KernelHyperparameters& hp, const std::vector<int>& linear_dims,
                            Eigen::VectorXd* grad) {
  hp.validate(static_cast<int>(X.cols()), static_cast<int>(linear_dims.size()));
  LmlEval e = eval_lml(X, y, hp, linear_dims, true);
  if (!e.ok) throw std::runtime_error("kernel matrix is not positive definite even with maximum jitter");
  if (grad) *grad = e.grad;
  return e.value;
}

GPModel fit(const DemandHistory& data, DemandKind kind, Season season,
            const KernelHyperparameters& init, const FitOptions& options) {
  int dim = feature_dim(kind);
  std::vector<int> linear_dims = default_linear_dims(kind);
  init.validate(dim, static_cast<int>(linear_dims.size()));

  HourIndex ws = options.window_start;
  HourIndex we = options.window_end;
  if (ws == 0 && we == 0) {
    ws = data.start;
    we = data.end();
  }
  std::vector<HourIndex> season_hours;
  for (HourIndex k = std::max(ws, data.start + 168); k < std::min(we, data.end()); ++k)
    if (season_of_hour(k) == season) season_hours.push_back(k);
  if (season_hours.size() < 2)
    throw std::invalid_argument(std::string("not enough ") + season_name(season) +
                                " hours in the training window");

  int total = static_cast<int>(season_hours.size());
  int cap = std::max(2, options.subsample_cap);
  int stride = (total + cap - 1) / cap;
  std::vector<HourIndex> train_hours;
  for (int i = total - 1; i >= 0; i -= stride) train_hours.push_back(season_hours[i]);
  std::reverse(train_hours.begin(), train_hours.end());

  Eigen::MatrixXd X_raw;
  Eigen::VectorXd y_raw;
  encode_rows(kind, train_hours, data, &X_raw, &y_raw);

  // Standardization is frozen from the training rows; the optimization runs
  // in the standardized space.
  GPModel proto = make_model(kind, season, init, X_raw, y_raw, linear_dims, true, train_hours);

  Eigen::VectorXd theta0 = detail::pack_log(init);
  int linear_count = static_cast<int>(linear_dims.size());
  AscentResult best;
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    Eigen::VectorXd theta = theta0;
    if (r > 0) {
      CounterRng rng = CounterRng::for_stream(options.seed, 0xf17ull, static_cast<std::uint64_t>(r), 0);
      for (int i = 0; i < theta.size(); ++i) theta[i] += 0.5 * rng.next_gaussian();
    }
    AscentResult res = ascend(proto.X, proto.y_std, linear_dims, theta, dim, linear_count,
                              options.max_iterations, options.gradient_tolerance);
    if (res.value > best.value) best = res;
  }
  if (best.value == kNegInf)
    throw std::runtime_error("hyperparameter search failed: no positive definite kernel found");

  KernelHyperparameters hp_fit = detail::unpack_log(best.theta, dim, linear_count);

  GPModel shell = proto;
  shell.hp = hp_fit;
  shell.log_marginal = best.value;
  shell.grad_norm = best.grad_norm;
  shell.fit_converged = best.converged;

  GPModel out = with_conditioning_window(shell, data, we - 1, options.conditioning_rows);
  return out;
}

} // namespace ehub
