#include <cmath>
#include <cstdio>
#include <vector>

#include "doctest.h"
#include "ehub/csv.hpp"
#include "ehub/gp.hpp"
#include "ehub/rng.hpp"
#include "test_support.hpp"

using namespace ehub;

namespace {

struct DenseProblem {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  KernelHyperparameters hp;
  std::vector<int> linear_dims;
};

DenseProblem random_problem(std::uint64_t seed, int n, int d, bool with_linear) {
  CounterRng rng = CounterRng::for_stream(seed, 0xde7, 0, 0);
  DenseProblem p;
  p.X.resize(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) p.X(i, j) = 2.0 * rng.next_gaussian();
  p.y.resize(n);
  for (int i = 0; i < n; ++i)
    p.y[i] = std::sin(p.X(i, 0)) + 0.3 * p.X(i, d - 1) + 0.1 * rng.next_gaussian();
  p.hp.rbf_signal_variance = 0.5 + rng.next_unit();
  p.hp.rbf_lengthscales = Eigen::VectorXd::NullaryExpr(d, [&](int) { return 0.8 + rng.next_unit(); });
  if (with_linear) {
    p.linear_dims = {0, d - 1};
    p.hp.linear_variance = Eigen::VectorXd::NullaryExpr(2, [&](int) { return 0.2 + 0.3 * rng.next_unit(); });
  } else {
    p.hp.linear_variance = Eigen::VectorXd(0);
  }
  p.hp.noise_variance = 0.05 + 0.1 * rng.next_unit();
  return p;
}

// Textbook posterior through an explicit dense inverse.
void dense_posterior(const DenseProblem& p, const Eigen::VectorXd& xq, double* mean, double* var) {
  int n = static_cast<int>(p.X.rows());
  Eigen::MatrixXd K(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      K(i, j) = kernel_eval(p.X.row(i), p.X.row(j), p.hp, p.linear_dims);
  K.diagonal().array() += p.hp.noise_variance;
  Eigen::MatrixXd Kinv = K.inverse();
  Eigen::VectorXd ks(n);
  for (int i = 0; i < n; ++i) ks[i] = kernel_eval(p.X.row(i), xq, p.hp, p.linear_dims);
  *mean = ks.dot(Kinv * p.y);
  *var = kernel_eval(xq, xq, p.hp, p.linear_dims) - ks.dot(Kinv * ks);
}

} // namespace

TEST_CASE("kernel evaluation matches the closed form") {
  Eigen::VectorXd x(3), xp(3);
  x << 1.0, -0.5, 2.0;
  xp << 0.0, 0.5, 2.0;
  KernelHyperparameters hp;
  hp.rbf_signal_variance = 2.0;
  hp.rbf_lengthscales = Eigen::VectorXd::Constant(3, 1.0);
  hp.linear_variance = Eigen::VectorXd::Constant(1, 0.5);
  hp.noise_variance = 0.1;
  double expect = 2.0 * std::exp(-0.5 * (1.0 + 1.0 + 0.0)) + 0.5 * 2.0 * 2.0;
  CHECK(kernel_eval(x, xp, hp, {2}) == doctest::Approx(expect).epsilon(1e-12));

  // symmetry and diagonal dominance on random points
  CounterRng rng = CounterRng::for_stream(4, 0, 0, 0);
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd a = Eigen::VectorXd::NullaryExpr(3, [&](int) { return rng.next_gaussian(); });
    Eigen::VectorXd b = Eigen::VectorXd::NullaryExpr(3, [&](int) { return rng.next_gaussian(); });
    CHECK(kernel_eval(a, b, hp, {2}) == doctest::Approx(kernel_eval(b, a, hp, {2})).epsilon(1e-14));
  }
}

TEST_CASE("posterior matches a dense-inverse oracle") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    DenseProblem p = random_problem(seed, 40, 4, seed % 2 == 0);
    GPModel m = make_model(DemandKind::Electric, Season::Winter, p.hp, p.X, p.y, p.linear_dims,
                           false);
    CHECK(m.jitter == 0.0);
    CounterRng rng = CounterRng::for_stream(seed, 0x9e, 0, 0);
    for (int q = 0; q < 8; ++q) {
      Eigen::VectorXd xq = Eigen::VectorXd::NullaryExpr(4, [&](int) { return 2.0 * rng.next_gaussian(); });
      double om, ov;
      dense_posterior(p, xq, &om, &ov);
      Posterior post = posterior(m, xq);
      CHECK(post.mean == doctest::Approx(om).epsilon(1e-10));
      CHECK(post.variance == doctest::Approx(ov).epsilon(1e-10));
    }
  }
}

TEST_CASE("standardized model matches an oracle that standardizes by hand") {
  DenseProblem p = random_problem(17, 35, 3, true);
  p.X.col(1).array() *= 40.0; // wildly different scales
  p.y.array() = 300.0 + 80.0 * p.y.array();
  GPModel m = make_model(DemandKind::Electric, Season::Winter, p.hp, p.X, p.y, p.linear_dims, true);

  Eigen::VectorXd mu = p.X.colwise().mean();
  Eigen::VectorXd sd =
      ((p.X.rowwise() - mu.transpose()).array().square().colwise().mean()).sqrt();
  double ty_mu = p.y.mean();
  double ty_sd = std::sqrt((p.y.array() - ty_mu).square().mean());

  DenseProblem std_p = p;
  std_p.X = (p.X.rowwise() - mu.transpose()) * sd.cwiseInverse().asDiagonal();
  std_p.y = (p.y.array() - ty_mu) / ty_sd;

  CounterRng rng = CounterRng::for_stream(31, 0, 0, 0);
  for (int q = 0; q < 6; ++q) {
    Eigen::VectorXd xq_raw(3);
    for (int j = 0; j < 3; ++j) xq_raw[j] = mu[j] + sd[j] * rng.next_gaussian();
    Eigen::VectorXd xq_std = (xq_raw - mu).cwiseQuotient(sd);
    double om, ov;
    dense_posterior(std_p, xq_std, &om, &ov);
    Posterior post = posterior(m, xq_raw);
    CHECK(post.mean == doctest::Approx(ty_mu + ty_sd * om).epsilon(1e-10));
    CHECK(post.variance == doctest::Approx(ty_sd * ty_sd * ov).epsilon(1e-10));
  }
}

TEST_CASE("batched posterior equals the single-point posterior") {
  DenseProblem p = random_problem(23, 50, 4, true);
  GPModel m =
      make_model(DemandKind::Electric, Season::Spring, p.hp, p.X, p.y, p.linear_dims, true);
  CounterRng rng = CounterRng::for_stream(23, 0x6a, 0, 0);
  Eigen::MatrixXd Q(12, 4);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 4; ++j) Q(i, j) = 2.0 * rng.next_gaussian();
  Eigen::VectorXd means, vars;
  int clips = posterior_batch(m, Q, &means, &vars);
  CHECK(clips == 0);
  for (int i = 0; i < 12; ++i) {
    Posterior one = posterior(m, Q.row(i).transpose());
    CHECK(means[i] == doctest::Approx(one.mean).epsilon(1e-12));
    CHECK(vars[i] == doctest::Approx(one.variance).epsilon(1e-12));
  }
}

TEST_CASE("empty conditioning set returns the prior") {
  KernelHyperparameters hp;
  hp.rbf_signal_variance = 1.7;
  hp.rbf_lengthscales = Eigen::VectorXd::Constant(2, 1.0);
  hp.linear_variance = Eigen::VectorXd(0);
  hp.noise_variance = 0.3;
  GPModel m = make_model(DemandKind::Electric, Season::Winter, hp, Eigen::MatrixXd(0, 2),
                         Eigen::VectorXd(0), {}, false);
  Eigen::VectorXd xq(2);
  xq << 0.4, -1.0;
  Posterior post = posterior(m, xq);
  CHECK(post.mean == 0.0);
  CHECK(post.variance == doctest::Approx(1.7).epsilon(1e-12));
}

TEST_CASE("near-noiseless model interpolates its training targets") {
  DenseProblem p = random_problem(3, 25, 3, false);
  p.hp.noise_variance = 1e-10;
  GPModel m =
      make_model(DemandKind::Electric, Season::Winter, p.hp, p.X, p.y, p.linear_dims, false);
  for (int i = 0; i < 25; i += 4) {
    Posterior post = posterior(m, p.X.row(i).transpose());
    CHECK(post.mean == doctest::Approx(p.y[i]).epsilon(1e-4));
    CHECK(post.variance < 1e-5);
  }
}

TEST_CASE("posterior variance never exceeds the prior and shrinks with data") {
  DenseProblem p = random_problem(41, 60, 3, true);
  GPModel big = make_model(DemandKind::Heat, Season::Summer, p.hp, p.X, p.y, p.linear_dims, true);
  GPModel small = make_model(DemandKind::Heat, Season::Summer, p.hp, p.X.topRows(30),
                             p.y.head(30), p.linear_dims, false);
  GPModel small_plus = make_model(DemandKind::Heat, Season::Summer, p.hp, p.X.topRows(31),
                                  p.y.head(31), p.linear_dims, false);
  CounterRng rng = CounterRng::for_stream(41, 0x77, 0, 0);
  for (int q = 0; q < 20; ++q) {
    Eigen::VectorXd xq = Eigen::VectorXd::NullaryExpr(3, [&](int) { return 2.5 * rng.next_gaussian(); });
    Eigen::VectorXd xq_std = (xq - big.feat_mean).cwiseQuotient(big.feat_std);
    double prior = kernel_eval(xq_std, xq_std, big.hp, big.linear_dims) * big.target_std *
                   big.target_std;
    CHECK(posterior(big, xq).variance <= prior + 1e-9);
    CHECK(posterior(small_plus, xq).variance <= posterior(small, xq).variance + 1e-9);
  }
}

TEST_CASE("overwhelming observation noise collapses the posterior to the prior") {
  DenseProblem p = random_problem(51, 30, 3, false);
  p.hp.noise_variance = 1e8;
  GPModel m =
      make_model(DemandKind::Electric, Season::Winter, p.hp, p.X, p.y, p.linear_dims, false);
  Eigen::VectorXd xq = Eigen::VectorXd::Zero(3);
  double prior = kernel_eval(xq, xq, p.hp, p.linear_dims);
  Posterior post = posterior(m, xq);
  CHECK(std::abs(post.mean) < 1e-3);
  CHECK(post.variance > 0.999 * prior);
}

TEST_CASE("jitter ladder repairs a rank-deficient kernel matrix") {
  int n = 50;
  Eigen::MatrixXd X(n, 2);
  for (int i = 0; i < n; ++i) X.row(i) << 1.0, 2.0; // identical rows
  KernelHyperparameters hp;
  hp.rbf_signal_variance = 1.0;
  hp.rbf_lengthscales = Eigen::VectorXd::Constant(2, 1.0);
  hp.linear_variance = Eigen::VectorXd(0);
  hp.noise_variance = 1e-18;
  double jitter = 0.0;
  Eigen::MatrixXd L = chol_gram(X, hp, {}, &jitter);
  CHECK(jitter > 0.0);
  CHECK(jitter <= 1e-4 * (1.0 + 1e-18));
  CHECK((L * L.transpose() - Eigen::MatrixXd::Constant(n, n, 1.0)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("an unrepairable matrix throws past the ladder top") {
  Eigen::MatrixXd X(3, 1);
  X << 0.0, 1.0, 2.0;
  KernelHyperparameters hp;
  hp.rbf_signal_variance = -1.0; // forces a negative-definite diagonal
  hp.rbf_lengthscales = Eigen::VectorXd::Constant(1, 1.0);
  hp.linear_variance = Eigen::VectorXd(0);
  hp.noise_variance = 1e-12;
  CHECK_THROWS_AS(chol_gram(X, hp, {}, nullptr), std::runtime_error);
}

TEST_CASE("log marginal likelihood matches a dense evaluation") {
  for (std::uint64_t seed = 60; seed < 64; ++seed) {
    DenseProblem p = random_problem(seed, 20, 3, seed % 2 == 0);
    int n = 20;
    Eigen::MatrixXd K(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        K(i, j) = kernel_eval(p.X.row(i), p.X.row(j), p.hp, p.linear_dims);
    K.diagonal().array() += p.hp.noise_variance;
    double quad = p.y.dot(K.inverse() * p.y);
    double logdet = std::log(K.determinant());
    double expect = -0.5 * quad - 0.5 * logdet - 0.5 * n * std::log(2.0 * 3.14159265358979323846);
    CHECK(gp_log_marginal(p.X, p.y, p.hp, p.linear_dims) ==
          doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("analytic gradient matches central finite differences") {
  for (std::uint64_t seed = 70; seed < 78; ++seed) {
    DenseProblem p = random_problem(seed, 20, 3, true);
    Eigen::VectorXd grad;
    gp_log_marginal_grad(p.X, p.y, p.hp, p.linear_dims, &grad);
    int np = 2 + 3 + 2;
    REQUIRE(grad.size() == np);

    // central differences in log-hyperparameter space
    auto eval_at = [&](int idx, double eps) {
      KernelHyperparameters hp = p.hp;
      double* slots[] = {&hp.rbf_signal_variance,
                         &hp.rbf_lengthscales[0],
                         &hp.rbf_lengthscales[1],
                         &hp.rbf_lengthscales[2],
                         &hp.linear_variance[0],
                         &hp.linear_variance[1],
                         &hp.noise_variance};
      *slots[idx] = *slots[idx] * std::exp(eps);
      return gp_log_marginal(p.X, p.y, hp, p.linear_dims);
    };
    for (int i = 0; i < np; ++i) {
      double h = 1e-5;
      double fd = (eval_at(i, h) - eval_at(i, -h)) / (2.0 * h);
      double denom = std::max(std::abs(fd), 1e-6);
      CHECK(std::abs(grad[i] - fd) / denom < 1e-4);
    }
  }
}

TEST_CASE("fit improves the log marginal and predicts the synthetic series") {
  DemandHistory h = testing::synth_history(hour_from_civil(2023, 1, 1, 0), 70 * 24, 5);
  FitOptions opt;
  opt.subsample_cap = 96;
  opt.conditioning_rows = 336;
  opt.restarts = 2;
  opt.max_iterations = 60;
  opt.seed = 9;
  KernelHyperparameters init = KernelHyperparameters::standard_init(DemandKind::Electric);
  GPModel m = fit(h, DemandKind::Electric, Season::Winter, init, opt);

  REQUIRE(m.rows() == 336);
  CHECK(m.log_marginal > gp_log_marginal(m.X, m.y_std, init, m.linear_dims));
  CHECK(season_of_hour(m.row_hours.back()) == Season::Winter);

  // one-step predictions over the last two days of the window
  double se = 0.0, baseline = 0.0;
  int count = 0;
  double mean_le = 0.0;
  for (int i = 0; i < h.size(); ++i) mean_le += h.le[i];
  mean_le /= h.size();
  for (HourIndex k = m.row_hours.back() - 47; k <= m.row_hours.back(); ++k) {
    if (season_of_hour(k) != Season::Winter) continue;
    Posterior p = posterior(m, encode_electric(k, h));
    se += (p.mean - h.demand(DemandKind::Electric, k)) * (p.mean - h.demand(DemandKind::Electric, k));
    baseline += (mean_le - h.demand(DemandKind::Electric, k)) * (mean_le - h.demand(DemandKind::Electric, k));
    ++count;
  }
  REQUIRE(count > 0);
  CHECK(se < 0.25 * baseline); // far better than predicting the mean
}

TEST_CASE("refresh matches a from-scratch rebuild and rejects gaps") {
  DemandHistory h = testing::synth_history(hour_from_civil(2023, 1, 1, 0), 45 * 24, 8);
  KernelHyperparameters hp = KernelHyperparameters::standard_init(DemandKind::Electric);
  hp.noise_variance = 0.05;

  std::vector<HourIndex> hours;
  for (HourIndex k = h.start + 168; k < h.start + 168 + 200; ++k)
    if (season_of_hour(k) == Season::Winter) hours.push_back(k);
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  encode_rows(DemandKind::Electric, hours, h, &X, &y);
  GPModel m = make_model(DemandKind::Electric, Season::Winter, hp, X, y,
                         default_linear_dims(DemandKind::Electric), true, hours);

  HourIndex new_end = m.row_hours.back() + 24;
  GPModel refreshed = refresh_conditioning_set(m, h, new_end);
  GPModel rebuilt = with_conditioning_window(m, h, new_end, m.rows());
  REQUIRE(refreshed.rows() == m.rows());
  REQUIRE(refreshed.row_hours == rebuilt.row_hours);
  CHECK(refreshed.row_hours.back() == new_end);
  CHECK(refreshed.row_hours.front() == m.row_hours[24]);

  CounterRng rng = CounterRng::for_stream(77, 0, 0, 0);
  for (int q = 0; q < 10; ++q) {
    HourIndex k = new_end - static_cast<HourIndex>(rng.next_below(100));
    Eigen::VectorXd xq = encode_electric(k, h);
    Posterior a = posterior(refreshed, xq);
    Posterior b = posterior(rebuilt, xq);
    CHECK(a.mean == doctest::Approx(b.mean).epsilon(1e-10));
    CHECK(a.variance == doctest::Approx(b.variance).epsilon(1e-10));
  }

  CHECK_THROWS_WITH_AS(refresh_conditioning_set(m, h, h.end() + 5),
                       doctest::Contains("not contiguous"), std::invalid_argument);
  CHECK_THROWS_AS(refresh_conditioning_set(m, h, m.row_hours.back()), std::invalid_argument);

  DemandHistory late = h;
  int cut = static_cast<int>(m.row_hours.back() + 5 - h.start);
  late.start = h.start + cut;
  late.le.erase(late.le.begin(), late.le.begin() + cut);
  late.lh.erase(late.lh.begin(), late.lh.begin() + cut);
  late.temp_c.erase(late.temp_c.begin(), late.temp_c.begin() + cut);
  late.irradiance.erase(late.irradiance.begin(), late.irradiance.begin() + cut);
  CHECK_THROWS_WITH_AS(refresh_conditioning_set(m, late, new_end),
                       doctest::Contains("not contiguous"), std::invalid_argument);
}

TEST_CASE("model file round trip preserves the posterior") {
  DemandHistory h = testing::synth_history(hour_from_civil(2023, 1, 1, 0), 40 * 24, 12);
  FitOptions opt;
  opt.subsample_cap = 64;
  opt.conditioning_rows = 200;
  opt.restarts = 1;
  opt.max_iterations = 25;
  GPModel m = fit(h, DemandKind::Heat, Season::Winter,
                  KernelHyperparameters::standard_init(DemandKind::Heat), opt);

  std::string path = "gp_model_roundtrip.json";
  save_gp_model(path, m);
  GPModel r = load_gp_model(path, h);
  CHECK(r.rows() == m.rows());
  CHECK(r.row_hours == m.row_hours);
  CHECK(r.hp.noise_variance == m.hp.noise_variance);
  for (HourIndex k : {m.row_hours.back(), m.row_hours.back() - 30}) {
    Eigen::VectorXd xq = encode_heat(k, h);
    Posterior a = posterior(m, xq);
    Posterior b = posterior(r, xq);
    CHECK(a.mean == doctest::Approx(b.mean).epsilon(1e-12));
    CHECK(a.variance == doctest::Approx(b.variance).epsilon(1e-12));
  }
  std::string first = read_text_file(path);
  save_gp_model(path, r);
  CHECK(read_text_file(path) == first);
  std::remove(path.c_str());
}

TEST_CASE("hyperparameter validation rejects bad shapes and signs") {
  KernelHyperparameters hp = KernelHyperparameters::standard_init(DemandKind::Electric);
  CHECK_NOTHROW(hp.validate(17, 7));
  CHECK_THROWS_AS(hp.validate(16, 7), std::invalid_argument);
  CHECK_THROWS_AS(hp.validate(17, 6), std::invalid_argument);
  hp.noise_variance = 0.0;
  CHECK_THROWS_AS(hp.validate(17, 7), std::invalid_argument);
  hp.noise_variance = 0.1;
  hp.rbf_lengthscales[3] = -1.0;
  CHECK_THROWS_AS(hp.validate(17, 7), std::invalid_argument);
}
