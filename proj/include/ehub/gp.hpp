#pragma once

#include <Eigen/Dense>
#include <set>
#include <string>
#include <vector>

#include "ehub/time_utils.hpp"

namespace ehub {

enum class DemandKind : char { Electric = 0, Heat = 1 };

const char* demand_kind_name(DemandKind k);
DemandKind demand_kind_from_name(const std::string& name);

// Hourly demand and weather series on a contiguous hour range
// [start, start + size). Demands in kWh, temperature in deg C, irradiance in
// kW/m^2. `extra_holidays` lists day numbers (hour/24) treated as non-work
// days in addition to weekends.
struct DemandHistory {
  HourIndex start = 0;
  std::vector<double> le;
  std::vector<double> lh;
  std::vector<double> temp_c;
  std::vector<double> irradiance;
  std::set<std::int64_t> extra_holidays;

  int size() const { return static_cast<int>(le.size()); }
  HourIndex end() const { return start + size(); }
  bool covers(HourIndex from, HourIndex to) const { return from >= start && to <= end(); }
  int index_of(HourIndex k) const; // throws if k outside [start, end)
  double demand(DemandKind kind, HourIndex k) const;
  void validate() const;
};

// CSV schema: timestamp,L_e_kwh,L_h_kwh,temp_c,irradiance_kw_m2
DemandHistory load_history_csv(const std::string& path);
void save_history_csv(const std::string& path, const DemandHistory& h);

// Feature layout, in order:
//   [0..5]  sin/cos pairs for year (8766 h), month (730.5 h), week (168 h)
//   [6]     workday flag
//   [7]     ambient temperature
//   [8]     irradiance              (heat only)
//   next    lag block: demand at k-1 .. k-6 (electric) or k-1 .. k-12 (heat)
//   last 3  5th/50th/95th nearest-rank percentiles of demand over [k-168, k)
int feature_dim(DemandKind kind); // 17 electric, 24 heat

// Dimensions the linear kernel acts on: temperature, irradiance (heat) and
// the lag block.
std::vector<int> default_linear_dims(DemandKind kind);

Eigen::VectorXd encode_electric(HourIndex k, const DemandHistory& h);
Eigen::VectorXd encode_heat(HourIndex k, const DemandHistory& h);
Eigen::VectorXd encode_features(DemandKind kind, HourIndex k, const DemandHistory& h);

// Rows for hours `ks` (each needs 168 h of history): X is |ks| x dim, y the
// demand at each hour.
void encode_rows(DemandKind kind, const std::vector<HourIndex>& ks, const DemandHistory& h,
                 Eigen::MatrixXd* X, Eigen::VectorXd* y);

struct KernelHyperparameters {
  double rbf_signal_variance = 1.0;
  Eigen::VectorXd rbf_lengthscales;  // one per input dimension
  Eigen::VectorXd linear_variance;   // one per linear-kernel dimension
  double noise_variance = 0.1;

  void validate(int dim, int linear_count) const;
  static KernelHyperparameters standard_init(DemandKind kind);
};

// rbf_signal_variance * exp(-1/2 sum_d ((x_d-x'_d)/l_d)^2)
//   + sum_i linear_variance[i] * x[lin[i]] * x'[lin[i]]
double kernel_eval(const Eigen::VectorXd& x, const Eigen::VectorXd& xp,
                   const KernelHyperparameters& hp, const std::vector<int>& linear_dims);

struct GPModel {
  DemandKind kind = DemandKind::Electric;
  Season season = Season::Winter;
  KernelHyperparameters hp; // in standardized-feature space
  std::vector<int> linear_dims;

  // Standardization frozen at fit time.
  Eigen::VectorXd feat_mean, feat_std;
  double target_mean = 0.0;
  double target_std = 1.0;

  // Conditioning set: standardized features, standardized targets, and the
  // hour each row predicts.
  Eigen::MatrixXd X;
  Eigen::VectorXd y_std;
  std::vector<HourIndex> row_hours;

  // Cached factorization of K(X,X) + noise*I (+ jitter if needed).
  Eigen::MatrixXd L; // lower triangular
  Eigen::VectorXd alpha;
  double jitter = 0.0;

  // Fit diagnostics.
  double log_marginal = 0.0;
  double grad_norm = 0.0;
  bool fit_converged = true;

  int rows() const { return static_cast<int>(y_std.size()); }
  int dim() const { return static_cast<int>(feat_mean.size()); }
  // Observation noise in output units (kWh^2).
  double noise_variance_output() const { return hp.noise_variance * target_std * target_std; }
};

// Builds a model from explicit rows. With standardize=false the features and
// targets are used as-is (mean 0 / std 1 bookkeeping), which keeps the
// posterior algebra directly comparable against textbook formulas.
GPModel make_model(DemandKind kind, Season season, const KernelHyperparameters& hp,
                   const Eigen::MatrixXd& X_raw, const Eigen::VectorXd& y_raw,
                   const std::vector<int>& linear_dims, bool standardize,
                   const std::vector<HourIndex>& row_hours = {});

struct FitOptions {
  HourIndex window_start = 0;       // 0/0 means the full history
  HourIndex window_end = 0;
  int subsample_cap = 256;          // fitting rows (evenly strided)
  int conditioning_rows = 90 * 24;  // rows kept for prediction
  int restarts = 5;
  int max_iterations = 200;
  double gradient_tolerance = 1e-5;
  std::uint64_t seed = 1;
};

GPModel fit(const DemandHistory& data, DemandKind kind, Season season,
            const KernelHyperparameters& init, const FitOptions& options = {});

struct Posterior {
  double mean = 0.0;     // kWh
  double variance = 0.0; // kWh^2, clipped at 0
  double clipped = 0.0;  // amount removed by the clip
};

Posterior posterior(const GPModel& model, const Eigen::VectorXd& x_raw);

// Batched posterior for M query rows (M x dim): one triangular solve for the
// whole block. Returns the number of variance clips above 1e-8.
int posterior_batch(const GPModel& model, const Eigen::MatrixXd& X_raw, Eigen::VectorXd* means,
                    Eigen::VectorXd* variances);

// Advances the conditioning window with the season-matching hours in
// (last row hour, new_end], dropping the oldest rows to keep the window
// length; hyperparameters and standardization stay frozen. The history must
// cover the gap, otherwise the rows are not contiguous and the call throws.
GPModel refresh_conditioning_set(const GPModel& model, const DemandHistory& h,
                                 HourIndex new_end);

// Rebuild of the conditioning window from scratch at `end` (most recent
// `rows` season-matching hours), keeping hyperparameters and standardization.
GPModel with_conditioning_window(const GPModel& model, const DemandHistory& h, HourIndex end,
                                 int rows);

// Zero-mean log marginal likelihood of (X, y) under hp, and its gradient in
// log-hyperparameter space ([log sf2, log l_1..l_d, log lv_1..lv_k, log sn2]).
double gp_log_marginal(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const KernelHyperparameters& hp, const std::vector<int>& linear_dims);
double gp_log_marginal_grad(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const KernelHyperparameters& hp, const std::vector<int>& linear_dims,
                            Eigen::VectorXd* grad);

// Gram matrix K(X,X) + noise*I with the jitter ladder applied; returns the
// lower Cholesky factor and the jitter used. Throws past the ladder top.
Eigen::MatrixXd chol_gram(const Eigen::MatrixXd& X, const KernelHyperparameters& hp,
                          const std::vector<int>& linear_dims, double* jitter_out);

// Model file round trip; conditioning rows are re-encoded from the history.
void save_gp_model(const std::string& path, const GPModel& model);
GPModel load_gp_model(const std::string& path, const DemandHistory& history);

} // namespace ehub
