#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ehub/config.hpp"
#include "ehub/csv.hpp"
#include "gp_internal.hpp"

namespace ehub {

namespace {

constexpr double kClipReport = 1e-8;

void factorize(GPModel* m) {
  m->L = chol_gram(m->X, m->hp, m->linear_dims, &m->jitter);
  if (m->rows() > 0)
    m->alpha = m->L.transpose().triangularView<Eigen::Upper>().solve(
        m->L.triangularView<Eigen::Lower>().solve(m->y_std));
  else
    m->alpha = Eigen::VectorXd();
}

Eigen::VectorXd standardize_row(const GPModel& m, const Eigen::VectorXd& x_raw) {
  if (x_raw.size() != m.dim())
    throw std::invalid_argument("query has " + std::to_string(x_raw.size()) +
                                " features, model expects " + std::to_string(m.dim()));
  return (x_raw - m.feat_mean).cwiseQuotient(m.feat_std);
}

// Most recent `rows` hours of the model's season at or before `end` that have
// enough history to encode.
std::vector<HourIndex> window_hours(const GPModel& m, const DemandHistory& h, HourIndex end,
                                    int rows) {
  std::vector<HourIndex> ks;
  HourIndex lo = h.start + 168;
  for (HourIndex k = std::min(end, h.end() - 1); k >= lo && static_cast<int>(ks.size()) < rows;
       --k)
    if (season_of_hour(k) == m.season) ks.push_back(k);
  std::reverse(ks.begin(), ks.end());
  return ks;
}

GPModel rebuild_on_hours(const GPModel& base, const DemandHistory& h,
                         const std::vector<HourIndex>& hours) {
  if (hours.empty()) throw std::invalid_argument("conditioning window has no usable hours");
  GPModel m = base;
  Eigen::MatrixXd X_raw;
  Eigen::VectorXd y_raw;
  encode_rows(m.kind, hours, h, &X_raw, &y_raw);
  m.X.resize(X_raw.rows(), X_raw.cols());
  for (int r = 0; r < X_raw.rows(); ++r)
    m.X.row(r) = standardize_row(m, X_raw.row(r).transpose()).transpose();
  m.y_std = (y_raw.array() - m.target_mean) / m.target_std;
  m.row_hours = hours;
  factorize(&m);
  return m;
}

} // namespace

GPModel make_model(DemandKind kind, Season season, const KernelHyperparameters& hp,
                   const Eigen::MatrixXd& X_raw, const Eigen::VectorXd& y_raw,
                   const std::vector<int>& linear_dims, bool standardize,
                   const std::vector<HourIndex>& row_hours) {
  int n = static_cast<int>(X_raw.rows());
  int d = static_cast<int>(X_raw.cols());
  if (y_raw.size() != n) throw std::invalid_argument("X and y row counts differ");
  for (int dim : linear_dims)
    if (dim < 0 || dim >= d) throw std::invalid_argument("linear dimension out of range");
  hp.validate(d, static_cast<int>(linear_dims.size()));
  if (!row_hours.empty() && static_cast<int>(row_hours.size()) != n)
    throw std::invalid_argument("row_hours length does not match X");

  GPModel m;
  m.kind = kind;
  m.season = season;
  m.hp = hp;
  m.linear_dims = linear_dims;
  m.row_hours = row_hours;
  if (standardize && n > 0) {
    m.feat_mean = X_raw.colwise().mean();
    Eigen::VectorXd var =
        (X_raw.rowwise() - m.feat_mean.transpose()).array().square().colwise().mean();
    m.feat_std = var.array().sqrt().max(1e-12);
    for (int j = 0; j < d; ++j)
      if (m.feat_std[j] < 1e-9) m.feat_std[j] = 1.0;
    m.target_mean = y_raw.mean();
    double ty_var = (y_raw.array() - m.target_mean).square().mean();
    m.target_std = ty_var > 1e-18 ? std::sqrt(ty_var) : 1.0;
  } else {
    m.feat_mean = Eigen::VectorXd::Zero(d);
    m.feat_std = Eigen::VectorXd::Ones(d);
    m.target_mean = 0.0;
    m.target_std = 1.0;
  }
  m.X = (X_raw.rowwise() - m.feat_mean.transpose()) * m.feat_std.cwiseInverse().asDiagonal();
  m.y_std = (y_raw.array() - m.target_mean) / m.target_std;
  factorize(&m);
  return m;
}

Posterior posterior(const GPModel& model, const Eigen::VectorXd& x_raw) {
  Eigen::MatrixXd Xq(1, model.dim());
  Xq.row(0) = standardize_row(model, x_raw).transpose();
  double kss = detail::self_kernel(Xq, model.hp, model.linear_dims)[0];
  double mean_std = 0.0;
  double var_std = kss;
  if (model.rows() > 0) {
    Eigen::MatrixXd Ks = detail::cross_kernel(model.X, Xq, model.hp, model.linear_dims);
    mean_std = Ks.col(0).dot(model.alpha);
    Eigen::VectorXd v = model.L.triangularView<Eigen::Lower>().solve(Ks.col(0));
    var_std = kss - v.squaredNorm();
  }
  Posterior p;
  p.mean = model.target_mean + model.target_std * mean_std;
  double v = model.target_std * model.target_std * var_std;
  if (v < 0.0) {
    p.clipped = -v;
    v = 0.0;
  }
  p.variance = v;
  return p;
}

// Evaluated query-by-query with the exact single-point arithmetic: results
// for a row never depend on the batch size or on the other rows, which keeps
// per-scenario sampling bit-reproducible for any scenario count.
int posterior_batch(const GPModel& model, const Eigen::MatrixXd& X_raw, Eigen::VectorXd* means,
                    Eigen::VectorXd* variances) {
  int mq = static_cast<int>(X_raw.rows());
  int clips = 0;
  means->resize(mq);
  variances->resize(mq);
  for (int j = 0; j < mq; ++j) {
    Posterior p = posterior(model, X_raw.row(j).transpose());
    if (p.clipped > kClipReport) ++clips;
    (*means)[j] = p.mean;
    (*variances)[j] = p.variance;
  }
  return clips;
}

GPModel refresh_conditioning_set(const GPModel& model, const DemandHistory& h,
                                 HourIndex new_end) {
  if (model.row_hours.empty())
    throw std::invalid_argument("model has no conditioning window to refresh");
  HourIndex last = model.row_hours.back();
  if (new_end <= last)
    throw std::invalid_argument("refresh end " + format_hour(new_end) +
                                " is not after the window end " + format_hour(last));
  if (!h.covers(last + 1, new_end + 1))
    throw std::invalid_argument("history rows are not contiguous with the conditioning window: "
                                "need " +
                                format_hour(last + 1) + " .. " + format_hour(new_end));
  std::vector<HourIndex> hours = model.row_hours;
  for (HourIndex k = last + 1; k <= new_end; ++k)
    if (season_of_hour(k) == model.season) hours.push_back(k);
  int keep = model.rows();
  if (static_cast<int>(hours.size()) > keep)
    hours.erase(hours.begin(), hours.end() - keep);
  return rebuild_on_hours(model, h, hours);
}

GPModel with_conditioning_window(const GPModel& model, const DemandHistory& h, HourIndex end,
                                 int rows) {
  return rebuild_on_hours(model, h, window_hours(model, h, end, rows));
}

void save_gp_model(const std::string& path, const GPModel& model) {
  Json j;
  j["schema_version"] = 1;
  j["type"] = "gp_model";
  j["kind"] = demand_kind_name(model.kind);
  j["season"] = season_name(model.season);
  Json hp;
  hp["rbf_signal_variance"] = model.hp.rbf_signal_variance;
  hp["rbf_lengthscales"] = std::vector<double>(
      model.hp.rbf_lengthscales.data(), model.hp.rbf_lengthscales.data() + model.hp.rbf_lengthscales.size());
  hp["linear_variance"] = std::vector<double>(
      model.hp.linear_variance.data(), model.hp.linear_variance.data() + model.hp.linear_variance.size());
  hp["noise_variance"] = model.hp.noise_variance;
  j["hyperparameters"] = hp;
  j["linear_dims"] = model.linear_dims;
  j["feature_mean"] =
      std::vector<double>(model.feat_mean.data(), model.feat_mean.data() + model.feat_mean.size());
  j["feature_std"] =
      std::vector<double>(model.feat_std.data(), model.feat_std.data() + model.feat_std.size());
  j["target_mean"] = model.target_mean;
  j["target_std"] = model.target_std;
  Json window;
  window["end_hour"] = format_hour(model.row_hours.empty() ? 0 : model.row_hours.back());
  window["rows"] = model.rows();
  j["conditioning"] = window;
  Json fitj;
  fitj["log_marginal"] = model.log_marginal;
  fitj["grad_norm"] = model.grad_norm;
  fitj["converged"] = model.fit_converged;
  j["fit"] = fitj;
  write_text_file(path, j.dump(2) + "\n");
}

GPModel load_gp_model(const std::string& path, const DemandHistory& history) {
  Json j = load_json_file(path);
  if (cfg_num(j, "schema_version") != 1.0)
    throw std::invalid_argument(path + ": unsupported schema_version");
  if (cfg_str(j, "type") != "gp_model")
    throw std::invalid_argument(path + ": not a gp_model file");

  GPModel m;
  m.kind = demand_kind_from_name(cfg_str(j, "kind"));
  m.season = season_from_name(cfg_str(j, "season"));
  auto vec = [](const Json& a) {
    Eigen::VectorXd v(a.size());
    for (size_t i = 0; i < a.size(); ++i) v[static_cast<int>(i)] = a[i].get<double>();
    return v;
  };
  const Json& hp = j.at("hyperparameters");
  m.hp.rbf_signal_variance = hp.at("rbf_signal_variance").get<double>();
  m.hp.rbf_lengthscales = vec(hp.at("rbf_lengthscales"));
  m.hp.linear_variance = vec(hp.at("linear_variance"));
  m.hp.noise_variance = hp.at("noise_variance").get<double>();
  m.linear_dims = j.at("linear_dims").get<std::vector<int>>();
  m.feat_mean = vec(j.at("feature_mean"));
  m.feat_std = vec(j.at("feature_std"));
  m.target_mean = j.at("target_mean").get<double>();
  m.target_std = j.at("target_std").get<double>();
  m.log_marginal = j.at("fit").at("log_marginal").get<double>();
  m.grad_norm = j.at("fit").at("grad_norm").get<double>();
  m.fit_converged = j.at("fit").at("converged").get<bool>();
  m.hp.validate(feature_dim(m.kind), static_cast<int>(m.linear_dims.size()));

  HourIndex end = parse_hour(cfg_str(j, "conditioning.end_hour"));
  int rows = static_cast<int>(cfg_num(j, "conditioning.rows"));
  GPModel built = with_conditioning_window(m, history, end, rows);
  if (built.rows() != rows)
    throw std::invalid_argument(path + ": history yields " + std::to_string(built.rows()) +
                                " conditioning rows, model was saved with " +
                                std::to_string(rows));
  return built;
}

} // namespace ehub
