#include "ehub/gp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ehub/csv.hpp"

namespace ehub {

const char* demand_kind_name(DemandKind k) {
  return k == DemandKind::Electric ? "electric" : "heat";
}

DemandKind demand_kind_from_name(const std::string& name) {
  if (name == "electric") return DemandKind::Electric;
  if (name == "heat") return DemandKind::Heat;
  throw std::invalid_argument("unknown demand kind '" + name + "'");
}

int DemandHistory::index_of(HourIndex k) const {
  if (k < start || k >= end())
    throw std::out_of_range("history does not cover " + format_hour(k) + " (have " +
                            format_hour(start) + " .. " + format_hour(end() - 1) + ")");
  return static_cast<int>(k - start);
}

double DemandHistory::demand(DemandKind kind, HourIndex k) const {
  int i = index_of(k);
  return kind == DemandKind::Electric ? le[i] : lh[i];
}

void DemandHistory::validate() const {
  size_t n = le.size();
  if (lh.size() != n || temp_c.size() != n || irradiance.size() != n)
    throw std::invalid_argument("history series have mismatched lengths");
  for (size_t i = 0; i < n; ++i) {
    if (!(le[i] >= 0.0) || !(lh[i] >= 0.0))
      throw std::invalid_argument("negative or non-finite demand at row " + std::to_string(i));
    if (!std::isfinite(temp_c[i]) || !(irradiance[i] >= 0.0))
      throw std::invalid_argument("non-finite weather at row " + std::to_string(i));
  }
}

DemandHistory load_history_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  int c_ts = t.require_column("timestamp");
  int c_le = t.require_column("L_e_kwh");
  int c_lh = t.require_column("L_h_kwh");
  int c_temp = t.require_column("temp_c");
  int c_irr = t.require_column("irradiance_kw_m2");

  DemandHistory h;
  for (size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    HourIndex k = parse_hour(row[c_ts]);
    if (r == 0) {
      h.start = k;
    } else if (k != h.start + static_cast<HourIndex>(r)) {
      throw std::invalid_argument(path + ": rows are not contiguous hourly at " + row[c_ts]);
    }
    h.le.push_back(std::stod(row[c_le]));
    h.lh.push_back(std::stod(row[c_lh]));
    h.temp_c.push_back(std::stod(row[c_temp]));
    h.irradiance.push_back(std::stod(row[c_irr]));
  }
  h.validate();
  return h;
}

void save_history_csv(const std::string& path, const DemandHistory& h) {
  std::string out = "timestamp,L_e_kwh,L_h_kwh,temp_c,irradiance_kw_m2\n";
  for (int i = 0; i < h.size(); ++i) {
    out += format_hour(h.start + i);
    out += ',';
    out += format_double(h.le[i]);
    out += ',';
    out += format_double(h.lh[i]);
    out += ',';
    out += format_double(h.temp_c[i]);
    out += ',';
    out += format_double(h.irradiance[i]);
    out += '\n';
  }
  write_text_file(path, out);
}

namespace {

constexpr int kPercentileWindow = 168;
constexpr double kTwoPi = 6.283185307179586;
constexpr double kYearHours = 8766.0;
constexpr double kMonthHours = 730.5;
constexpr double kWeekHours = 168.0;

int lag_count(DemandKind kind) { return kind == DemandKind::Electric ? 6 : 12; }

bool hour_is_workday(HourIndex k, const DemandHistory& h) {
  std::int64_t day = k >= 0 ? k / 24 : (k - 23) / 24;
  if (h.extra_holidays.count(day)) return false;
  return is_workday(k);
}

double nearest_rank(std::vector<double>& window, double pct) {
  std::sort(window.begin(), window.end());
  int n = static_cast<int>(window.size());
  int rank = static_cast<int>(std::ceil(pct / 100.0 * n));
  rank = std::max(1, std::min(n, rank));
  return window[rank - 1];
}

} // namespace

int feature_dim(DemandKind kind) {
  // time 6 + workday 1 + weather + lags + 3 percentiles
  return kind == DemandKind::Electric ? 6 + 1 + 1 + 6 + 3 : 6 + 1 + 2 + 12 + 3;
}

std::vector<int> default_linear_dims(DemandKind kind) {
  std::vector<int> dims;
  int weather = kind == DemandKind::Electric ? 1 : 2;
  for (int i = 0; i < weather + lag_count(kind); ++i) dims.push_back(7 + i);
  return dims;
}

Eigen::VectorXd encode_features(DemandKind kind, HourIndex k, const DemandHistory& h) {
  if (!h.covers(k - kPercentileWindow, k + 1))
    throw std::invalid_argument("encoding hour " + format_hour(k) + " needs history " +
                                format_hour(k - kPercentileWindow) + " .. " + format_hour(k) +
                                ", have " + format_hour(h.start) + " .. " +
                                format_hour(h.end() - 1));

  Eigen::VectorXd x(feature_dim(kind));
  int p = 0;
  for (double period : {kYearHours, kMonthHours, kWeekHours}) {
    double phase = kTwoPi * static_cast<double>(k) / period;
    x[p++] = std::sin(phase);
    x[p++] = std::cos(phase);
  }
  x[p++] = hour_is_workday(k, h) ? 1.0 : 0.0;
  x[p++] = h.temp_c[h.index_of(k)];
  if (kind == DemandKind::Heat) x[p++] = h.irradiance[h.index_of(k)];
  for (int lag = 1; lag <= lag_count(kind); ++lag) x[p++] = h.demand(kind, k - lag);

  std::vector<double> window(kPercentileWindow);
  for (int i = 0; i < kPercentileWindow; ++i)
    window[i] = h.demand(kind, k - kPercentileWindow + i);
  x[p++] = nearest_rank(window, 5.0);
  x[p++] = nearest_rank(window, 50.0);
  x[p++] = nearest_rank(window, 95.0);
  return x;
}

Eigen::VectorXd encode_electric(HourIndex k, const DemandHistory& h) {
  return encode_features(DemandKind::Electric, k, h);
}

Eigen::VectorXd encode_heat(HourIndex k, const DemandHistory& h) {
  return encode_features(DemandKind::Heat, k, h);
}

void encode_rows(DemandKind kind, const std::vector<HourIndex>& ks, const DemandHistory& h,
                 Eigen::MatrixXd* X, Eigen::VectorXd* y) {
  int d = feature_dim(kind);
  X->resize(static_cast<int>(ks.size()), d);
  y->resize(static_cast<int>(ks.size()));
  for (size_t i = 0; i < ks.size(); ++i) {
    X->row(static_cast<int>(i)) = encode_features(kind, ks[i], h).transpose();
    (*y)[static_cast<int>(i)] = h.demand(kind, ks[i]);
  }
}

} // namespace ehub
