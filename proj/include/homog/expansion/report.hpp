#pragma once

#include "homog/fem/export.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace homog {

struct ReportOptions {
  Real floor_margin = 0.1;  // pass floor = claimed − margin
  std::optional<Real> floor;  // explicit floor, overrides the margin
  bool strict_floor = false;  // pass needs slope > floor instead of ≥
  Real value_floor = 1e-13;  // values at or below count as exact zeros
  Real clean_bound = 0.25;  // rms log residual of the fit for the clean flag
};

/// Measured values over an ε sweep with a least-squares log-log slope.
struct ConvergenceReport {
  std::string quantity;
  std::vector<std::pair<Real, Real>> rows;  // (ε, value), ε strictly decreasing
  Real claimed = 1.0;
  Real floor = 0.9;
  bool strict_floor = false;
  bool fitted = false;
  bool at_floor = false;  // every value at or below the value floor
  Real slope = std::numeric_limits<Real>::quiet_NaN();
  Real intercept = std::numeric_limits<Real>::quiet_NaN();
  std::array<Real, 2> interval{std::numeric_limits<Real>::quiet_NaN(), std::numeric_limits<Real>::quiet_NaN()};
  Real fit_residual = std::numeric_limits<Real>::quiet_NaN();
  bool clean = false;
  bool pass = false;

  std::vector<Real> epsilons() const {
    std::vector<Real> e;
    for (const auto& r : rows) e.push_back(r.first);
    return e;
  }
  std::vector<Real> values() const {
    std::vector<Real> v;
    for (const auto& r : rows) v.push_back(r.second);
    return v;
  }
};

namespace expansion {

/// Two-sided 95% Student t quantile with `dof` degrees of freedom.
inline Real t_quantile_95(int dof) {
  if (dof < 1) return std::numeric_limits<Real>::infinity();
  return boost::math::quantile(boost::math::students_t_distribution<Real>(dof), 0.975);
}

}  // namespace expansion

/// Sorts rows by decreasing ε, fits log(value) = slope·log(ε) + c and sets the pass flag.
inline ConvergenceReport make_report(std::string quantity, std::vector<std::pair<Real, Real>> rows, Real claimed,
                                     const ReportOptions& opt = {}) {
  ConvergenceReport r;
  r.quantity = std::move(quantity);
  r.claimed = claimed;
  r.floor = opt.floor ? *opt.floor : claimed - opt.floor_margin;
  r.strict_floor = opt.strict_floor;
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!(rows[i].first > 0) || !std::isfinite(rows[i].first))
      throw Error("expansion", ErrorCode::InvalidArgument, cat("ε must be positive, got ", rows[i].first));
    if (!std::isfinite(rows[i].second) || rows[i].second < 0)
      throw Error("expansion", ErrorCode::InvalidArgument, cat("value at ε = ", rows[i].first, " is ", rows[i].second));
    if (i > 0 && rows[i].first == rows[i - 1].first)
      throw Error("expansion", ErrorCode::InvalidArgument, cat("duplicate ε = ", rows[i].first));
  }
  r.rows = std::move(rows);
  r.at_floor = !r.rows.empty() &&
               std::all_of(r.rows.begin(), r.rows.end(), [&](const auto& p) { return p.second <= opt.value_floor; });
  if (r.at_floor) {
    // exact case: nothing to fit, the quantity vanishes at every ε
    r.clean = true;
    r.pass = true;
    return r;
  }
  std::vector<std::pair<Real, Real>> pts;
  for (const auto& [e, v] : r.rows)
    if (v > opt.value_floor) pts.emplace_back(std::log(e), std::log(v));
  const int n = static_cast<int>(pts.size());
  if (n < 3 || n < static_cast<int>(r.rows.size())) return r;
  Real mx = 0, my = 0;
  for (const auto& [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  Real sxx = 0, sxy = 0;
  for (const auto& [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  Real ss = 0;
  for (const auto& [x, y] : pts) ss += std::pow(y - r.intercept - r.slope * x, 2);
  r.fit_residual = std::sqrt(ss / n);
  const Real se = n > 2 ? std::sqrt(ss / (n - 2) / sxx) : 0.0;
  const Real t = expansion::t_quantile_95(n - 2);
  r.interval = {r.slope - t * se, r.slope + t * se};
  r.fitted = true;
  r.clean = r.fit_residual <= opt.clean_bound;
  r.pass = r.strict_floor ? r.slope > r.floor : r.slope >= r.floor;
  return r;
}

namespace expansion {

inline nlohmann::json to_json(const ConvergenceReport& r) {
  auto num = [](Real x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["quantity"] = r.quantity;
  j["slope"] = num(r.slope);
  j["interval"] = {num(r.interval[0]), num(r.interval[1])};
  j["claimed"] = r.claimed;
  j["floor"] = r.floor;
  j["pass"] = r.pass;
  j["fitted"] = r.fitted;
  j["at_floor"] = r.at_floor;
  j["clean"] = r.clean;
  j["fit_residual"] = num(r.fit_residual);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [e, v] : r.rows) rows.push_back({e, v});
  j["rows"] = rows;
  return j;
}

}  // namespace expansion

/// `epsilon,value` rows in report order.
inline void write_report_csv(const std::string& path, const ConvergenceReport& r) {
  auto out = io::open_output(path);
  out << "epsilon,value\n";
  for (const auto& [e, v] : r.rows) out << e << ',' << v << '\n';
}

inline void write_report_json(const std::string& path, const ConvergenceReport& r) {
  auto out = io::open_output(path);
  out << expansion::to_json(r).dump(2) << '\n';
}

}  // namespace homog
