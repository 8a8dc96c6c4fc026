#ifndef PDMPVOL_REPORT_HPP
#define PDMPVOL_REPORT_HPP

#include "pdmpvol/models.hpp"
#include "pdmpvol/volume.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdmpvol {

inline double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// |V_est - V| / V from log volumes.
inline double relative_error(double log_estimate, double log_exact) {
  return std::abs(std::expm1(log_estimate - log_exact));
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Ordinary least squares of y on x.
inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line: need two or more paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_line: x values are all equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

inline LinearFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx(x.size()), ly(y.size());
  std::transform(x.begin(), x.end(), lx.begin(), [](double v) { return std::log(v); });
  std::transform(y.begin(), y.end(), ly.begin(), [](double v) { return std::log(v); });
  return fit_line(lx, ly);
}

struct RepeatResult {
  std::uint64_t repeat = 0;
  VolumeEstimate estimate;
  std::optional<double> rel_error;
};

struct Aggregate {
  std::optional<double> median_rel_error;
  double median_time_s = 0.0;
  double median_log_volume = 0.0;
  std::uint64_t M_total = 0;
  std::uint64_t R_total = 0;
};

inline Aggregate aggregate(const std::vector<RepeatResult>& results) {
  Aggregate a;
  if (results.empty()) return a;
  std::vector<double> errors, times, logs;
  for (const auto& r : results) {
    if (r.rel_error) errors.push_back(*r.rel_error);
    times.push_back(r.estimate.total_time);
    logs.push_back(r.estimate.log_volume);
    a.M_total += r.estimate.numerics.m_count;
    a.R_total += r.estimate.numerics.r_count;
  }
  if (errors.size() == results.size()) a.median_rel_error = median(errors);
  a.median_time_s = median(times);
  a.median_log_volume = median(logs);
  return a;
}

struct RunReport {
  std::string model;
  Index dim = 0;
  std::uint64_t seed = 0;
  std::uint64_t N = 0;
  std::uint64_t repeats = 0;
  std::optional<double> exact_log_volume;
  std::vector<RepeatResult> results;
  Aggregate aggregate;
};

inline nlohmann::json to_json(const PhaseResult& p) {
  return {{"kind", p.kind == PhaseKind::ratio ? "ratio" : "final"},
          {"sigma", p.sigma_prev},
          {"sigma_next", p.sigma_next},
          {"N_i", p.N_i},
          {"ess_per_sample", p.ess_per_sample},
          {"log_ratio", p.log_ratio},
          {"lambda_out", p.lambda_out},
          {"lambda_refresh", p.lambda_refresh}};
}

inline nlohmann::json to_json(const RepeatResult& r) {
  const VolumeEstimate& e = r.estimate;
  nlohmann::json phases = nlohmann::json::array();
  for (const auto& p : e.phases) phases.push_back(to_json(p));
  nlohmann::json j = {
      {"repeat", r.repeat},
      {"log_volume", e.log_volume},
      {"volume_mantissa", e.volume_sci.mantissa},
      {"volume_exp10", e.volume_sci.exp10},
      {"rel_error", r.rel_error ? nlohmann::json(*r.rel_error) : nlohmann::json(nullptr)},
      {"time_s", e.total_time},
      {"sigma0", e.sigma0},
      {"log_mass0", e.log_mass0},
      {"phases", phases},
      {"events",
       {{"bounces", e.events.bounces},
        {"reflections", e.events.reflections},
        {"refreshes", e.events.refreshes},
        {"outputs", e.events.outputs}}},
      {"numerics", {{"M", e.numerics.m_count}, {"R", e.numerics.r_count}}}};
  return j;
}

inline nlohmann::json to_json(const Aggregate& a) {
  return {{"median_rel_error",
           a.median_rel_error ? nlohmann::json(*a.median_rel_error) : nlohmann::json(nullptr)},
          {"median_time_s", a.median_time_s},
          {"median_log_volume", a.median_log_volume},
          {"M_total", a.M_total},
          {"R_total", a.R_total}};
}

inline nlohmann::json to_json(const RunReport& r) {
  nlohmann::json results = nlohmann::json::array();
  for (const auto& res : r.results) results.push_back(to_json(res));
  return {{"model", r.model},
          {"dim", r.dim},
          {"seed", r.seed},
          {"N", r.N},
          {"repeats", r.repeats},
          {"exact_log_volume",
           r.exact_log_volume ? nlohmann::json(*r.exact_log_volume) : nlohmann::json(nullptr)},
          {"results", results},
          {"aggregate", to_json(r.aggregate)}};
}

// Recomputes the aggregate block from the per-repeat records of a report.
inline Aggregate aggregate_from_json(const nlohmann::json& report) {
  std::vector<RepeatResult> results;
  for (const auto& r : report.at("results")) {
    RepeatResult rr;
    rr.estimate.log_volume = r.at("log_volume").get<double>();
    rr.estimate.total_time = r.at("time_s").get<double>();
    rr.estimate.numerics.m_count = r.at("numerics").at("M").get<std::uint64_t>();
    rr.estimate.numerics.r_count = r.at("numerics").at("R").get<std::uint64_t>();
    if (!r.at("rel_error").is_null()) rr.rel_error = r.at("rel_error").get<double>();
    results.push_back(rr);
  }
  return aggregate(results);
}

inline constexpr const char* csv_header =
    "repeat,log_volume,volume_mantissa,volume_exp10,rel_error,time_s,sigma0,log_mass0,"
    "n_phases,bounces,reflections,refreshes,outputs,M,R";

inline void write_csv(const RunReport& r, std::ostream& out) {
  out << csv_header << '\n';
  out.precision(17);
  for (const auto& res : r.results) {
    const VolumeEstimate& e = res.estimate;
    out << res.repeat << ',' << e.log_volume << ',' << e.volume_sci.mantissa << ','
        << e.volume_sci.exp10 << ',';
    if (res.rel_error) out << *res.rel_error;
    out << ',' << e.total_time << ',' << e.sigma0 << ',' << e.log_mass0 << ',' << e.phases.size()
        << ',' << e.events.bounces << ',' << e.events.reflections << ',' << e.events.refreshes
        << ',' << e.events.outputs << ',' << e.numerics.m_count << ',' << e.numerics.r_count
        << '\n';
  }
}

}  // namespace pdmpvol

#endif  // PDMPVOL_REPORT_HPP
