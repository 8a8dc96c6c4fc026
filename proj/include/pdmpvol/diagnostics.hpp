#ifndef PDMPVOL_DIAGNOSTICS_HPP
#define PDMPVOL_DIAGNOSTICS_HPP

#include "pdmpvol/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace pdmpvol {

// Effective sample size n / (1 + 2 sum_t rho_t). Autocorrelations are
// summed in pairs (rho_{2t} + rho_{2t+1}) while the pair sums stay positive,
// and each pair is capped by its predecessor (initial monotone sequence).
// Lags are computed lazily, up to n/2. Result clamped to [1, n].
inline double ess(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 8) throw std::invalid_argument("ess: need at least 8 values");
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> c(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    c[i] = series[i] - mean;
    var += c[i] * c[i];
  }
  // Relative to the mean magnitude: rounding noise of a constant series
  // is not variance.
  if (!(var > 1e-28 * static_cast<double>(n) * std::max(1.0, mean * mean)))
    throw std::invalid_argument("ess: zero variance");

  auto rho = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += c[i] * c[i + lag];
    return acc / var;
  };

  const std::size_t max_lag = n / 2;
  double tau = -1.0;  // -rho_0 + 2 * sum of pairs, rho_0 = 1
  double prev_pair = 1.0 + rho(1);
  if (prev_pair > 0.0) {
    tau += 2.0 * prev_pair;
    for (std::size_t t = 2; t + 1 <= max_lag; t += 2) {
      double pair = rho(t) + rho(t + 1);
      if (!(pair > 0.0)) break;
      pair = std::min(pair, prev_pair);
      tau += 2.0 * pair;
      prev_pair = pair;
    }
  } else {
    tau = 1.0 / static_cast<double>(n);
  }
  const double nd = static_cast<double>(n);
  return std::clamp(nd / tau, 1.0, nd);
}

inline double ess(const std::vector<double>& series) {
  return ess(std::span<const double>(series.data(), series.size()));
}

struct EssReport {
  double ess_min = 0.0;   // minimum over coordinate projections
  double ess_norm = 0.0;  // ESS of |x_j|
  double ess_per_sample = 0.0;
  std::size_t n = 0;
  double wall_time = 0.0;  // seconds spent producing the samples
  double cost = 0.0;       // deterministic work estimate of producing them

  double ess() const noexcept { return std::min(ess_min, ess_norm); }
};

// Samples are the rows of `samples`.
inline EssReport ess_report(const Matrix& samples, double wall_time = 0.0, double cost = 0.0) {
  const auto n = static_cast<std::size_t>(samples.rows());
  EssReport r;
  r.n = n;
  r.wall_time = wall_time;
  r.cost = cost;
  std::vector<double> series(n);
  r.ess_min = static_cast<double>(n);
  for (Index j = 0; j < samples.cols(); ++j) {
    for (std::size_t i = 0; i < n; ++i) series[i] = samples(static_cast<Index>(i), j);
    r.ess_min = std::min(r.ess_min, ess(series));
  }
  for (std::size_t i = 0; i < n; ++i) series[i] = samples.row(static_cast<Index>(i)).norm();
  r.ess_norm = ess(series);
  r.ess_per_sample = std::min(r.ess_min, r.ess_norm) / static_cast<double>(n);
  return r;
}

// lambda_out such that on average `dim` decorrelating events separate two
// outputs, from a probe that saw `events` events over process time `elapsed`.
inline double tune_output_rate(std::uint64_t events, double elapsed, Index dim) {
  if (events == 0 || !(elapsed > 0.0)) return 1.0;
  return static_cast<double>(events) / (elapsed * static_cast<double>(dim));
}

struct RefreshTuningOptions {
  double gamma = 1.5;
  int max_iters = 10;
  double min_rate = 1e-3;
  double max_rate = 1e3;
  bool use_wall_time = false;  // score by ESS / wall-time instead of ESS / cost
};

struct RefreshTuning {
  double lambda_refresh = 1.0;
  EssReport report;
  int proposals = 0;
  int accepted = 0;
};

inline double ess_rate(const EssReport& r, bool use_wall_time) {
  const double denom = use_wall_time ? r.wall_time : r.cost;
  return denom > 0.0 ? r.ess() / denom : 0.0;
}

// Greedy search over refresh rates. Moves down when coordinate ESS lags
// the norm ESS, up otherwise; a proposal is kept only if ESS per unit of
// work strictly improves, and the search stops at the first rejection.
// `pilot(rate)` must return an EssReport for a fresh pilot at that rate.
template <class Pilot>
RefreshTuning tune_refresh_rate(Pilot&& pilot, double initial_rate,
                                const RefreshTuningOptions& opts = {}) {
  RefreshTuning out;
  out.lambda_refresh = std::clamp(initial_rate, opts.min_rate, opts.max_rate);
  out.report = pilot(out.lambda_refresh);
  double best = ess_rate(out.report, opts.use_wall_time);
  for (int it = 0; it < opts.max_iters; ++it) {
    const bool increase = out.report.ess_min > out.report.ess_norm;
    const double proposal = std::clamp(
        increase ? out.lambda_refresh * opts.gamma : out.lambda_refresh / opts.gamma,
        opts.min_rate, opts.max_rate);
    if (proposal == out.lambda_refresh) break;
    ++out.proposals;
    EssReport report = pilot(proposal);
    const double score = ess_rate(report, opts.use_wall_time);
    if (!(score > best)) break;
    ++out.accepted;
    best = score;
    out.lambda_refresh = proposal;
    out.report = report;
  }
  return out;
}

}  // namespace pdmpvol

#endif  // PDMPVOL_DIAGNOSTICS_HPP
