#ifndef PDMPVOL_VOLUME_HPP
#define PDMPVOL_VOLUME_HPP

// Multiphase Gaussian cooling:
//
//   log Vol(H) = log int_H f_0 + sum_i log(int_H f_i / int_H f_{i-1}) + log(Vol(H) / int_H f_m)
//
// with f_i the normalised isotropic Gaussian of variance sigma_i^2. The
// first term comes from rejection sampling, each ratio from sampler draws
// at sigma_{i-1}, and the last either from the flat approximation or from
// sampler draws at sigma_m.

#include "pdmpvol/bps.hpp"
#include "pdmpvol/diagnostics.hpp"
#include "pdmpvol/log_sum_exp.hpp"
#include "pdmpvol/models.hpp"
#include "pdmpvol/polytope.hpp"
#include "pdmpvol/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdmpvol {

enum class FinalMode { flat_approx, exact_ratio };

struct EstimatorConfig {
  std::uint64_t total_budget = 100000;  // production output samples N
  double c_min = 0.1;
  double c_max = 0.2;
  std::optional<double> schedule_factor;  // default 1 + 1/sqrt(d)
  std::optional<double> flatness;         // default 2 (exact_ratio) or 100 (flat_approx)
  FinalMode final_mode = FinalMode::exact_ratio;
  int sigma0_trials = 25000;
  std::uint64_t seed = 1;
  std::uint64_t repeat = 0;
  int pilot_len = 100;
  std::optional<double> lambda_refresh;  // fixed rate; unset means tuned per phase
  double initial_lambda_refresh = 1.0;
  RefreshTuningOptions refresh_tuning;
  std::uint64_t min_probe_events = 1000;
  double escape_tol = -1.0;
  int max_escalations = 1;

  void validate() const {
    if (!(0.0 < c_min && c_min < c_max && c_max < 1.0))
      throw std::invalid_argument("config: need 0 < c_min < c_max < 1");
    if (schedule_factor && !(*schedule_factor > 1.0))
      throw std::invalid_argument("config: schedule factor must be > 1");
    if (flatness && !(*flatness > 0.0))
      throw std::invalid_argument("config: flatness must be > 0");
    if (sigma0_trials < 1000) throw std::invalid_argument("config: sigma0_trials must be >= 1000");
    if (pilot_len < 50) throw std::invalid_argument("config: pilot_len must be >= 50");
    if (lambda_refresh && !(*lambda_refresh >= 0.0))
      throw std::invalid_argument("config: lambda_refresh must be >= 0");
    if (min_probe_events < 1000)
      throw std::invalid_argument("config: probe needs at least 1000 events");
    if (max_escalations < 0) throw std::invalid_argument("config: max_escalations must be >= 0");
  }
};

struct Schedule {
  std::vector<double> sigmas;  // strictly increasing, size m + 1

  std::size_t ratios() const noexcept { return sigmas.empty() ? 0 : sigmas.size() - 1; }
  GaussianTarget target(std::size_t i) const { return GaussianTarget::from_sigma(sigmas.at(i)); }
};

enum class PhaseKind { ratio, final_correction };

struct PhaseResult {
  PhaseKind kind = PhaseKind::ratio;
  double sigma_prev = 0.0;  // sampling sigma
  double sigma_next = 0.0;  // equals sigma_prev for the final correction
  std::uint64_t N_i = 0;
  double log_ratio = 0.0;
  double ess_per_sample = 0.0;       // measured on the production samples
  double pilot_ess_per_sample = 0.0; // used for budget allocation
  double lambda_out = 0.0;
  double lambda_refresh = 0.0;
  double wall_time = 0.0;
  EventCounters events;
  NumericsStats numerics;
};

struct ScientificValue {
  double mantissa = 0.0;  // in [1, 10)
  long long exp10 = 0;
};

// log_value = ln(m * 10^e).
inline ScientificValue to_scientific(double log_value) {
  const double l10 = log_value / std::numbers::ln10;
  double e = std::floor(l10);
  double mant = std::pow(10.0, l10 - e);
  if (mant >= 10.0) {
    mant /= 10.0;
    e += 1.0;
  } else if (mant < 1.0) {
    mant *= 10.0;
    e -= 1.0;
  }
  return {mant, static_cast<long long>(e)};
}

struct VolumeEstimate {
  double log_volume = 0.0;
  ScientificValue volume_sci;
  double sigma0 = 0.0;
  double log_mass0 = 0.0;
  double final_term = 0.0;
  std::vector<PhaseResult> phases;
  NumericsStats numerics;
  EventCounters events;
  double total_time = 0.0;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Work estimate for a pilot, independent of the machine: O(k + d) per
// event, O(kd) per refresh and per output resync.
inline double work_units(const HPolytope& P, const EventCounters& c) {
  const double k = static_cast<double>(P.nrows());
  const double d = static_cast<double>(P.dim());
  return static_cast<double>(c.events()) * (3.0 * k + 4.0 * d) +
         static_cast<double>(c.refreshes + c.outputs) * (k * d) +
         static_cast<double>(c.outputs) * (3.0 * k + 4.0 * d);
}

inline bool inside_scaled(const HPolytope& P, const Vector& x) {
  for (Index i = 0; i < P.nrows(); ++i)
    if (P.A().row(i).dot(x) > P.b()[i]) return false;
  return true;
}

}  // namespace detail

// Fraction of `trials` draws of N(0, sigma^2 I) landing in P.
inline double gaussian_mass_fraction(const HPolytope& P, double sigma, int trials,
                                     CounterRng& rng) {
  std::normal_distribution<double> normal;
  Vector x(P.dim());
  long long inside = 0;
  for (int t = 0; t < trials; ++t) {
    for (Index j = 0; j < x.size(); ++j) x[j] = sigma * normal(rng);
    if (detail::inside_scaled(P, x)) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(trials);
}

struct Sigma0Choice {
  double sigma0 = 0.0;
  double log_mass0 = 0.0;
  double p_bisect = 0.0;  // fraction seen by the bisection sample
  int iterations = 0;
};

// Bisection in log(sigma) for a Gaussian whose mass inside P is in
// [c_min, c_max]. One batch of standard normal draws z_j is shared by all
// candidates: sigma z_j is inside iff sigma * s_j <= 1 with
// s_j = max_i (A z_j)_i / b_i. The returned log mass is re-estimated from
// 4x fresh draws.
inline Sigma0Choice choose_sigma0(const HPolytope& P, double radius, const EstimatorConfig& config,
                                  CounterRng rng) {
  const Index d = P.dim();
  const int trials = config.sigma0_trials;
  std::normal_distribution<double> normal;
  std::vector<double> scale(static_cast<std::size_t>(trials));
  Vector z(d);
  for (int t = 0; t < trials; ++t) {
    for (Index j = 0; j < d; ++j) z[j] = normal(rng);
    const Vector Az = P.A() * z;
    scale[static_cast<std::size_t>(t)] = (Az.array() / P.b().array()).maxCoeff();
  }
  auto fraction = [&](double sigma) {
    std::size_t inside = 0;
    for (double s : scale) inside += (sigma * s <= 1.0) ? 1 : 0;
    return static_cast<double>(inside) / static_cast<double>(trials);
  };

  double lo = radius / std::sqrt(static_cast<double>(d)) * 0.01;
  double hi = 4.0 * radius;
  for (int i = 0; fraction(lo) < config.c_min; ++i) {
    if (i >= 60) throw std::runtime_error("choose_sigma0: cannot bracket from below");
    lo *= 0.5;
  }
  for (int i = 0; fraction(hi) > config.c_max; ++i) {
    if (i >= 60) throw std::runtime_error("choose_sigma0: cannot bracket from above");
    hi *= 2.0;
  }
  Sigma0Choice out;
  double sigma = hi;
  double p = fraction(hi);
  if (p < config.c_min) {
    sigma = lo;
    p = fraction(lo);
  }
  while (!(p >= config.c_min && p <= config.c_max)) {
    if (++out.iterations > 200) throw std::runtime_error("choose_sigma0: bisection did not converge");
    sigma = std::sqrt(lo * hi);
    p = fraction(sigma);
    if (p > config.c_max)
      lo = sigma;
    else if (p < config.c_min)
      hi = sigma;
  }
  out.sigma0 = sigma;
  out.p_bisect = p;
  const double p_final = gaussian_mass_fraction(P, sigma, 4 * trials, rng);
  if (!(p_final > 0.0)) throw std::runtime_error("choose_sigma0: no draw landed inside");
  out.log_mass0 = std::log(p_final);
  return out;
}

inline double default_schedule_factor(Index d) {
  return 1.0 + 1.0 / std::sqrt(static_cast<double>(d));
}

inline double default_flatness(FinalMode mode) {
  return mode == FinalMode::exact_ratio ? 2.0 : 100.0;
}

// Geometric variance ladder sigma_{i+1}^2 = factor * sigma_i^2, stopped at
// the first sigma_m^2 >= flatness * R^2 (up to rounding in R^2).
inline Schedule build_schedule(double sigma0, double radius, double factor, double flatness) {
  if (!(sigma0 > 0.0) || !(radius > 0.0) || !(factor > 1.0) || !(flatness > 0.0))
    throw std::invalid_argument("build_schedule: need sigma0, R, flatness > 0 and factor > 1");
  Schedule s;
  double var = sigma0 * sigma0;
  const double target = flatness * radius * radius * (1.0 - 1e-12);
  s.sigmas.push_back(sigma0);
  while (var < target) {
    var *= factor;
    s.sigmas.push_back(std::sqrt(var));
  }
  return s;
}

// log(f_next(x) / f_prev(x)) for normalised isotropic Gaussians in R^d.
inline double log_density_ratio(const Vector& x, double sigma_prev, double sigma_next, Index d) {
  if (sigma_prev == sigma_next) return 0.0;
  const double sp2 = sigma_prev * sigma_prev;
  const double sn2 = sigma_next * sigma_next;
  return static_cast<double>(d) * std::log(sigma_prev / sigma_next) +
         0.5 * x.squaredNorm() * (1.0 / sp2 - 1.0 / sn2);
}

// log(1 / f_m(x)), whose mean under f_m restricted to H is Vol(H) / int_H f_m.
inline double log_inverse_density(const Vector& x, double sigma, Index d) {
  const double s2 = sigma * sigma;
  return 0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi * s2) +
         0.5 * x.squaredNorm() / s2;
}

inline double flat_correction(double sigma_m, Index d) {
  return 0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi * sigma_m * sigma_m);
}

// N_i proportional to 1 / ess_i, at least 1 each, summing to N exactly
// (largest remainder).
inline std::vector<std::uint64_t> allocate_budget(const std::vector<double>& ess,
                                                  std::uint64_t N) {
  const std::size_t m = ess.size();
  if (m == 0) return {};
  if (N < m) throw std::invalid_argument("allocate_budget: budget smaller than number of phases");
  double wsum = 0.0;
  for (double e : ess) {
    if (!(e > 0.0)) throw std::invalid_argument("allocate_budget: ess must be positive");
    wsum += 1.0 / e;
  }
  std::vector<std::uint64_t> n(m);
  std::vector<double> remainder(m);
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double share = static_cast<double>(N) * (1.0 / ess[i]) / wsum;
    const double fl = std::floor(share);
    n[i] = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(fl));
    remainder[i] = share - static_cast<double>(n[i]);
    total += n[i];
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (total < N) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t j = 0; total < N; j = (j + 1) % m, ++total) ++n[order[j]];
  } else if (total > N) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] < remainder[b]; });
    for (std::size_t j = 0; total > N; j = (j + 1) % m) {
      if (n[order[j]] > 1) {
        --n[order[j]];
        --total;
      }
    }
  }
  return n;
}

struct PhaseSampling {
  double log_mean = 0.0;  // log of the mean of exp(log_term(x_j))
  EssReport ess;
  NumericsStats numerics;
  EventCounters events;
  double wall_time = 0.0;
};

// Draws N samples from the sampler's target and averages exp(log_term(x))
// in the log domain.
template <class LogTerm>
PhaseSampling sample_phase(BpsState& state, const HPolytope& P, const GaussianTarget& target,
                           const SamplerParams& params, std::uint64_t N, LogTerm&& log_term) {
  PhaseSampling out;
  const auto start = detail::Clock::now();
  const EventCounters before = state.counters;
  Matrix samples(static_cast<Index>(N), P.dim());
  LogSumExp acc;
  Index row = 0;
  out.numerics = run_safeguarded(state, P, target, params, N, [&](const Vector& x) {
    samples.row(row++) = x.transpose();
    acc.add(log_term(x));
  });
  out.wall_time = detail::seconds_since(start);
  out.events = state.counters - before;
  out.log_mean = acc.log_mean();
  if (N >= 8) {
    try {
      out.ess = ess_report(samples, out.wall_time, detail::work_units(P, out.events));
    } catch (const std::invalid_argument&) {
      out.ess.ess_per_sample = 1.0;
    }
  } else {
    out.ess.ess_per_sample = 1.0;
  }
  return out;
}

// Ratio int_H f_next / int_H f_prev from N draws at sigma_prev.
inline PhaseResult estimate_phase(BpsState& state, const HPolytope& P, double sigma_prev,
                                  double sigma_next, std::uint64_t N, const SamplerParams& params) {
  if (N < 1) throw std::invalid_argument("estimate_phase: need at least one sample");
  const Index d = P.dim();
  const GaussianTarget target = GaussianTarget::from_sigma(sigma_prev);
  PhaseSampling s = sample_phase(state, P, target, params, N, [&](const Vector& x) {
    return log_density_ratio(x, sigma_prev, sigma_next, d);
  });
  PhaseResult r;
  r.kind = PhaseKind::ratio;
  r.sigma_prev = sigma_prev;
  r.sigma_next = sigma_next;
  r.N_i = N;
  r.log_ratio = sigma_prev == sigma_next ? 0.0 : s.log_mean;
  r.ess_per_sample = s.ess.ess_per_sample;
  r.lambda_out = params.lambda_out;
  r.lambda_refresh = params.lambda_refresh;
  r.wall_time = s.wall_time;
  r.events = s.events;
  r.numerics = s.numerics;
  return r;
}

struct FinalCorrection {
  double log_value = 0.0;
  PhaseResult phase;
  NumericsStats numerics;
};

// log(Vol(H) / int_H f_m): closed form under the flat approximation, or the
// mean of 1/f_m over N_f draws at sigma_m.
inline FinalCorrection final_correction(BpsState& state, const HPolytope& P, double sigma_m,
                                        std::uint64_t N_f, const SamplerParams& params,
                                        FinalMode mode) {
  const Index d = P.dim();
  FinalCorrection out;
  out.phase.kind = PhaseKind::final_correction;
  out.phase.sigma_prev = sigma_m;
  out.phase.sigma_next = sigma_m;
  if (mode == FinalMode::flat_approx) {
    out.log_value = flat_correction(sigma_m, d);
    out.phase.log_ratio = out.log_value;
    return out;
  }
  if (N_f < 1) throw std::invalid_argument("final_correction: need at least one sample");
  const GaussianTarget target = GaussianTarget::from_sigma(sigma_m);
  PhaseSampling s = sample_phase(state, P, target, params, N_f, [&](const Vector& x) {
    return log_inverse_density(x, sigma_m, d);
  });
  out.log_value = s.log_mean;
  out.numerics = s.numerics;
  out.phase.numerics = s.numerics;
  out.phase.N_i = N_f;
  out.phase.log_ratio = s.log_mean;
  out.phase.ess_per_sample = s.ess.ess_per_sample;
  out.phase.lambda_out = params.lambda_out;
  out.phase.lambda_refresh = params.lambda_refresh;
  out.phase.wall_time = s.wall_time;
  out.phase.events = s.events;
  return out;
}

struct PhaseTuning {
  SamplerParams params;
  double ess_per_sample = 1.0;
  BpsState state;  // where production for this phase starts
  NumericsStats numerics;
};

// lambda_out from an event-count probe, then (optionally) lambda_refresh by
// ESS pilots, then lambda_out again at the chosen refresh rate. The state
// advances through all of it and ends as a warm start.
inline PhaseTuning tune_phase(BpsState& state, const HPolytope& P, const GaussianTarget& target,
                              const EstimatorConfig& config, double initial_refresh) {
  const Index d = P.dim();
  const std::uint64_t probe_events =
      std::max<std::uint64_t>(config.min_probe_events, 10 * static_cast<std::uint64_t>(d));
  PhaseTuning out;
  out.params.escape_tol = config.escape_tol;
  out.params.max_escalations = config.max_escalations;
  out.params.lambda_refresh = config.lambda_refresh.value_or(initial_refresh);

  auto probe = [&](double lambda_refresh) {
    const EventCounters before = state.counters;
    const double elapsed = run_events(state, P, target, lambda_refresh, probe_events);
    return tune_output_rate((state.counters - before).events(), elapsed, d);
  };
  out.params.lambda_out = probe(out.params.lambda_refresh);

  auto pilot = [&](double lambda_refresh) {
    SamplerParams p = out.params;
    p.lambda_refresh = lambda_refresh;
    PhaseSampling s = sample_phase(state, P, target, p, static_cast<std::uint64_t>(config.pilot_len),
                                   [](const Vector&) { return 0.0; });
    out.numerics += s.numerics;
    return s.ess;
  };

  if (!config.lambda_refresh) {
    RefreshTuning tuned = tune_refresh_rate(pilot, out.params.lambda_refresh, config.refresh_tuning);
    out.params.lambda_refresh = tuned.lambda_refresh;
    out.ess_per_sample = tuned.report.ess_per_sample;
    out.params.lambda_out = probe(out.params.lambda_refresh);
  } else {
    out.ess_per_sample = pilot(out.params.lambda_refresh).ess_per_sample;
  }
  if (!(out.ess_per_sample > 0.0)) out.ess_per_sample = 1.0 / static_cast<double>(config.pilot_len);
  out.state = state;
  return out;
}

// Full pipeline for one repeat. Streams are derived from (seed, repeat).
inline VolumeEstimate estimate_volume(const HPolytope& P, const ModelInfo& info,
                                      const EstimatorConfig& config) {
  config.validate();
  const auto start = detail::Clock::now();
  const Index d = P.dim();
  const std::uint64_t seed = config.seed;
  const std::uint64_t rep = config.repeat;

  const double radius = info.bounding_radius ? *info.bounding_radius : estimate_bounding_radius(P);
  VolumeEstimate est;
  const Sigma0Choice s0 =
      choose_sigma0(P, radius, config, derive_stream(seed, rep, 0, StreamRole::sigma0));
  est.sigma0 = s0.sigma0;
  est.log_mass0 = s0.log_mass0;

  const double factor = config.schedule_factor.value_or(default_schedule_factor(d));
  const double flatness = config.flatness.value_or(default_flatness(config.final_mode));
  const Schedule schedule = build_schedule(s0.sigma0, radius, factor, flatness);
  const std::size_t m = schedule.ratios();
  const bool exact = config.final_mode == FinalMode::exact_ratio;
  const std::size_t sampled = m + (exact ? 1 : 0);
  if (config.total_budget < sampled)
    throw std::invalid_argument("budget N=" + std::to_string(config.total_budget) +
                                " is smaller than the " + std::to_string(sampled) +
                                " sampled phases; increase the number of samples");

  // Tuning pass, warm-started from phase to phase.
  std::vector<PhaseTuning> tuning;
  tuning.reserve(sampled);
  BpsState state =
      BpsState::start(P, Vector::Zero(d), derive_stream(seed, rep, 0, StreamRole::tuning));
  double refresh = config.initial_lambda_refresh;
  for (std::size_t p = 0; p < sampled; ++p) {
    state.rng = derive_stream(seed, rep, p, StreamRole::tuning);
    tuning.push_back(tune_phase(state, P, schedule.target(p), config, refresh));
    refresh = tuning.back().params.lambda_refresh;
    est.numerics += tuning.back().numerics;
  }

  std::vector<double> ess(sampled);
  for (std::size_t p = 0; p < sampled; ++p) ess[p] = tuning[p].ess_per_sample;
  const std::vector<std::uint64_t> budget = allocate_budget(ess, config.total_budget);

  double log_sum = 0.0;
  for (std::size_t p = 0; p < m; ++p) {
    BpsState s = tuning[p].state;
    s.rng = derive_stream(seed, rep, p, StreamRole::production);
    PhaseResult r = estimate_phase(s, P, schedule.sigmas[p], schedule.sigmas[p + 1], budget[p],
                                   tuning[p].params);
    r.pilot_ess_per_sample = ess[p];
    log_sum += r.log_ratio;
    est.phases.push_back(r);
  }
  const double sigma_m = schedule.sigmas.back();
  FinalCorrection fc;
  if (exact) {
    BpsState s = tuning[m].state;
    s.rng = derive_stream(seed, rep, m, StreamRole::production);
    fc = final_correction(s, P, sigma_m, budget[m], tuning[m].params, FinalMode::exact_ratio);
    fc.phase.pilot_ess_per_sample = ess[m];
  } else {
    fc = final_correction(state, P, sigma_m, 0, {}, FinalMode::flat_approx);
  }
  est.phases.push_back(fc.phase);
  est.final_term = fc.log_value;
  for (const auto& ph : est.phases) {
    est.events += ph.events;
    est.numerics += ph.numerics;
  }

  est.log_volume = est.log_mass0 + log_sum + est.final_term;
  est.volume_sci = to_scientific(est.log_volume);
  est.total_time = detail::seconds_since(start);
  return est;
}

}  // namespace pdmpvol

#endif  // PDMPVOL_VOLUME_HPP
