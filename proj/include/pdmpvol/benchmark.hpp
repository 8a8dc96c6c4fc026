#ifndef PDMPVOL_BENCHMARK_HPP
#define PDMPVOL_BENCHMARK_HPP

#include "pdmpvol/models.hpp"
#include "pdmpvol/report.hpp"
#include "pdmpvol/volume.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pdmpvol {

// Runs `repeats` independent estimates on up to `jobs` threads. Repeat r
// uses the streams of (config.seed, r), so results do not depend on the
// scheduling order.
inline std::vector<RepeatResult> run_repeats(const HPolytope& P, const ModelInfo& info,
                                             const EstimatorConfig& config, std::uint64_t repeats,
                                             unsigned jobs = 1) {
  std::vector<RepeatResult> results(repeats);
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::uint64_t r = next.fetch_add(1);
      if (r >= repeats) return;
      try {
        EstimatorConfig c = config;
        c.repeat = r;
        RepeatResult& out = results[r];
        out.repeat = r;
        out.estimate = estimate_volume(P, info, c);
        if (info.exact_log_volume)
          out.rel_error = relative_error(out.estimate.log_volume, *info.exact_log_volume);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = repeats;
      }
    }
  };
  const unsigned n_threads =
      static_cast<unsigned>(std::clamp<std::uint64_t>(jobs, 1, std::max<std::uint64_t>(repeats, 1)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

struct BudgetProbe {
  std::uint64_t N = 0;
  double median_error = 0.0;
  double median_time = 0.0;
};

struct SearchOptions {
  std::uint64_t N0 = 10000;
  double target = 0.04;
  double band = 0.01;
  double min_delta = 0.05;
  int max_probes = 30;
  double time_cap_s = 0.0;  // 0: no cap
};

struct SearchResult {
  std::uint64_t N_final = 0;
  BudgetProbe final_probe;
  std::vector<BudgetProbe> probes;
  bool complete = false;
};

// Smallest N whose median error lands in target +- band: doubles (or
// halves) from N0 until the band is bracketed, then bisects. Also exits
// when two successive tested N differ by less than min_delta relative.
// `probe(N)` returns the BudgetProbe measured at N.
template <class ProbeFn>
SearchResult search_budget(ProbeFn&& probe, const SearchOptions& opts) {
  SearchResult out;
  const auto start = std::chrono::steady_clock::now();
  std::uint64_t N = std::max<std::uint64_t>(opts.N0, 1);
  std::uint64_t too_small = 0;  // largest N with error above the band
  std::uint64_t large_enough = 0;  // smallest N with error below the band
  for (int i = 0; i < opts.max_probes; ++i) {
    out.probes.push_back(probe(N));
    const BudgetProbe& p = out.probes.back();
    const bool above = p.median_error > opts.target + opts.band;
    const bool below = p.median_error < opts.target - opts.band;
    if (!above && !below) {
      out.complete = true;
      break;
    }
    if (above)
      too_small = std::max(too_small, N);
    else
      large_enough = large_enough == 0 ? N : std::min(large_enough, N);

    std::uint64_t next;
    if (too_small > 0 && large_enough > 0)
      next = too_small + (large_enough - too_small) / 2;
    else if (above)
      next = 2 * N;
    else
      next = std::max<std::uint64_t>(1, N / 2);

    const double delta = std::abs(static_cast<double>(next) - static_cast<double>(N)) /
                         static_cast<double>(N);
    if (delta < opts.min_delta || next == N) {
      out.complete = true;
      break;
    }
    if (opts.time_cap_s > 0.0 &&
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >
            opts.time_cap_s)
      break;
    N = next;
  }
  // Report the smallest tested N that met the upper edge of the band.
  const BudgetProbe* pick = nullptr;
  for (const auto& p : out.probes)
    if (p.median_error <= opts.target + opts.band && (pick == nullptr || p.N < pick->N))
      pick = &p;
  if (pick == nullptr) pick = &out.probes.back();
  out.final_probe = *pick;
  out.N_final = pick->N;
  return out;
}

struct BenchmarkRecord {
  Index dim = 0;
  std::uint64_t N_final = 0;
  double median_rel_error = 0.0;
  double median_time_s = 0.0;
  std::vector<double> log_volumes;  // of the final probe
  std::uint64_t M_total = 0;
  std::uint64_t R_total = 0;
  bool complete = false;
  std::vector<BudgetProbe> probes;
};

struct BenchmarkSummary {
  std::vector<BenchmarkRecord> records;
  std::optional<LinearFit> time_fit;     // log time vs log dim
  std::optional<LinearFit> samples_fit;  // log N vs log dim
  bool complete = true;
};

inline BenchmarkSummary summarize(std::vector<BenchmarkRecord> records) {
  BenchmarkSummary s;
  s.records = std::move(records);
  std::vector<double> dims, times, ns;
  for (const auto& r : s.records) {
    s.complete = s.complete && r.complete;
    if (!r.complete) continue;
    dims.push_back(static_cast<double>(r.dim));
    times.push_back(r.median_time_s);
    ns.push_back(static_cast<double>(r.N_final));
  }
  if (dims.size() >= 2) {
    s.time_fit = fit_loglog(dims, times);
    s.samples_fit = fit_loglog(dims, ns);
  }
  return s;
}

}  // namespace pdmpvol

#endif  // PDMPVOL_BENCHMARK_HPP
