#ifndef PDMPVOL_BPS_HPP
#define PDMPVOL_BPS_HPP

// Bouncy Particle Sampler for pi(x) ~ exp(-a |x|^2) restricted to an
// H-polytope. Between events the particle moves on straight lines, so the
// cached products A x and A v can be advanced and reflected in O(k) per
// event; only velocity refreshes need a dense O(kd) product.

#include "pdmpvol/polytope.hpp"
#include "pdmpvol/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <type_traits>
#include <utility>
#include <vector>

namespace pdmpvol {

struct GaussianTarget {
  double a = 0.5;  // pi(x) ~ exp(-a |x|^2)
  double sigma = 1.0;

  static GaussianTarget from_sigma(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
      throw std::invalid_argument("GaussianTarget: sigma must be positive and finite");
    return {1.0 / (2.0 * sigma * sigma), sigma};
  }
};

struct SamplerParams {
  double lambda_refresh = 1.0;
  double lambda_out = 1.0;
  // Negative selects 1e-9 * max(1, |b|_inf).
  double escape_tol = -1.0;
  int max_escalations = 1;
  // Dense recomputation of A x and A v after this many events without an
  // output; 0 disables, negative selects 2d.
  long long resync_events = -1;
};

inline std::uint64_t resolve_resync(long long resync_events, Index d) {
  if (resync_events == 0) return std::numeric_limits<std::uint64_t>::max();
  if (resync_events < 0) return 2 * static_cast<std::uint64_t>(d);
  return static_cast<std::uint64_t>(resync_events);
}

inline double resolve_escape_tol(const SamplerParams& params, const HPolytope& P) {
  return params.escape_tol >= 0.0 ? params.escape_tol : 1e-9 * std::max(1.0, P.b_inf_norm());
}

enum class EventKind { bounce, reflect, refresh, output };

inline const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::bounce: return "bounce";
    case EventKind::reflect: return "reflect";
    case EventKind::refresh: return "refresh";
    case EventKind::output: return "output";
  }
  return "unknown";
}

struct EventCounters {
  std::uint64_t bounces = 0;
  std::uint64_t reflections = 0;
  std::uint64_t refreshes = 0;
  std::uint64_t outputs = 0;

  // Events that count towards decorrelation (gradient bounces and boundary
  // reflections).
  std::uint64_t events() const noexcept { return bounces + reflections; }

  EventCounters& operator+=(const EventCounters& o) noexcept {
    bounces += o.bounces;
    reflections += o.reflections;
    refreshes += o.refreshes;
    outputs += o.outputs;
    return *this;
  }
  friend EventCounters operator-(EventCounters a, const EventCounters& b) noexcept {
    a.bounces -= b.bounces;
    a.reflections -= b.reflections;
    a.refreshes -= b.refreshes;
    a.outputs -= b.outputs;
    return a;
  }
  friend bool operator==(const EventCounters&, const EventCounters&) = default;
};

struct BpsState {
  Vector x;
  Vector v;
  Vector Ax;
  Vector Av;
  double t = 0.0;
  CounterRng rng;
  std::normal_distribution<double> normal;
  EventCounters counters;
  int corner_run = 0;  // consecutive reflections started within tolerance of the face
  std::uint64_t since_sync = 0;  // events since the last dense A x, A v

  // Starts at x0 with a fresh standard normal velocity.
  static BpsState start(const HPolytope& P, Vector x0, CounterRng rng) {
    check_dim(P, x0.size(), "BpsState::start");
    BpsState s;
    s.x = std::move(x0);
    s.rng = rng;
    s.v.resize(P.dim());
    for (Index j = 0; j < P.dim(); ++j) s.v[j] = s.normal(s.rng);
    s.Ax = P.A() * s.x;
    s.Av = P.A() * s.v;
    return s;
  }
};

inline bool operator==(const BpsState& a, const BpsState& b) {
  return a.x == b.x && a.v == b.v && a.Ax == b.Ax && a.Av == b.Av && a.t == b.t &&
         a.rng == b.rng && a.normal == b.normal && a.counters == b.counters &&
         a.corner_run == b.corner_run && a.since_sync == b.since_sync;
}

// Full copy of the sampler state, random stream included.
struct Checkpoint {
  BpsState state;

  explicit Checkpoint(const BpsState& s) : state(s) {}
  void restore(BpsState& s) const { s = state; }
};

struct NumericsStats {
  std::uint64_t m_count = 0;  // trajectory escapes detected at output time
  std::uint64_t r_count = 0;  // escalation limit reached, velocity resampled

  NumericsStats& operator+=(const NumericsStats& o) noexcept {
    m_count += o.m_count;
    r_count += o.r_count;
    return *this;
  }
};

// Solves  int_0^t max(0, 2a(m + s q)) ds = u  for t, with m = <x,v>, q = |v|^2.
inline double bounce_time(double m, double q, double a, double u) {
  const double c = u / a;
  if (m >= 0.0) {
    // q t^2 + 2 m t - u/a = 0, written without cancellation.
    return c / (m + std::sqrt(m * m + q * c));
  }
  return (-m + std::sqrt(q * c)) / q;
}

// Specular reflection on facet `face`. Av is updated from the cached Gram
// column, no dense product.
inline void reflect_boundary(BpsState& s, Index face, const HPolytope& P) {
  const double av = s.Av[face];
  if (!(av > 0.0))
    throw std::logic_error("reflect_boundary: velocity is not outgoing through the face");
  const double coef = 2.0 * av / P.row_sq_norms()[face];
  s.v.noalias() -= coef * P.A().row(face).transpose();
  s.Av.noalias() -= coef * P.gram_rows().col(face);
  ++s.counters.reflections;
}

inline void refresh_velocity(BpsState& s, const HPolytope& P) {
  for (Index j = 0; j < s.v.size(); ++j) s.v[j] = s.normal(s.rng);
  s.Av.noalias() = P.A() * s.v;
  ++s.counters.refreshes;
}

// Reflection of v against the log-density gradient, which is colinear with x.
inline void bounce_gradient(BpsState& s, const HPolytope& P) {
  const double xx = s.x.squaredNorm();
  if (xx < 1e-28) {
    refresh_velocity(s, P);
    return;
  }
  const double coef = 2.0 * s.x.dot(s.v) / xx;
  s.v.noalias() -= coef * s.x;
  s.Av.noalias() -= coef * s.Ax;
  ++s.counters.bounces;
}

struct NullObserver {
  void operator()(EventKind, double, const Vector&) const noexcept {}
};

namespace detail {

inline double exp_draw(CounterRng& rng) { return -std::log(rng.uniform()); }

inline void two_sum_axpy(Vector& hi, Vector& lo, double tau, const Vector& dir) {
  for (Index i = 0; i < hi.size(); ++i) {
    const double p = tau * dir[i];
    const double pe = std::fma(tau, dir[i], -p);
    const double s = hi[i] + p;
    const double bb = s - hi[i];
    const double e = (hi[i] - (s - bb)) + (p - bb);
    hi[i] = s;
    lo[i] += e + pe;
  }
}

// Low-order parts of x and Ax kept while replaying a segment.
struct Compensation {
  Vector x_lo;
  Vector Ax_lo;
};

enum class StopReason { output, event_budget };

// Simulates until the output clock rings (or `max_events` decorrelating
// events have happened, when the output clock is off).
// Reflections update A v through Gram columns; when facet normals are not
// orthogonal the rounding error of that update grows geometrically in the
// directions outside the range of A, hence the periodic dense resync.
template <class Observer>
StopReason simulate(BpsState& s, const HPolytope& P, const GaussianTarget& target,
                    double lambda_refresh, double lambda_out, double corner_tol,
                    std::uint64_t resync_every, std::uint64_t max_events, Observer&& observe,
                    Compensation* comp) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const Index d = P.dim();
  const Vector& b = P.b();
  const std::uint64_t stop_at = s.counters.events() + max_events;
  for (;;) {
    const double q = s.v.squaredNorm();
    const double m = s.x.dot(s.v);
    const double v_norm = std::sqrt(q);

    BoundaryHit hit;
    if (comp == nullptr) {
      hit = boundary_hit(P, s.Ax, s.Av, v_norm);
    } else {
      const Vector& rn = P.row_norms();
      for (Index i = 0; i < P.nrows(); ++i) {
        const double av = s.Av[i];
        if (av > 1e-14 * v_norm * rn[i]) {
          const double t = std::max(0.0, ((b[i] - s.Ax[i]) - comp->Ax_lo[i]) / av);
          if (t < hit.tau) {
            hit.tau = t;
            hit.face = i;
          }
        }
      }
    }

    const double tau_bounce = bounce_time(m, q, target.a, exp_draw(s.rng));
    const double tau_refresh = lambda_refresh > 0.0 ? exp_draw(s.rng) / lambda_refresh : inf;
    const double tau_out = lambda_out > 0.0 ? exp_draw(s.rng) / lambda_out : inf;

    const double tau = std::min({hit.tau, tau_bounce, tau_refresh, tau_out});
    if (!std::isfinite(tau))
      throw std::runtime_error("sampler: no event ahead (unbounded direction)");

    if (comp == nullptr) {
      s.x.noalias() += tau * s.v;
      s.Ax.noalias() += tau * s.Av;
    } else {
      two_sum_axpy(s.x, comp->x_lo, tau, s.v);
      two_sum_axpy(s.Ax, comp->Ax_lo, tau, s.Av);
    }
    s.t += tau;

    if (tau == tau_out) {
      ++s.counters.outputs;
      if (comp != nullptr) {
        s.x += comp->x_lo;
        s.Ax += comp->Ax_lo;
        comp->x_lo.setZero();
        comp->Ax_lo.setZero();
      }
      observe(EventKind::output, s.t, s.x);
      return StopReason::output;
    }
    if (tau == hit.tau) {
      // A face already within tolerance before the flight: corner case.
      const bool corner = (b[hit.face] - (s.Ax[hit.face] - tau * s.Av[hit.face])) <= corner_tol;
      s.corner_run = corner ? s.corner_run + 1 : 0;
      if (s.corner_run > d) {
        s.corner_run = 0;
        refresh_velocity(s, P);
        observe(EventKind::refresh, s.t, s.x);
      } else {
        reflect_boundary(s, hit.face, P);
        observe(EventKind::reflect, s.t, s.x);
      }
    } else if (tau == tau_bounce) {
      s.corner_run = 0;
      bounce_gradient(s, P);
      observe(EventKind::bounce, s.t, s.x);
    } else {
      s.corner_run = 0;
      refresh_velocity(s, P);
      observe(EventKind::refresh, s.t, s.x);
    }
    if (++s.since_sync >= resync_every) {
      s.since_sync = 0;
      if (comp != nullptr) {
        s.x += comp->x_lo;
        comp->x_lo.setZero();
        comp->Ax_lo.setZero();
      }
      s.Ax.noalias() = P.A() * s.x;
      s.Av.noalias() = P.A() * s.v;
    }
    if (lambda_out <= 0.0 && s.counters.events() >= stop_at) return StopReason::event_budget;
  }
}

}  // namespace detail

// Runs the process until the next output-clock ring and returns the
// position at that instant. With `compensated`, x and A x are accumulated
// in double-double along the segment.
template <class Observer = NullObserver>
Vector advance_to_output(BpsState& s, const HPolytope& P, const GaussianTarget& target,
                         const SamplerParams& params, bool compensated = false,
                         Observer&& observe = {}) {
  if (!(params.lambda_out > 0.0))
    throw std::invalid_argument("advance_to_output: lambda_out must be positive");
  const double tol = resolve_escape_tol(params, P);
  const std::uint64_t resync = resolve_resync(params.resync_events, P.dim());
  if (compensated) {
    detail::Compensation comp{Vector::Zero(s.x.size()), Vector::Zero(s.Ax.size())};
    detail::simulate(s, P, target, params.lambda_refresh, params.lambda_out, tol, resync, 0,
                     observe, &comp);
  } else {
    detail::simulate(s, P, target, params.lambda_refresh, params.lambda_out, tol, resync, 0,
                     observe, nullptr);
  }
  return s.x;
}

// Probe: simulates exactly `n_events` bounces+reflections without an output
// clock and returns the elapsed process time.
inline double run_events(BpsState& s, const HPolytope& P, const GaussianTarget& target,
                         double lambda_refresh, std::uint64_t n_events,
                         long long resync_events = -1) {
  if (n_events == 0) return 0.0;
  const double t0 = s.t;
  detail::simulate(s, P, target, lambda_refresh, 0.0, 1e-9 * std::max(1.0, P.b_inf_norm()),
                   resolve_resync(resync_events, P.dim()), n_events, NullObserver{}, nullptr);
  return s.t - t0;
}

struct NoFault {
  void operator()(BpsState&, std::uint64_t) const noexcept {}
};

// Emits `n_samples` positions, each verified inside P against a dense A x.
// On escape the state is rolled back to the previous output and replayed
// in compensated arithmetic up to `max_escalations` times; past that the
// velocity is resampled at the checkpoint. A x and A v are resynchronised
// densely at every output.
//
// `sink(const Vector&)` receives the samples. `fault(state, output_index)`
// runs after each simulated segment and before verification (test hook).
template <class Sink, class Observer = NullObserver, class Fault = NoFault>
NumericsStats run_safeguarded(BpsState& s, const HPolytope& P, const GaussianTarget& target,
                              const SamplerParams& params, std::uint64_t n_samples, Sink&& sink,
                              Observer&& observe = {}, Fault&& fault = {}) {
  if (params.max_escalations < 0)
    throw std::invalid_argument("run_safeguarded: max_escalations must be >= 0");
  const double tol = resolve_escape_tol(params, P);
  constexpr bool logging = !std::is_same_v<std::decay_t<Observer>, NullObserver>;
  struct Logged {
    EventKind kind;
    double t;
    Vector x;
  };
  std::vector<Logged> buffer;
  auto record = [&](EventKind kind, double t, const Vector& x) {
    if constexpr (logging) buffer.push_back({kind, t, x});
  };

  NumericsStats stats;
  Vector Ax_dense(P.nrows());
  for (std::uint64_t i = 0; i < n_samples; ++i) {
    const Checkpoint cp(s);
    int escalation = 0;
    int attempts = 0;
    for (;;) {
      if constexpr (logging) buffer.clear();
      advance_to_output(s, P, target, params, escalation > 0, record);
      fault(s, i);
      Ax_dense.noalias() = P.A() * s.x;
      if (contains_cached(P, Ax_dense, tol)) {
        s.Ax = Ax_dense;
        s.Av.noalias() = P.A() * s.v;
        s.since_sync = 0;
        break;
      }
      if (++attempts > 64)
        throw std::runtime_error("sampler: trajectory keeps escaping the polytope");
      if (escalation == 0) ++stats.m_count;
      cp.restore(s);
      if (escalation < params.max_escalations) {
        ++escalation;
        continue;
      }
      ++stats.r_count;
      escalation = 0;
      refresh_velocity(s, P);
    }
    if constexpr (logging)
      for (const auto& e : buffer) observe(e.kind, e.t, e.x);
    sink(static_cast<const Vector&>(s.x));
  }
  return stats;
}

struct SampleRun {
  Matrix samples;  // one row per output
  NumericsStats stats;
};

inline SampleRun sample_n(BpsState& s, const HPolytope& P, const GaussianTarget& target,
                          const SamplerParams& params, std::uint64_t n_samples) {
  SampleRun run;
  run.samples.resize(static_cast<Index>(n_samples), P.dim());
  Index row = 0;
  run.stats = run_safeguarded(s, P, target, params, n_samples,
                              [&](const Vector& x) { run.samples.row(row++) = x.transpose(); });
  return run;
}

}  // namespace pdmpvol

#endif  // PDMPVOL_BPS_HPP
